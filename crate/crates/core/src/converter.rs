//! Switched state-space model of a non-synchronous buck converter.
//!
//! The state is `x = [i_L, v_o]` and the input vector is `u = [S, 1 - S]`
//! where `S` is the MOSFET gate state. Both switch positions share one pair of
//! matrices in which the on-resistance is weighted by `S`:
//!
//! ```text
//! A = [ -(S·R_dson + R_L)/L                          -1/L                        ]
//!     [ (R·L + C·R·R_C·(S·R_dson + R_L))/(L·C·(R+R_C))  -(C·R·R_C + L)/(L·C·(R+R_C)) ]
//!
//! B = [ V_i/L                      -V_F/L                      ]
//!     [ R_C·R·V_i/(L·(R+R_C))      -R_C·R·V_F/(L·(R+R_C))      ]
//! ```

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of estimated circuit parameters.
pub const NUM_PARAMS: usize = 7;

/// Index of an estimated parameter inside the seven-element parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    L,
    C,
    R,
    #[serde(rename = "R_C")]
    Rc,
    #[serde(rename = "R_L")]
    Rl,
    #[serde(rename = "R_dson")]
    Rdson,
    #[serde(rename = "V_F")]
    Vf,
}

impl Param {
    pub const ALL: [Param; NUM_PARAMS] = [
        Param::L,
        Param::C,
        Param::R,
        Param::Rc,
        Param::Rl,
        Param::Rdson,
        Param::Vf,
    ];

    /// The subset that the loss constrains strongly.
    pub const PRIMARY: [Param; 4] = [Param::L, Param::C, Param::R, Param::Rc];

    /// The subset with flat, oscillatory loss curves.
    pub const SECONDARY: [Param; 3] = [Param::Rl, Param::Rdson, Param::Vf];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Param> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::L => "L",
            Param::C => "C",
            Param::R => "R",
            Param::Rc => "R_C",
            Param::Rl => "R_L",
            Param::Rdson => "R_dson",
            Param::Vf => "V_F",
        }
    }

    /// Case-insensitive lookup by the names returned from [`Param::name`].
    pub fn parse(name: &str) -> Option<Param> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(name.trim()))
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Physical circuit parameters in SI units.
///
/// The first seven fields are the estimated set; `v_i` is the known source
/// voltage and is carried along for locality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams<T> {
    #[serde(rename = "L")]
    pub l: T,
    #[serde(rename = "C")]
    pub c: T,
    #[serde(rename = "R")]
    pub r: T,
    #[serde(rename = "R_C")]
    pub r_c: T,
    #[serde(rename = "R_L")]
    pub r_l: T,
    #[serde(rename = "R_dson")]
    pub r_dson: T,
    #[serde(rename = "V_F")]
    pub v_f: T,
    #[serde(rename = "V_i")]
    pub v_i: T,
}

impl<T: Scalar> CircuitParams<T> {
    /// Reference converter: 48 V to 24 V, 1.4 mH, 140 µF, full 200 W load
    /// (R = 2.88 Ω).
    pub fn reference() -> Self {
        Self {
            l: T::of(1.40e-3),
            c: T::of(140e-6),
            r: T::of(2.88),
            r_c: T::of(0.300),
            r_l: T::of(0.100),
            r_dson: T::of(0.040),
            v_f: T::of(1.0),
            v_i: T::of(48.0),
        }
    }

    pub fn with_load(mut self, r: T) -> Self {
        self.r = r;
        self
    }

    pub fn get(&self, p: Param) -> T {
        match p {
            Param::L => self.l,
            Param::C => self.c,
            Param::R => self.r,
            Param::Rc => self.r_c,
            Param::Rl => self.r_l,
            Param::Rdson => self.r_dson,
            Param::Vf => self.v_f,
        }
    }

    pub fn set(&mut self, p: Param, value: T) {
        match p {
            Param::L => self.l = value,
            Param::C => self.c = value,
            Param::R => self.r = value,
            Param::Rc => self.r_c = value,
            Param::Rl => self.r_l = value,
            Param::Rdson => self.r_dson = value,
            Param::Vf => self.v_f = value,
        }
    }

    /// The seven estimated values in [`Param::ALL`] order.
    pub fn to_array(&self) -> [T; NUM_PARAMS] {
        Param::ALL.map(|p| self.get(p))
    }

    /// Replaces the seven estimated values, keeping `v_i`.
    pub fn with_array(mut self, values: [T; NUM_PARAMS]) -> Self {
        for (p, v) in Param::ALL.into_iter().zip(values) {
            self.set(p, v);
        }
        self
    }

    /// Element-wise ratio `self / reference` over the estimated set.
    pub fn ratio_to(&self, reference: &Self) -> [T; NUM_PARAMS] {
        Param::ALL.map(|p| self.get(p) / reference.get(p))
    }

    /// Element-wise `fractions ⊙ reference`, `v_i` copied from `reference`.
    pub fn scaled(reference: &Self, fractions: [T; NUM_PARAMS]) -> Self {
        let mut out = *reference;
        for (p, f) in Param::ALL.into_iter().zip(fractions) {
            out.set(p, f * reference.get(p));
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> CircuitParams<U> {
        CircuitParams {
            l: U::of(self.l.f64()),
            c: U::of(self.c.f64()),
            r: U::of(self.r.f64()),
            r_c: U::of(self.r_c.f64()),
            r_l: U::of(self.r_l.f64()),
            r_dson: U::of(self.r_dson.f64()),
            v_f: U::of(self.v_f.f64()),
            v_i: U::of(self.v_i.f64()),
        }
    }

    fn all_with_vi(&self) -> [(&'static str, T); 8] {
        [
            ("L", self.l),
            ("C", self.c),
            ("R", self.r),
            ("R_C", self.r_c),
            ("R_L", self.r_l),
            ("R_dson", self.r_dson),
            ("V_F", self.v_f),
            ("V_i", self.v_i),
        ]
    }

    /// Every value finite and strictly positive.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.all_with_vi() {
            if !v.is_finite() || v <= T::zero() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and > 0")));
            }
        }
        Ok(())
    }

    /// Weaker check used by the model itself: storage elements, load and
    /// source strictly positive, parasitics only non-negative. This admits the
    /// lossless limit used for closed-form checks.
    pub fn validate_model(&self) -> Result<()> {
        for (name, v) in self.all_with_vi() {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} is not finite")));
            }
        }
        for (name, v) in [("L", self.l), ("C", self.c), ("R", self.r), ("V_i", self.v_i)] {
            if v <= T::zero() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")));
            }
        }
        for (name, v) in [
            ("R_C", self.r_c),
            ("R_L", self.r_l),
            ("R_dson", self.r_dson),
            ("V_F", self.v_f),
        ] {
            if v < T::zero() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")));
            }
        }
        if self.r + self.r_c <= T::zero() {
            return Err(Error::InvalidParameter("R + R_C must be > 0".into()));
        }
        Ok(())
    }
}

/// State vector `[i_L, v_o]` in amperes and volts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector<T> {
    pub i_l: T,
    pub v_o: T,
}

impl<T: Scalar> StateVector<T> {
    pub fn new(i_l: T, v_o: T) -> Self {
        Self { i_l, v_o }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.i_l.is_finite() && self.v_o.is_finite()
    }

    pub fn max_abs(&self) -> T {
        self.i_l.abs().max(self.v_o.abs())
    }

    pub fn cast<U: Scalar>(&self) -> StateVector<U> {
        StateVector::new(U::of(self.i_l.f64()), U::of(self.v_o.f64()))
    }
}

impl<T: Scalar> Add for StateVector<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.i_l + rhs.i_l, self.v_o + rhs.v_o)
    }
}

impl<T: Scalar> Sub for StateVector<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.i_l - rhs.i_l, self.v_o - rhs.v_o)
    }
}

impl<T: Scalar> Mul<T> for StateVector<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self::new(self.i_l * k, self.v_o * k)
    }
}

/// MOSFET gate state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwitchState {
    Off,
    On,
}

impl SwitchState {
    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(SwitchState::Off),
            1 => Some(SwitchState::On),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            SwitchState::Off => 0,
            SwitchState::On => 1,
        }
    }

    pub fn is_on(self) -> bool {
        self == SwitchState::On
    }

    /// The input vector `u = [S, 1 - S]`.
    pub fn input<T: Scalar>(self) -> [T; 2] {
        match self {
            SwitchState::On => [T::one(), T::zero()],
            SwitchState::Off => [T::zero(), T::one()],
        }
    }
}

/// Entries of `A` and `B` for one switch position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateMatrices<T> {
    pub a11: T,
    pub a12: T,
    pub a21: T,
    pub a22: T,
    pub b11: T,
    pub b12: T,
    pub b21: T,
    pub b22: T,
}

impl<T: Scalar> StateMatrices<T> {
    /// `A·x`.
    #[inline]
    pub fn apply_a(&self, x: StateVector<T>) -> StateVector<T> {
        StateVector::new(self.a11 * x.i_l + self.a12 * x.v_o, self.a21 * x.i_l + self.a22 * x.v_o)
    }

    /// `B·u` for the given gate state.
    #[inline]
    pub fn input_term(&self, s: SwitchState) -> StateVector<T> {
        match s {
            SwitchState::On => StateVector::new(self.b11, self.b21),
            SwitchState::Off => StateVector::new(self.b12, self.b22),
        }
    }

    /// `A·x + B·u`.
    #[inline]
    pub fn derivative(&self, x: StateVector<T>, s: SwitchState) -> StateVector<T> {
        let ax = self.apply_a(x);
        let bu = self.input_term(s);
        StateVector::new(ax.i_l + bu.i_l, ax.v_o + bu.v_o)
    }

    pub fn entries(&self) -> [T; 8] {
        [
            self.a11, self.a12, self.a21, self.a22, self.b11, self.b12, self.b21, self.b22,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|v| v.is_finite())
    }
}

/// Builds `A` and `B` for gate state `s`.
pub fn build_matrices<T: Scalar>(p: &CircuitParams<T>, s: SwitchState) -> Result<StateMatrices<T>> {
    p.validate_model()?;
    let m = matrices_unchecked(p, s);
    if !m.is_finite() {
        return Err(Error::InvalidParameter("state matrices are not finite".into()));
    }
    Ok(m)
}

pub(crate) fn matrices_unchecked<T: Scalar>(p: &CircuitParams<T>, s: SwitchState) -> StateMatrices<T> {
    let sw = T::of(s.bit() as f64);
    let g = sw * p.r_dson + p.r_l;
    let rsum = p.r + p.r_c;
    let lc_rsum = p.l * p.c * rsum;
    let l_rsum = p.l * rsum;
    StateMatrices {
        a11: -g / p.l,
        a12: -T::one() / p.l,
        a21: (p.r * p.l + p.c * p.r * p.r_c * g) / lc_rsum,
        a22: -(p.c * p.r * p.r_c + p.l) / lc_rsum,
        b11: p.v_i / p.l,
        b12: -p.v_f / p.l,
        b21: p.r_c * p.r * p.v_i / l_rsum,
        b22: -(p.r_c * p.r * p.v_f) / l_rsum,
    }
}

/// Analytic partial derivatives of every matrix entry with respect to each
/// estimated parameter, in [`Param::ALL`] order.
pub fn matrix_partials<T: Scalar>(p: &CircuitParams<T>, s: SwitchState) -> [StateMatrices<T>; NUM_PARAMS] {
    let m = matrices_unchecked(p, s);
    let sw = T::of(s.bit() as f64);
    let g = sw * p.r_dson + p.r_l;
    let rsum = p.r + p.r_c;
    let d = p.l * p.c * rsum;
    let l_rsum = p.l * rsum;
    let zero = StateMatrices::default();

    let d_l = StateMatrices {
        a11: g / (p.l * p.l),
        a12: T::one() / (p.l * p.l),
        a21: p.r / d - m.a21 / p.l,
        a22: -T::one() / d - m.a22 / p.l,
        b11: -m.b11 / p.l,
        b12: -m.b12 / p.l,
        b21: -m.b21 / p.l,
        b22: -m.b22 / p.l,
    };
    let d_c = StateMatrices {
        a21: p.r * p.r_c * g / d - m.a21 / p.c,
        a22: -(p.r * p.r_c) / d - m.a22 / p.c,
        ..zero
    };
    let d_r = StateMatrices {
        a21: (p.l + p.c * p.r_c * g) / d - m.a21 / rsum,
        a22: -(p.c * p.r_c) / d - m.a22 / rsum,
        b21: p.r_c * p.v_i / l_rsum - m.b21 / rsum,
        b22: -(p.r_c * p.v_f) / l_rsum - m.b22 / rsum,
        ..zero
    };
    let d_rc = StateMatrices {
        a21: p.c * p.r * g / d - m.a21 / rsum,
        a22: -(p.c * p.r) / d - m.a22 / rsum,
        b21: p.r * p.v_i / l_rsum - m.b21 / rsum,
        b22: -(p.r * p.v_f) / l_rsum - m.b22 / rsum,
        ..zero
    };
    let d_rl = StateMatrices {
        a11: -T::one() / p.l,
        a21: p.c * p.r * p.r_c / d,
        ..zero
    };
    let d_rdson = StateMatrices {
        a11: -sw / p.l,
        a21: sw * p.c * p.r * p.r_c / d,
        ..zero
    };
    let d_vf = StateMatrices {
        b12: -T::one() / p.l,
        b22: -(p.r_c * p.r) / l_rsum,
        ..zero
    };
    [d_l, d_c, d_r, d_rc, d_rl, d_rdson, d_vf]
}

/// Continuous-time state derivative `dx/dt = A·x + B·u`.
pub fn state_derivative<T: Scalar>(p: &CircuitParams<T>, s: SwitchState, x: StateVector<T>) -> Result<StateVector<T>> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter("state vector is not finite".into()));
    }
    let m = build_matrices(p, s)?;
    Ok(m.derivative(x, s))
}

/// Matrices for both gate states, built once and looked up per step.
#[derive(Debug, Clone, Copy)]
pub struct SwitchedModel<T> {
    pub off: StateMatrices<T>,
    pub on: StateMatrices<T>,
}

impl<T: Scalar> SwitchedModel<T> {
    pub fn new(p: &CircuitParams<T>) -> Result<Self> {
        Ok(Self {
            off: build_matrices(p, SwitchState::Off)?,
            on: build_matrices(p, SwitchState::On)?,
        })
    }

    #[inline]
    pub fn matrices(&self, s: SwitchState) -> &StateMatrices<T> {
        match s {
            SwitchState::On => &self.on,
            SwitchState::Off => &self.off,
        }
    }

    #[inline]
    pub fn derivative(&self, x: StateVector<T>, s: SwitchState) -> StateVector<T> {
        self.matrices(s).derivative(x, s)
    }
}
