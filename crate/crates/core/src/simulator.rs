//! Ground-truth measurement windows: PWM-switched trajectories around a load
//! step, sampled, optionally corrupted with seeded Gaussian sensor noise and
//! quantized to an ADC grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::converter::{CircuitParams, StateVector, SwitchState, SwitchedModel};
use crate::error::{Error, Result};
use crate::integrate::{self, Solver};
use crate::scalar::Scalar;

/// Full-load output power of the reference converter.
pub const MAX_POWER: f64 = 200.0;
/// Nominal output voltage of the reference converter.
pub const NOMINAL_VO: f64 = 24.0;

/// Minimum number of switching cycles integrated before the steady state is
/// accepted.
pub const STEADY_STATE_MIN_CYCLES: usize = 200;
pub const STEADY_STATE_MAX_CYCLES: usize = 100_000;
pub const STEADY_STATE_TOL: f64 = 1e-9;

/// Window generation settings. Field names double as the JSON sidecar schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Switching frequency (Hz).
    pub f_sw: f64,
    /// Sampling frequency (Hz).
    pub f_sa: f64,
    /// Prediction frequency (Hz); the rate of the recorded switch trace.
    pub f_p: f64,
    /// Ground-truth integration frequency (Hz).
    pub f_truth: f64,
    pub duty: f64,
    /// Window duration (s).
    pub window_length: f64,
    /// Load before the step (Ω); sets the initial operating point.
    pub load_pre: f64,
    /// Load after the step (Ω).
    pub load_post: f64,
    /// Load-step instant relative to the window start (s).
    pub step_time: f64,
    pub adc_bits: u32,
    /// Current channel full scale (A).
    pub i_range: f64,
    /// Voltage channel full scale (V).
    pub v_range: f64,
    /// Noise standard deviation in LSBs of each channel.
    pub noise_multiple: f64,
    pub seed: u64,
    pub truth_solver: Solver,
    /// When false the samples bypass the ADC model entirely.
    #[serde(default = "default_true")]
    pub quantize: bool,
}

fn default_true() -> bool {
    true
}

/// Integer step counts derived from a validated [`SimConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    /// Samples per window.
    pub n: usize,
    /// Prediction steps per window.
    pub m: usize,
    /// Truth steps per prediction step.
    pub truth_per_pred: usize,
    /// Truth steps per switching period.
    pub truth_per_period: usize,
    /// Prediction steps per switching period.
    pub pred_per_period: usize,
}

impl Grid {
    pub fn stride(&self) -> usize {
        self.m / self.n
    }

    pub fn truth_steps(&self) -> usize {
        self.m * self.truth_per_pred
    }
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let r = num / den;
    let rounded = r.round();
    if !r.is_finite() || rounded < 1.0 || (r - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::MisalignedGrid(format!("{what} = {r} is not a positive integer")));
    }
    Ok(rounded as usize)
}

impl SimConfig {
    /// Load resistance drawing `fraction` of full power at nominal output voltage.
    pub fn load_for_fraction(fraction: f64) -> f64 {
        NOMINAL_VO * NOMINAL_VO / (fraction * MAX_POWER)
    }

    pub fn i_resolution(&self) -> f64 {
        self.i_range / 2f64.powi(self.adc_bits as i32)
    }

    pub fn v_resolution(&self) -> f64 {
        self.v_range / 2f64.powi(self.adc_bits as i32)
    }

    /// Noise standard deviations `(σ_i, σ_v)`.
    pub fn noise_sigma(&self) -> (f64, f64) {
        (
            self.noise_multiple * self.i_resolution(),
            self.noise_multiple * self.v_resolution(),
        )
    }

    pub fn validate(&self) -> Result<Grid> {
        let positive = [
            ("f_sw", self.f_sw),
            ("f_sa", self.f_sa),
            ("f_p", self.f_p),
            ("f_truth", self.f_truth),
            ("window_length", self.window_length),
            ("load_pre", self.load_pre),
            ("load_post", self.load_post),
            ("i_range", self.i_range),
            ("v_range", self.v_range),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be finite and > 0")));
            }
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(Error::InvalidConfig(format!("duty = {} must lie in (0, 1)", self.duty)));
        }
        if !(self.noise_multiple.is_finite() && self.noise_multiple >= 0.0) {
            return Err(Error::InvalidConfig("noise_multiple must be >= 0".into()));
        }
        if !(self.step_time.is_finite() && self.step_time >= 0.0) {
            return Err(Error::InvalidConfig("step_time must be >= 0".into()));
        }
        if self.adc_bits == 0 || self.adc_bits > 32 {
            return Err(Error::InvalidConfig(format!(
                "adc_bits = {} out of range 1..=32",
                self.adc_bits
            )));
        }
        if self.f_truth < self.f_sa || self.f_p < self.f_sa {
            return Err(Error::MisalignedGrid("f_truth and f_p must be >= f_sa".into()));
        }
        let n = integer_ratio(self.f_sa * self.window_length, 1.0, "f_sa * window_length")?;
        let m = integer_ratio(self.f_p * self.window_length, 1.0, "f_p * window_length")?;
        if m % n != 0 {
            return Err(Error::StrideMisalignment { m, n });
        }
        integer_ratio(self.f_truth, self.f_sa, "f_truth / f_sa")?;
        let truth_per_pred = integer_ratio(self.f_truth, self.f_p, "f_truth / f_p")?;
        let truth_per_period = integer_ratio(self.f_truth, self.f_sw, "f_truth / f_sw")?;
        let pred_per_period = integer_ratio(self.f_p, self.f_sw, "f_p / f_sw")?;
        Ok(Grid {
            n,
            m,
            truth_per_pred,
            truth_per_period,
            pred_per_period,
        })
    }

    /// Same window with Euler ground truth at the prediction rate and no ADC,
    /// so a predictor at the true parameters reproduces it exactly.
    pub fn exact(mut self) -> Self {
        self.truth_solver = Solver::Euler;
        self.f_truth = self.f_p;
        self.quantize = false;
        self.noise_multiple = 0.0;
        self
    }
}

/// Test case catalogue. Cases 1-3 step the load from 25 % to 100/75/50 % of
/// full power without noise; cases 4-6 repeat case 1 with noise of 5, 25 and
/// 50 LSB.
pub fn case_catalog(id: u32) -> Result<SimConfig> {
    let (post_fraction, noise) = match id {
        1 => (1.0, 0.0),
        2 => (0.75, 0.0),
        3 => (0.5, 0.0),
        4 => (1.0, 5.0),
        5 => (1.0, 25.0),
        6 => (1.0, 50.0),
        _ => return Err(Error::UnknownCase(id)),
    };
    Ok(SimConfig {
        f_sw: 20e3,
        f_sa: 40e3,
        f_p: 1e6,
        f_truth: 10e6,
        duty: 0.5,
        window_length: 1e-3,
        load_pre: SimConfig::load_for_fraction(0.25),
        load_post: SimConfig::load_for_fraction(post_fraction),
        step_time: 0.0,
        adc_bits: 12,
        i_range: 10.0,
        v_range: 30.0,
        noise_multiple: noise,
        seed: 0,
        truth_solver: Solver::Rk4,
        quantize: true,
    })
}

/// Gate state of a trailing-edge PWM at time `t`: on iff `frac(t·f_sw) < duty`.
///
/// The phase is snapped to the nearest nano-cycle first so that grid times such
/// as `25e-6 s` at 20 kHz land exactly on the duty boundary.
pub fn pwm_switch_state(t: f64, f_sw: f64, duty: f64) -> SwitchState {
    let snap = |v: f64| (v * 1e9).round() / 1e9;
    let phase = snap(t * f_sw);
    if snap(phase - phase.floor()) < duty {
        SwitchState::On
    } else {
        SwitchState::Off
    }
}

/// Gate state at step `k` of a grid with `per_period` steps per switching
/// period. Agrees with [`pwm_switch_state`] at `t = k / (per_period·f_sw)`.
#[inline]
pub fn switch_state_at_step(k: usize, per_period: usize, duty: f64) -> SwitchState {
    if ((k % per_period) as f64) / (per_period as f64) < duty {
        SwitchState::On
    } else {
        SwitchState::Off
    }
}

/// Rounds to the nearest multiple of `resolution`, halves away from zero.
#[inline]
pub fn quantize<T: Scalar>(x: T, resolution: T) -> T {
    (x / resolution).round() * resolution
}

/// Seeded standard-normal stream for sensor noise.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// One draw from `N(0, sigma²)`.
    pub fn sample(&mut self, sigma: f64) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        sigma * z
    }
}

/// Periodic steady state at the start of a switching cycle.
///
/// One switching period is an affine map `x ↦ Φ·x + c`. The map is obtained by
/// integrating one period from the origin and from the two unit states, then
/// iterated from `[V_i·d/R, V_i·d]` (at least [`STEADY_STATE_MIN_CYCLES`]
/// times) until the cycle-to-cycle change falls below
/// [`STEADY_STATE_TOL`] relative.
pub fn steady_state_init<T: Scalar>(
    p: &CircuitParams<T>,
    duty: f64,
    steps_per_period: usize,
    dt: T,
    solver: Solver,
) -> Result<StateVector<T>> {
    let model = SwitchedModel::new(p)?;
    if steps_per_period == 0 {
        return Err(Error::InvalidConfig("steps_per_period must be > 0".into()));
    }
    let one_cycle = |mut x: StateVector<T>| {
        for k in 0..steps_per_period {
            let s = switch_state_at_step(k, steps_per_period, duty);
            x = integrate::step(solver, &model, x, s, dt);
        }
        x
    };
    let c = one_cycle(StateVector::zero());
    let col_i = one_cycle(StateVector::new(T::one(), T::zero())) - c;
    let col_v = one_cycle(StateVector::new(T::zero(), T::one())) - c;
    let map = |x: StateVector<T>| col_i * x.i_l + col_v * x.v_o + c;

    let d = T::of(duty);
    let mut x = StateVector::new(p.v_i * d / p.r, p.v_i * d);
    let tol = T::of(STEADY_STATE_TOL).max(T::epsilon() * T::of(16.0));
    for cycle in 1..=STEADY_STATE_MAX_CYCLES {
        let next = map(x);
        if !next.is_finite() {
            return Err(Error::NoConvergence { cycles: cycle });
        }
        let change = (next - x).max_abs();
        x = next;
        if cycle >= STEADY_STATE_MIN_CYCLES && change <= tol * x.max_abs().max(T::epsilon()) {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        cycles: STEADY_STATE_MAX_CYCLES,
    })
}

/// Noise-free, unquantized trajectory on the prediction grid.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    /// State at every prediction step (length M); element 0 is the initial state.
    pub states: Vec<StateVector<T>>,
    /// Gate state applied over each prediction step (length M).
    pub s_trace: Vec<SwitchState>,
    pub grid: Grid,
}

/// Integrates the ground truth: steady state at `load_pre`, load switched to
/// `load_post` at `step_time`, PWM at `duty`, solver and rate from `cfg`.
/// The load field of `p` is ignored.
pub fn simulate_truth<T: Scalar>(cfg: &SimConfig, p: &CircuitParams<T>) -> Result<Trajectory<T>> {
    let grid = cfg.validate()?;
    let pre = p.with_load(T::of(cfg.load_pre));
    let post = p.with_load(T::of(cfg.load_post));
    pre.validate_model()?;
    post.validate_model()?;
    let dt = T::of(1.0 / cfg.f_truth);
    let x0 = steady_state_init(&pre, cfg.duty, grid.truth_per_period, dt, cfg.truth_solver)?;

    let model_pre = SwitchedModel::new(&pre)?;
    let model_post = SwitchedModel::new(&post)?;
    // Truth steps with the pre-step load.
    let step_index = (cfg.step_time * cfg.f_truth).round() as usize;

    let mut states = Vec::with_capacity(grid.m);
    let mut s_trace = Vec::with_capacity(grid.m);
    let mut x = x0;
    for k in 0..grid.truth_steps() {
        if k % grid.truth_per_pred == 0 {
            states.push(x);
            s_trace.push(switch_state_at_step(
                k / grid.truth_per_pred,
                grid.pred_per_period,
                cfg.duty,
            ));
        }
        let s = switch_state_at_step(k, grid.truth_per_period, cfg.duty);
        let model = if k < step_index { &model_pre } else { &model_post };
        x = integrate::step(cfg.truth_solver, model, x, s, dt);
        if !x.is_finite() {
            return Err(Error::Divergence {
                step: k,
                limit: f64::INFINITY,
            });
        }
    }
    Ok(Trajectory { states, s_trace, grid })
}

/// Sampled, digitized observation of one load-step transient.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementWindow<T> {
    /// Sample instants relative to the window start (s), length N.
    pub t_sa: Vec<f64>,
    /// Measured states, length N.
    pub x_sa: Vec<StateVector<T>>,
    /// Gate state over each prediction step, length M.
    pub s_trace: Vec<SwitchState>,
    /// True initial state (equal to the first sample when unknown).
    pub x0: StateVector<T>,
    pub f_sa: f64,
    pub f_p: f64,
    pub n: usize,
    pub m: usize,
    pub meta: SimConfig,
}

impl<T: Scalar> MeasurementWindow<T> {
    pub fn stride(&self) -> usize {
        self.m / self.n
    }

    pub fn dt_p(&self) -> T {
        T::of(1.0 / self.f_p)
    }

    /// First measured sample; the starting point of every prediction.
    pub fn initial_measured(&self) -> StateVector<T> {
        self.x_sa[0]
    }

    /// Checks the length and alignment invariants.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.x_sa.len() != self.n || self.t_sa.len() != self.n {
            return Err(Error::Malformed(format!(
                "expected {} samples, found {} states and {} times",
                self.n,
                self.x_sa.len(),
                self.t_sa.len()
            )));
        }
        if self.s_trace.len() != self.m {
            return Err(Error::Malformed(format!(
                "expected {} switch states, found {}",
                self.m,
                self.s_trace.len()
            )));
        }
        if !self.m.is_multiple_of(self.n) {
            return Err(Error::StrideMisalignment { m: self.m, n: self.n });
        }
        if !self.x_sa.iter().all(|x| x.is_finite()) {
            return Err(Error::Malformed("non-finite sample".into()));
        }
        let dt = 1.0 / self.f_sa;
        for w in self.t_sa.windows(2) {
            if !(w[1] > w[0]) || ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
                return Err(Error::Malformed("sample times must be uniform at 1/f_sa".into()));
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> MeasurementWindow<U> {
        MeasurementWindow {
            t_sa: self.t_sa.clone(),
            x_sa: self.x_sa.iter().map(|x| x.cast()).collect(),
            s_trace: self.s_trace.clone(),
            x0: self.x0.cast(),
            f_sa: self.f_sa,
            f_p: self.f_p,
            n: self.n,
            m: self.m,
            meta: self.meta.clone(),
        }
    }
}

/// Generates a measurement window.
///
/// Ground truth from [`simulate_truth`] is sampled at `f_sa`; per sample the
/// current then the voltage channel receive Gaussian noise with
/// `σ = noise_multiple · resolution` (drawn from a generator seeded with
/// `cfg.seed`) and are then quantized, unless `cfg.quantize` is false.
pub fn simulate_window<T: Scalar>(cfg: &SimConfig, p: &CircuitParams<T>) -> Result<MeasurementWindow<T>> {
    let truth = simulate_truth(cfg, p)?;
    let grid = truth.grid;
    let stride = grid.stride();
    let (sigma_i, sigma_v) = cfg.noise_sigma();
    let res_i = T::of(cfg.i_resolution());
    let res_v = T::of(cfg.v_resolution());
    let mut noise = NoiseSource::new(cfg.seed);

    let mut t_sa = Vec::with_capacity(grid.n);
    let mut x_sa = Vec::with_capacity(grid.n);
    for j in 0..grid.n {
        let mut x = truth.states[j * stride];
        if cfg.noise_multiple > 0.0 {
            x.i_l += T::of(noise.sample(sigma_i));
            x.v_o += T::of(noise.sample(sigma_v));
        }
        if cfg.quantize {
            x = StateVector::new(quantize(x.i_l, res_i), quantize(x.v_o, res_v));
        }
        t_sa.push(j as f64 / cfg.f_sa);
        x_sa.push(x);
    }
    Ok(MeasurementWindow {
        t_sa,
        x_sa,
        s_trace: truth.s_trace,
        x0: truth.states[0],
        f_sa: cfg.f_sa,
        f_p: cfg.f_p,
        n: grid.n,
        m: grid.m,
        meta: cfg.clone(),
    })
}
