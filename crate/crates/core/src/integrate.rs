//! Fixed-step integrators for the switched linear model.
//!
//! The gate state is held constant over a step; callers align their grids so
//! that switching instants fall on step boundaries.

use serde::{Deserialize, Serialize};

use crate::converter::{StateVector, SwitchState, SwitchedModel};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Euler,
    Rk4,
}

/// `x + f(x)·dt`. The predictor and the Euler ground truth both go through
/// this function so that their trajectories agree bit for bit.
#[inline]
pub fn euler_step<T: Scalar>(model: &SwitchedModel<T>, x: StateVector<T>, s: SwitchState, dt: T) -> StateVector<T> {
    let dx = model.derivative(x, s);
    StateVector::new(x.i_l + dx.i_l * dt, x.v_o + dx.v_o * dt)
}

/// Classical fourth-order Runge-Kutta step.
#[inline]
pub fn rk4_step<T: Scalar>(model: &SwitchedModel<T>, x: StateVector<T>, s: SwitchState, dt: T) -> StateVector<T> {
    let half = dt * T::half();
    let k1 = model.derivative(x, s);
    let k2 = model.derivative(x + k1 * half, s);
    let k3 = model.derivative(x + k2 * half, s);
    let k4 = model.derivative(x + k3 * dt, s);
    let sixth = dt / T::of(6.0);
    x + (k1 + k2 * T::two() + k3 * T::two() + k4) * sixth
}

#[inline]
pub fn step<T: Scalar>(
    solver: Solver,
    model: &SwitchedModel<T>,
    x: StateVector<T>,
    s: SwitchState,
    dt: T,
) -> StateVector<T> {
    match solver {
        Solver::Euler => euler_step(model, x, s, dt),
        Solver::Rk4 => rk4_step(model, x, s, dt),
    }
}
