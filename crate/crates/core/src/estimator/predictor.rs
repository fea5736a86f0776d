//! Forward-Euler prediction over the window, the downsampled MSE loss and its
//! exact gradient with respect to the seven physical parameters.

use serde::{Deserialize, Serialize};

use crate::converter::{matrix_partials, CircuitParams, StateMatrices, StateVector, SwitchedModel, NUM_PARAMS};
use crate::error::{Error, Result};
use crate::integrate::euler_step;
use crate::scalar::Scalar;
use crate::simulator::MeasurementWindow;

/// Magnitude beyond which a predicted state counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Predicts `M = s_trace.len()` states starting at `x0`:
/// `x(1) = x0`, `x(j) = x(j-1) + f(x(j-1), s(j-1))·dt`.
pub fn predict_trajectory<T: Scalar>(
    p: &CircuitParams<T>,
    x0: StateVector<T>,
    s_trace: &[crate::converter::SwitchState],
    dt: T,
) -> Result<Vec<StateVector<T>>> {
    let model = SwitchedModel::new(p)?;
    let limit = T::of(DIVERGENCE_LIMIT);
    let mut out = Vec::with_capacity(s_trace.len());
    if s_trace.is_empty() {
        return Ok(out);
    }
    let mut x = x0;
    out.push(x);
    for (j, &s) in s_trace[..s_trace.len() - 1].iter().enumerate() {
        x = euler_step(&model, x, s, dt);
        if !(x.max_abs() <= limit) {
            return Err(Error::Divergence {
                step: j + 1,
                limit: DIVERGENCE_LIMIT,
            });
        }
        out.push(x);
    }
    Ok(out)
}

/// How the two residual channels are weighted in the loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossWeighting {
    #[default]
    /// `w_i = 1/max|i_L|²`, `w_v = 1/max|v_o|²` over the measured window.
    Normalized,
    /// Plain MSE, both weights 1.
    Unit,
    Custom {
        w_i: f64,
        w_v: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights<T> {
    pub w_i: T,
    pub w_v: T,
}

impl<T: Scalar> LossWeights<T> {
    pub fn unit() -> Self {
        Self {
            w_i: T::one(),
            w_v: T::one(),
        }
    }

    pub fn resolve(weighting: LossWeighting, window: &MeasurementWindow<T>) -> Result<Self> {
        match weighting {
            LossWeighting::Unit => Ok(Self::unit()),
            LossWeighting::Custom { w_i, w_v } => Ok(Self {
                w_i: T::of(w_i),
                w_v: T::of(w_v),
            }),
            LossWeighting::Normalized => {
                let max_i = window.x_sa.iter().map(|x| x.i_l.abs()).fold(T::zero(), T::max);
                let max_v = window.x_sa.iter().map(|x| x.v_o.abs()).fold(T::zero(), T::max);
                if max_i <= T::zero() || max_v <= T::zero() {
                    return Err(Error::Malformed(
                        "cannot normalize loss: a channel is identically zero".into(),
                    ));
                }
                Ok(Self {
                    w_i: T::one() / (max_i * max_i),
                    w_v: T::one() / (max_v * max_v),
                })
            }
        }
    }
}

/// Downsampled weighted MSE:
/// `E = (1/N)·Σ_j [w_i·(i_LP − i_L)² + w_v·(v_oP − v_o)²]`, with prediction
/// index `j·(M/N)` aligned to sample `j`.
pub fn training_loss<T: Scalar>(
    pred: &[StateVector<T>],
    window: &MeasurementWindow<T>,
    w: &LossWeights<T>,
) -> Result<T> {
    let (m, n) = (pred.len(), window.x_sa.len());
    if n == 0 || m % n != 0 {
        return Err(Error::StrideMisalignment { m, n });
    }
    let stride = m / n;
    let mut sum = T::zero();
    for (j, x) in window.x_sa.iter().enumerate() {
        let r = pred[j * stride] - *x;
        sum += w.w_i * r.i_l * r.i_l + w.w_v * r.v_o * r.v_o;
    }
    Ok(sum / T::of(n as f64))
}

/// Predicts from the window's first sample and evaluates the loss.
pub fn loss_at<T: Scalar>(p: &CircuitParams<T>, window: &MeasurementWindow<T>, w: &LossWeights<T>) -> Result<T> {
    let pred = predict_trajectory(p, window.initial_measured(), &window.s_trace, window.dt_p())?;
    training_loss(&pred, window, w)
}

/// Loss and its gradient with respect to the seven physical parameters.
///
/// Tangents `S_k = ∂x/∂θ_k` are carried forward through the Euler recurrence
/// by its exact linearization
/// `S_k(j) = S_k(j−1) + dt·(A·S_k(j−1) + ∂A/∂θ_k·x(j−1) + ∂B/∂θ_k·u(j−1))`,
/// so the result is the derivative of the discrete loss, not of the ODE.
pub fn loss_and_gradient<T: Scalar>(
    p: &CircuitParams<T>,
    window: &MeasurementWindow<T>,
    w: &LossWeights<T>,
) -> Result<(T, [T; NUM_PARAMS])> {
    let (m, n) = (window.s_trace.len(), window.x_sa.len());
    if n == 0 || m % n != 0 {
        return Err(Error::StrideMisalignment { m, n });
    }
    let stride = m / n;
    let model = SwitchedModel::new(p)?;
    let partial_on = matrix_partials(p, crate::converter::SwitchState::On);
    let partial_off = matrix_partials(p, crate::converter::SwitchState::Off);
    let dt = window.dt_p();
    let limit = T::of(DIVERGENCE_LIMIT);

    let mut x = window.initial_measured();
    let mut tangents = [StateVector::<T>::zero(); NUM_PARAMS];
    let mut loss = T::zero();
    let mut grad = [T::zero(); NUM_PARAMS];
    let mut sample = 0;
    for j in 0..m {
        if j % stride == 0 {
            let r = x - window.x_sa[sample];
            let wr = StateVector::new(w.w_i * r.i_l, w.w_v * r.v_o);
            loss += wr.i_l * r.i_l + wr.v_o * r.v_o;
            for (g, s) in grad.iter_mut().zip(&tangents) {
                *g += wr.i_l * s.i_l + wr.v_o * s.v_o;
            }
            sample += 1;
        }
        if j + 1 == m {
            break;
        }
        let s = window.s_trace[j];
        let mats = model.matrices(s);
        let partials: &[StateMatrices<T>; NUM_PARAMS] = if s.is_on() { &partial_on } else { &partial_off };
        for (t, dm) in tangents.iter_mut().zip(partials) {
            let drive = mats.apply_a(*t) + dm.derivative(x, s);
            *t = *t + drive * dt;
        }
        x = euler_step(&model, x, s, dt);
        if !(x.max_abs() <= limit) {
            return Err(Error::Divergence {
                step: j + 1,
                limit: DIVERGENCE_LIMIT,
            });
        }
    }
    let inv_n = T::one() / T::of(n as f64);
    Ok((loss / T::of(n as f64), grad.map(|g| T::two() * g * inv_n)))
}
