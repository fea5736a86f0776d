//! Central finite differences in normalized coordinates `u_k = θ_k / actual_k`.

use crate::converter::{CircuitParams, NUM_PARAMS};
use crate::error::{Error, Result};
use crate::estimator::{loss_at, LossWeights};
use crate::scalar::Scalar;
use crate::simulator::MeasurementWindow;

pub const DEFAULT_FD_STEP: f64 = 1e-4;

pub type Matrix = Vec<Vec<f64>>;

/// Rejects steps that would vanish against the working precision `eps`
/// (`h·u_k < 1e3·eps·u_k`).
pub fn check_step(u: &[f64], h: f64, eps: f64) -> Result<()> {
    for (k, &uk) in u.iter().enumerate() {
        if !(uk > 0.0 && uk.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "probe coordinate {k} must be positive, got {uk}"
            )));
        }
        if !(h * uk >= 1e3 * eps * uk) {
            return Err(Error::StepUnderflow { index: k });
        }
    }
    Ok(())
}

fn shifted(u: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut v = u.to_vec();
    for &(k, d) in moves {
        v[k] += d;
    }
    v
}

/// Gradient of `f` at `u` with step `h`.
pub fn fd_gradient_with<F>(f: F, u: &[f64], h: f64, eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    check_step(u, h, eps)?;
    (0..u.len())
        .map(|k| Ok((f(&shifted(u, &[(k, h)]))? - f(&shifted(u, &[(k, -h)]))?) / (2.0 * h)))
        .collect()
}

/// Hessian of `f` at `u`, symmetrized as `(H + Hᵀ)/2`.
pub fn fd_hessian_with<F>(f: F, u: &[f64], h: f64, eps: f64) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    check_step(u, h, eps)?;
    let n = u.len();
    let f0 = f(u)?;
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        let fp = f(&shifted(u, &[(i, h)]))?;
        let fm = f(&shifted(u, &[(i, -h)]))?;
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let fpp = f(&shifted(u, &[(i, h), (j, h)]))?;
            let fpm = f(&shifted(u, &[(i, h), (j, -h)]))?;
            let fmp = f(&shifted(u, &[(i, -h), (j, h)]))?;
            let fmm = f(&shifted(u, &[(i, -h), (j, -h)]))?;
            hess[i][j] = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            hess[i][j] = hess[j][i];
        }
    }
    Ok(symmetrize(&hess))
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    let n = m.len();
    (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (m[i][j] + m[j][i])).collect())
        .collect()
}

/// Training loss as a function of normalized coordinates around `actual`.
pub fn normalized_loss<'a, T: Scalar>(
    window: &'a MeasurementWindow<T>,
    actual: &'a CircuitParams<f64>,
    w: &'a LossWeights<T>,
) -> impl Fn(&[f64]) -> Result<f64> + 'a {
    move |u: &[f64]| {
        let fractions: [f64; NUM_PARAMS] = std::array::from_fn(|k| u[k]);
        let p = CircuitParams::scaled(actual, fractions);
        loss_at(&p.cast::<T>(), window, w).map(|e| e.f64())
    }
}

/// `dE/du` at `point`, where `u = point / actual`.
pub fn fd_gradient<T: Scalar>(
    window: &MeasurementWindow<T>,
    point: &CircuitParams<f64>,
    actual: &CircuitParams<f64>,
    w: &LossWeights<T>,
    h: f64,
) -> Result<[f64; NUM_PARAMS]> {
    point.validate()?;
    let u = point.ratio_to(actual);
    let g = fd_gradient_with(normalized_loss(window, actual, w), &u, h, T::epsilon().f64())?;
    Ok(std::array::from_fn(|k| g[k]))
}

/// `d²E/du²` at `point`, where `u = point / actual`.
pub fn fd_hessian<T: Scalar>(
    window: &MeasurementWindow<T>,
    point: &CircuitParams<f64>,
    actual: &CircuitParams<f64>,
    w: &LossWeights<T>,
    h: f64,
) -> Result<Matrix> {
    point.validate()?;
    let u = point.ratio_to(actual);
    fd_hessian_with(normalized_loss(window, actual, w), &u, h, T::epsilon().f64())
}
