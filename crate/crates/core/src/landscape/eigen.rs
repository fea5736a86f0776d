//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen<T> {
    /// Sorted descending.
    pub values: Vec<T>,
    /// `vectors[i][k]` is component `i` of the eigenvector for `values[k]`.
    pub vectors: Vec<Vec<T>>,
}

fn frobenius<T: Scalar>(m: &[Vec<T>]) -> T {
    m.iter().flatten().map(|&x| x * x).sum::<T>().sqrt()
}

fn off_diagonal<T: Scalar>(m: &[Vec<T>]) -> T {
    let mut s = T::zero();
    for (i, row) in m.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if i != j {
                s += x * x;
            }
        }
    }
    s.sqrt()
}

/// Largest `|m_ij − m_ji|` relative to the largest entry.
pub fn asymmetry<T: Scalar>(m: &[Vec<T>]) -> T {
    let scale = m.iter().flatten().fold(T::zero(), |a, &x| a.max(x.abs()));
    let mut worst = T::zero();
    for i in 0..m.len() {
        for j in 0..i {
            worst = worst.max((m[i][j] - m[j][i]).abs());
        }
    }
    if scale > T::zero() {
        worst / scale
    } else {
        worst
    }
}

/// Eigenvalues and orthonormal eigenvectors of a symmetric matrix. Rotations
/// continue until the off-diagonal norm drops below `1e-12·‖H‖_F`.
pub fn eig_symmetric<T: Scalar>(h: &[Vec<T>]) -> Result<SymmetricEigen<T>> {
    let n = h.len();
    if h.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidConfig("matrix must be square".into()));
    }
    let asym = asymmetry(h);
    if asym > T::of(1e-8) {
        return Err(Error::NonSymmetric(asym.f64()));
    }
    let mut a: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| T::half() * (h[i][j] + h[j][i])).collect())
        .collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let target = T::of(1e-12) * frobenius(&a);

    for _ in 0..MAX_SWEEPS {
        if off_diagonal(&a) <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::two() * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap_or(std::cmp::Ordering::Equal));
    Ok(SymmetricEigen {
        values: order.iter().map(|&k| a[k][k]).collect(),
        vectors: v.iter().map(|row| order.iter().map(|&k| row[k]).collect()).collect(),
    })
}

impl<T: Scalar> SymmetricEigen<T> {
    /// `V·Λ·Vᵀ`.
    pub fn reconstruct(&self) -> Vec<Vec<T>> {
        let n = self.values.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| self.vectors[i][k] * self.values[k] * self.vectors[j][k])
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

/// `max|λ| / min|λ|` over eigenvalues with `|λ| > 1e-14·max|λ|`. Infinite when
/// only one eigenvalue survives the filter.
pub fn condition_number(eigenvalues: &[f64]) -> Result<f64> {
    let max = eigenvalues.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    if !(max > 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    let kept: Vec<f64> = eigenvalues
        .iter()
        .map(|l| l.abs())
        .filter(|&l| l > 1e-14 * max)
        .collect();
    if kept.len() == 1 && eigenvalues.len() > 1 {
        return Ok(f64::INFINITY);
    }
    let min = kept.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max / min)
}
