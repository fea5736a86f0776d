use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::converter::{CircuitParams, Param};
use crate::error::{Error, Result};
use crate::estimator::{loss_at, LossWeights};
use crate::scalar::Scalar;
use crate::simulator::MeasurementWindow;

/// Loss recorded for grid points whose prediction diverged.
pub const SWEEP_SENTINEL: f64 = 1e9;

/// A uniform grid in percent of the base value, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo_pct: f64,
    pub hi_pct: f64,
    pub points: usize,
}

impl GridSpec {
    pub const fn new(lo_pct: f64, hi_pct: f64, points: usize) -> Self {
        Self { lo_pct, hi_pct, points }
    }

    /// Default magnitude sweep.
    pub const WIDE: GridSpec = GridSpec::new(50.0, 150.0, 201);
    /// Default sweep for counting oscillations near the actual value.
    pub const NARROW: GridSpec = GridSpec::new(90.0, 110.0, 401);

    pub fn validate(&self) -> Result<()> {
        if !(self.lo_pct > 0.0 && self.lo_pct.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "grid lower bound must be > 0, got {}",
                self.lo_pct
            )));
        }
        if !(self.hi_pct > self.lo_pct && self.hi_pct.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "grid upper bound {} must exceed {}",
                self.hi_pct, self.lo_pct
            )));
        }
        if self.points < 3 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 3 points, got {}",
                self.points
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let span = self.hi_pct - self.lo_pct;
        let last = (self.points - 1) as f64;
        (0..self.points).map(|k| self.lo_pct + span * k as f64 / last).collect()
    }
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    /// Parses `LO:HI:N`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidConfig(format!("grid must look like LO:HI:N, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let g = GridSpec {
            lo_pct: parts[0].trim().parse().map_err(|_| bad())?,
            hi_pct: parts[1].trim().parse().map_err(|_| bad())?,
            points: parts[2].trim().parse().map_err(|_| bad())?,
        };
        g.validate()?;
        Ok(g)
    }
}

/// One-dimensional sweep of a single parameter with the others fixed at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: Param,
    pub grid: GridSpec,
    pub base: CircuitParams<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: Param,
    pub grid_pct: Vec<f64>,
    pub loss: Vec<f64>,
    /// Grid points whose prediction diverged (loss holds the sentinel).
    pub diverged: Vec<bool>,
}

impl Sweep {
    /// Peak loss over the grid, ignoring diverged points.
    pub fn magnitude(&self) -> f64 {
        self.finite_losses().fold(0.0, f64::max)
    }

    /// Grid value (percent) of the smallest loss.
    pub fn argmin_pct(&self) -> f64 {
        let mut best = (f64::INFINITY, f64::NAN);
        for (&g, &e) in self.grid_pct.iter().zip(&self.loss) {
            if e < best.0 {
                best = (e, g);
            }
        }
        best.1
    }

    pub fn min_loss(&self) -> f64 {
        self.finite_losses().fold(f64::INFINITY, f64::min)
    }

    fn finite_losses(&self) -> impl Iterator<Item = f64> + '_ {
        self.loss
            .iter()
            .zip(&self.diverged)
            .filter(|(_, &d)| !d)
            .map(|(&e, _)| e)
    }
}

fn eval<T: Scalar>(window: &MeasurementWindow<T>, w: &LossWeights<T>, p: &CircuitParams<f64>) -> Result<Option<f64>> {
    match loss_at(&p.cast::<T>(), window, w) {
        Ok(e) if e.is_finite() => Ok(Some(e.f64())),
        Ok(_) | Err(Error::Divergence { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Training loss at every grid point, evaluated in parallel.
pub fn sweep_loss<T: Scalar>(window: &MeasurementWindow<T>, spec: &SweepSpec, w: &LossWeights<T>) -> Result<Sweep> {
    spec.grid.validate()?;
    spec.base.validate()?;
    let grid_pct = spec.grid.values();
    let base = spec.base.get(spec.param);
    let results: Vec<Option<f64>> = grid_pct
        .par_iter()
        .map(|&g| {
            let mut p = spec.base;
            p.set(spec.param, base * (g / 100.0));
            eval(window, w, &p)
        })
        .collect::<Result<_>>()?;
    Ok(Sweep {
        param: spec.param,
        grid_pct,
        diverged: results.iter().map(Option::is_none).collect(),
        loss: results.into_iter().map(|e| e.unwrap_or(SWEEP_SENTINEL)).collect(),
    })
}

/// Two-parameter sweep on the product grid. `loss[i][j]` belongs to
/// `(x.grid[i], y.grid[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep2d {
    pub params: [Param; 2],
    pub grid_pct: [Vec<f64>; 2],
    pub loss: Vec<Vec<f64>>,
}

pub fn sweep_loss_2d<T: Scalar>(
    window: &MeasurementWindow<T>,
    params: [Param; 2],
    grids: [GridSpec; 2],
    base: &CircuitParams<f64>,
    w: &LossWeights<T>,
) -> Result<Sweep2d> {
    if params[0] == params[1] {
        return Err(Error::InvalidConfig("2D sweep needs two distinct parameters".into()));
    }
    grids[0].validate()?;
    grids[1].validate()?;
    base.validate()?;
    let gx = grids[0].values();
    let gy = grids[1].values();
    let loss = gx
        .par_iter()
        .map(|&a| {
            gy.iter()
                .map(|&b| {
                    let mut p = *base;
                    p.set(params[0], base.get(params[0]) * (a / 100.0));
                    p.set(params[1], base.get(params[1]) * (b / 100.0));
                    Ok(eval(window, w, &p)?.unwrap_or(SWEEP_SENTINEL))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Sweep2d {
        params,
        grid_pct: [gx, gy],
        loss,
    })
}

/// Smoothness of a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothness {
    /// `Σ|E(k+1) − E(k)|` divided by the peak of `E`.
    pub total_variation: f64,
    /// Interior points strictly below both neighbours.
    pub local_minima: usize,
}

pub fn smoothness_metrics(values: &[f64]) -> Result<Smoothness> {
    if values.len() < 3 {
        return Err(Error::EmptyInput(format!(
            "smoothness needs at least 3 points, got {}",
            values.len()
        )));
    }
    let peak = values.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let tv: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let local_minima = values.windows(3).filter(|w| w[1] < w[0] && w[1] < w[2]).count();
    Ok(Smoothness {
        total_variation: if peak > 0.0 { tv / peak } else { 0.0 },
        local_minima,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values_and_parse() {
        let g: GridSpec = "90:110:5".parse().unwrap();
        assert_eq!(g.values(), vec![90.0, 95.0, 100.0, 105.0, 110.0]);
        assert_eq!(GridSpec::WIDE.values()[100], 100.0);
        assert!("0:10:5".parse::<GridSpec>().is_err());
        assert!("10:20:2".parse::<GridSpec>().is_err());
        assert!("10:20".parse::<GridSpec>().is_err());
    }

    #[test]
    fn smoothness_examples() {
        let s = smoothness_metrics(&[3.0, 1.0, 2.0, 0.0, 4.0]).unwrap();
        assert_eq!(s.local_minima, 2);
        assert!((s.total_variation - 2.25).abs() < 1e-15);
        assert_eq!(smoothness_metrics(&[1.0, 2.0, 3.0, 4.0]).unwrap().local_minima, 0);
        assert_eq!(smoothness_metrics(&[3.0, 1.0, 0.0, 1.0, 3.0]).unwrap().local_minima, 1);
        assert!(smoothness_metrics(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn plateau_is_not_a_strict_minimum() {
        assert_eq!(smoothness_metrics(&[2.0, 1.0, 1.0, 2.0]).unwrap().local_minima, 0);
    }
}
