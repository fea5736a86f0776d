use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::classify::{ClassifyThresholds, Identifiability, ParamMetrics};
use super::eigen::{asymmetry, condition_number, eig_symmetric};
use super::fd::{fd_gradient, fd_hessian, Matrix, DEFAULT_FD_STEP};
use super::sweep::{sweep_loss, GridSpec, Sweep, SweepSpec};
use crate::converter::{CircuitParams, Param, NUM_PARAMS};
use crate::error::{Error, Result};
use crate::estimator::{LossWeighting, LossWeights};
use crate::scalar::Scalar;
use crate::simulator::MeasurementWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandscapeConfig {
    /// Grid for magnitude and location of the minimum.
    pub wide: GridSpec,
    /// Grid for counting oscillations around 100 %.
    pub narrow: GridSpec,
    pub params: Vec<Param>,
    pub fd_step: f64,
    /// Parameters displaced one at a time to form the Hessian probe set.
    pub probe_params: Vec<Param>,
    /// Displacement of each probe, in percent.
    pub probe_offset_pct: f64,
    pub loss_weights: LossWeighting,
    pub thresholds: ClassifyThresholds,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            wide: GridSpec::WIDE,
            narrow: GridSpec::NARROW,
            params: Param::ALL.to_vec(),
            fd_step: DEFAULT_FD_STEP,
            probe_params: Param::PRIMARY.to_vec(),
            probe_offset_pct: 20.0,
            loss_weights: LossWeighting::Normalized,
            thresholds: ClassifyThresholds::default(),
        }
    }
}

impl LandscapeConfig {
    /// The actual point followed by `±offset` displacements of each probe parameter.
    pub fn probe_points(&self, actual: &CircuitParams<f64>) -> Vec<CircuitParams<f64>> {
        let mut points = vec![*actual];
        for &p in &self.probe_params {
            for sign in [-1.0, 1.0] {
                let mut q = *actual;
                q.set(p, actual.get(p) * (1.0 + sign * self.probe_offset_pct / 100.0));
                points.push(q);
            }
        }
        points
    }
}

/// Curvature at one point, in normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianProbe {
    pub point_pct: [f64; NUM_PARAMS],
    pub gradient: [f64; NUM_PARAMS],
    pub hessian: Matrix,
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// `null` in JSON when the spectrum is numerically rank one.
    #[serde(with = "finite_or_null")]
    pub condition_number: f64,
}

impl HessianProbe {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |a, l| a.max(l.abs()))
    }

    /// True when some eigenvalue is below `−rel·max|λ|`.
    pub fn is_indefinite(&self, rel: f64) -> bool {
        self.min_eigenvalue() < -rel * self.max_abs_eigenvalue()
    }
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

pub fn hessian_probe<T: Scalar>(
    window: &MeasurementWindow<T>,
    point: &CircuitParams<f64>,
    actual: &CircuitParams<f64>,
    w: &LossWeights<T>,
    h: f64,
) -> Result<HessianProbe> {
    let gradient = fd_gradient(window, point, actual, w, h)?;
    let hessian = fd_hessian(window, point, actual, w, h)?;
    let eig = eig_symmetric(&hessian)?;
    Ok(HessianProbe {
        point_pct: point.ratio_to(actual).map(|u| u * 100.0),
        gradient,
        condition_number: condition_number(&eig.values)?,
        eigenvalues: eig.values,
        hessian,
    })
}

/// Landscape analysis of one window around its actual parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeReport {
    pub case: Option<u32>,
    pub actual: CircuitParams<f64>,
    pub sweeps: Vec<Sweep>,
    pub narrow_sweeps: Vec<Sweep>,
    pub metrics: BTreeMap<Param, ParamMetrics>,
    /// Probe set; the first entry is the actual point.
    pub probes: Vec<HessianProbe>,
    /// Filled by [`classify`](super::classify) once all cases are available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<BTreeMap<Param, Identifiability>>,
}

impl LandscapeReport {
    pub fn sweep(&self, p: Param) -> Result<&Sweep> {
        self.sweeps
            .iter()
            .find(|s| s.param == p)
            .ok_or_else(|| Error::MissingSweep(p.to_string()))
    }

    pub fn narrow_sweep(&self, p: Param) -> Result<&Sweep> {
        self.narrow_sweeps
            .iter()
            .find(|s| s.param == p)
            .ok_or_else(|| Error::MissingSweep(p.to_string()))
    }

    pub fn at_actual(&self) -> Option<&HessianProbe> {
        self.probes.first()
    }
}

/// Sweeps every configured parameter and, when `with_probes` is set,
/// evaluates the Hessian at each probe point.
pub fn analyze_window<T: Scalar>(
    window: &MeasurementWindow<T>,
    actual: &CircuitParams<f64>,
    cfg: &LandscapeConfig,
    with_probes: bool,
) -> Result<LandscapeReport> {
    actual.validate()?;
    let w = LossWeights::resolve(cfg.loss_weights, window)?;
    let mut sweeps = Vec::new();
    let mut narrow_sweeps = Vec::new();
    let mut metrics = BTreeMap::new();
    for &p in &cfg.params {
        let wide = sweep_loss(
            window,
            &SweepSpec {
                param: p,
                grid: cfg.wide,
                base: *actual,
            },
            &w,
        )?;
        let narrow = sweep_loss(
            window,
            &SweepSpec {
                param: p,
                grid: cfg.narrow,
                base: *actual,
            },
            &w,
        )?;
        metrics.insert(p, ParamMetrics::from_sweeps(&wide, &narrow)?);
        sweeps.push(wide);
        narrow_sweeps.push(narrow);
    }
    let probes = if with_probes {
        cfg.probe_points(actual)
            .iter()
            .map(|q| hessian_probe(window, q, actual, &w, cfg.fd_step))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    for probe in &probes {
        debug_assert!(asymmetry(&probe.hessian) <= 1e-8);
    }
    Ok(LandscapeReport {
        case: None,
        actual: *actual,
        sweeps,
        narrow_sweeps,
        metrics,
        probes,
        classes: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_set_layout() {
        let actual = CircuitParams::<f64>::reference();
        let pts = LandscapeConfig::default().probe_points(&actual);
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], actual);
        assert!((pts[1].l / actual.l - 0.8).abs() < 1e-12);
        assert!((pts[2].l / actual.l - 1.2).abs() < 1e-12);
        assert_eq!(pts[8].r_l, actual.r_l);
    }

    #[test]
    fn infinite_condition_serializes_as_null() {
        let probe = HessianProbe {
            point_pct: [100.0; 7],
            gradient: [0.0; 7],
            hessian: vec![vec![0.0; 7]; 7],
            eigenvalues: vec![1.0, 0.0],
            condition_number: f64::INFINITY,
        };
        let json = serde_json::to_string(&probe).unwrap();
        assert!(json.contains("\"condition_number\":null"));
        let back: HessianProbe = serde_json::from_str(&json).unwrap();
        assert_eq!(back.condition_number, f64::INFINITY);
    }
}
