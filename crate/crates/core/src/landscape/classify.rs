use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sweep::{smoothness_metrics, Sweep};
use crate::converter::Param;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identifiability {
    Reliable,
    ConditionDependent,
    Unreliable,
}

impl std::fmt::Display for Identifiability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Identifiability::Reliable => "reliable",
            Identifiability::ConditionDependent => "condition-dependent",
            Identifiability::Unreliable => "unreliable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifyThresholds {
    /// Reliable parameters peak within this factor of the strongest one.
    pub magnitude_ratio: f64,
    /// Reliable parameters have at most this many minima near 100 %.
    pub reliable_max_minima: usize,
    /// A sweep minimum farther than this from 100 % (in percent) in any case
    /// marks the parameter unreliable.
    pub unreliable_offset_pct: f64,
    /// So does at least this many minima near 100 % in every case.
    pub unreliable_min_minima: usize,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        Self {
            magnitude_ratio: 10.0,
            reliable_max_minima: 1,
            unreliable_offset_pct: 20.0,
            unreliable_min_minima: 3,
        }
    }
}

/// Per-parameter summary of one case's sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamMetrics {
    /// Peak loss over the wide sweep.
    pub magnitude: f64,
    /// Location of the wide-sweep minimum (percent of actual).
    pub argmin_pct: f64,
    pub min_loss: f64,
    /// Strict interior minima of the narrow sweep.
    pub local_minima: usize,
    /// Normalized total variation of the narrow sweep.
    pub total_variation: f64,
}

impl ParamMetrics {
    pub fn from_sweeps(wide: &Sweep, narrow: &Sweep) -> Result<Self> {
        let s = smoothness_metrics(&narrow.loss)?;
        Ok(Self {
            magnitude: wide.magnitude(),
            argmin_pct: wide.argmin_pct(),
            min_loss: wide.min_loss(),
            local_minima: s.local_minima,
            total_variation: s.total_variation,
        })
    }
}

/// Metrics for every parameter of one case.
pub type CaseMetrics = BTreeMap<Param, ParamMetrics>;

/// Assigns every parameter a class from the metrics of all analysed cases.
pub fn classify(cases: &[CaseMetrics], th: &ClassifyThresholds) -> Result<BTreeMap<Param, Identifiability>> {
    if cases.is_empty() {
        return Err(Error::MissingSweep("no cases to classify".into()));
    }
    for (k, case) in cases.iter().enumerate() {
        if let Some(p) = Param::ALL.iter().find(|p| !case.contains_key(p)) {
            return Err(Error::MissingSweep(format!("parameter {p} in case entry {k}")));
        }
    }
    let peaks: Vec<f64> = cases
        .iter()
        .map(|c| c.values().map(|m| m.magnitude).fold(0.0, f64::max))
        .collect();
    let mut out = BTreeMap::new();
    for p in Param::ALL {
        let reliable = cases.iter().zip(&peaks).all(|(c, &peak)| {
            let m = &c[&p];
            m.magnitude * th.magnitude_ratio >= peak && m.local_minima <= th.reliable_max_minima
        });
        let misplaced = cases
            .iter()
            .any(|c| (c[&p].argmin_pct - 100.0).abs() > th.unreliable_offset_pct);
        let rough = cases.iter().all(|c| c[&p].local_minima >= th.unreliable_min_minima);
        let class = if misplaced || rough {
            Identifiability::Unreliable
        } else if reliable {
            Identifiability::Reliable
        } else {
            Identifiability::ConditionDependent
        };
        out.insert(p, class);
    }
    Ok(out)
}
