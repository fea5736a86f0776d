//! File formats for measurement windows.
//!
//! A window `<stem>` is stored as three files side by side:
//! `<stem>.csv` (`t_s, i_L_A, v_o_V`), `<stem>_switch.csv` (`t_s, s`, one row
//! per prediction step) and `<stem>.json` (the [`SimConfig`] that produced it).

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::converter::{StateVector, SwitchState};
use crate::error::{Error, Result};
use crate::simulator::{MeasurementWindow, SimConfig};

#[derive(Debug, Serialize, Deserialize)]
struct SampleRow {
    t_s: f64,
    #[serde(rename = "i_L_A")]
    i_l: f64,
    #[serde(rename = "v_o_V")]
    v_o: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SwitchRow {
    t_s: f64,
    s: u8,
}

/// Paths of the three files making up a stored window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowFiles {
    pub samples: PathBuf,
    pub switch: PathBuf,
    pub config: PathBuf,
}

impl WindowFiles {
    pub fn in_dir(dir: &Path, stem: &str) -> Self {
        Self {
            samples: dir.join(format!("{stem}.csv")),
            switch: dir.join(format!("{stem}_switch.csv")),
            config: dir.join(format!("{stem}.json")),
        }
    }

    /// Sibling files of a `<stem>.csv` sample file.
    pub fn from_samples(path: &Path) -> Result<Self> {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Malformed(format!("bad window path {}", path.display())))?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Ok(Self {
            samples: path.to_path_buf(),
            ..Self::in_dir(dir, stem)
        })
    }
}

pub fn write_window(window: &MeasurementWindow<f64>, dir: &Path, stem: &str) -> Result<WindowFiles> {
    window.validate()?;
    std::fs::create_dir_all(dir)?;
    let files = WindowFiles::in_dir(dir, stem);

    let mut w = csv::Writer::from_path(&files.samples)?;
    for (t, x) in window.t_sa.iter().zip(&window.x_sa) {
        w.serialize(SampleRow {
            t_s: *t,
            i_l: x.i_l,
            v_o: x.v_o,
        })?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&files.switch)?;
    for (k, s) in window.s_trace.iter().enumerate() {
        w.serialize(SwitchRow {
            t_s: k as f64 / window.f_p,
            s: s.bit(),
        })?;
    }
    w.flush()?;

    serde_json::to_writer_pretty(File::create(&files.config)?, &window.meta)?;
    Ok(files)
}

/// Loads a window from its sample file and the two siblings.
///
/// The true initial state is not stored; `x0` is set to the first sample.
pub fn read_window(samples: &Path) -> Result<MeasurementWindow<f64>> {
    let files = WindowFiles::from_samples(samples)?;
    let meta: SimConfig = serde_json::from_reader(File::open(&files.config)?)?;
    let grid = meta.validate()?;

    let rows: Vec<SampleRow> = csv::Reader::from_path(&files.samples)?
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    let switch: Vec<SwitchRow> = csv::Reader::from_path(&files.switch)?
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no samples", files.samples.display())));
    }
    let s_trace = switch
        .iter()
        .map(|r| {
            SwitchState::from_bit(r.s)
                .ok_or_else(|| Error::Malformed(format!("switch state must be 0 or 1, got {}", r.s)))
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.len() != grid.n || s_trace.len() != grid.m {
        return Err(Error::Malformed(format!(
            "config expects {} samples and {} switch states, files hold {} and {}",
            grid.n,
            grid.m,
            rows.len(),
            s_trace.len()
        )));
    }
    let x_sa: Vec<StateVector<f64>> = rows.iter().map(|r| StateVector::new(r.i_l, r.v_o)).collect();
    let window = MeasurementWindow {
        t_sa: rows.iter().map(|r| r.t_s).collect(),
        x0: x_sa[0],
        x_sa,
        s_trace,
        f_sa: meta.f_sa,
        f_p: meta.f_p,
        n: grid.n,
        m: grid.m,
        meta,
    };
    window.validate()?;
    Ok(window)
}
