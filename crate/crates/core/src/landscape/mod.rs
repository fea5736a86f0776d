//! Loss-landscape analysis: parameter sweeps, finite-difference curvature,
//! conditioning, and identifiability classes.

pub mod classify;
pub mod eigen;
pub mod fd;
pub mod report;
pub mod sweep;

pub use classify::{classify, CaseMetrics, ClassifyThresholds, Identifiability, ParamMetrics};
pub use eigen::{condition_number, eig_symmetric, SymmetricEigen};
pub use fd::{fd_gradient, fd_hessian, DEFAULT_FD_STEP};
pub use report::{analyze_window, hessian_probe, HessianProbe, LandscapeConfig, LandscapeReport};
pub use sweep::{smoothness_metrics, sweep_loss, sweep_loss_2d, GridSpec, Smoothness, Sweep, Sweep2d, SweepSpec};
