//! Identification of buck-converter circuit parameters with a physics-informed
//! network, and analysis of which parameters the training loss can resolve.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision instantiation.

pub mod converter;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod integrate;
pub mod io;
pub mod landscape;
pub mod optim;
pub mod scalar;
pub mod simulator;

pub use converter::{build_matrices, state_derivative, CircuitParams, Param, StateMatrices, StateVector, SwitchState};
pub use error::{Error, Result};
pub use estimator::{estimate, EstimationResult, TrainConfig};
pub use scalar::Scalar;
pub use simulator::{case_catalog, simulate_window, MeasurementWindow, SimConfig};

pub type CircuitParams64 = CircuitParams<f64>;
pub type CircuitParams32 = CircuitParams<f32>;
pub type StateVector64 = StateVector<f64>;
pub type StateMatrices64 = StateMatrices<f64>;
pub type MeasurementWindow64 = MeasurementWindow<f64>;
pub type MeasurementWindow32 = MeasurementWindow<f32>;
