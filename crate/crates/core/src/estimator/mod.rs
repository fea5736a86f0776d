//! Physics-informed estimator: a small network emits the seven normalized
//! parameters, a Forward-Euler predictor replays the window with them, and the
//! downsampled prediction error drives Adam followed by L-BFGS.

pub mod network;
pub mod predictor;
pub mod train;

pub use network::{denormalize, Network, NUM_WEIGHTS};
pub use predictor::{
    loss_and_gradient, loss_at, predict_trajectory, training_loss, LossWeighting, LossWeights, DIVERGENCE_LIMIT,
};
pub use train::{
    estimate, initial_network, network_loss, network_loss_and_gradient, EpochCounts, EstimationResult, StopReason,
    TrainConfig,
};
