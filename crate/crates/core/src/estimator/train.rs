//! Training loop: Adam for coarse fitting, then L-BFGS for fine tuning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{denormalize, forward_with, Network, NUM_WEIGHTS, OUTPUTS};
use super::predictor::{loss_and_gradient, loss_at, LossWeighting, LossWeights};
use crate::converter::{CircuitParams, NUM_PARAMS};
use crate::error::{Error, Result};
use crate::optim::{Adam, Lbfgs, LineSearch};
use crate::scalar::Scalar;
use crate::simulator::MeasurementWindow;

/// Loss assigned to diverged trial points during the line search.
pub const DIVERGED_LOSS: f64 = 1e9;

/// Optimizer and network settings. Field names double as the JSON config schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr_adam: f64,
    pub lr_lbfgs: f64,
    pub max_epochs_adam: usize,
    pub max_epochs_lbfgs: usize,
    /// Stop once the largest change of any parameter, as a fraction of its
    /// nominal value, falls below this between consecutive epochs.
    pub tolerance: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub lbfgs_history: usize,
    /// Quasi-Newton steps start at the unit step (`lr_lbfgs` then only sets
    /// the length of the first steepest-descent step). When false every line
    /// search starts at `lr_lbfgs`.
    pub lbfgs_unit_step: bool,
    pub loss_weights: LossWeighting,
    pub seed: u64,
    /// Upper end of the output range as a multiple of nominal.
    pub range_factor: f64,
    /// Divisors for the network input `[i_L, v_o]`.
    pub input_scale: [f64; 2],
    /// Initial estimates are drawn uniformly from `[init_low, init_high]`
    /// times nominal.
    pub init_low: f64,
    pub init_high: f64,
    /// Fixed initial estimate (fractions of nominal); overrides the random draw.
    pub initial_fraction: Option<[f64; NUM_PARAMS]>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_adam: 0.025,
            lr_lbfgs: 0.05,
            max_epochs_adam: 250,
            max_epochs_lbfgs: 50,
            tolerance: 1e-6,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            lbfgs_history: 10,
            lbfgs_unit_step: true,
            loss_weights: LossWeighting::Normalized,
            seed: 0,
            range_factor: 5.0,
            input_scale: [10.0, 30.0],
            init_low: 0.5,
            init_high: 1.5,
            initial_fraction: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.lr_adam > 0.0 && self.lr_lbfgs > 0.0) {
            return bad("learning rates must be > 0");
        }
        if self.max_epochs_adam == 0 && self.max_epochs_lbfgs == 0 {
            return bad("at least one epoch is required");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be > 0");
        }
        if !(self.range_factor > 1.0) {
            return bad("range_factor must exceed 1");
        }
        if !(self.init_low > 0.0 && self.init_low <= self.init_high && self.init_high < self.range_factor) {
            return bad("initial range must satisfy 0 < init_low <= init_high < range_factor");
        }
        if !(self.input_scale[0] > 0.0 && self.input_scale[1] > 0.0) {
            return bad("input_scale must be positive");
        }
        if let Some(f) = self.initial_fraction {
            if !f.iter().all(|&v| v > 0.0 && v < self.range_factor) {
                return bad("initial_fraction must lie in (0, range_factor)");
            }
        }
        if self.lbfgs_history == 0 {
            return bad("lbfgs_history must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxEpoch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EpochCounts {
    pub adam: usize,
    pub lbfgs: usize,
}

impl EpochCounts {
    pub fn total(&self) -> usize {
        self.adam + self.lbfgs
    }
}

/// Result of one training run.
///
/// `loss_history[k]` and `theta_history_pct[k]` describe the network at the
/// start of epoch `k`; one final entry after the last update is appended, so
/// both have `epochs.total() + 1` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    /// Final estimate in SI units.
    pub theta_hat: CircuitParams<f64>,
    /// Final estimate as percent of the reference parameters.
    pub theta_hat_pct: [f64; NUM_PARAMS],
    pub loss_history: Vec<f64>,
    pub theta_history_pct: Vec<[f64; NUM_PARAMS]>,
    pub epochs: EpochCounts,
    /// False when the final state diverged.
    pub converged: bool,
    pub reason: StopReason,
    pub seed: u64,
    /// Epochs whose loss evaluation diverged.
    pub divergences: usize,
    /// L-BFGS iterations whose line search failed.
    pub stalls: usize,
    /// Wall-clock time of the run (s). Not serialized so reports stay
    /// reproducible byte for byte.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl EstimationResult {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().unwrap_or(&f64::NAN)
    }

    /// Signed error in percent for each parameter.
    pub fn error_pct(&self) -> [f64; NUM_PARAMS] {
        self.theta_hat_pct.map(|p| p - 100.0)
    }
}

struct Objective<'a, T: Scalar> {
    window: &'a MeasurementWindow<T>,
    weights: LossWeights<T>,
    net: Network<T>,
    input: [T; 2],
}

impl<'a, T: Scalar> Objective<'a, T> {
    fn theta(&self, w: &[T]) -> CircuitParams<T> {
        let out = forward_with(w, self.input).out;
        denormalize(&out, &self.net.nominal, self.net.range_factor)
    }

    fn fraction(&self, w: &[T]) -> [T; OUTPUTS] {
        forward_with(w, self.input).out.map(|o| o * self.net.range_factor)
    }

    fn loss(&self, w: &[T]) -> Result<T> {
        loss_at(&self.theta(w), self.window, &self.weights)
    }

    fn loss_and_grad(&self, w: &[T]) -> Result<(T, Vec<T>)> {
        let act = forward_with(w, self.input);
        let theta = denormalize(&act.out, &self.net.nominal, self.net.range_factor);
        let (e, d_theta) = loss_and_gradient(&theta, self.window, &self.weights)?;
        // backward() reads weights from the network, so evaluate with `w`.
        let net = Network {
            weights: w.to_vec(),
            ..self.net.clone()
        };
        Ok((e, net.backward(&act, &d_theta)))
    }
}

/// Loss of `net` on `window` and its gradient with respect to every network
/// weight, through the denormalization, the Euler predictor and the sampling.
pub fn network_loss_and_gradient<T: Scalar>(
    net: &Network<T>,
    window: &MeasurementWindow<T>,
    weights: &LossWeights<T>,
) -> Result<(T, Vec<T>)> {
    let input = net.scaled_input(window.initial_measured());
    Objective {
        window,
        weights: *weights,
        net: net.clone(),
        input,
    }
    .loss_and_grad(&net.weights)
}

/// Loss of `net` on `window`.
pub fn network_loss<T: Scalar>(net: &Network<T>, window: &MeasurementWindow<T>, weights: &LossWeights<T>) -> Result<T> {
    loss_at(&net.theta(window.initial_measured()), window, weights)
}

fn draw_fractions(rng: &mut ChaCha8Rng, cfg: &TrainConfig) -> [f64; NUM_PARAMS] {
    std::array::from_fn(|_| {
        if cfg.init_high > cfg.init_low {
            rng.random_range(cfg.init_low..cfg.init_high)
        } else {
            cfg.init_low
        }
    })
}

fn max_change<T: Scalar>(a: &[T; OUTPUTS], b: &[T; OUTPUTS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x - *y).abs().f64()).fold(0.0, f64::max)
}

/// Builds the initial network for a run: uniform `±1/√fan_in` weights from the
/// run seed, then output biases preset to the initial estimate.
pub fn initial_network<T: Scalar>(
    x0: crate::converter::StateVector<T>,
    nominal: &CircuitParams<T>,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Network<T> {
    let mut net = Network::zeros(
        *nominal,
        [T::of(cfg.input_scale[0]), T::of(cfg.input_scale[1])],
        T::of(cfg.range_factor),
    );
    net.randomize(rng);
    let fractions = cfg.initial_fraction.unwrap_or_else(|| draw_fractions(rng, cfg));
    net.preset_output(x0, fractions.map(T::of));
    net
}

/// Trains the network on one window and returns the final estimate.
///
/// `nominal` is the 100 % reference for both the output scaling and the
/// reported percentages.
pub fn estimate<T: Scalar>(
    window: &MeasurementWindow<T>,
    nominal: &CircuitParams<T>,
    cfg: &TrainConfig,
) -> Result<EstimationResult> {
    let started = std::time::Instant::now();
    cfg.validate()?;
    window.validate()?;
    nominal.validate()?;
    let x0 = window.initial_measured();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = initial_network(x0, nominal, cfg, &mut rng);
    let objective = Objective {
        window,
        weights: LossWeights::resolve(cfg.loss_weights, window)?,
        input: net.scaled_input(x0),
        net,
    };
    let mut w = objective.net.weights.clone();
    debug_assert_eq!(w.len(), NUM_WEIGHTS);

    let to_pct = |f: &[T; OUTPUTS]| f.map(|v| v.f64() * 100.0);
    let mut loss_history = Vec::new();
    let mut theta_history = Vec::new();
    let mut epochs = EpochCounts::default();
    let mut divergences = 0;
    let mut stalls = 0;
    let mut reason = StopReason::MaxEpoch;
    let mut evaluated = 0usize;

    let mut adam = Adam::new(
        NUM_WEIGHTS,
        T::of(cfg.adam_beta1),
        T::of(cfg.adam_beta2),
        T::of(cfg.adam_eps),
    );
    let lr_adam = T::of(cfg.lr_adam);
    let mut stopped = false;
    for _ in 0..cfg.max_epochs_adam {
        let before = objective.fraction(&w);
        epochs.adam += 1;
        theta_history.push(to_pct(&before));
        match objective.loss_and_grad(&w) {
            Ok((e, g)) => {
                evaluated += 1;
                loss_history.push(e.f64());
                adam.step(&mut w, &g, lr_adam);
            }
            Err(Error::Divergence { .. }) => {
                divergences += 1;
                loss_history.push(DIVERGED_LOSS);
                let mut net = Network {
                    weights: w.clone(),
                    ..objective.net.clone()
                };
                net.preset_output(x0, draw_fractions(&mut rng, cfg).map(T::of));
                w = net.weights;
                adam.reset();
            }
            Err(e) => return Err(e),
        }
        if max_change(&objective.fraction(&w), &before) < cfg.tolerance {
            reason = StopReason::Tolerance;
            stopped = true;
            break;
        }
    }

    if !stopped && cfg.max_epochs_lbfgs > 0 {
        let mut lbfgs = Lbfgs::new(
            cfg.lbfgs_history,
            LineSearch {
                unit_step: cfg.lbfgs_unit_step,
                ..LineSearch::default()
            },
        );
        let lr = T::of(cfg.lr_lbfgs);
        let sentinel = T::of(DIVERGED_LOSS);
        let loss_fn = |v: &[T]| objective.loss(v).unwrap_or(sentinel);
        let grad_fn = |v: &[T]| {
            objective
                .loss_and_grad(v)
                .map(|(_, g)| g)
                .unwrap_or_else(|_| vec![T::zero(); NUM_WEIGHTS])
        };
        let mut current = objective.loss_and_grad(&w);
        for _ in 0..cfg.max_epochs_lbfgs {
            let before = objective.fraction(&w);
            epochs.lbfgs += 1;
            theta_history.push(to_pct(&before));
            let (loss, grad) = match current {
                Ok(ref lg) => lg.clone(),
                Err(Error::Divergence { .. }) => {
                    divergences += 1;
                    loss_history.push(DIVERGED_LOSS);
                    // No descent information at a diverged point; nothing to do.
                    break;
                }
                Err(e) => return Err(e),
            };
            evaluated += 1;
            loss_history.push(loss.f64());
            let out = lbfgs.step(&mut w, loss, &grad, lr, loss_fn, grad_fn);
            if out.stalled {
                stalls += 1;
            }
            current = Ok((out.loss, out.grad));
            if max_change(&objective.fraction(&w), &before) < cfg.tolerance {
                reason = StopReason::Tolerance;
                break;
            }
        }
    }

    if evaluated == 0 {
        return Err(Error::AllDivergent);
    }

    let final_fraction = objective.fraction(&w);
    let final_loss = objective.loss(&w);
    let converged = final_loss.is_ok();
    loss_history.push(final_loss.map(|e| e.f64()).unwrap_or(DIVERGED_LOSS));
    theta_history.push(to_pct(&final_fraction));

    Ok(EstimationResult {
        theta_hat: objective.theta(&w).cast(),
        theta_hat_pct: to_pct(&final_fraction),
        loss_history,
        theta_history_pct: theta_history,
        epochs,
        converged,
        reason,
        seed: cfg.seed,
        divergences,
        stalls,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
