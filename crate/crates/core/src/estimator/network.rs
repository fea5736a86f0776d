//! The `[2, 16, 16, 7]` parameter network.
//!
//! All weights live in one flat vector so the optimizers can treat the network
//! as a point in `R^439`. Layout (row-major weight matrices, `out × in`):
//!
//! | block | shape   | offset |
//! |-------|---------|--------|
//! | `W1`  | 16 × 2  | 0      |
//! | `b1`  | 16      | 32     |
//! | `W2`  | 16 × 16 | 48     |
//! | `b2`  | 16      | 304    |
//! | `W3`  | 7 × 16  | 320    |
//! | `b3`  | 7       | 432    |

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::converter::{CircuitParams, StateVector, NUM_PARAMS};
use crate::scalar::Scalar;

pub const INPUTS: usize = 2;
pub const HIDDEN: usize = 16;
pub const OUTPUTS: usize = NUM_PARAMS;
pub const LAYER_SIZES: [usize; 4] = [INPUTS, HIDDEN, HIDDEN, OUTPUTS];

const W1: usize = 0;
const B1: usize = W1 + HIDDEN * INPUTS;
const W2: usize = B1 + HIDDEN;
const B2: usize = W2 + HIDDEN * HIDDEN;
const W3: usize = B2 + HIDDEN;
const B3: usize = W3 + OUTPUTS * HIDDEN;

/// Total number of trainable values.
pub const NUM_WEIGHTS: usize = B3 + OUTPUTS;

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

#[inline]
pub fn logit<T: Scalar>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

/// Maps sigmoid outputs onto physical values: `θ_k = out_k · range_factor · nominal_k`.
/// `v_i` is copied from `nominal`.
pub fn denormalize<T: Scalar>(out: &[T; NUM_PARAMS], nominal: &CircuitParams<T>, range_factor: T) -> CircuitParams<T> {
    let fractions = out.map(|o| o * range_factor);
    CircuitParams::scaled(nominal, fractions)
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations<T> {
    pub input: [T; INPUTS],
    pub z1: [T; HIDDEN],
    pub z2: [T; HIDDEN],
    pub out: [T; OUTPUTS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub weights: Vec<T>,
    /// Divisors applied to `[i_L, v_o]` before the first layer.
    pub input_scale: [T; INPUTS],
    /// Parameter set that corresponds to 100 %.
    pub nominal: CircuitParams<T>,
    pub range_factor: T,
}

impl<T: Scalar> Network<T> {
    /// All-zero network (every output 0.5).
    pub fn zeros(nominal: CircuitParams<T>, input_scale: [T; INPUTS], range_factor: T) -> Self {
        Self {
            weights: vec![T::zero(); NUM_WEIGHTS],
            input_scale,
            nominal,
            range_factor,
        }
    }

    /// Uniform `±1/√fan_in` initialization for every weight and bias.
    pub fn randomize(&mut self, rng: &mut ChaCha8Rng) {
        let blocks = [
            (W1, B1, INPUTS),
            (B1, W2, INPUTS),
            (W2, B2, HIDDEN),
            (B2, W3, HIDDEN),
            (W3, B3, HIDDEN),
            (B3, NUM_WEIGHTS, HIDDEN),
        ];
        for (start, end, fan_in) in blocks {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for w in &mut self.weights[start..end] {
                *w = T::of(rng.random_range(-bound..bound));
            }
        }
    }

    pub fn scaled_input(&self, x0: StateVector<T>) -> [T; INPUTS] {
        [x0.i_l / self.input_scale[0], x0.v_o / self.input_scale[1]]
    }

    pub fn forward_cached(&self, x0: StateVector<T>) -> Activations<T> {
        forward_with(&self.weights, self.scaled_input(x0))
    }

    /// Normalized parameter estimate in `(0, 1)^7`.
    pub fn forward(&self, x0: StateVector<T>) -> [T; OUTPUTS] {
        self.forward_cached(x0).out
    }

    /// Physical parameter estimate.
    pub fn theta(&self, x0: StateVector<T>) -> CircuitParams<T> {
        denormalize(&self.forward(x0), &self.nominal, self.range_factor)
    }

    /// Estimate as fractions of the nominal values.
    pub fn theta_fraction(&self, x0: StateVector<T>) -> [T; OUTPUTS] {
        self.forward(x0).map(|o| o * self.range_factor)
    }

    /// Sets the output biases so that the network produces exactly
    /// `fractions ⊙ nominal` at `x0`. Fractions must lie in `(0, range_factor)`.
    pub fn preset_output(&mut self, x0: StateVector<T>, fractions: [T; OUTPUTS]) {
        let act = self.forward_cached(x0);
        for k in 0..OUTPUTS {
            let target = fractions[k] / self.range_factor;
            let mut pre = T::zero();
            for h in 0..HIDDEN {
                pre += self.weights[W3 + k * HIDDEN + h] * act.z2[h];
            }
            self.weights[B3 + k] = logit(target) - pre;
        }
    }

    /// Reverse pass: gradient of a scalar loss with respect to every weight,
    /// given the loss gradient with respect to the *physical* parameters.
    /// Includes the sigmoid and the `range_factor · nominal` scaling.
    pub fn backward(&self, act: &Activations<T>, d_theta: &[T; OUTPUTS]) -> Vec<T> {
        let w = &self.weights;
        let mut grad = vec![T::zero(); NUM_WEIGHTS];
        let nominal = self.nominal.to_array();

        let mut d_pre3 = [T::zero(); OUTPUTS];
        for k in 0..OUTPUTS {
            let d_out = d_theta[k] * self.range_factor * nominal[k];
            d_pre3[k] = d_out * act.out[k] * (T::one() - act.out[k]);
        }
        let mut d_z2 = [T::zero(); HIDDEN];
        for k in 0..OUTPUTS {
            grad[B3 + k] = d_pre3[k];
            for h in 0..HIDDEN {
                grad[W3 + k * HIDDEN + h] = d_pre3[k] * act.z2[h];
                d_z2[h] += w[W3 + k * HIDDEN + h] * d_pre3[k];
            }
        }
        let mut d_pre2 = [T::zero(); HIDDEN];
        for h in 0..HIDDEN {
            d_pre2[h] = d_z2[h] * (T::one() - act.z2[h] * act.z2[h]);
        }
        let mut d_z1 = [T::zero(); HIDDEN];
        for i in 0..HIDDEN {
            grad[B2 + i] = d_pre2[i];
            for j in 0..HIDDEN {
                grad[W2 + i * HIDDEN + j] = d_pre2[i] * act.z1[j];
                d_z1[j] += w[W2 + i * HIDDEN + j] * d_pre2[i];
            }
        }
        for i in 0..HIDDEN {
            let d_pre1 = d_z1[i] * (T::one() - act.z1[i] * act.z1[i]);
            grad[B1 + i] = d_pre1;
            for j in 0..INPUTS {
                grad[W1 + i * INPUTS + j] = d_pre1 * act.input[j];
            }
        }
        grad
    }

    /// Index range of the output biases inside [`Network::weights`].
    pub fn output_bias_range() -> std::ops::Range<usize> {
        B3..NUM_WEIGHTS
    }
}

/// Forward pass over an arbitrary weight vector.
pub fn forward_with<T: Scalar>(weights: &[T], input: [T; INPUTS]) -> Activations<T> {
    let mut z1 = [T::zero(); HIDDEN];
    for (i, z) in z1.iter_mut().enumerate() {
        let mut acc = weights[B1 + i];
        for j in 0..INPUTS {
            acc += weights[W1 + i * INPUTS + j] * input[j];
        }
        *z = acc.tanh();
    }
    let mut z2 = [T::zero(); HIDDEN];
    for (i, z) in z2.iter_mut().enumerate() {
        let mut acc = weights[B2 + i];
        for j in 0..HIDDEN {
            acc += weights[W2 + i * HIDDEN + j] * z1[j];
        }
        *z = acc.tanh();
    }
    let mut out = [T::zero(); OUTPUTS];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = weights[B3 + k];
        for h in 0..HIDDEN {
            acc += weights[W3 + k * HIDDEN + h] * z2[h];
        }
        *o = sigmoid(acc);
    }
    Activations { input, z1, z2, out }
}
