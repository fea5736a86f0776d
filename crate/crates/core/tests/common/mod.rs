#![allow(dead_code)]

use buckid::harness::case_truth;
use buckid::integrate::Solver;
use buckid::*;

/// Max sample error of an Euler ground truth at `f` Hz against RK4 at 10 MHz.
pub fn euler_error(f: f64) -> f64 {
    let reference = SimConfig {
        quantize: false,
        ..case_catalog(1).unwrap()
    };
    let truth = case_truth(&reference);
    let exact = simulate_window(&reference, &truth).unwrap();
    let cfg = SimConfig {
        truth_solver: Solver::Euler,
        f_truth: f,
        ..reference
    };
    let approx = simulate_window(&cfg, &truth).unwrap();
    exact
        .x_sa
        .iter()
        .zip(&approx.x_sa)
        .map(|(a, b)| (*a - *b).max_abs())
        .fold(0.0, f64::max)
}

/// Least-squares slope of `log(error)` against `log(dt)`.
pub fn euler_order() -> f64 {
    let rates: [f64; 3] = [1e6, 2e6, 5e6];
    let pts: Vec<(f64, f64)> = rates.iter().map(|&f| ((1.0 / f).ln(), euler_error(f).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy)]
pub struct GradientCheck {
    pub worst_relative: f64,
    /// Components compared.
    pub components: usize,
    /// Components skipped because the analytic value is below 1e-12.
    pub skipped: usize,
}

/// Compares the analytic gradient of the loss with respect to every network
/// weight against central differences, for `draws` random initializations of
/// the Case 1 estimator.
pub fn full_chain_gradient_error(draws: u64) -> GradientCheck {
    use buckid::estimator::{initial_network, network_loss, network_loss_and_gradient, LossWeighting, LossWeights};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let cfg = case_catalog(1).unwrap();
    let truth = case_truth(&cfg);
    let window = simulate_window(&cfg, &truth).unwrap();
    let lw = LossWeights::resolve(LossWeighting::Normalized, &window).unwrap();
    let mut check = GradientCheck {
        worst_relative: 0.0,
        components: 0,
        skipped: 0,
    };
    for seed in 0..draws {
        let train = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = initial_network(window.initial_measured(), &truth, &train, &mut rng);
        let (_, g) = network_loss_and_gradient(&net, &window, &lw).unwrap();
        // Fourth-order stencil: tiny components need a wide step to rise above
        // the roundoff of the simulated loss, and the stencil keeps truncation small.
        let h = 1e-2;
        for k in 0..g.len() {
            let at = |d: f64| {
                let mut shifted = net.clone();
                shifted.weights[k] += d;
                network_loss(&shifted, &window, &lw).unwrap()
            };
            let fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            let denom = fd.abs().max(g[k].abs());
            if g[k].abs() <= 1e-12 {
                check.skipped += 1;
                continue;
            }
            check.components += 1;
            check.worst_relative = check.worst_relative.max((fd - g[k]).abs() / denom);
        }
    }
    check
}
