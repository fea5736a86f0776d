mod common;

use buckid::estimator::{loss_and_gradient, loss_at, LossWeighting, LossWeights};
use buckid::harness::case_truth;
use buckid::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn case_window(case: u32) -> (MeasurementWindow64, CircuitParams64) {
    let cfg = case_catalog(case).unwrap();
    let truth = case_truth(&cfg);
    (simulate_window(&cfg, &truth).unwrap(), truth)
}

#[test]
fn network_gradient_matches_finite_differences() {
    let err = common::full_chain_gradient_error(3);
    assert!(err.worst_relative < 1e-5, "{err:?}");
}

#[test]
fn parameter_gradient_matches_finite_differences_on_random_draws() {
    let (window, truth) = case_window(2);
    let lw = LossWeights::resolve(LossWeighting::Normalized, &window).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..10 {
        let fractions: [f64; 7] = std::array::from_fn(|_| rng.random_range(0.7..1.3));
        let p = CircuitParams::scaled(&truth, fractions);
        let (e, g) = loss_and_gradient(&p, &window, &lw).unwrap();
        assert_eq!(e, loss_at(&p, &window, &lw).unwrap());
        for k in Param::ALL {
            let h = 1e-6 * p.get(k);
            let (mut a, mut b) = (p, p);
            a.set(k, p.get(k) + h);
            b.set(k, p.get(k) - h);
            let fd = (loss_at(&a, &window, &lw).unwrap() - loss_at(&b, &window, &lw).unwrap()) / (2.0 * h);
            let gk = g[k.index()];
            assert!(
                (fd - gk).abs() <= 1e-5 * fd.abs().max(gk.abs()),
                "{k}: {fd:e} vs {gk:e}"
            );
        }
    }
}

#[test]
fn exact_window_has_zero_loss_at_truth() {
    let cfg = case_catalog(1).unwrap().exact();
    let truth = case_truth(&cfg);
    let window = simulate_window(&cfg, &truth).unwrap();
    let lw = LossWeights::resolve(LossWeighting::Normalized, &window).unwrap();
    assert_eq!(loss_at(&truth, &window, &lw).unwrap(), 0.0);
    let (_, g) = loss_and_gradient(&truth, &window, &lw).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn estimate_is_deterministic_and_well_formed() {
    let (window, truth) = case_window(1);
    let cfg = TrainConfig {
        seed: 3,
        ..TrainConfig::default()
    };
    let a = estimate(&window, &truth, &cfg).unwrap();
    let b = estimate(&window, &truth, &cfg).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.converged);
    assert!(a.epochs.adam <= cfg.max_epochs_adam && a.epochs.lbfgs <= cfg.max_epochs_lbfgs);
    assert_eq!(a.loss_history.len(), a.epochs.total() + 1);
    assert_eq!(a.theta_history_pct.len(), a.epochs.total() + 1);
    assert!(a.final_loss() < a.loss_history[0]);
    for pct in a.theta_hat_pct {
        assert!(pct > 0.0 && pct < 500.0);
    }
    for p in Param::PRIMARY {
        assert!(a.error_pct()[p.index()].abs() < 5.0, "{p}: {:?}", a.theta_hat_pct);
    }
    let json: serde_json::Value = serde_json::to_value(&a).unwrap();
    for key in [
        "theta_hat",
        "theta_hat_pct",
        "loss_history",
        "theta_history_pct",
        "epochs",
        "converged",
        "reason",
        "seed",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert!(json["epochs"].get("adam").is_some() && json["epochs"].get("lbfgs").is_some());
}

#[test]
fn preset_truth_recovers_exact_window() {
    let cfg = case_catalog(1).unwrap().exact();
    let truth = case_truth(&cfg);
    let window = simulate_window(&cfg, &truth).unwrap();
    let train = TrainConfig {
        initial_fraction: Some([1.0; 7]),
        max_epochs_adam: 1,
        max_epochs_lbfgs: 0,
        lr_adam: 1e-12,
        ..TrainConfig::default()
    };
    let r = estimate(&window, &truth, &train).unwrap();
    assert!(r.loss_history[0] <= 1e-12, "{}", r.loss_history[0]);
}

#[test]
fn invalid_train_config_rejected() {
    let (window, truth) = case_window(1);
    let bad = TrainConfig {
        lr_adam: 0.0,
        ..TrainConfig::default()
    };
    assert!(matches!(estimate(&window, &truth, &bad), Err(Error::InvalidConfig(_))));
    let bad = TrainConfig {
        init_high: 6.0,
        ..TrainConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn f32_estimation_runs() {
    let (window, truth) = case_window(1);
    let w32: MeasurementWindow32 = window.cast();
    let r = estimate(&w32, &truth.cast::<f32>(), &TrainConfig::default()).unwrap();
    assert!(r.converged);
    assert!(r.error_pct()[Param::R.index()].abs() < 5.0, "{:?}", r.theta_hat_pct);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn loss_is_nonnegative_and_zero_only_on_match(fr in prop::array::uniform7(0.6f64..1.4)) {
        let cfg = case_catalog(1).unwrap().exact();
        let truth = case_truth(&cfg);
        let window = simulate_window(&cfg, &truth).unwrap();
        let lw = LossWeights::resolve(LossWeighting::Normalized, &window).unwrap();
        let e = loss_at(&CircuitParams::scaled(&truth, fr), &window, &lw).unwrap();
        prop_assert!(e >= 0.0);
        if fr.iter().any(|f| (f - 1.0).abs() > 0.05) {
            prop_assert!(e > 0.0);
        }
    }

    #[test]
    fn train_config_json_round_trip(lr in 1e-4f64..1.0, seed in any::<u64>(), hist in 1usize..20) {
        let cfg = TrainConfig { lr_adam: lr, seed, lbfgs_history: hist, ..TrainConfig::default() };
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
