mod common;

use buckid::converter::matrix_partials;
use buckid::harness::case_truth;
use buckid::integrate::Solver;
use buckid::simulator::{quantize, switch_state_at_step, NoiseSource};
use buckid::*;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = CircuitParams64> {
    prop::array::uniform7(0.5f64..1.5).prop_map(|f| CircuitParams::scaled(&CircuitParams::reference(), f))
}

fn state() -> impl Strategy<Value = StateVector64> {
    (-10.0f64..10.0, -30.0f64..30.0).prop_map(|(i, v)| StateVector::new(i, v))
}

proptest! {
    #[test]
    fn derivative_is_affine_in_state(p in params(), x in state(), y in state(), on in any::<bool>()) {
        let s = if on { SwitchState::On } else { SwitchState::Off };
        let m = build_matrices(&p, s).unwrap();
        let fx = state_derivative(&p, s, x).unwrap();
        let fy = state_derivative(&p, s, y).unwrap();
        let diff = fx - fy;
        let want = m.apply_a(x - y);
        let scale = fx.max_abs().max(fy.max_abs()).max(1.0);
        prop_assert!((diff - want).max_abs() <= 1e-9 * scale);
    }

    #[test]
    fn matrices_continuous_in_parameters(p in params(), k in 0usize..7) {
        let param = Param::from_index(k).unwrap();
        let mut q = p;
        q.set(param, p.get(param) * (1.0 + 1e-9));
        for s in [SwitchState::On, SwitchState::Off] {
            let a = build_matrices(&p, s).unwrap().entries();
            let b = build_matrices(&q, s).unwrap().entries();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-7 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn matrix_partials_match_differences(p in params(), k in 0usize..7) {
        let param = Param::from_index(k).unwrap();
        let h = 1e-6 * p.get(param);
        let (mut a, mut b) = (p, p);
        a.set(param, p.get(param) + h);
        b.set(param, p.get(param) - h);
        for s in [SwitchState::On, SwitchState::Off] {
            let exact = matrix_partials(&p, s)[k].entries();
            let ea = build_matrices(&a, s).unwrap().entries();
            let eb = build_matrices(&b, s).unwrap().entries();
            for j in 0..8 {
                let fd = (ea[j] - eb[j]) / (2.0 * h);
                prop_assert!((fd - exact[j]).abs() <= 1e-5 * fd.abs().max(exact[j].abs()).max(1e-6));
            }
        }
    }

    #[test]
    fn quantization_idempotent(x in -40.0f64..40.0, bits in 8u32..16) {
        let res = 30.0 / 2f64.powi(bits as i32);
        let q = quantize(x, res);
        prop_assert_eq!(quantize(q, res), q);
        prop_assert!((q - x).abs() <= 0.5 * res * (1.0 + 1e-12));
    }

    #[test]
    fn switch_trace_duty(per in 2usize..200, duty in 0.05f64..0.95) {
        let on = (0..per).filter(|&k| switch_state_at_step(k, per, duty).is_on()).count();
        prop_assert_eq!(on, (duty * per as f64).ceil() as usize);
    }
}

#[test]
fn noise_statistics() {
    let mut src = NoiseSource::new(11);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| src.sample(2.0)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 0.03, "{mean}");
    assert!((var.sqrt() - 2.0).abs() < 0.03, "{}", var.sqrt());
}

#[test]
fn windows_deterministic_per_seed() {
    let cfg = case_catalog(6).unwrap();
    let truth = case_truth(&cfg);
    let a = simulate_window(&cfg, &truth).unwrap();
    let b = simulate_window(&cfg, &truth).unwrap();
    assert_eq!(a, b);
    let c = simulate_window(&SimConfig { seed: 1, ..cfg }, &truth).unwrap();
    assert_ne!(a.x_sa, c.x_sa);
}

#[test]
fn noise_free_windows_ignore_seed() {
    let cfg = case_catalog(1).unwrap();
    let truth = case_truth(&cfg);
    let a = simulate_window(&cfg, &truth).unwrap();
    let b = simulate_window(&SimConfig { seed: 99, ..cfg }, &truth).unwrap();
    assert_eq!(a.x_sa, b.x_sa);
}

#[test]
fn samples_on_adc_grid() {
    let cfg = case_catalog(5).unwrap();
    let window = simulate_window(&cfg, &case_truth(&cfg)).unwrap();
    for x in &window.x_sa {
        let ci = x.i_l / cfg.i_resolution();
        let cv = x.v_o / cfg.v_resolution();
        assert!((ci - ci.round()).abs() < 1e-6 && (cv - cv.round()).abs() < 1e-6);
    }
}

#[test]
fn euler_is_first_order() {
    let slope = common::euler_order();
    assert!((slope - 1.0).abs() <= 0.2, "slope {slope}");
}

#[test]
fn solvers_agree_on_fine_grids() {
    // Euler at the truth rate tracks RK4 to within a few tenths of a percent.
    let err = common::euler_error(10e6);
    assert!(err < 0.05, "{err}");
}

#[test]
fn exact_mode_matches_predictor() {
    let cfg = case_catalog(2).unwrap().exact();
    let truth = case_truth(&cfg);
    let window = simulate_window(&cfg, &truth).unwrap();
    let pred = estimator::predict_trajectory(&truth, window.x0, &window.s_trace, window.dt_p()).unwrap();
    for (j, x) in window.x_sa.iter().enumerate() {
        assert_eq!(*x, pred[j * window.stride()]);
    }
}

#[test]
fn load_step_raises_current() {
    let cfg = case_catalog(1).unwrap();
    let window = simulate_window(&cfg, &case_truth(&cfg)).unwrap();
    let start = window.x_sa[0].i_l;
    let end = window.x_sa[window.n - 1].i_l;
    assert!(start > 1.5 && start < 2.7, "{start}");
    assert!(end > 6.5, "{end}");
}

#[test]
fn misaligned_config_rejected() {
    let cfg = SimConfig {
        f_sa: 30e3,
        ..case_catalog(1).unwrap()
    };
    assert!(cfg.validate().is_err());
    let cfg = SimConfig {
        truth_solver: Solver::Rk4,
        duty: 1.5,
        ..case_catalog(1).unwrap()
    };
    assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
}
