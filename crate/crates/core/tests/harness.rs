use buckid::estimator::{EpochCounts, StopReason};
use buckid::harness::*;
use buckid::landscape::LandscapeConfig;
use buckid::*;

fn fake_result(pct: [f64; 7], converged: bool) -> EstimationResult {
    EstimationResult {
        theta_hat: CircuitParams::reference(),
        theta_hat_pct: pct,
        loss_history: vec![1.0, 0.5],
        theta_history_pct: vec![pct; 2],
        epochs: EpochCounts { adam: 1, lbfgs: 0 },
        converged,
        reason: StopReason::MaxEpoch,
        seed: 0,
        divergences: 0,
        stalls: 0,
        wall_time_s: 0.0,
    }
}

fn outcome(rep: usize, pct: f64, converged: bool) -> RunOutcome {
    RunOutcome {
        rep,
        seed: rep as u64,
        result: Some(fake_result([pct; 7], converged)),
        error: None,
    }
}

#[test]
fn summarize_uses_converged_runs_only() {
    let runs = vec![
        outcome(0, 101.0, true),
        outcome(1, 102.0, true),
        outcome(2, 103.0, true),
        outcome(3, 500.0, false),
        RunOutcome {
            rep: 4,
            seed: 4,
            result: None,
            error: Some("diverged".into()),
        },
    ];
    let s = summarize(1, &runs).unwrap();
    assert_eq!((s.runs, s.converged, s.failed), (5, 3, 2));
    let l = s.params[&Param::L];
    assert!((l.error.median - 2.0).abs() < 1e-12);
    assert!((l.error.std - 1.0).abs() < 1e-12);
    assert!(l.error.min <= l.error.median && l.error.median <= l.error.max);
    assert!(summarize(1, &[]).is_err());
}

#[test]
fn single_repetition_degenerate_statistics() {
    let spec = ExperimentSpec {
        cases: vec![2],
        repetitions: 1,
        ..ExperimentSpec::default()
    };
    let runs = run_case(2, &spec).unwrap();
    assert_eq!(runs.len(), 1);
    let s = summarize(2, &runs).unwrap();
    let d = s.params[&Param::C].error;
    assert_eq!(d.std, 0.0);
    assert_eq!((d.q1, d.q3), (d.median, d.median));
}

#[test]
fn experiment_output_is_reproducible() {
    let spec = ExperimentSpec {
        cases: vec![1, 5],
        repetitions: 3,
        base_seed: 9,
        ..ExperimentSpec::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    emit_experiment(&run_experiment(&spec).unwrap(), a.path()).unwrap();
    emit_experiment(&run_experiment(&spec).unwrap(), b.path()).unwrap();
    for name in ["summary.json", "results_case1.json", "results_case5.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let md = std::fs::read_to_string(a.path().join("report.md")).unwrap();
    assert!(md.contains("| this method (published) | FE | [2×16×16×7] | 2 kB | 300 | 130 s | 1.84% | 1.06% |"));
    assert!(
        md.contains("| IRK PINN (published) | IRK | [5×50×50×50×50×50×40] | 49 kB | 250000 | 243 s | 0.11% | 0.04% |")
    );
    assert!(md.contains("No landscape output."));
}

#[test]
fn noise_cases_redraw_noise_per_repetition() {
    let spec = ExperimentSpec {
        cases: vec![6],
        repetitions: 2,
        ..ExperimentSpec::default()
    };
    let runs = run_case(6, &spec).unwrap();
    assert_ne!(runs[0].seed, runs[1].seed);
    let a = runs[0].result.as_ref().unwrap();
    let b = runs[1].result.as_ref().unwrap();
    assert_ne!(a.loss_history[0], b.loss_history[0]);
}

#[test]
fn repetitions_are_isolated() {
    // A repetition's result depends only on its own seed.
    let small = ExperimentSpec {
        cases: vec![4],
        repetitions: 2,
        ..ExperimentSpec::default()
    };
    let large = ExperimentSpec {
        repetitions: 4,
        ..small.clone()
    };
    let a = run_case(4, &small).unwrap();
    let b = run_case(4, &large).unwrap();
    let json = |r: &[RunOutcome]| serde_json::to_string(r).unwrap();
    assert_eq!(json(&a), json(&b[..2]));
}

#[test]
fn landscape_files_and_report_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = LandscapeConfig {
        wide: landscape::GridSpec::new(80.0, 120.0, 9),
        narrow: landscape::GridSpec::new(95.0, 105.0, 11),
        ..LandscapeConfig::default()
    };
    let report = landscape_case(1, 0, &cfg, true).unwrap();
    emit_landscape(&report, 1, dir.path()).unwrap();
    emit_classification(std::slice::from_ref(&report.metrics), &cfg.thresholds, dir.path()).unwrap();

    let text = std::fs::read_to_string(dir.path().join("sweeps_case1.csv")).unwrap();
    assert!(text.starts_with("param,grid_pct,loss\n"));
    assert_eq!(text.lines().count(), 1 + 7 * 9);
    assert!(text.contains("\nR_dson,"));

    let hess: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("hessian_case1.json")).unwrap()).unwrap();
    let first = &hess[0];
    assert_eq!(first["point_pct"].as_array().unwrap().len(), 7);
    assert_eq!(first["hessian"].as_array().unwrap().len(), 7);
    assert_eq!(first["eigenvalues"].as_array().unwrap().len(), 7);
    assert!(first["condition_number"].as_f64().unwrap() >= 1.0);
    assert_eq!(hess.as_array().unwrap().len(), 9);

    let classes: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("classification.json")).unwrap()).unwrap();
    for p in Param::ALL {
        assert!(classes.get(p.name()).is_some(), "{p}");
    }

    let md = render_report(&load_report_inputs(dir.path()).unwrap());
    assert!(md.contains("No experiment output."));
    assert!(md.contains("| L |"));
    assert!(!md.contains("No landscape output."));
}

#[test]
fn report_requires_some_input() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_report_inputs(dir.path()), Err(Error::EmptyInput(_))));
}

#[test]
fn invalid_specs_rejected() {
    let spec = ExperimentSpec {
        repetitions: 0,
        ..ExperimentSpec::default()
    };
    assert!(spec.validate().is_err());
    let spec = ExperimentSpec {
        cases: vec![7],
        ..ExperimentSpec::default()
    };
    assert!(matches!(spec.validate(), Err(Error::UnknownCase(7))));
}
