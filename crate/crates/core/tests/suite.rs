use std::collections::BTreeMap;

use nalgebra::DMatrix;
use nchardy::{run_suite, AlgebraModel, Element, SuiteConfig, SuiteReport};
use num_complex::Complex64;

fn small(suite: &str) -> SuiteConfig {
    SuiteConfig { suite: suite.into(), trials: 8, seed: 3, ..SuiteConfig::default() }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = SuiteConfig { trials: 4, ..SuiteConfig::default() };
    let a = serde_json::to_string(&run_suite(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&run_suite(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(!a.contains("runtime_seconds"));
}

#[test]
fn seed_changes_the_sampled_inputs() {
    let a = run_suite(&small("jensen")).unwrap();
    let b = run_suite(&SuiteConfig { seed: 4, ..small("jensen") }).unwrap();
    assert_ne!(a.checks[0].max_violation, b.checks[0].max_violation);
}

#[test]
fn unknown_suite_is_rejected() {
    let err = run_suite(&small("nope")).unwrap_err().to_string();
    assert!(err.contains("unknown suite"), "{err}");
}

#[test]
fn unknown_tolerance_key_is_rejected() {
    let cfg = SuiteConfig { tolerances: BTreeMap::from([("jensen/nope".into(), 1.0)]), ..small("jensen") };
    assert!(run_suite(&cfg).is_err());
}

#[test]
fn tolerance_override_can_force_failure() {
    let base = run_suite(&small("newton")).unwrap();
    assert!(base.pass);
    let cfg = SuiteConfig { tolerances: BTreeMap::from([("newton".into(), -1.0)]), ..small("newton") };
    let err = run_suite(&cfg).unwrap_err().to_string();
    assert!(err.contains("nonnegative"), "{err}");

    let cfg = SuiteConfig { tolerances: BTreeMap::from([("newton".into(), 0.0)]), ..small("newton") };
    let strict = run_suite(&cfg).unwrap();
    let rec = strict.check("newton").unwrap();
    assert_eq!(rec.tolerance, 0.0);
    assert_eq!(rec.pass, rec.max_violation <= 0.0);
    assert_eq!(strict.pass, strict.checks.iter().all(|c| c.pass));
}

#[test]
fn each_suite_passes_on_a_small_run() {
    for suite in nchardy::suite::SUITES {
        let rep = run_suite(&small(suite)).unwrap();
        for c in &rep.checks {
            assert!(c.pass, "{suite}: {c:?}");
        }
    }
}

#[test]
fn fixed_weight_reports_the_determinant() {
    let model = AlgebraModel::triangular(2).unwrap();
    let w = DMatrix::from_diagonal(&nalgebra::dvector![Complex64::new(4.0, 0.0), Complex64::new(1.0, 0.0)]);
    let cfg = SuiteConfig {
        suite: "szego-formula".into(),
        szego_w: Some(Element::from_matrix(&model, w).unwrap()),
        ..SuiteConfig::default()
    };
    let rep = run_suite(&cfg).unwrap();
    assert!(rep.pass);
    let p2 = rep.check("szego-formula/p2").unwrap();
    assert_eq!(p2.trials, 1);
    assert!((p2.values["det_w"] - 2.0).abs() < 1e-12);
    assert!((p2.values["inf_estimate"] - 2.0).abs() < 1e-4);
    assert!(p2.values["relative_gap"].abs() < 1e-4);
    let closed = rep.check("szego-formula/closed-form").unwrap();
    assert!((closed.values["closed_form"] - 2.0).abs() < 1e-12);
}

#[test]
fn report_and_config_round_trip_through_json() {
    let cfg = SuiteConfig { tolerances: BTreeMap::from([("phi/trace".into(), 1e-9)]), ..small("phi") };
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<SuiteConfig>(&text).unwrap(), cfg);

    let rep = run_suite(&cfg).unwrap();
    let text = serde_json::to_string_pretty(&rep).unwrap();
    assert_eq!(serde_json::from_str::<SuiteReport>(&text).unwrap(), rep);
}

#[test]
fn errored_check_serializes_violation_as_null() {
    let json = r#"{"name":"x","trials":1,"max_violation":null,"tolerance":1.0,"pass":false,"errors":1}"#;
    let rec: nchardy::CheckRecord = serde_json::from_str(json).unwrap();
    assert_eq!(rec.max_violation, f64::INFINITY);
    assert!(serde_json::to_string(&rec).unwrap().contains("\"max_violation\":null"));
}

#[test]
fn config_rejects_unknown_fields() {
    let err = serde_json::from_str::<SuiteConfig>(r#"{"suite":"all","trails":3}"#).unwrap_err();
    assert!(err.to_string().contains("trails"));
    let partial: SuiteConfig = serde_json::from_str(r#"{"trials":3}"#).unwrap();
    assert_eq!(partial, SuiteConfig { trials: 3, ..SuiteConfig::default() });
}
