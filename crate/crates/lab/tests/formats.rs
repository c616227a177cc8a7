use levy_lab::io::{csv, report_lines};
use levy_lab::{run_experiment, Experiment, ExperimentManifest, CATALOG};
use levy_core::LevyModel;

#[test]
fn manifests_round_trip_for_every_experiment() {
    let models = [
        LevyModel::brownian(1.0, 0.0).unwrap(),
        LevyModel::asymmetric_stable(1.5, 0.8, 1.0).unwrap(),
        LevyModel::symmetric_stable(1.0, 2.0).unwrap(),
    ];
    for (i, e) in CATALOG.into_iter().enumerate() {
        let mut m = ExperimentManifest::new(e, &models[i % 3], 1.0, 64, 1000, i as u64);
        m.eps = Some(vec![0.5, 0.2]);
        m.h_scale = 7.3;
        let text = m.to_toml();
        assert_eq!(ExperimentManifest::from_toml(&text).unwrap(), m, "{text}");
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentManifest>(&json).unwrap(), m);
    }
}

#[test]
fn report_lines_are_json_with_bundle_fields() {
    let m = ExperimentManifest::new(Experiment::UniformRho, &LevyModel::brownian(1.0, 0.0).unwrap(), 1.0, 16, 2000, 3);
    let out = run_experiment(&m, true).unwrap();
    let text = report_lines(&out.bundles);
    let n: usize = out.bundles.iter().map(|b| b.reports.len()).sum();
    assert_eq!(text.lines().count(), n);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["bundle"].is_string() && v["pass"].is_boolean() && v["seed"] == 3);
    }
}

#[test]
fn csv_keeps_seventeen_significant_digits() {
    let v = [0.1 + 0.2, std::f64::consts::PI, 1e-310];
    let text = csv(&["v"], v.iter().map(|x| vec![*x]));
    let back: Vec<f64> = text.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert_eq!(back, v);
    let digits = text.lines().nth(1).unwrap().split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(digits.len(), 17);
}
