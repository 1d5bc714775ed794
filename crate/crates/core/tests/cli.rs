use std::process::Command;

use shifted_clt::distance_lab::{DistanceReport, EstimatorKind};
use shifted_clt::experiments::{load_json, rate_sweep, render, to_json_string, ExperimentConfig, Format, RateRow};

const EXE: &str = env!("CARGO_BIN_EXE_shifted-clt");

const BASE: &str = r#"{"schema_version":1,"T":1e4,"n_samples":200,"seed":1,
  "characters":[{"q":5,"index":1},{"q":5,"index":2}],
  "shift_rule":{"rule":"explicit","alphas":[0.0,0.3]},
  "params":{"Y_override":100,"X_override":1000},
  "stages":["Q_T","R_T"]}"#;

fn code(args: &[&str]) -> i32 {
    Command::new(EXE).args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    std::fs::write(&good, BASE).unwrap();
    let g = good.to_str().unwrap();
    assert_eq!(code(&["distances", "--config", g, "--out", dir.path().join("o.csv").to_str().unwrap()]), 0);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, BASE.replace("\"schema_version\":1", "\"schema_version\":9")).unwrap();
    assert_eq!(code(&["distances", "--config", bad.to_str().unwrap()]), 2);

    // same character at the same shift twice: singular covariance
    let npd = dir.path().join("npd.json");
    std::fs::write(&npd, BASE.replace("\"index\":2", "\"index\":1").replace("[0.0,0.3]", "[0.0,0.0]")).unwrap();
    assert_eq!(code(&["distances", "--config", npd.to_str().unwrap()]), 3);

    assert_eq!(code(&["distances", "--config", dir.path().join("missing.json").to_str().unwrap()]), 4);
    assert_eq!(code(&["distances", "--config", g, "--out", "/nonexistent-dir/o.csv"]), 4);
}

#[test]
fn empty_csv_is_header_only() {
    let s = render::<RateRow>(&[], Format::Csv, "rates").unwrap();
    assert_eq!(s, "T,pair_a,pair_b,estimator,value,uncertainty,theory_shape,L,M,N,seed,flags\n");
}

#[test]
fn json_round_trips() {
    let mut r = DistanceReport::new("R1_T", "Z_tilde", EstimatorKind::AbbCertificate, 1.0 / 3.0, 0.25, 9);
    r.r = Some(std::f64::consts::PI);
    r.flags.push("unnormalized".into());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    std::fs::write(&p, to_json_string(&r).unwrap()).unwrap();
    let back: DistanceReport = load_json(&p).unwrap();
    assert_eq!(back, r);
}

#[test]
fn uncertainty_scales_with_sample_size() {
    let c = ExperimentConfig::from_json(BASE).unwrap();
    let mut c4 = c.clone();
    c4.n_samples = 4 * c.n_samples;
    let u = |cfg: &ExperimentConfig| rate_sweep(cfg, &[1e4]).unwrap().into_iter().find(|r| r.estimator == "coupling_l1").unwrap().uncertainty;
    // a fourfold sample halves the standard error
    let ratio = u(&c) / u(&c4);
    assert!((1.6..2.5).contains(&ratio), "{ratio}");
}
