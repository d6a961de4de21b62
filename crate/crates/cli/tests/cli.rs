use std::process::Command;

fn aads() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aads"))
}

fn run(args: &[&str]) -> (i32, String) {
    let out = aads().args(args).output().expect("spawn aads");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn verify_clifford_exits_zero() {
    let (code, stdout) = run(&["verify", "clifford"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("25/25"));
}

#[test]
fn bound_on_exact_ads_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bound.json");
    let (code, _) = run(&[
        "bound",
        "--model",
        r#"{"name":"ads_exact","params":{}}"#,
        "--ntheta",
        "12",
        "--npsi",
        "12",
        "--nphi",
        "12",
        "--quiet",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["command"], "bound");
    assert_eq!(report["pass"], true);
    assert_eq!(report["config"]["quadrature"]["ntheta"], 12);
}

#[test]
fn charges_report_round_trips_through_qmatrix() {
    let dir = tempfile::tempdir().unwrap();
    let charges = dir.path().join("charges.json");
    let (code, _) = run(&[
        "charges",
        "--model",
        r#"{"name":"radial_bump","params":{"m":0.1}}"#,
        "--quiet",
        "--out",
        charges.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&charges).unwrap()).unwrap();
    let e0 = report["result"]["e0"].as_f64().unwrap();
    assert!((e0 - 15.0 * std::f64::consts::PI * 0.1 / 128.0).abs() < 1e-9);
    let (code, _) = run(&["qmatrix", "--charges", charges.to_str().unwrap(), "--quiet"]);
    assert_eq!(code, 0);
}

#[test]
fn sample_psd_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let (code, _) = run(&["sample-psd", "--n", "300", "--seed", "11", "--quiet", "--out", p.to_str().unwrap()]);
        assert_eq!(code, 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["charges", "--no-such-flag"]).0, 2);
    assert_eq!(run(&["charges", "--model", r#"{"name":"nope","params":{}}"#]).0, 2);
    assert_eq!(run(&["charges", "--model", r#"{"name":"radial_bump","params":{"m":0.1,"sigma":1.5}}"#]).0, 2);
    assert_eq!(run(&["identity", "--model", r#"{"name":"ads_exact","params":{}}"#, "--lambda", "1,2,3"]).0, 2);
    assert_eq!(run(&["charges", "--model", "/no/such/file.json"]).0, 2);
}

#[test]
fn identity_holds_for_momentum_model() {
    let (code, stdout) = run(&[
        "identity",
        "--model",
        r#"{"name":"offdiag_momentum","params":{"q":0.3,"axis":3,"profile":"cos_phi"}}"#,
        "--lambda",
        "0.4,-0.2,1,0.3,-0.5,0,0.1,0.7",
        "--ntheta",
        "16",
        "--npsi",
        "16",
        "--nphi",
        "16",
    ]);
    assert_eq!(code, 0, "{stdout}");
}

#[test]
fn grid_file_models_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bump.aads");
    let (code, _) = run(&[
        "decay",
        "--model",
        r#"{"name":"radial_bump","params":{"m":0.1}}"#,
        "--quiet",
    ]);
    assert_eq!(code, 0);
    let model = aads_core::initial_data::model_from_json(r#"{"name":"radial_bump","params":{"m":0.1}}"#).unwrap();
    let grid = aads_core::initial_data::NativeGrid {
        ntheta: 10,
        npsi: 10,
        nphi: 10,
        radii: vec![4.0, 5.0, 6.0, 7.0, 8.0],
    };
    aads_core::initial_data::GridModel::sample(model.as_ref(), grid).unwrap().write(&path).unwrap();
    let (code, _) = run(&["decay", "--model", path.to_str().unwrap(), "--quiet"]);
    assert_eq!(code, 0);
}
