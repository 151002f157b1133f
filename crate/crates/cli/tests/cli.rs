use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rgdl::io::save_stack;
use rgdl::{DnnStack, RbmParams, SpinDomain};
use tempfile::TempDir;

fn rgdl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgdl")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = rgdl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sample(dir: &Path, extra: &[&str]) {
    let mut args = vec!["ising-sample", "--lattice", "2d:8x8:periodic", "--J", "0.408", "--samples", "300", "--burn-in", "50", "--thinning", "2", "--seed", "7", "--out", p(dir)];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn rg_flow_rows_decrease_and_match_closed_form() {
    let csv = ok(&["rg-flow", "--J0", "1", "--steps", "4"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,J,closed_form"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    for w in rows.windows(2) {
        assert!(w[1][1] < w[0][1]);
    }
    for r in &rows {
        assert!((r[1] - r[2]).abs() < 1e-12);
    }
    let zero = ok(&["rg-flow", "--J0", "0", "--steps", "3"]);
    for l in zero.lines().skip(1) {
        let cols: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!((cols[1], cols[2]), (0.0, 0.0));
    }
}

#[test]
fn rg_flow_writes_into_run_directory() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("flow");
    ok(&["rg-flow", "--J0", "0.5", "--steps", "2", "--out", p(&dir)]);
    assert_eq!(fs::read_to_string(dir.join("rg_flow.csv")).unwrap().lines().count(), 4);
    assert!(dir.join("config.json").exists() && dir.join("log.txt").exists());
}

#[test]
fn sampling_writes_dataset_with_header_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    sample(&a, &["--csv"]);
    sample(&b, &["--csv"]);
    let bytes = fs::read(a.join("dataset.rgdl")).unwrap();
    assert_eq!(&bytes[..4], b"RGDL");
    assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 64);
    assert_eq!(bytes, fs::read(b.join("dataset.rgdl")).unwrap());
    assert_eq!(fs::read_to_string(a.join("samples.csv")).unwrap().lines().count(), 300);
    let obs = json(&a.join("observables.json"));
    assert_eq!(obs["num_samples"], 300);
    let config = json(&a.join("config.json"));
    assert_eq!(config["command"], "ising-sample");
}

#[test]
fn zero_coupling_magnetization_is_small() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("free");
    ok(&["ising-sample", "--lattice", "2d:8x8:periodic", "--J", "0", "--samples", "4000", "--burn-in", "10", "--thinning", "1", "--out", p(&dir)]);
    let m = &json(&dir.join("observables.json"))["magnetization"];
    assert!(m["mean"].as_f64().unwrap().abs() < 4.0 * m["stderr"].as_f64().unwrap());
}

#[test]
fn rerun_from_echoed_config_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    sample(&a, &[]);
    ok(&["rerun", "--config", p(&a.join("config.json")), "--out", p(&b)]);
    assert_eq!(fs::read(a.join("dataset.rgdl")).unwrap(), fs::read(b.join("dataset.rgdl")).unwrap());
    assert_eq!(fs::read(a.join("observables.json")).unwrap(), fs::read(b.join("observables.json")).unwrap());
}

#[test]
fn training_defaults_zero_epochs_and_determinism() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    sample(&data, &[]);
    let ds = data.join("dataset.rgdl");
    let train = |name: &str, extra: &[&str]| {
        let dir = tmp.path().join(name);
        let mut args = vec!["train", "--data", p(&ds), "--layers", "64,16,4", "--seed", "3", "--out", p(&dir)];
        args.extend_from_slice(extra);
        ok(&args);
        dir
    };
    let init = train("init", &["--epochs", "0"]);
    let config = json(&init.join("config.json"));
    let args = &config["args"];
    assert_eq!(args["momentum"], 0.5);
    assert_eq!(args["minibatch"], 100);
    assert_eq!(args["l1"], 2e-4);
    let stack = rgdl::io::load_stack::<f64>(&init.join("stack")).unwrap().stack;
    assert_eq!(stack.layer_sizes(), vec![64, 16, 4]);
    assert!(stack.layers().iter().all(|l| l.hidden_bias.iter().all(|&b| b == 0.0)));
    assert!(stack.layers().iter().all(|l| l.weights.iter().all(|w| w.abs() < 0.01)));

    let x = train("x", &["--epochs", "3", "--minibatch", "50"]);
    let y = train("y", &["--epochs", "3", "--minibatch", "50"]);
    for f in ["stack/layer_0.json", "stack/layer_1.json", "training.csv"] {
        assert_eq!(fs::read(x.join(f)).unwrap(), fs::read(y.join(f)).unwrap(), "{f}");
    }
    assert_eq!(fs::read_to_string(x.join("training.csv")).unwrap().lines().count(), 1 + 2 * 3);
}

#[test]
fn single_layer_receptive_fields_are_weight_columns() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    sample(&data, &[]);
    let model = tmp.path().join("model");
    ok(&["train", "--data", p(&data.join("dataset.rgdl")), "--layers", "64,4", "--epochs", "2", "--out", p(&model)]);
    let rf = tmp.path().join("rf");
    ok(&["receptive-fields", "--stack", p(&model.join("stack")), "--check-monotone", "--out", p(&rf)]);
    let w = rgdl::io::load_stack::<f64>(&model.join("stack")).unwrap().stack.layers()[0].weights.clone();
    let rows: Vec<Vec<f64>> = fs::read_to_string(rf.join("layer1.csv"))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 64);
    for (i, row) in rows.iter().enumerate() {
        for (k, &x) in row.iter().enumerate() {
            assert_eq!(x, w[[i, k]]);
        }
    }
    let pgm = fs::read(rf.join("layer1_unit0.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n8 8\n255\n"));
    assert_eq!(pgm.len(), b"P5\n8 8\n255\n".len() + 64);
    assert_eq!(fs::read_to_string(rf.join("medians.csv")).unwrap().lines().count(), 2);
}

#[test]
fn empty_stack_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let stack = tmp.path().join("stack");
    fs::create_dir(&stack).unwrap();
    fs::write(stack.join("manifest.json"), r#"{"layer_sizes":[],"domain":"pm1","layers":[]}"#).unwrap();
    let out = rgdl(&["receptive-fields", "--stack", p(&stack), "--out", p(&tmp.path().join("rf"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    let last = err.lines().last().unwrap();
    assert!(last.starts_with("error: kind="), "{err}");
}

#[test]
fn zero_stack_reconstructs_one_half_and_prints_compression() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    sample(&data, &[]);
    let stack_dir = tmp.path().join("stack");
    let stack = DnnStack::new(vec![
        RbmParams::<f64>::zeros(64, 16, SpinDomain::PlusMinusOne),
        RbmParams::zeros(16, 4, SpinDomain::PlusMinusOne),
    ])
    .unwrap();
    save_stack(&stack, None, &stack_dir).unwrap();
    let out = tmp.path().join("rec");
    let stdout = ok(&["reconstruct", "--stack", p(&stack_dir), "--data", p(&data.join("dataset.rgdl")), "--held-out", "20", "--out", p(&out)]);
    assert!(stdout.contains("compression ratio 64/4 = 16"), "{stdout}");
    let csv = fs::read_to_string(out.join("reconstructions.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sample,site,input,probability"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 20 * 64);
    assert!(rows.iter().all(|r| r.ends_with(",0.5")));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["compression_ratio"], 16.0);
    assert_eq!(summary["magnetization_correlation"], 0.0);
}

#[test]
fn verify_mapping_bundled_suite_passes() {
    let report: serde_json::Value = serde_json::from_str(&ok(&["verify-mapping", "--instances", "20"])).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["suite"]["max_hidden_distribution_distance"].as_f64().unwrap() <= 1e-12);
    let decimation = &report["operators"][0];
    assert!(decimation["delta_f"].as_f64().unwrap().abs() <= 1e-10);
    assert!(report["perturbed"]["exactness_residual"].as_f64().unwrap() > 1e-14);
}

#[test]
fn verify_mapping_checks_a_supplied_model() {
    let tmp = TempDir::new().unwrap();
    let model = tmp.path().join("rbm.json");
    let mut params = RbmParams::<f64>::zeros(2, 1, SpinDomain::PlusMinusOne);
    params.weights[[0, 0]] = 0.3;
    params.weights[[1, 0]] = -0.2;
    rgdl::io::save_rbm(&params, &model).unwrap();
    let ham = tmp.path().join("h.txt");
    fs::write(&ham, rgdl::BoltzmannMachine::from(params).visible_hamiltonian().unwrap().to_text()).unwrap();
    let out = tmp.path().join("v");
    ok(&["verify-mapping", "--instances", "5", "--rbm", p(&model), "--hamiltonian", p(&ham), "--out", p(&out)]);
    let report = json(&out.join("report.json"));
    assert!(report["custom"]["kl_visible"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn errors_are_single_machine_readable_lines() {
    for args in [
        &["ising-sample", "--lattice", "2d:8x8:periodic", "--J", "0.4", "--samples", "0", "--out", "/tmp/never-written"][..],
        &["train", "--data", "/nonexistent/dataset.rgdl", "--layers", "4,2", "--out", "/tmp/never-written"],
        &["rg-flow", "--J0", "-1", "--steps", "2"],
        &["ising-sample", "--lattice", "3d:2", "--J", "1", "--out", "/tmp/never-written"],
        &["no-such-command"],
    ] {
        let out = rgdl(args);
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error:")).collect();
        assert_eq!(lines.len(), 1, "{args:?}: {err}");
        assert!(lines[0].starts_with("error: kind="), "{}", lines[0]);
        assert!(lines[0].contains(" message="));
    }
}
