//! Process-level checks: exit codes, config validation messages and the
//! human/random baseline path through `train-sub --circuit`.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qnas"))
}

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn write_config(dir: &std::path::Path, run_dir: &std::path::Path) -> PathBuf {
    let text = format!(
        r#"
[run]
dir = "{}"
seed = 3

[task]
kind = "qml-synthetic"
n_classes = 2
samples = 60

[space]
name = "zzry"
n_qubits = 4
n_blocks = 2

[device]
file = "{}"

[super_train]
epochs = 4
batch_size = 12
warmup_steps = 2

[sub_train]
epochs = 4
batch_size = 12
warmup_steps = 2

[search]
iterations = 2
population = 6
parents = 2
mutation = 3
crossover = 1
valid_subset = 4

[prune]
ratios = [0.25]
epochs = 3
batch_size = 12

[eval]
test_subset = 4
"#,
        run_dir.display(),
        assets().join("devices/t5.dev").display()
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qnas_cli_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn missing_config_file_exits_with_config_error() {
    let out = bin().args(["--config", "/nonexistent.toml", "train-super"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("config"), "stderr: {err}");
}

#[test]
fn missing_device_file_is_named_in_the_error() {
    let dir = tmp("missing_device");
    let cfg = dir.join("config.toml");
    std::fs::write(
        &cfg,
        format!(
            "[run]\ndir = \"{}\"\n[task]\nkind = \"qml-synthetic\"\n\
             [space]\nname = \"zzry\"\nn_qubits = 4\n[device]\nfile = \"/no/such.dev\"\n",
            dir.display()
        ),
    )
    .unwrap();
    let out = bin().args(["--config", cfg.to_str().unwrap(), "train-super"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/no/such.dev"), "stderr: {err}");
}

#[test]
fn search_before_train_super_fails_cleanly() {
    let dir = tmp("order");
    let cfg = write_config(&dir, &dir.join("run"));
    let out = bin().args(["--config", cfg.to_str().unwrap(), "search"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn space_mismatch_against_checkpoint_is_rejected() {
    let dir = tmp("mismatch");
    let run = dir.join("run");
    let cfg_path = write_config(&dir, &run);
    let ok = bin().args(["--config", cfg_path.to_str().unwrap(), "train-super"]).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    // flip the space in the config and point at the same checkpoint
    let text = std::fs::read_to_string(&cfg_path).unwrap().replace("name = \"zzry\"", "name = \"u3cu3\"");
    std::fs::write(&cfg_path, text).unwrap();
    let out = bin().args(["--config", cfg_path.to_str().unwrap(), "search"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("does not match"), "stderr: {err}");
}

#[test]
fn circuit_file_baseline_bypasses_search() {
    let dir = tmp("baseline");
    let run = dir.join("run");
    let cfg = write_config(&dir, &run);
    // a small hand-written ansatz in the circuit text format
    let circuit = "\
RY 0 @0
RY 1 @1
RY 2 @2
RY 3 @3
RZZ 0,1 @4
RZZ 2,3 @5
";
    let circuit_path = dir.join("human.qc");
    std::fs::write(&circuit_path, circuit).unwrap();
    let out = bin()
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "train-sub",
            "--circuit",
            circuit_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("sub.ckpt").exists());
    let eval = bin()
        .args(["--config", cfg.to_str().unwrap(), "eval", "--backend", "both"])
        .output()
        .unwrap();
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let report = std::fs::read_to_string(run.join("eval_report.csv")).unwrap();
    let header = report.lines().next().unwrap();
    for col in ["depth", "n_gates", "n_1q", "n_cnot", "n_params", "success_rate"] {
        assert!(header.contains(col), "missing column {col}");
    }
}

#[test]
fn eval_twice_is_identical() {
    let dir = tmp("eval_repeat");
    let run = dir.join("run");
    let cfg = write_config(&dir, &run);
    let c = cfg.to_str().unwrap();
    for cmd in [vec!["train-super"], vec!["search"], vec!["train-sub"]] {
        let out = bin().arg("--config").arg(c).args(&cmd).output().unwrap();
        assert!(out.status.success(), "{cmd:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let run_eval = || {
        let out = bin().args(["--config", c, "eval"]).output().unwrap();
        assert!(out.status.success());
        std::fs::read(run.join("eval_report.csv")).unwrap()
    };
    let a = run_eval();
    let b = run_eval();
    assert_eq!(a, b);
    assert!(run.join("compiled.qc").exists());
    let cost = bin().args(["--config", c, "cost-report"]).output().unwrap();
    assert!(cost.status.success());
    let text = String::from_utf8_lossy(&cost.stdout);
    assert!(text.contains("supercircuit flow"), "stdout: {text}");
}

#[test]
fn capacity_error_exits_with_code_four() {
    // an 11-qubit density matrix is over the simulator cap
    let err = qnas_core::noise::DensityMatrix::zero_state(11).unwrap_err();
    assert!(matches!(err, qnas_core::error::Error::Capacity(_)));
    // the CLI maps it to exit code 4 through the same path the estimator uses
    let dir = tmp("capacity");
    let cfg = dir.join("config.toml");
    // device with 11 physical qubits forces the noisy eval over capacity
    let dev = dir.join("big.dev");
    let edges: String = (0..10).map(|i| format!("{i} {}\n", i + 1)).collect();
    std::fs::write(&dev, format!("[topology]\nqubits = 11\n{edges}")).unwrap();
    std::fs::write(
        &cfg,
        format!(
            r#"
[run]
dir = "{}"
seed = 1

[task]
kind = "qml-synthetic"
n_classes = 2
samples = 40

[space]
name = "zzry"
n_qubits = 4
n_blocks = 1

[device]
file = "{}"

[sub_train]
epochs = 2
batch_size = 8

[eval]
test_subset = 2
"#,
            dir.join("run").display(),
            dev.display()
        ),
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let circuit_path = dir.join("tiny.qc");
    std::fs::write(&circuit_path, "RY 0 @0\nRY 3 @1\n").unwrap();
    let out = bin()
        .args(["--config", c, "train-sub", "--circuit", circuit_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eval = bin().args(["--config", c, "eval", "--backend", "both"]).output().unwrap();
    assert_eq!(eval.status.code(), Some(4), "{}", String::from_utf8_lossy(&eval.stderr));
}
