use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use nmd_cli::config::Experiment;
use nmd_cli::{child_config, child_seed, parse_value, run, sweep, ExperimentConfig, RunManifest};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nmd"))
}

const LZ_ZERO: &str = r#"
mass = 400.0
[potential]
kind = "one-d"
delta = 0.0
a_l = -2.0
a_r = 2.0
[experiment]
kind = "landau-zener"
delta = 0.0
p0 = 1.0
"#;

const PE_MD_POISSON: &str = r#"
seed = 99
mass = 100.0
energy = 1.5
[potential]
kind = "two-d-cone"
a = [1.5, 0.0]
eta = 0.5
[experiment]
kind = "pe-md"
dt_bo = 0.01
dt_ehrenfest = 0.01
t_end = 30.0
checkpoints = [10.0, 20.0]
init = { x0 = [0.0, 0.0], angle = 0.3 }
events = { kind = "poisson", rate = 0.5 }
"#;

const MC_OBSERVABLE: &str = r#"
seed = 4
mass = 100.0
energy = 1.5
[potential]
kind = "two-d-cone"
a = [0.0, 0.0]
eta = 0.0
[experiment]
kind = "observable"
g = "sin-x1-x2"
dt = 0.01
t_end = 10.0
n_samples = 300000
init = { x0 = [0.0, 0.0], angle = 1.2 }
"#;

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn shipped_configs_validate_and_round_trip() {
    let mut n = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let cfg = ExperimentConfig::load(&path).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{path:?}: {e}"));
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again, "{path:?}");
        assert_eq!(cfg.hash(), again.hash());
        n += 1;
    }
    assert!(n >= 10, "expected one example per kind, found {n}");
}

#[test]
fn landau_zener_at_zero_gap_reports_certain_transition() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(LZ_ZERO).unwrap();
    let (manifest, _) = run(&cfg, dir.path()).unwrap();
    let csv = read(&dir.path().join("landau_zener.csv"));
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("p_lz"), 1.0);
    assert!((col("adiabatic_excited") - 1.0).abs() < 1e-6);
    assert!(!csv.contains('\r'));
    assert_eq!(manifest.kind, "landau-zener");
    RunManifest::verify(dir.path()).unwrap();
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = ExperimentConfig::from_toml(PE_MD_POISSON).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ma, _) = run(&cfg, a.path()).unwrap();
    let (mb, _) = run(&cfg, b.path()).unwrap();
    assert_eq!(ma.files, mb.files);
    assert_eq!(ma.seeds, mb.seeds);
    assert_eq!(ma.config_hash, mb.config_hash);
    for f in ["pe_md.csv", "segments.csv", "summary.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert!(ma.seeds.contains_key("events"));
}

#[test]
fn manifest_alone_reproduces_the_run() {
    let cfg = ExperimentConfig::from_toml(PE_MD_POISSON).unwrap();
    let a = tempfile::tempdir().unwrap();
    let (m, _) = run(&cfg, a.path()).unwrap();
    let echoed: ExperimentConfig = serde_json::from_value(m.config.clone()).unwrap();
    assert_eq!(echoed.hash(), m.config_hash);
    let b = tempfile::tempdir().unwrap();
    let (m2, _) = run(&echoed, b.path()).unwrap();
    assert_eq!(m.files, m2.files);
}

#[test]
fn checksum_mismatch_is_detected() {
    let cfg = ExperimentConfig::from_toml(LZ_ZERO).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run(&cfg, dir.path()).unwrap();
    fs::write(dir.path().join("summary.csv"), "tampered\n").unwrap();
    assert!(RunManifest::verify(dir.path()).is_err());
}

#[test]
fn invalid_config_exits_nonzero_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, LZ_ZERO.replace("mass = 400.0", "mass = -1.0")).unwrap();
    let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "validation");
    assert!(err["message"].as_str().unwrap().contains("mass"));

    let out = bin().args(["run", "--config"]).arg(&path).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists(), "nothing may be written for an invalid config");

    fs::write(&path, LZ_ZERO.replace("p0 = 1.0", "p0 = 1.0\nbogus = 3")).unwrap();
    let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreachable_start_is_rejected_before_running() {
    let text = PE_MD_POISSON.replace("x0 = [0.0, 0.0], angle = 0.3", "x0 = [3.9, 3.9], angle = 0.3");
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    assert!(matches!(cfg.validate(), Err(nmd_cli::CliError::Validation(_))));
}

#[test]
fn binary_run_writes_manifest_and_honours_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    fs::write(&path, PE_MD_POISSON).unwrap();
    let status = bin()
        .args(["run", "--seed", "12345", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert!(status.success());
    let m = RunManifest::verify(&dir.path().join("o")).unwrap();
    assert_eq!(m.seeds["master"], 12345);
}

#[test]
fn monte_carlo_output_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    fs::write(&path, MC_OBSERVABLE).unwrap();
    let mut outs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        let status =
            bin().env("NMD_THREADS", threads).args(["run", "--config"]).arg(&path).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        outs.push(fs::read(out.join("observable.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

fn sweep_config() -> ExperimentConfig {
    let text = PE_MD_POISSON.replace("t_end = 30.0", "t_end = 15.0").replace("checkpoints = [10.0, 20.0]", "");
    ExperimentConfig::from_toml(&text).unwrap()
}

#[test]
fn sweep_is_parallelism_invariant_and_matches_single_runs() {
    let cfg = sweep_config();
    let values: Vec<toml::Value> = ["0.5", "1.5", "2.5", "3.5"].iter().map(|v| parse_value(v)).collect();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = sweep(&cfg, "potential.a.0", &values, 1, a.path()).unwrap();
    let rb = sweep(&cfg, "potential.a.0", &values, 8, b.path()).unwrap();
    assert_eq!(ra.failed(), 0);
    let summary = fs::read(a.path().join("summary.csv")).unwrap();
    assert_eq!(summary, fs::read(b.path().join("summary.csv")).unwrap());
    assert_eq!(ra.manifest.files[0], rb.manifest.files[0]);
    for i in 0..4 {
        for f in ["pe_md.csv", "segments.csv", "summary.csv"] {
            let rel = format!("run-{i:03}/{f}");
            assert_eq!(fs::read(a.path().join(&rel)).unwrap(), fs::read(b.path().join(&rel)).unwrap(), "{rel}");
        }
    }

    // row i equals a standalone run of the derived child config
    let text = String::from_utf8(summary).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for (i, line) in rows.iter().enumerate() {
        let child = child_config(&cfg, "potential.a.0", &values, i).unwrap();
        assert_eq!(child.seed, child_seed(cfg.seed, i));
        let d = tempfile::tempdir().unwrap();
        run(&child, d.path()).unwrap();
        let single = read(&d.path().join("summary.csv"));
        let single_row = single.lines().nth(1).unwrap();
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[3], "ok");
        assert_eq!(cells[4..cells.len() - 1].join(","), single_row);
    }
}

#[test]
fn single_value_sweep_equals_run() {
    let cfg = sweep_config();
    let values = vec![parse_value("1.5")];
    let d = tempfile::tempdir().unwrap();
    sweep(&cfg, "potential.a.0", &values, 2, d.path()).unwrap();
    let child = child_config(&cfg, "potential.a.0", &values, 0).unwrap();
    let s = tempfile::tempdir().unwrap();
    run(&child, s.path()).unwrap();
    for f in ["pe_md.csv", "segments.csv", "summary.csv"] {
        assert_eq!(fs::read(d.path().join("run-000").join(f)).unwrap(), fs::read(s.path().join(f)).unwrap());
    }
}

#[test]
fn sweep_records_child_failures_and_exits_nonzero() {
    let text = r#"
mass = 100.0
energy = 1.5
[potential]
kind = "two-d-cone"
a = [0.0, 0.0]
eta = 0.0
[experiment]
kind = "hitting-times"
dt = 0.01
t_end = 500.0
point = [0.0, 0.0]
normal = [1.0, 0.0]
n_bins = 10
init = { x0 = [0.0, 0.0], angle = 1.2 }
"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.toml");
    fs::write(&path, text).unwrap();
    let out = bin()
        .args(["sweep", "--axis", "experiment.t_end", "--values", "500,1", "--parallelism", "2", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("s"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "sweep");
    let summary = read(&dir.path().join("s/summary.csv"));
    let rows: Vec<&str> = summary.lines().collect();
    assert!(rows[1].contains(",ok,"));
    assert!(rows[2].contains(",failed,") && rows[2].contains("insufficient data"), "{}", rows[2]);
    RunManifest::verify(&dir.path().join("s")).unwrap();
}

#[test]
fn sweep_axis_must_name_a_leaf() {
    let cfg = sweep_config();
    let v = vec![parse_value("1.0")];
    let d = tempfile::tempdir().unwrap();
    assert!(sweep(&cfg, "potential.nope", &v, 1, d.path()).is_err());
    assert!(sweep(&cfg, "potential.a", &v, 1, d.path()).is_err());
    assert!(sweep(&cfg, "experiment.dt_bo", &[parse_value("-1.0")], 1, d.path()).is_err());
}

#[test]
fn sweep_kind_in_config_runs_its_base() {
    let text = format!(
        "{}\n[experiment]\nkind = \"sweep\"\naxis = \"experiment.delta\"\nvalues = [0.0, 0.05]\nparallelism = 2\n[experiment.base]\nkind = \"landau-zener\"\ndelta = 0.0\np0 = 1.0\n",
        LZ_ZERO.split("[experiment]").next().unwrap()
    );
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    assert!(matches!(cfg.experiment, Experiment::Sweep(_)));
    let d = tempfile::tempdir().unwrap();
    let (m, summary) = run(&cfg, d.path()).unwrap();
    assert_eq!(m.kind, "sweep");
    assert_eq!(summary[0].1, "2");
    assert!(d.path().join("run-001/landau_zener.csv").exists());
}

#[test]
fn cli_values_parse_as_toml_literals() {
    assert_eq!(parse_value("3"), toml::Value::Integer(3));
    assert_eq!(parse_value("2.5"), toml::Value::Float(2.5));
    assert_eq!(parse_value("full-matrix"), toml::Value::String("full-matrix".into()));
}
