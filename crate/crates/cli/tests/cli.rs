use std::path::Path;
use std::process::Command;

use interface_lab::{run, validate, CliError, ExperimentConfig, ExperimentKind};
use interface_lab_core::report::ExperimentReport;

fn toml_config(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text, "toml").expect("valid config")
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_interface-lab"))
}

const BRIDGE: &str = r#"
experiment = "bridge_1d"
kappa = [1.0, 1.0]
n = [64]
count = 100
seed = 42
output = "bridge"
"#;

#[test]
fn bridge_report_is_deterministic() {
    let cfg = toml_config(BRIDGE);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(&cfg, a.path()).unwrap();
    let rb = run(&cfg, b.path()).unwrap();
    assert_eq!(ra.report, rb.report);
    for name in ["report.json", "data.csv", "paths.csv"] {
        assert_eq!(
            read(&a.path().join("bridge").join(name)),
            read(&b.path().join("bridge").join(name)),
            "{name}"
        );
    }
    assert!(a.path().join("bridge/timing.json").exists());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bridge.toml");
    std::fs::write(&cfg, BRIDGE).unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let root = dir.path().join(format!("t{threads}"));
        let status = binary()
            .arg("run")
            .arg(&cfg)
            .env("INTERFACE_LAB_THREADS", threads)
            .env("INTERFACE_LAB_OUTPUT", &root)
            .output()
            .unwrap();
        assert!(
            matches!(status.status.code(), Some(0) | Some(2)),
            "{status:?}"
        );
        outputs.push((
            read(&root.join("bridge/report.json")),
            read(&root.join("bridge/paths.csv")),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn report_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&toml_config(BRIDGE), dir.path()).unwrap();
    let text = String::from_utf8(read(&dir.path().join("bridge/report.json"))).unwrap();
    let back = ExperimentReport::from_json(&text).unwrap();
    assert_eq!(back, out.report);
    assert_eq!(back.config["experiment"], "bridge_1d");
    assert!(back
        .references
        .iter()
        .any(|r| r.name == "midpoint_variance"));
}

#[test]
fn infinite_volume_errors_decrease() {
    let cfg = toml_config(
        r#"
experiment = "variance_infinite"
kappa = [1.0, 1.0]
n = [8, 16, 32]
[test_function]
kind = "bump"
center = [0.0, 0.0, 0.0]
radius = 0.5
amplitude = 1.0
"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, dir.path()).unwrap();
    let errs: Vec<f64> = out
        .report
        .points
        .iter()
        .map(|p| p.relative_error.unwrap())
        .collect();
    assert_eq!(errs.len(), 3);
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(out.report.passed());
    let csv =
        String::from_utf8(read(&dir.path().join("results/variance_infinite/data.csv"))).unwrap();
    assert!(csv.starts_with("N,observed,reference,relative_error\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn zero_kappa_is_a_config_error() {
    let cfg = toml_config(
        r#"
experiment = "green"
kappa = [0.0, 0.0]
n = [16]
[domain]
shape = "interval"
"#,
    );
    assert!(validate(&cfg).iter().any(|d| d.starts_with("kappa")));
    let dir = tempfile::tempdir().unwrap();
    let err = run(&cfg, dir.path()).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn infinite_volume_needs_three_dimensions() {
    let cfg = toml_config(
        r#"
experiment = "variance_infinite"
n = [8, 16]
[test_function]
kind = "bump"
center = [0.0, 0.0]
radius = 0.5
amplitude = 1.0
"#,
    );
    let diags = validate(&cfg);
    assert!(
        diags.iter().any(|d| d == "infinite-volume requires d ≥ 3"),
        "{diags:?}"
    );
}

#[test]
fn valid_config_has_no_diagnostics() {
    assert!(validate(&toml_config(BRIDGE)).is_empty());
}

#[test]
fn increasing_h_grid_is_flagged() {
    let cfg = toml_config(
        r#"
experiment = "spectral_gap"
h = [0.03125, 0.0625]
[domain]
shape = "interval"
"#,
    );
    assert!(validate(&cfg)
        .iter()
        .any(|d| d.contains("strictly decreasing")));
}

#[test]
fn unused_fields_are_flagged() {
    let cfg = toml_config(
        r#"
experiment = "spectral_gap"
h = [0.0625]
lambdas = [0.5]
[domain]
shape = "interval"
"#,
    );
    assert_eq!(
        validate(&cfg),
        vec!["`lambdas` is not used by spectral_gap".to_string()]
    );
}

#[test]
fn unknown_keys_are_rejected() {
    let err =
        ExperimentConfig::parse("experiment = \"green\"\nresolution = 4\n", "toml").unwrap_err();
    assert!(err.to_string().contains("resolution"), "{err}");
    let err = ExperimentConfig::parse(
        "experiment = \"green\"\n[tolerances]\nrel_err = 0.1\n",
        "toml",
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn json_configs_are_accepted() {
    let json = r#"{"experiment": "bridge_1d", "kappa": [1.0, 1.0], "n": [64], "count": 100, "seed": 42, "output": "bridge"}"#;
    assert_eq!(
        ExperimentConfig::parse(json, "json").unwrap(),
        toml_config(BRIDGE)
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, json).unwrap();
    assert_eq!(
        ExperimentConfig::load(&path).unwrap().experiment,
        ExperimentKind::Bridge1d
    );
}

#[test]
fn list_experiments_names_all() {
    let out = binary().arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for k in ExperimentKind::ALL {
        assert!(
            text.lines().any(|l| l.starts_with(k.name())),
            "{}",
            k.name()
        );
    }
}

fn run_binary(config: &str, name: &str) -> (Option<i32>, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join(name);
    std::fs::write(&path, config).unwrap();
    let out = binary()
        .arg("run")
        .arg(&path)
        .env("INTERFACE_LAB_OUTPUT", dir.path())
        .env_remove("INTERFACE_LAB_THREADS")
        .output()
        .unwrap();
    (out.status.code(), dir)
}

#[test]
fn exit_codes() {
    let pass = r#"
experiment = "spectral_gap"
kappa = [1.0]
h = [0.03125, 0.015625]
[domain]
shape = "interval"
"#;
    assert_eq!(run_binary(pass, "pass.toml").0, Some(0));

    let fail = r#"
experiment = "spectral_gap"
kappa = [1.0, 1.0]
h = [0.0625]
[domain]
shape = "interval"
"#;
    let (code, dir) = run_binary(fail, "fail.toml");
    assert_eq!(code, Some(2));
    assert!(dir.path().join("results/spectral_gap/report.json").exists());

    assert_eq!(run_binary("experiment = \"nope\"\n", "bad.toml").0, Some(3));

    let out = binary()
        .args(["validate", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, BRIDGE).unwrap();
    let out = binary()
        .arg("run")
        .arg(&path)
        .env("INTERFACE_LAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn validate_command_prints_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(
        &path,
        "experiment = \"thomee_error\"\nh = [0.0625]\n[domain]\nshape = \"interval\"\n",
    )
    .unwrap();
    let out = binary().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("thomee_error requires a ball domain"));
    assert!(text.contains("at least two spacings"));
}

#[test]
fn green_writes_columns_and_node_lists() {
    let cfg = toml_config(
        r#"
experiment = "green"
kappa = [1.0]
n = [8, 16]
dump_nodes = true
[domain]
shape = "interval"
"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, dir.path()).unwrap();
    // G(N/2, N/2) = 2 · (N/2)² / N for the normalized Laplacian on {1..N−1}
    for p in &out.report.points {
        let want = p.x / 2.0;
        assert!(
            (p.observed - want).abs() < 1e-9 * want,
            "{} {want}",
            p.observed
        );
    }
    let base = dir.path().join("results/green");
    let col = String::from_utf8(read(&base.join("green_N16.csv"))).unwrap();
    assert!(col.starts_with("z0,value\n"));
    assert_eq!(col.lines().count(), 16);
    let nodes = String::from_utf8(read(&base.join("nodes_N8.csv"))).unwrap();
    assert!(nodes.starts_with("x0,role\n"));
    assert!(nodes.contains(",interior") && nodes.contains(",boundary"));
}

#[test]
fn sample_experiment_checks_covariances() {
    let cfg = toml_config(
        r#"
experiment = "sample"
kappa = [1.0, 1.0]
n = [16]
count = 4000
seed = 3
[domain]
shape = "interval"
"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, dir.path()).unwrap();
    assert!(out.report.passed(), "{:?}", out.report.checks);
    let cov = String::from_utf8(read(&dir.path().join("results/sample/covariance.csv"))).unwrap();
    assert!(cov.starts_with("i,j,empirical,green,stderr,within\n"));
    let samples = String::from_utf8(read(&dir.path().join("results/sample/samples.csv"))).unwrap();
    assert_eq!(samples.lines().count(), 4002);
}

#[test]
fn thomee_experiment_writes_error_table() {
    let cfg = toml_config(
        r#"
experiment = "thomee_error"
h = [0.0625, 0.03125]
dump_nodes = true
[domain]
shape = "ball"
dimension = 2
radius = 1.0
center = [0.0, 0.0]
"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, dir.path()).unwrap();
    assert_eq!(out.report.points.len(), 2);
    assert!(out.report.points[1].observed < out.report.points[0].observed);
    let base = dir.path().join("results/thomee_error");
    let table = String::from_utf8(read(&base.join("thomee.csv"))).unwrap();
    assert!(table
        .starts_with("h,error_norm,bound_shape,bound,holds,interior_residual,collar_residual\n"));
    let part = String::from_utf8(read(&base.join("partition_N16.csv"))).unwrap();
    assert!(part.contains(",bstar"));
}

#[test]
fn variance_finite_and_besov_on_a_ball() {
    let ball = r#"
[domain]
shape = "ball"
dimension = 2
radius = 1.0
center = [0.0, 0.0]
[test_function]
kind = "bump"
center = [0.0, 0.0]
radius = 0.5
amplitude = 1.0
"#;
    let dir = tempfile::tempdir().unwrap();
    let finite = toml_config(&format!(
        "experiment = \"variance_finite\"\nn = [16, 32]\nh_ref = 0.03125\n{ball}"
    ));
    let out = run(&finite, dir.path()).unwrap();
    assert!(out.report.errors_decreasing());
    let besov = toml_config(&format!(
        "experiment = \"besov_scaling\"\nn = [16]\nlambdas = [1.0, 0.5]\n{ball}"
    ));
    let out = run(&besov, dir.path()).unwrap();
    assert_eq!(out.report.points.len(), 2);
    assert!(out.report.points.iter().all(|p| p.observed > 0.0));
    let csv = String::from_utf8(read(&dir.path().join("results/besov_scaling/besov.csv"))).unwrap();
    assert!(csv.starts_with("N,lambda,statistic\n"));
}

#[test]
fn sobolev_series_moments() {
    let cfg = toml_config(
        r#"
experiment = "sobolev_gff"
truncation = 100
sobolev_index = 1.0
count = 2000
seed = 8
[domain]
shape = "unit_box"
dimension = 2
[test_function]
kind = "bump"
center = [0.5, 0.5]
radius = 0.3
amplitude = 1.0
"#,
    );
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, dir.path()).unwrap();
    assert_eq!(out.report.checks.len(), 2);
    assert!(out.report.passed(), "{:?}", out.report.checks);
    let draws = String::from_utf8(read(&dir.path().join("results/sobolev_gff/draws.csv"))).unwrap();
    assert_eq!(draws.lines().count(), 2001);
}

#[test]
fn walk_sampler_requires_pure_gradient() {
    let cfg = toml_config("experiment = \"bridge_1d\"\nn = [64]\nbridge_sampler = \"walk\"\n");
    assert!(validate(&cfg).iter().any(|d| d.contains("walk")));
    let cfg = toml_config("experiment = \"bridge_1d\"\nkappa = [1.0]\nn = [64]\ncount = 50\nbridge_sampler = \"walk\"\n");
    assert!(validate(&cfg).is_empty());
    let dir = tempfile::tempdir().unwrap();
    run(&cfg, dir.path()).unwrap();
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert!(
            validate(&cfg).is_empty(),
            "{}: {:?}",
            path.display(),
            validate(&cfg)
        );
        seen.push(cfg.experiment);
    }
    for k in ExperimentKind::ALL {
        assert!(seen.contains(&k), "no config for {k}");
    }
}
