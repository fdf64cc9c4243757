use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fracdnl::solver::SolverParams;
use fracdnl_cli::config::{self, RunConfig, StudyChoice, StudySection, Verbosity};

fn run(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fracdnl"));
    cmd.args(args);
    for p in extra {
        cmd.arg(p);
    }
    cmd.output().unwrap()
}

fn small(preset: &str) -> RunConfig {
    let mut c = RunConfig::preset(preset);
    c.solver = SolverParams { modes: 8, steps: 32, ..SolverParams::default() };
    c.output.verbosity = Verbosity::Quiet;
    c
}

fn write(dir: &Path, name: &str, c: &RunConfig) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, config::to_toml(c).unwrap()).unwrap();
    p
}

#[test]
fn presets_lists_every_name() {
    let out = run(&["presets"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in fracdnl::presets::PRESET_NAMES {
        assert!(text.contains(name));
    }
}

#[test]
fn solver_failure_keeps_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("hele_shaw");
    c.solver.tol = 1e-300;
    c.solver.budget = 1;
    let cfg = write(dir.path(), "c.toml", &c);
    let out_dir = dir.path().join("o");
    let out = run(&["solve", "--config"], &[&cfg, Path::new("--out"), &out_dir]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["failure"].is_string());
    assert!(!out_dir.join("diagnostics.json").exists());
    let rows = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap().lines().count();
    assert_eq!(rows, manifest["stats"].as_array().unwrap().len() + 1);
}

#[test]
fn study_output_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small("stefan");
    c.study = Some(StudySection { kind: Some(StudyChoice::Eps), values: vec![0.1, 0.05, 0.025] });
    let cfg = write(dir.path(), "c.toml", &c);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["--jobs", "1", "study", "--config"], &[&cfg, Path::new("--out"), &a]).status.success());
    assert!(run(&["--jobs", "3", "study", "--config"], &[&cfg, Path::new("--out"), &b]).status.success());
    for f in ["study.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("study.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "from,to,l2,l32,max_abs,ratio_l2,ratio_l32,run_hash");
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 8 && l.rsplit(',').next().unwrap().len() == 64));
}

#[test]
fn kind_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &small("hele_shaw"));
    let out_dir = dir.path().join("m");
    let out = run(&["study", "--kind", "mosco", "--emit-plot-data", "--config"], &[&cfg, Path::new("--out"), &out_dir]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("study.csv")).unwrap();
    assert!(csv.starts_with("eps,sample,value,perturbed,limit\n"));
    assert!(out_dir.join("plot_data.csv").exists());
    let missing = run(&["study", "--config"], &[&cfg, Path::new("--out"), &out_dir]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn uniqueness_needs_a_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &small("porous_medium"));
    let out = run(&["study", "--kind", "uniqueness", "--config"], &[&cfg, Path::new("--out"), &dir.path().join("u")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing constant"));
}

#[test]
fn breakpoint_graphs_load_from_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("alpha.txt"), "-1 -1\n0 0\n0 0.5\n1 1.5\n").unwrap();
    let mut c = small("linear_heat");
    c.problem.alpha_file = Some("alpha.txt".into());
    let cfg = write(dir.path(), "c.toml", &c);
    let out_dir = dir.path().join("o");
    let out = run(&["solve", "--config"], &[&cfg, Path::new("--out"), &out_dir]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("piecewise_linear"));
}

#[test]
fn config_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[problem]\npreset = \"porous_medium\"\np = 1.25\n\n[solver]\nmodes = 6\nsteps = 16\neps = 0.05\n\n[study]\nkind = \"nu\"\nvalues = [0.1, 0.05]\n\n[output]\ndir = \"results\"\nsnapshots = [0.25, 1.0]\nverbosity = \"quiet\"\n";
    let parsed = config::parse(text).unwrap();
    assert_eq!(parsed.problem.p, Some(1.25));
    let path = write(dir.path(), "c.toml", &parsed);
    let back = config::parse(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(back, parsed);
}

#[test]
fn unwritable_output_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &small("linear_heat"));
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = run(&["solve", "--config"], &[&cfg, Path::new("--out"), &blocker]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(run(&["solve"], &[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], &[]).status.code(), Some(1));
    assert_eq!(run(&["--help"], &[]).status.code(), Some(0));
}
