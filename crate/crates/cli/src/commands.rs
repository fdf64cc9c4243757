//! The `solve`, `study`, `validate` and `presets` commands.

use std::path::{Path, PathBuf};

use fracdnl::continuation::{self, MoscoTable, StudyTable, UniquenessTable};
use fracdnl::diagnostics::{
    chain_rule_check, energy_report, increment_modulus, lq_bound, ChainRuleReport, ChainRuleVariant, EnergyReport,
    IncrementRow, LqReport,
};
use fracdnl::graphs::ScalarGraph;
use fracdnl::kernels::FracWeights;
use fracdnl::presets::PRESET_NAMES;
use fracdnl::problem::{validate as validate_spec, Constants, ProblemConfig, ProblemSpec, ValidationReport};
use fracdnl::solver::{residual, Setup, SolverParams, StepStats, Trajectory};
use fracdnl::spectral::Eigenbasis;
use log::{debug, info};
use serde::Serialize;

use crate::config::{self, RunConfig, StudyChoice, Verbosity};
use crate::error::CliError;
use crate::formats::{self, PlotData};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub emit_plot_data: bool,
    /// Overrides `[study] kind`.
    pub kind: Option<StudyChoice>,
}

/// A configuration file with its problem resolved.
pub struct Loaded {
    pub config: RunConfig,
    pub problem: ProblemConfig,
    pub spec: ProblemSpec,
    pub hash: String,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = config::parse(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line,
        message: e.message,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let problem = config.resolve_problem(base)?;
    let spec = ProblemSpec::from_config(&problem).map_err(|e| CliError::Invalid(e.to_string()))?;
    let hash = config::config_hash(&config, &problem)?;
    Ok(Loaded { config, problem, spec, hash })
}

fn output_dir(opts: &RunOptions, config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = opts.out.clone().or_else(|| config.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn say(v: Verbosity, msg: impl AsRef<str>) {
    if v != Verbosity::Quiet {
        println!("{}", msg.as_ref());
    }
}

#[derive(Serialize)]
struct Derived<'a> {
    h: f64,
    theta: f64,
    b0: f64,
    ell_l1_horizon: f64,
    c_v: f64,
    c_g: f64,
    tau: Option<f64>,
    notes: &'a [String],
}

impl<'a> Derived<'a> {
    fn new(spec: &ProblemSpec, params: &SolverParams, constants: &'a Constants) -> Self {
        let h = spec.horizon / params.steps as f64;
        let theta = spec.pair.theta();
        Derived {
            h,
            theta,
            b0: FracWeights::new(&spec.pair, h, 1).map_or(f64::NAN, |w| w.b0()),
            ell_l1_horizon: spec.pair.ell_l1(spec.horizon),
            c_v: constants.c_v,
            c_g: constants.c_g,
            tau: constants.tau_window,
            notes: &constants.notes,
        }
    }
}

#[derive(Serialize)]
struct SolveManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: &'a str,
    problem: &'a ProblemConfig,
    params: &'a SolverParams,
    derived: Derived<'a>,
    validation: &'a ValidationReport,
    steps_requested: usize,
    steps_completed: usize,
    iterations: Vec<usize>,
    stats: &'a [StepStats],
    failure: Option<String>,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Diagnostics {
    max_residual: Option<f64>,
    energy: EnergyReport,
    chain_rule: Vec<ChainRuleReport>,
    lq: Option<LqReport>,
    increments: Vec<IncrementRow>,
    errors: Vec<String>,
}

fn diagnostics(setup: &Setup, traj: &Trajectory) -> Diagnostics {
    let mut errors = Vec::new();
    let max_residual = match residual(setup, traj) {
        Ok(r) => Some(r.into_iter().fold(0.0, f64::max)),
        Err(e) => {
            errors.push(format!("residual: {e}"));
            None
        }
    };
    let mut chain_rule = Vec::new();
    for variant in [ChainRuleVariant::Identity, ChainRuleVariant::Regularized] {
        match chain_rule_check(setup, traj, variant) {
            Ok(r) => chain_rule.push(r),
            Err(e) => errors.push(format!("chain rule ({variant:?}): {e}")),
        }
    }
    let lq = lq_bound(setup, traj).map_err(|e| errors.push(format!("lq bound: {e}"))).ok();
    let lags: Vec<usize> = (0..).map(|k| 1usize << k).take_while(|&l| l < traj.len()).collect();
    Diagnostics {
        max_residual,
        energy: energy_report(setup, traj),
        chain_rule,
        lq,
        increments: increment_modulus(setup, traj, &lags),
        errors,
    }
}

/// Runs the solver and writes `trajectory.csv`, `manifest.json`,
/// `diagnostics.json` and the optional snapshot and plot files. A failed step
/// still writes the completed part of the trajectory and the manifest.
pub fn solve(opts: &RunOptions) -> Result<PathBuf, CliError> {
    let run = load(&opts.config)?;
    let verbosity = run.config.output.verbosity;
    let params = &run.config.solver;
    let setup = Setup::new(&run.spec, params).map_err(|e| match e {
        fracdnl::Error::Parameter(_) | fracdnl::Error::Shape { .. } => CliError::Invalid(e.to_string()),
        other => CliError::from_core(other),
    })?;
    let dir = output_dir(opts, &run.config)?;
    info!("solving with {} modes and {} steps", params.modes, params.steps);
    let (traj, failure) = setup.run();
    for (m, s) in traj.stats.iter().enumerate() {
        debug!("step {m}: {} iterations, residual {:e}, {:?}", s.iterations, s.residual, s.method);
    }
    let mut files = vec!["trajectory.csv".to_string()];
    formats::write_atomic(&dir.join("trajectory.csv"), formats::trajectory_csv(&traj).as_bytes())?;
    if !run.config.output.snapshots.is_empty() {
        let steps = formats::snapshot_steps(&setup, &traj, &run.config.output.snapshots);
        let csv = formats::snapshots_csv(&setup, &traj, &steps)?;
        formats::write_atomic(&dir.join("snapshots.csv"), csv.as_bytes())?;
        files.push("snapshots.csv".into());
    }
    let diag = failure.is_none().then(|| diagnostics(&setup, &traj));
    if let Some(d) = &diag {
        formats::write_json(&dir.join("diagnostics.json"), d)?;
        files.push("diagnostics.json".into());
    }
    if opts.emit_plot_data {
        let mut plot = PlotData::new();
        for (m, (t, u)) in traj.times.iter().zip(&traj.u).enumerate() {
            for (i, v) in u.iter().enumerate() {
                plot.push("u", m, *t, i + 1, *v);
            }
            for (i, v) in traj.z[m].iter().enumerate() {
                plot.push("z", m, *t, i + 1, *v);
            }
        }
        if let Some(d) = &diag {
            for (m, t) in d.energy.times.iter().enumerate() {
                plot.push("energy_lhs", m, *t, 0, d.energy.lhs[m]);
                plot.push("energy_bound", m, *t, 0, d.energy.bound[m]);
            }
        }
        formats::write_atomic(&dir.join("plot_data.csv"), plot.into_string().as_bytes())?;
        files.push("plot_data.csv".into());
    }
    files.push("manifest.json".into());
    let manifest = SolveManifest {
        tool: "fracdnl",
        version: VERSION,
        command: "solve",
        config_hash: &run.hash,
        problem: &run.problem,
        params,
        derived: Derived::new(&run.spec, params, &setup.constants),
        validation: &setup.validation,
        steps_requested: params.steps,
        steps_completed: traj.len(),
        iterations: traj.stats.iter().map(|s| s.iterations).collect(),
        stats: &traj.stats,
        failure: failure.as_ref().map(ToString::to_string),
        files,
    };
    formats::write_json(&dir.join("manifest.json"), &manifest)?;
    if let Some(e) = failure {
        return Err(CliError::Solver(e));
    }
    let energy = diag.as_ref().map_or(false, |d| d.energy.holds());
    say(
        verbosity,
        format!(
            "solved {} steps; energy inequality {}; wrote {}",
            traj.len(),
            if energy { "holds" } else { "FAILS" },
            dir.display()
        ),
    );
    Ok(dir)
}

#[derive(Serialize)]
#[serde(untagged)]
enum StudyResult {
    Cauchy(StudyTable),
    Uniqueness(UniquenessTable),
    Mosco(MoscoTable),
}

#[derive(Serialize)]
struct StudyManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    kind: &'static str,
    config_hash: &'a str,
    problem: &'a ProblemConfig,
    params: &'a SolverParams,
    values: &'a [f64],
    derived: Derived<'a>,
    /// `tau` of the uniqueness windows, when they exist.
    tau: Option<f64>,
    run_hashes: &'a [String],
    result: &'a StudyResult,
    files: Vec<String>,
}

fn run_hash(config_hash: &str, params: &SolverParams, extra: &str) -> Result<String, CliError> {
    let p = serde_json::to_string(params).map_err(|e| CliError::Format { what: "params", message: e.to_string() })?;
    Ok(config::sha256_hex(format!("{config_hash}\n{p}\n{extra}").as_bytes()))
}

fn integers(values: &[f64], what: &str) -> Result<Vec<usize>, CliError> {
    values
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.fract() == 0.0 && v <= 1e9 {
                Ok(v as usize)
            } else {
                Err(CliError::Invalid(format!("{what} values must be positive integers, got {v}")))
            }
        })
        .collect()
}

fn study_error(e: fracdnl::Error) -> CliError {
    match e {
        fracdnl::Error::Parameter(_) | fracdnl::Error::MissingConstant(_) => CliError::Invalid(e.to_string()),
        other => CliError::from_core(other),
    }
}

/// Runs a parameter study and writes `study.csv` and `manifest.json`.
pub fn study(opts: &RunOptions) -> Result<PathBuf, CliError> {
    let run = load(&opts.config)?;
    let section = run.config.study.clone().unwrap_or_default();
    let kind = opts
        .kind
        .or(section.kind)
        .ok_or_else(|| CliError::Invalid("no study kind: set `[study] kind` or pass --kind".into()))?;
    let values = if section.values.is_empty() { kind.default_values() } else { section.values.clone() };
    let params = &run.config.solver;
    let basis = Eigenbasis::new(run.spec.domain, params.modes).map_err(study_error)?;
    let report = validate_spec(&run.spec, &basis);
    if !report.is_ok() {
        return Err(CliError::Validation(report.violations));
    }
    let constants = fracdnl::problem::constants(&run.spec, &basis);
    let dir = output_dir(opts, &run.config)?;
    info!("{} study over {} values", kind.name(), values.len());
    let (result, hashes, csv) = match kind {
        StudyChoice::Uniqueness => {
            let table = continuation::uniqueness_experiment(&run.spec, params, &values).map_err(study_error)?;
            let hashes = values
                .iter()
                .map(|d| run_hash(&run.hash, params, &format!("delta={}", formats::num(*d))))
                .collect::<Result<Vec<_>, _>>()?;
            let csv = formats::uniqueness_csv(&table, &hashes);
            (StudyResult::Uniqueness(table), hashes, csv)
        }
        StudyChoice::Mosco => {
            let (u0, v0) = run.spec.initial_nodal(&basis).map_err(study_error)?;
            let samples = vec![u0.clone(), u0.iter().map(|x| 2.0 * x).collect(), v0];
            let graph: &ScalarGraph = &run.spec.alpha;
            let table = continuation::mosco_desk_check(graph, &values, &basis, &samples).map_err(study_error)?;
            let csv = formats::mosco_csv(&table);
            (StudyResult::Mosco(table), Vec::new(), csv)
        }
        StudyChoice::Eps | StudyChoice::Nu | StudyChoice::N | StudyChoice::H => {
            let table = match kind {
                StudyChoice::Eps => continuation::eps_study(&run.spec, params, &values),
                StudyChoice::Nu => continuation::nu_study(&run.spec, params, &values),
                StudyChoice::N => continuation::n_study(&run.spec, params, &integers(&values, "n")?),
                _ => continuation::h_study(&run.spec, params, &integers(&values, "h")?),
            }
            .map_err(study_error)?;
            let hashes = table.params.iter().map(|p| run_hash(&run.hash, p, "")).collect::<Result<Vec<_>, _>>()?;
            let csv = formats::study_csv(&table, &hashes);
            (StudyResult::Cauchy(table), hashes, csv)
        }
    };
    formats::write_atomic(&dir.join("study.csv"), csv.as_bytes())?;
    let mut files = vec!["study.csv".to_string()];
    if opts.emit_plot_data {
        let mut plot = PlotData::new();
        match &result {
            StudyResult::Cauchy(t) => {
                for (k, r) in t.rows.iter().enumerate() {
                    if let Some(g) = r.gap {
                        plot.push("gap_l2", k, r.to, 0, g.l2);
                        plot.push("gap_l32", k, r.to, 0, g.l32);
                    }
                }
            }
            StudyResult::Uniqueness(t) => {
                for (k, r) in t.rows.iter().enumerate() {
                    plot.push("difference", k, r.delta, 0, r.total);
                }
            }
            StudyResult::Mosco(t) => {
                for (k, r) in t.rows.iter().enumerate() {
                    for (s, v) in r.values.iter().enumerate() {
                        plot.push("potential", k, r.eps, s, *v);
                    }
                }
            }
        }
        formats::write_atomic(&dir.join("plot_data.csv"), plot.into_string().as_bytes())?;
        files.push("plot_data.csv".into());
    }
    files.push("manifest.json".into());
    let tau = match &result {
        StudyResult::Uniqueness(t) => Some(t.tau),
        _ => constants.tau_window,
    };
    let manifest = StudyManifest {
        tool: "fracdnl",
        version: VERSION,
        command: "study",
        kind: kind.name(),
        config_hash: &run.hash,
        problem: &run.problem,
        params,
        values: &values,
        derived: Derived::new(&run.spec, params, &constants),
        tau,
        run_hashes: &hashes,
        result: &result,
        files,
    };
    formats::write_json(&dir.join("manifest.json"), &manifest)?;
    if let StudyResult::Cauchy(t) = &result {
        if t.is_partial() {
            return Err(CliError::Partial(t.failures.iter().map(|(v, m)| format!("{v}: {m}")).collect()));
        }
    }
    say(run.config.output.verbosity, format!("{} study done; wrote {}", kind.name(), dir.display()));
    Ok(dir)
}

/// Checks the standing assumptions; violations are returned as
/// [`CliError::Validation`].
pub fn validate(opts: &RunOptions) -> Result<ValidationReport, CliError> {
    let run = load(&opts.config)?;
    run.config.solver.check().map_err(|e| CliError::Invalid(e.to_string()))?;
    let basis = Eigenbasis::new(run.spec.domain, run.config.solver.modes).map_err(|e| CliError::Invalid(e.to_string()))?;
    let report = validate_spec(&run.spec, &basis);
    let verbosity = run.config.output.verbosity;
    for w in &report.warnings {
        say(verbosity, format!("warning: {w}"));
    }
    if !report.is_ok() {
        return Err(CliError::Validation(report.violations));
    }
    say(verbosity, "ok");
    Ok(report)
}

pub fn presets() -> String {
    let about = |name: &str| match name {
        "stefan" => "two-phase Stefan problem, alpha = id + H, beta = arctan",
        "porous_medium" => "porous-medium problem, alpha = |r|^(p-2) r with p in (1, 2) (default p = 1.5)",
        "hele_shaw" => "Hele-Shaw problem, alpha = H, beta = arctan",
        "linear_heat" => "linear subdiffusion, alpha = id, beta = 0, g = 0",
        "lipschitz_demo" => "alpha = id, beta = arctan: the uniqueness regime",
        _ => "",
    };
    PRESET_NAMES.iter().map(|n| format!("{n:<16}{}\n", about(n))).collect()
}
