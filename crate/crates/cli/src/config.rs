//! Run configuration files.
//!
//! A configuration is a TOML document with the tables `[problem]`,
//! `[solver]`, `[study]` and `[output]`. Unknown keys are rejected. The
//! grammar is documented in `docs/formats.md`.

use std::path::{Path, PathBuf};

use fracdnl::graphs::{parse_breakpoints, GraphSpec};
use fracdnl::presets;
use fracdnl::problem::ProblemConfig;
use fracdnl::solver::SolverParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Either a named preset or an inline problem.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Exponent of `porous_medium`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ProblemConfig>,
    /// Breakpoint file replacing `alpha`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StudyChoice {
    Eps,
    Nu,
    N,
    H,
    Uniqueness,
    Mosco,
}

impl StudyChoice {
    pub fn name(self) -> &'static str {
        match self {
            StudyChoice::Eps => "eps",
            StudyChoice::Nu => "nu",
            StudyChoice::N => "n",
            StudyChoice::H => "h",
            StudyChoice::Uniqueness => "uniqueness",
            StudyChoice::Mosco => "mosco",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            StudyChoice::Eps | StudyChoice::Nu => vec![0.1, 0.05, 0.025, 0.0125, 0.00625],
            StudyChoice::N => vec![4.0, 8.0, 16.0, 32.0],
            StudyChoice::H => vec![64.0, 128.0, 256.0, 512.0],
            StudyChoice::Uniqueness => vec![0.1, 0.05, 0.025, 0.0125],
            StudyChoice::Mosco => vec![1.0, 0.1, 0.01, 0.001],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<StudyChoice>,
    /// Parameter values; `eps`, `nu` and `mosco` take decreasing values,
    /// `n` and `h` increasing integers, `uniqueness` perturbation sizes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    Quiet,
    #[default]
    Normal,
    Verbose,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Times at which nodal fields are written to `snapshots.csv`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub verbosity: Verbosity,
}

/// Syntax or schema error at a 1-based line.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

pub fn parse(text: &str) -> Result<RunConfig, ParseError> {
    toml::from_str(text).map_err(|e: toml::de::Error| {
        let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ParseError { line, message: e.message().trim().to_string() }
    })
}

/// Canonical TOML form; `parse(&to_toml(c)) == c`.
pub fn to_toml(config: &RunConfig) -> Result<String, CliError> {
    toml::to_string(config).map_err(|e| CliError::Format { what: "configuration", message: e.to_string() })
}

impl RunConfig {
    pub fn preset(name: &str) -> Self {
        RunConfig {
            problem: ProblemSection { preset: Some(name.to_string()), ..ProblemSection::default() },
            solver: SolverParams::default(),
            study: None,
            output: OutputSection::default(),
        }
    }

    /// The problem this configuration describes, with breakpoint files read
    /// relative to `base`.
    pub fn resolve_problem(&self, base: &Path) -> Result<ProblemConfig, CliError> {
        let p = &self.problem;
        let mut cfg = match (&p.preset, &p.spec) {
            (Some(name), None) => presets::preset(name, p.p).map_err(|e| CliError::Invalid(e.to_string()))?,
            (None, Some(spec)) => {
                if p.p.is_some() {
                    return Err(CliError::Invalid("`problem.p` only applies to presets".into()));
                }
                spec.clone()
            }
            (Some(_), Some(_)) => return Err(CliError::Invalid("give either `problem.preset` or `[problem.spec]`, not both".into())),
            (None, None) => return Err(CliError::Invalid("`[problem]` needs `preset` or a `[problem.spec]` table".into())),
        };
        if let Some(file) = &p.alpha_file {
            cfg.alpha = load_graph(&base.join(file))?;
        }
        if let Some(file) = &p.beta_file {
            cfg.beta = load_graph(&base.join(file))?;
        }
        Ok(cfg)
    }
}

fn load_graph(path: &Path) -> Result<GraphSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let points = parse_breakpoints(&text).map_err(|e| match e {
        fracdnl::Error::Parse { line, message } => CliError::Parse { path: path.to_path_buf(), line, message },
        other => CliError::Invalid(format!("{}: {other}", path.display())),
    })?;
    Ok(GraphSpec::PiecewiseLinear { points: points.into_iter().map(|(r, y)| [r, y]).collect() })
}

/// Hex SHA-256 over the canonical configuration and the resolved problem.
pub fn config_hash(config: &RunConfig, problem: &ProblemConfig) -> Result<String, CliError> {
    let mut text = to_toml(config)?;
    text.push_str("\n# resolved\n");
    text.push_str(
        &toml::to_string(problem).map_err(|e| CliError::Format { what: "problem", message: e.to_string() })?,
    );
    Ok(sha256_hex(text.as_bytes()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
