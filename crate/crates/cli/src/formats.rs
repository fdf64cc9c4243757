//! Output files. Numbers are written as `{:.16e}` (17 significant digits),
//! lines end in `\n`, and every file is written to a temporary sibling and
//! renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use fracdnl::continuation::{MoscoTable, StudyTable, UniquenessTable};
use fracdnl::solver::{Setup, Trajectory};
use serde::Serialize;

use crate::error::CliError;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Format { what: "json", message: e.to_string() })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// `m,t,z_1..z_n,u_1..u_n`
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.u.first().map_or(0, Vec::len);
    let mut out = String::from("m,t");
    for prefix in ["z", "u"] {
        for i in 1..=n {
            let _ = write!(out, ",{prefix}_{i}");
        }
    }
    out.push('\n');
    for (m, ((t, z), u)) in traj.times.iter().zip(&traj.z).zip(&traj.u).enumerate() {
        let _ = write!(out, "{m},{}", num(*t));
        for v in z.iter().chain(u) {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

/// Step closest to each requested time, among the completed ones.
pub fn snapshot_steps(setup: &Setup, traj: &Trajectory, times: &[f64]) -> Vec<usize> {
    let last = traj.u.len().saturating_sub(1);
    let mut steps: Vec<usize> = times
        .iter()
        .filter(|t| t.is_finite() && **t >= 0.0)
        .map(|t| ((t / setup.h()).round() as usize).min(last))
        .collect();
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// `m,t,x,y,u,v,w` with `v = alpha_nu_eps(u)` and `w = beta_eps(u)` at
/// every quadrature node.
pub fn snapshots_csv(setup: &Setup, traj: &Trajectory, steps: &[usize]) -> Result<String, CliError> {
    let mut out = String::from("m,t,x,y,u,v,w\n");
    for &m in steps {
        let u = &traj.u[m];
        let nodal = setup.nodal_u(u);
        let v = setup.nodal_v(u).map_err(CliError::from_core)?;
        let w = setup.nodal_w(u).map_err(CliError::from_core)?;
        for (k, x) in setup.basis.nodes().iter().enumerate() {
            let _ = writeln!(
                out,
                "{m},{},{},{},{},{},{}",
                num(traj.times[m]),
                num(x[0]),
                num(x[1]),
                num(nodal[k]),
                num(v[k]),
                num(w[k])
            );
        }
    }
    Ok(out)
}

/// Long-format rows `series,step,t,index,value`.
#[derive(Default)]
pub struct PlotData {
    text: String,
}

impl PlotData {
    pub fn new() -> Self {
        PlotData { text: String::from("series,step,t,index,value\n") }
    }

    pub fn push(&mut self, series: &str, step: usize, t: f64, index: usize, value: f64) {
        let _ = writeln!(self.text, "{series},{step},{},{index},{}", num(t), num(value));
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// `from,to,l2,l32,max_abs,ratio_l2,ratio_l32,run_hash`; empty cells mark
/// rows next to a failed run.
pub fn study_csv(table: &StudyTable, run_hashes: &[String]) -> String {
    let mut out = String::from("from,to,l2,l32,max_abs,ratio_l2,ratio_l32,run_hash\n");
    for (k, r) in table.rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(r.from),
            num(r.to),
            opt(r.gap.map(|g| g.l2)),
            opt(r.gap.map(|g| g.l32)),
            opt(r.gap.map(|g| g.max_abs)),
            opt(r.ratio_l2),
            opt(r.ratio_l32),
            run_hashes.get(k + 1).map(String::as_str).unwrap_or("")
        );
    }
    out
}

/// `delta,total,ratio,window_1..window_k,run_hash`
pub fn uniqueness_csv(table: &UniquenessTable, run_hashes: &[String]) -> String {
    let windows = table.window_edges.len().saturating_sub(1);
    let mut out = String::from("delta,total,ratio");
    for k in 1..=windows {
        let _ = write!(out, ",window_{k}");
    }
    out.push_str(",run_hash\n");
    for (k, r) in table.rows.iter().enumerate() {
        let _ = write!(out, "{},{},{}", num(r.delta), num(r.total), opt(r.ratio));
        for w in &r.windows {
            let _ = write!(out, ",{}", num(*w));
        }
        let _ = writeln!(out, ",{}", run_hashes.get(k).map(String::as_str).unwrap_or(""));
    }
    out
}

/// `eps,sample,value,perturbed,limit`
pub fn mosco_csv(table: &MoscoTable) -> String {
    let mut out = String::from("eps,sample,value,perturbed,limit\n");
    for r in &table.rows {
        for (s, ((v, p), l)) in r.values.iter().zip(&r.perturbed).zip(&table.limit).enumerate() {
            let _ = writeln!(out, "{},{s},{},{},{}", num(r.eps), num(*v), num(*p), num(*l));
        }
    }
    out
}
