//! Parameter studies: Cauchy tables in eps, nu, n and h, graph-convergence
//! desk checks and the perturbation experiment behind uniqueness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::ScalarGraph;
use crate::problem::{InitialField, ProblemSpec};
use crate::solver::{solve_partial, Solution, SolverParams, Trajectory};
use crate::spectral::Eigenbasis;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Eps,
    Nu,
    N,
    H,
}

/// Distance between two consecutive runs of a study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    /// `L^2(0,T;H)`
    pub l2: f64,
    /// `L^{3/2}(0,T;H)`
    pub l32: f64,
    /// Largest modal difference at any compared time.
    pub max_abs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyRow {
    pub from: f64,
    pub to: f64,
    pub gap: Option<Gap>,
    /// `gap.l2` over the previous row's `gap.l2`.
    pub ratio_l2: Option<f64>,
    pub ratio_l32: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub kind: StudyKind,
    pub values: Vec<f64>,
    pub params: Vec<SolverParams>,
    pub rows: Vec<CauchyRow>,
    /// `nu |u|^2_{L^2(0,T;H)}` per run; only filled by the nu study.
    pub nu_mass: Vec<Option<f64>>,
    /// Failed runs as `(value, message)`.
    pub failures: Vec<(f64, String)>,
}

impl StudyTable {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    /// Whether every L^2 gap is below the previous one by at least `factor`.
    pub fn contracts(&self, factor: f64) -> bool {
        !self.rows.is_empty()
            && self
                .rows
                .iter()
                .skip(1)
                .all(|r| matches!(r.ratio_l2, Some(q) if q <= factor))
    }
}

fn time_norms(diffs: impl Iterator<Item = f64>, h: f64) -> (f64, f64) {
    let (mut s2, mut s32) = (0.0, 0.0);
    for d in diffs {
        s2 += h * d * d;
        s32 += h * d.powf(1.5);
    }
    (s2.sqrt(), s32.powf(2.0 / 3.0))
}

/// Compares `a` and `b` at steps `(m * stride_a, m * stride_b)` for `m >= 1`,
/// padding the shorter modal vector with zeros.
fn gap(a: &Trajectory, b: &Trajectory, stride_a: usize, stride_b: usize, h: f64) -> Gap {
    let count = a.len() / stride_a;
    let mut max_abs = 0.0f64;
    let norms: Vec<f64> = (1..=count)
        .map(|m| {
            let (x, y) = (&a.u[m * stride_a], &b.u[m * stride_b]);
            let n = x.len().max(y.len());
            let mut s = 0.0;
            for i in 0..n {
                let d = x.get(i).copied().unwrap_or(0.0) - y.get(i).copied().unwrap_or(0.0);
                max_abs = max_abs.max(d.abs());
                s += d * d;
            }
            s.sqrt()
        })
        .collect();
    let (l2, l32) = time_norms(norms.into_iter(), h);
    Gap { l2, l32, max_abs }
}

fn run_all(spec: &ProblemSpec, params: &[SolverParams]) -> Vec<Result<Solution>> {
    params
        .par_iter()
        .map(|p| {
            let sol = solve_partial(spec, p)?;
            match &sol.failure {
                Some(e) => Err(Error::param(format!("run stopped early: {e}"))),
                None => Ok(sol),
            }
        })
        .collect()
}

fn table(kind: StudyKind, values: Vec<f64>, params: Vec<SolverParams>, runs: &[Result<Solution>]) -> StudyTable {
    let mut rows: Vec<CauchyRow> = Vec::new();
    for k in 1..runs.len() {
        let g = match (&runs[k - 1], &runs[k]) {
            (Ok(a), Ok(b)) => {
                let (sa, sb) = (a.trajectory.len(), b.trajectory.len());
                let common = sa.min(sb);
                let h = a.setup.spec.horizon / common as f64;
                Some(gap(&a.trajectory, &b.trajectory, sa / common, sb / common, h))
            }
            _ => None,
        };
        let prev = rows.last().and_then(|r| r.gap);
        let ratio = |f: fn(&Gap) -> f64| match (prev, g) {
            (Some(p), Some(c)) if f(&p) > 0.0 => Some(f(&c) / f(&p)),
            _ => None,
        };
        rows.push(CauchyRow {
            from: values[k - 1],
            to: values[k],
            gap: g,
            ratio_l2: ratio(|g| g.l2),
            ratio_l32: ratio(|g| g.l32),
        });
    }
    let failures = runs
        .iter()
        .zip(&values)
        .filter_map(|(r, v)| r.as_ref().err().map(|e| (*v, e.to_string())))
        .collect();
    StudyTable { kind, values, params, rows, nu_mass: Vec::new(), failures }
}

fn check_order(values: &[f64], decreasing: bool) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::param("a study needs at least two parameter values"));
    }
    let ok = values.windows(2).all(|w| if decreasing { w[1] < w[0] } else { w[1] > w[0] });
    if ok {
        Ok(())
    } else {
        let dir = if decreasing { "decreasing" } else { "increasing" };
        Err(Error::param(format!("study values must be strictly {dir}")))
    }
}

pub fn eps_study(spec: &ProblemSpec, params: &SolverParams, eps: &[f64]) -> Result<StudyTable> {
    check_order(eps, true)?;
    let ps: Vec<SolverParams> = eps.iter().map(|&e| SolverParams { eps: e, ..params.clone() }).collect();
    let runs = run_all(spec, &ps);
    Ok(table(StudyKind::Eps, eps.to_vec(), ps, &runs))
}

pub fn nu_study(spec: &ProblemSpec, params: &SolverParams, nu: &[f64]) -> Result<StudyTable> {
    check_order(nu, true)?;
    let ps: Vec<SolverParams> = nu.iter().map(|&v| SolverParams { nu: v, ..params.clone() }).collect();
    let runs = run_all(spec, &ps);
    let mut t = table(StudyKind::Nu, nu.to_vec(), ps, &runs);
    t.nu_mass = runs
        .iter()
        .map(|r| {
            r.as_ref().ok().map(|s| {
                let h = s.setup.h();
                let mass: f64 = s.trajectory.u.iter().skip(1).map(|u| h * u.iter().map(|a| a * a).sum::<f64>()).sum();
                s.setup.params.nu * mass
            })
        })
        .collect();
    Ok(t)
}

pub fn n_study(spec: &ProblemSpec, params: &SolverParams, modes: &[usize]) -> Result<StudyTable> {
    let values: Vec<f64> = modes.iter().map(|&n| n as f64).collect();
    check_order(&values, false)?;
    let ps: Vec<SolverParams> = modes.iter().map(|&n| SolverParams { modes: n, ..params.clone() }).collect();
    let runs = run_all(spec, &ps);
    Ok(table(StudyKind::N, values, ps, &runs))
}

/// Each step count must divide the next; runs are compared on the coarser grid.
pub fn h_study(spec: &ProblemSpec, params: &SolverParams, steps: &[usize]) -> Result<StudyTable> {
    let values: Vec<f64> = steps.iter().map(|&m| m as f64).collect();
    check_order(&values, false)?;
    if steps.windows(2).any(|w| w[1] % w[0] != 0) {
        return Err(Error::param("each step count must divide the next"));
    }
    let ps: Vec<SolverParams> = steps.iter().map(|&m| SolverParams { steps: m, ..params.clone() }).collect();
    let runs = run_all(spec, &ps);
    Ok(table(StudyKind::H, values, ps, &runs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoscoRow {
    pub eps: f64,
    /// `Psi_{gamma_eps}(y)` per sample.
    pub values: Vec<f64>,
    /// The same functional on an oscillating perturbation of each sample.
    pub perturbed: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoscoTable {
    pub graph: String,
    /// `Psi_gamma(y)` per sample.
    pub limit: Vec<f64>,
    pub rows: Vec<MoscoRow>,
    /// Nondecreasing in decreasing eps and bounded by the limit.
    pub monotone: bool,
    /// Heuristic liminf probe: last row's perturbed value minus the limit,
    /// per sample.
    pub liminf_gap: Vec<f64>,
}

const MOSCO_TOL: f64 = 1e-10;

/// Yosida potentials of `graph` on nodal samples, for decreasing `eps`.
///
/// Row `k` perturbs every sample by `0.5 e_j` with `j` the mode of index
/// `min(k + 1, n - 1)`, which only converges weakly.
pub fn mosco_desk_check(graph: &ScalarGraph, eps: &[f64], basis: &Eigenbasis, samples: &[Vec<f64>]) -> Result<MoscoTable> {
    check_order(eps, true)?;
    for s in samples {
        basis.check_len(s, basis.quad_len())?;
    }
    let functional = |y: &[f64], e: Option<f64>| -> Result<f64> {
        let vals = y
            .iter()
            .map(|&r| match e {
                Some(e) => graph.yosida_potential(e, r),
                None => graph.potential(r),
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(basis.integrate(&vals))
    };
    let limit = samples.iter().map(|y| functional(y, None)).collect::<Result<Vec<f64>>>()?;
    let mut rows = Vec::with_capacity(eps.len());
    for (k, &e) in eps.iter().enumerate() {
        let mode = (k + 1).min(basis.n() - 1);
        let wiggle: Vec<f64> = basis.nodes().iter().map(|&x| 0.5 * basis.eval_mode(mode, x)).collect();
        let values = samples.iter().map(|y| functional(y, Some(e))).collect::<Result<Vec<f64>>>()?;
        let perturbed = samples
            .iter()
            .map(|y| {
                let p: Vec<f64> = y.iter().zip(&wiggle).map(|(a, b)| a + b).collect();
                functional(&p, Some(e))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(MoscoRow { eps: e, values, perturbed });
    }
    let tol = |v: f64| MOSCO_TOL * (1.0 + v.abs());
    let monotone = rows.windows(2).all(|w| w[0].values.iter().zip(&w[1].values).all(|(a, b)| *b >= a - tol(*a)))
        && rows.iter().all(|r| r.values.iter().zip(&limit).all(|(v, l)| *v <= l + tol(*l)));
    let liminf_gap = rows
        .last()
        .map(|r| r.perturbed.iter().zip(&limit).map(|(p, l)| p - l).collect())
        .unwrap_or_default();
    Ok(MoscoTable { graph: graph.name().to_string(), limit, rows, monotone, liminf_gap })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessRow {
    pub delta: f64,
    /// `|u_+ - u_-|_{L^2(window;H)}` per window.
    pub windows: Vec<f64>,
    pub total: f64,
    /// `total` over the previous row's `total`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessTable {
    pub tau: f64,
    pub window_edges: Vec<f64>,
    pub rows: Vec<UniquenessRow>,
    /// Largest `N_k / (sum_{j<k} N_j^2)^(1/2)` over windows and rows.
    pub gronwall_constant: Option<f64>,
    /// Least-squares slope of `log total` against `log delta`.
    pub exponent: Option<f64>,
}

fn perturbed(spec: &ProblemSpec, delta: f64) -> ProblemSpec {
    let mut s = spec.clone();
    if delta != 0.0 {
        s.u0 = InitialField::Sum {
            parts: vec![spec.u0.clone(), InitialField::Mode { index: 1, amplitude: delta }],
        };
    }
    s
}

/// Difference of the runs started from `u0 + delta e_1` and `u0 - delta e_1`.
pub fn perturbation_pair(spec: &ProblemSpec, params: &SolverParams, delta: f64) -> Result<(Solution, Solution)> {
    let (a, b) = rayon::join(
        || crate::solver::solve(&perturbed(spec, delta), params),
        || crate::solver::solve(&perturbed(spec, -delta), params),
    );
    Ok((a?, b?))
}

pub fn uniqueness_experiment(spec: &ProblemSpec, params: &SolverParams, deltas: &[f64]) -> Result<UniquenessTable> {
    let basis = Eigenbasis::new(spec.domain, params.modes)?;
    let constants = crate::problem::constants(spec, &basis);
    let tau = constants.tau_window.ok_or_else(|| {
        Error::MissingConstant(format!("no uniqueness window: {}", constants.notes.join("; ")))
    })?;
    if deltas.is_empty() || deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(Error::param("perturbation sizes must be finite and nonnegative"));
    }
    let mut edges = vec![0.0];
    while *edges.last().unwrap() < spec.horizon {
        let next = (edges.last().unwrap() + tau).min(spec.horizon);
        edges.push(next);
    }
    let pairs: Vec<Result<(Solution, Solution)>> =
        deltas.par_iter().map(|&d| perturbation_pair(spec, params, d)).collect();
    let mut rows: Vec<UniquenessRow> = Vec::with_capacity(deltas.len());
    let mut gronwall: Option<f64> = None;
    for (&delta, pair) in deltas.iter().zip(pairs) {
        let (a, b) = pair?;
        let h = a.setup.h();
        let mut windows = vec![0.0; edges.len() - 1];
        for m in 1..a.trajectory.u.len() {
            let t = a.trajectory.times[m];
            let w = edges.windows(2).position(|e| t > e[0] && t <= e[1] + 1e-12 * tau).unwrap_or(windows.len() - 1);
            let d: f64 = a.trajectory.u[m].iter().zip(&b.trajectory.u[m]).map(|(x, y)| (x - y) * (x - y)).sum();
            windows[w] += h * d;
        }
        let windows: Vec<f64> = windows.into_iter().map(f64::sqrt).collect();
        let total = windows.iter().map(|w| w * w).sum::<f64>().sqrt();
        let mut acc = 0.0f64;
        for (k, w) in windows.iter().enumerate() {
            if k > 0 && acc > 0.0 {
                let c = w / acc.sqrt();
                gronwall = Some(gronwall.map_or(c, |g: f64| g.max(c)));
            }
            acc += w * w;
        }
        let ratio = rows.last().filter(|r| r.total > 0.0).map(|r| total / r.total);
        rows.push(UniquenessRow { delta, windows, total, ratio });
    }
    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.delta > 0.0 && r.total > 0.0)
        .map(|r| (r.delta.ln(), r.total.ln()))
        .collect();
    let exponent = (fit.len() >= 2).then(|| {
        let n = fit.len() as f64;
        let (mx, my) = (fit.iter().map(|p| p.0).sum::<f64>() / n, fit.iter().map(|p| p.1).sum::<f64>() / n);
        let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = fit.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    });
    Ok(UniquenessTable { tau, window_edges: edges, rows, gronwall_constant: gronwall, exponent })
}
