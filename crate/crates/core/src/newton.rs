//! Damped Newton iteration with a relaxed fixed-point fallback, shared by the
//! Galerkin inverse and the time stepper.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Newton,
    Relaxed,
}

/// How a nonlinear solve terminated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Newton,
    Relaxed,
}

#[derive(Clone, Debug)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub method: Method,
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1.0 / 1024.0;
const RELAXED_BUDGET_FACTOR: usize = 200;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Objective whose gradient is the residual; used as the line-search merit.
pub(crate) type Energy<'a> = &'a dyn Fn(&[f64]) -> Result<f64>;

/// Solves `residual(x) = 0` for a strongly monotone map.
///
/// `tau` is the step of the fallback iteration `x <- x - tau * residual(x)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn solve<R, J>(
    residual: R,
    jacobian: J,
    energy: Option<Energy<'_>>,
    x0: Vec<f64>,
    tol: f64,
    budget: usize,
    tau: f64,
    kind: SolverKind,
) -> Result<Outcome>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    J: Fn(&[f64]) -> Result<DMatrix<f64>>,
{
    let mut x = x0;
    let mut r = residual(&x)?;
    let mut rn = norm(&r);
    let mut history = vec![rn];
    let mut iterations = 0;
    if rn <= tol {
        return Ok(Outcome { x, iterations, residual: rn, method: Method::Newton });
    }
    if kind == SolverKind::Newton {
        let mut e = match energy {
            Some(f) => f(&x)?,
            None => 0.0,
        };
        while iterations < budget {
            iterations += 1;
            let jac = jacobian(&x)?;
            let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
            let mut dir: Vec<f64> = match jac.lu().solve(&rhs) {
                Some(d) => d.iter().copied().collect(),
                None if energy.is_some() => rhs.iter().copied().collect(),
                None => break,
            };
            let mut slope: f64 = dir.iter().zip(&r).map(|(d, g)| d * g).sum();
            if energy.is_some() && !(slope < 0.0) {
                dir = r.iter().map(|g| -g).collect();
                slope = -rn * rn;
            }
            let min_step = if energy.is_some() { 1e-12 } else { MIN_STEP };
            let mut t = 1.0;
            let accepted = loop {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                let tr = residual(&trial)?;
                let tn = norm(&tr);
                let te = match energy {
                    Some(f) => f(&trial)?,
                    None => 0.0,
                };
                let decrease = tn <= rn * (1.0 - ARMIJO * t).sqrt();
                let accept = match energy {
                    // near convergence energy differences drop below rounding
                    Some(_) => te <= e + ARMIJO * t * slope || ((te - e).abs() <= 1e-13 * (1.0 + e.abs()) && decrease),
                    None => decrease,
                };
                if accept || tn <= tol {
                    break Some((trial, tr, tn, te));
                }
                t *= 0.5;
                if t < min_step {
                    break None;
                }
            };
            let Some((nx, nr, nn, ne)) = accepted else { break };
            x = nx;
            r = nr;
            rn = nn;
            e = ne;
            history.push(rn);
            if rn <= tol {
                return Ok(Outcome { x, iterations, residual: rn, method: Method::Newton });
            }
        }
    }
    let relaxed_budget = budget * RELAXED_BUDGET_FACTOR;
    for _ in 0..relaxed_budget {
        iterations += 1;
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi -= tau * ri;
        }
        r = residual(&x)?;
        rn = norm(&r);
        if rn <= tol {
            return Ok(Outcome { x, iterations, residual: rn, method: Method::Relaxed });
        }
        if !rn.is_finite() {
            break;
        }
        if iterations % 64 == 0 {
            history.push(rn);
        }
    }
    history.push(rn);
    Err(Error::NonConvergence { iterations, residual: rn, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![x[0] + x[0].powi(3) - 2.0, 3.0 * x[1] - 1.0])
    }

    fn cubic_jac(x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_row_slice(2, 2, &[1.0 + 3.0 * x[0] * x[0], 0.0, 0.0, 3.0]))
    }

    #[test]
    fn newton_and_relaxed_agree() {
        let a = solve(cubic, cubic_jac, None, vec![0.0, 0.0], 1e-12, 50, 0.1, SolverKind::Newton).unwrap();
        assert_eq!(a.method, Method::Newton);
        assert!((a.x[0] - 1.0).abs() < 1e-12 && (a.x[1] - 1.0 / 3.0).abs() < 1e-12);
        let b = solve(cubic, cubic_jac, None, vec![0.0, 0.0], 1e-12, 50, 0.1, SolverKind::Relaxed).unwrap();
        assert_eq!(b.method, Method::Relaxed);
        assert!((b.x[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn energy_merit_crosses_kinks() {
        // gradient of 0.01 x^2 / 2 + 100 max(|x| - 1, 0)^2 / 2 - x
        let res = |x: &[f64]| -> Result<Vec<f64>> {
            let k = (x[0].abs() - 1.0).max(0.0) * x[0].signum();
            Ok(vec![0.01 * x[0] + 100.0 * k - 1.0])
        };
        let jac = |x: &[f64]| -> Result<DMatrix<f64>> {
            let s = if x[0].abs() > 1.0 { 100.0 } else { 0.0 };
            Ok(DMatrix::from_element(1, 1, 0.01 + s))
        };
        let en = |x: &[f64]| -> Result<f64> {
            let k = (x[0].abs() - 1.0).max(0.0);
            Ok(0.005 * x[0] * x[0] + 50.0 * k * k - x[0])
        };
        let out = solve(res, jac, Some(&en), vec![-3.0], 1e-12, 50, 1e-6, SolverKind::Newton).unwrap();
        assert_eq!(out.method, Method::Newton);
        assert!(res(&out.x).unwrap()[0].abs() <= 1e-12);
    }

    #[test]
    fn exhausted_budget_reports_history() {
        let err = solve(cubic, cubic_jac, None, vec![0.0, 0.0], 1e-12, 1, 1e-6, SolverKind::Relaxed).unwrap_err();
        match err {
            Error::NonConvergence { iterations, history, .. } => {
                assert_eq!(iterations, RELAXED_BUDGET_FACTOR);
                assert!(history.len() > 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
