//! Implicit L1 time stepping of the regularized Galerkin system
//!
//! ```text
//! D_m(z) + A u_m + pi_n beta_eps(u_m) = pi_n g(t_m, u_m),   z_m = pi_n alpha_nu_eps(u_m)
//! ```
//!
//! with `u_m` as the unknown of each step.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{RegularizedGraph, TruncatedYosida};
use crate::kernels::{frac_derivative_apply, FracWeights, HistoryBuffer};
use crate::newton::{self, Method, SolverKind};
use crate::problem::{build_regularized, constants, validate, Constants, Forcing, ProblemSpec, RegularizedInit, ValidationReport};
use crate::spectral::{eta_solve, Eigenbasis};

fn default_tol() -> f64 {
    1e-10
}

fn default_budget() -> usize {
    100
}

fn default_kind() -> SolverKind {
    SolverKind::Newton
}

/// Missing fields take their [`Default`] values when deserializing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub eps: f64,
    pub nu: f64,
    pub modes: usize,
    pub steps: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_kind")]
    pub kind: SolverKind,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            eps: 1e-2,
            nu: 1e-2,
            modes: 32,
            steps: 512,
            tol: default_tol(),
            budget: default_budget(),
            kind: default_kind(),
        }
    }
}

impl SolverParams {
    pub fn check(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.eps) {
            return Err(Error::param(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !unit(self.nu) {
            return Err(Error::param(format!("nu must lie in (0, 1), got {}", self.nu)));
        }
        if self.modes == 0 || self.steps == 0 || self.budget == 0 {
            return Err(Error::param("modes, steps and budget must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub iterations: usize,
    pub residual: f64,
    pub method: Method,
    /// Whether `b0 nu + lambda_1 > Lambda_g`, which makes the step map
    /// strongly monotone.
    pub coercive: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    /// One entry per step; entry 0 describes the initial inversion.
    pub stats: Vec<StepStats>,
}

impl Trajectory {
    /// Number of completed steps.
    pub fn len(&self) -> usize {
        self.u.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.u.len() <= 1
    }
}

/// Everything a run needs besides its mutable state.
#[derive(Clone, Debug)]
pub struct Setup {
    pub spec: ProblemSpec,
    pub params: SolverParams,
    pub basis: Eigenbasis,
    pub weights: FracWeights,
    pub alpha: RegularizedGraph,
    pub beta: TruncatedYosida,
    pub init: RegularizedInit,
    pub constants: Constants,
    pub validation: ValidationReport,
    forcing_nodal: Option<Vec<Vec<f64>>>,
}

impl Setup {
    pub fn new(spec: &ProblemSpec, params: &SolverParams) -> Result<Self> {
        params.check()?;
        let basis = Eigenbasis::new(spec.domain, params.modes)?;
        let validation = validate(spec, &basis);
        if !validation.is_ok() {
            return Err(Error::param(format!("validation failed: {}", validation.violations.join("; "))));
        }
        let h = spec.horizon / params.steps as f64;
        let weights = FracWeights::new(&spec.pair, h, params.steps)?;
        let forcing_nodal = match &spec.forcing {
            Forcing::Modal { steps } => {
                if steps.len() != params.steps + 1 {
                    return Err(Error::Shape { expected: params.steps + 1, got: steps.len() });
                }
                Some(steps.iter().map(|c| basis.synth(c)).collect::<Result<Vec<_>>>()?)
            }
            _ => None,
        };
        Ok(Self {
            spec: spec.clone(),
            params: params.clone(),
            alpha: RegularizedGraph::new(spec.alpha.clone(), params.eps, params.nu)?,
            beta: TruncatedYosida::new(spec.beta.clone(), params.eps)?,
            init: build_regularized(spec, params.eps, params.nu, &basis)?,
            constants: constants(spec, &basis),
            validation,
            basis,
            weights,
            forcing_nodal,
        })
    }

    pub fn h(&self) -> f64 {
        self.weights.h()
    }

    pub fn time(&self, m: usize) -> f64 {
        if m == self.params.steps {
            self.spec.horizon
        } else {
            m as f64 * self.h()
        }
    }

    fn forcing_at(&self, m: usize, k: usize, u: f64) -> (f64, f64) {
        match &self.forcing_nodal {
            Some(table) => (table[m][k], 0.0),
            None => self.spec.forcing.pointwise(u).expect("closed-form forcing"),
        }
    }

    /// `P(b0 alpha(S u) + beta(S u) - g(S u)) + lambda u`; the caller adds the
    /// history and `-b0 z_{m-1}`.
    fn operator(&self, m: usize, u: &[f64], b0: f64) -> Result<Vec<f64>> {
        let nodal = self.basis.synth_unchecked(u);
        let mut f = Vec::with_capacity(nodal.len());
        for (k, &s) in nodal.iter().enumerate() {
            let g = self.forcing_at(m, k, s).0;
            f.push(b0 * self.alpha.value(s)? + self.beta.value(s)? - g);
        }
        let mut out = self.basis.project_unchecked(&f);
        for ((o, l), ui) in out.iter_mut().zip(self.basis.lambdas()).zip(u) {
            *o += l * ui;
        }
        Ok(out)
    }

    /// Potential of [`Setup::operator`].
    fn operator_energy(&self, m: usize, u: &[f64], b0: f64) -> Result<f64> {
        let nodal = self.basis.synth_unchecked(u);
        let mut e = 0.0;
        for (k, (&s, w)) in nodal.iter().zip(self.basis.weights()).enumerate() {
            let g = match &self.forcing_nodal {
                Some(table) => table[m][k] * s,
                None => self.spec.forcing.primitive(s).expect("closed-form forcing"),
            };
            e += w * (b0 * self.alpha.potential(s)? + self.beta.potential(s)? - g);
        }
        let quad: f64 = u.iter().zip(self.basis.lambdas()).map(|(a, l)| l * a * a).sum();
        Ok(e + 0.5 * quad)
    }

    fn operator_jacobian(&self, m: usize, u: &[f64], b0: f64) -> Result<DMatrix<f64>> {
        let nodal = self.basis.synth_unchecked(u);
        let mut d = Vec::with_capacity(nodal.len());
        for (k, &s) in nodal.iter().enumerate() {
            let dg = self.forcing_at(m, k, s).1;
            d.push(b0 * self.alpha.slope(s)? + self.beta.slope(s)? - dg);
        }
        let mut jac = self.basis.weighted_gram(&d);
        for (i, l) in self.basis.lambdas().iter().enumerate() {
            jac[(i, i)] += l;
        }
        Ok(jac)
    }

    /// `pi_n alpha_nu_eps(u)`.
    pub fn z_of(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.basis.nodal_map(u, |s| self.alpha.value(s))
    }

    /// `delta(t_m, z) = A eta(z) + pi_n beta_eps(eta(z)) - pi_n g(t_m, eta(z))`.
    pub fn assemble_delta(&self, m: usize, z: &[f64]) -> Result<Vec<f64>> {
        let eta = eta_solve(&self.basis, z, &self.alpha, self.params.tol * 1e-2, self.params.budget)?;
        self.operator(m, &eta.u, 0.0)
    }

    fn contraction(&self) -> (f64, f64, bool) {
        let b0 = self.weights.b0();
        let (nu, eps) = (self.params.nu, self.params.eps);
        let lam = self.basis.lambdas();
        let (l1, ln) = (lam[0], lam[lam.len() - 1]);
        let lg = self.spec.lambda_g;
        let mu = b0 * nu + l1 - lg;
        let lip = b0 * (nu + 1.0 / eps) + ln + 1.0 / eps + lg;
        let coercive = mu > 0.0;
        let tau = if coercive { mu / (lip * lip) } else { b0 * nu / (lip * lip) };
        (tau, lip, coercive)
    }

    /// Runs all steps; a failing step ends the run and is returned alongside
    /// the partial trajectory.
    pub fn run(&self) -> (Trajectory, Option<Error>) {
        let mut traj = Trajectory::default();
        let p = &self.params;
        let eta = match eta_solve(&self.basis, &self.init.z0, &self.alpha, p.tol, p.budget) {
            Ok(e) => e,
            Err(e) => {
                let err = Error::Step {
                    step: 0,
                    remedy: "the initial inversion failed; increase the iteration budget".into(),
                    source: Box::new(e),
                };
                return (traj, Some(err));
            }
        };
        let (tau, _, coercive) = self.contraction();
        traj.times.push(0.0);
        traj.z.push(self.init.z0.clone());
        traj.u.push(eta.u);
        traj.stats.push(StepStats {
            iterations: eta.iterations,
            residual: eta.residual,
            method: eta.method,
            coercive,
        });
        let b0 = self.weights.b0();
        let mut buffer = HistoryBuffer::new(&self.init.z0);
        for m in 1..=p.steps {
            let lagged = buffer.lagged_sum(&self.weights);
            let z_prev = traj.z[m - 1].clone();
            let shift: Vec<f64> = lagged.iter().zip(&z_prev).map(|(h, z)| b0 * h - b0 * z).collect();
            let residual = |u: &[f64]| -> Result<Vec<f64>> {
                let mut r = self.operator(m, u, b0)?;
                for (ri, s) in r.iter_mut().zip(&shift) {
                    *ri += s;
                }
                Ok(r)
            };
            let jacobian = |u: &[f64]| self.operator_jacobian(m, u, b0);
            let energy = |u: &[f64]| -> Result<f64> {
                let lin: f64 = u.iter().zip(&shift).map(|(a, b)| a * b).sum();
                Ok(self.operator_energy(m, u, b0)? + lin)
            };
            let outcome = newton::solve(residual, jacobian, Some(&energy), traj.u[m - 1].clone(), p.tol, p.budget, tau, p.kind);
            let out = match outcome {
                Ok(o) => o,
                Err(e) => {
                    let remedy = if coercive {
                        "increase the iteration budget or use the relaxed solver"
                    } else {
                        "reduce the time step: the step map is not coercive at this h"
                    };
                    let err = Error::Step { step: m, remedy: remedy.into(), source: Box::new(e) };
                    return (traj, Some(err));
                }
            };
            let z = match self.z_of(&out.x) {
                Ok(z) => z,
                Err(e) => return (traj, Some(Error::Step { step: m, remedy: String::new(), source: Box::new(e) })),
            };
            if let Err(e) = buffer.push(&z) {
                return (traj, Some(e));
            }
            traj.times.push(self.time(m));
            traj.z.push(z);
            traj.u.push(out.x);
            traj.stats.push(StepStats {
                iterations: out.iterations,
                residual: out.residual,
                method: out.method,
                coercive,
            });
        }
        (traj, None)
    }

    pub fn nodal_u(&self, modal: &[f64]) -> Vec<f64> {
        self.basis.synth_unchecked(modal)
    }

    /// `v = alpha_nu_eps(u)` at the nodes.
    pub fn nodal_v(&self, modal: &[f64]) -> Result<Vec<f64>> {
        self.nodal_u(modal).into_iter().map(|s| self.alpha.value(s)).collect()
    }

    /// `w = beta_eps(u)` at the nodes.
    pub fn nodal_w(&self, modal: &[f64]) -> Result<Vec<f64>> {
        self.nodal_u(modal).into_iter().map(|s| self.beta.value(s)).collect()
    }
}

/// A run together with its setup.
#[derive(Clone, Debug)]
pub struct Solution {
    pub setup: Setup,
    pub trajectory: Trajectory,
    pub failure: Option<Error>,
}

impl Solution {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none() && self.trajectory.len() == self.setup.params.steps
    }
}

/// Solves and keeps a partial trajectory when a step fails.
pub fn solve_partial(spec: &ProblemSpec, params: &SolverParams) -> Result<Solution> {
    let setup = Setup::new(spec, params)?;
    let (trajectory, failure) = setup.run();
    Ok(Solution { setup, trajectory, failure })
}

pub fn solve(spec: &ProblemSpec, params: &SolverParams) -> Result<Solution> {
    let sol = solve_partial(spec, params)?;
    match sol.failure {
        Some(e) => Err(e),
        None => Ok(sol),
    }
}

/// Max-norm of the discrete equation at every stored step, recomputed from
/// the stored `z` and `u` with the naive history sum.
pub fn residual(setup: &Setup, traj: &Trajectory) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(traj.len());
    for m in 1..traj.u.len() {
        let d = frac_derivative_apply(&setup.weights, &traj.z[..=m])?;
        let r = setup.operator(m, &traj.u[m], 0.0)?;
        out.push(r.iter().zip(&d).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::GraphSpec;
    use crate::presets;
    use crate::problem::{InitialField, InitialSelection, ProblemConfig};
    use approx::assert_abs_diff_eq;
    use statrs::function::gamma::gamma;

    fn small(modes: usize, steps: usize) -> SolverParams {
        SolverParams { modes, steps, ..SolverParams::default() }
    }

    fn spec_of(cfg: &ProblemConfig) -> ProblemSpec {
        ProblemSpec::from_config(cfg).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let cfg = ProblemConfig { u0: InitialField::Zero, ..presets::linear_heat() };
        let sol = solve(&spec_of(&cfg), &small(4, 16)).unwrap();
        assert!(sol.trajectory.u.iter().flatten().all(|&v| v == 0.0));
        assert!(sol.trajectory.z.iter().flatten().all(|&v| v == 0.0));
        assert!(residual(&sol.setup, &sol.trajectory).unwrap().iter().all(|&r| r == 0.0));
    }

    fn ml_series(theta: f64, x: f64) -> f64 {
        // plain series; adequate for |x| <= 2
        let mut sum = 0.0;
        for k in 0..120 {
            let term = x.powi(k) / gamma(theta * k as f64 + 1.0);
            sum += term;
            if term.abs() < 1e-17 {
                break;
            }
        }
        sum
    }

    #[test]
    fn linear_mode_follows_mittag_leffler() {
        // lambda_1 T^theta = 1 with T = 1 / pi^4 and theta = 0.5
        let cfg = ProblemConfig {
            horizon: std::f64::consts::PI.powi(-4),
            ..presets::linear_heat()
        };
        let params = SolverParams { eps: 1e-8, nu: 1e-8, modes: 1, steps: 400, ..SolverParams::default() };
        let sol = solve(&spec_of(&cfg), &params).unwrap();
        let u = sol.trajectory.u.last().unwrap()[0];
        let exact = ml_series(0.5, -1.0);
        assert!((u - exact).abs() / exact < 5e-3, "{u} vs {exact}");
    }

    #[test]
    fn delta_for_linear_graphs() {
        let mut cfg = presets::linear_heat();
        let params = SolverParams { eps: 0.1, nu: 0.2, modes: 3, steps: 4, ..SolverParams::default() };
        let setup = Setup::new(&spec_of(&cfg), &params).unwrap();
        let z = [0.3, -0.2, 0.1];
        let c = 0.2 + 1.0 / 1.1;
        let d = setup.assemble_delta(1, &z).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(d[i], setup.basis.lambdas()[i] * z[i] / c, epsilon = 1e-9);
        }
        assert!(setup.assemble_delta(1, &[0.0; 3]).unwrap().iter().all(|v| v.abs() < 1e-14));
        cfg.beta = GraphSpec::Identity;
        let setup = Setup::new(&spec_of(&cfg), &params).unwrap();
        let d = setup.assemble_delta(1, &z).unwrap();
        for i in 0..3 {
            let u = z[i] / c;
            assert_abs_diff_eq!(d[i], setup.basis.lambdas()[i] * u + u / 1.1, epsilon = 1e-9);
        }
    }

    #[test]
    fn stored_states_satisfy_the_scheme() {
        let spec = spec_of(&presets::stefan());
        let sol = solve(&spec, &small(8, 32)).unwrap();
        let tol = sol.setup.params.tol;
        let res = residual(&sol.setup, &sol.trajectory).unwrap();
        assert!(res.iter().all(|&r| r <= 10.0 * tol), "{res:?}");
        for (z, u) in sol.trajectory.z.iter().zip(&sol.trajectory.u).skip(1) {
            let back = sol.setup.z_of(u).unwrap();
            assert!(z.iter().zip(&back).all(|(a, b)| a == b));
        }
        let eps = sol.setup.params.eps;
        for u in &sol.trajectory.u {
            let w = sol.setup.nodal_w(u).unwrap();
            assert!(w.iter().all(|v| v.abs() <= 1.0 / eps + 1e-12));
        }
        let mut bad = sol.trajectory.clone();
        bad.z[10][0] += 1e-3;
        let res = residual(&sol.setup, &bad).unwrap();
        assert!(res[9] >= sol.setup.weights.b0() * 1e-3 / 2.0);
    }

    #[test]
    fn restart_from_other_guess_gives_same_step() {
        let spec = spec_of(&presets::hele_shaw());
        let params = small(6, 8);
        let setup = Setup::new(&spec, &params).unwrap();
        let (traj, fail) = setup.run();
        assert!(fail.is_none(), "{fail:?}");
        // redo step 1 from a far-away start
        let b0 = setup.weights.b0();
        let z0 = &traj.z[0];
        let residual = |u: &[f64]| -> Result<Vec<f64>> {
            let mut r = setup.operator(1, u, b0)?;
            for (ri, z) in r.iter_mut().zip(z0) {
                *ri -= b0 * z;
            }
            Ok(r)
        };
        let jac = |u: &[f64]| setup.operator_jacobian(1, u, b0);
        let energy = |u: &[f64]| -> Result<f64> {
            let lin: f64 = u.iter().zip(z0).map(|(a, b)| a * b).sum();
            Ok(setup.operator_energy(1, u, b0)? - b0 * lin)
        };
        let start = vec![3.0, -2.0, 1.0, 0.5, -0.5, 2.0];
        let (tau, _, _) = setup.contraction();
        let other = newton::solve(residual, jac, Some(&energy), start, params.tol, params.budget, tau, params.kind).unwrap();
        for (a, b) in other.x.iter().zip(&traj.u[1]) {
            assert!((a - b).abs() <= 10.0 * params.tol, "{a} {b}");
        }
    }

    #[test]
    fn constant_forcing_approaches_steady_state() {
        let cfg = ProblemConfig {
            forcing: Forcing::Constant { value: 1.0 },
            lambda_g: 1.0,
            u0: InitialField::Zero,
            v0: InitialSelection::MinimalSection { jump_value: None },
            horizon: 4.0,
            ..presets::linear_heat()
        };
        let params = SolverParams { eps: 1e-6, nu: 1e-6, modes: 3, steps: 256, ..SolverParams::default() };
        let sol = solve(&spec_of(&cfg), &params).unwrap();
        let target = sol.setup.basis.project(&vec![1.0; sol.setup.basis.quad_len()]).unwrap();
        let lam = sol.setup.basis.lambdas()[0];
        let series: Vec<f64> = sol.trajectory.u.iter().map(|u| u[0]).collect();
        assert!(series.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let last = series.last().unwrap();
        assert!(*last < target[0] / lam && *last > 0.9 * target[0] / lam, "{last}");
    }

    #[test]
    fn step_energy_gradient_is_the_operator() {
        let spec = spec_of(&presets::stefan());
        let params = SolverParams { eps: 0.05, nu: 0.05, ..small(5, 8) };
        let setup = Setup::new(&spec, &params).unwrap();
        let b0 = setup.weights.b0();
        let u = [0.7, -0.3, 0.2, 0.1, -0.05];
        let op = setup.operator(2, &u, b0).unwrap();
        for i in 0..u.len() {
            let h = 1e-6;
            let mut up = u;
            let mut dn = u;
            up[i] += h;
            dn[i] -= h;
            let fd = (setup.operator_energy(2, &up, b0).unwrap() - setup.operator_energy(2, &dn, b0).unwrap()) / (2.0 * h);
            assert!((fd - op[i]).abs() <= 1e-5 * (1.0 + op[i].abs()), "{i}: {fd} vs {}", op[i]);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let spec = spec_of(&presets::porous_medium(1.5).unwrap());
        let a = solve(&spec, &small(6, 16)).unwrap();
        let b = solve(&spec, &small(6, 16)).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
    }
}
