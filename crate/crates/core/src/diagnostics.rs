//! A-priori estimates and chain-rule inequalities evaluated along a trajectory.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::{ell_convolve, frac_derivative_apply, FracWeights, SoninePair};
use crate::problem::{beta_q_estimate, beta_q_potential, BetaQEstimate};
use crate::solver::{Setup, Trajectory};

/// Tolerance for "nonnegative" left-hand terms.
pub const SIGN_TOL: f64 = 1e-8;

/// Terms of the discrete energy estimate
///
/// ```text
/// psi(v_m) + (ell * |u|_V^2 / 2)_m + (ell * (beta_eps(u), u))_m <= psi(v_0) + |ell|_{L1(0,t_m)} C_G
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    /// `int eta_hat(v_m)`
    pub psi: Vec<f64>,
    /// `(ell * |u|_V^2)_m`, without the factor 1/2.
    pub ell_v_norm: Vec<f64>,
    pub ell_beta: Vec<f64>,
    pub lhs: Vec<f64>,
    pub bound: Vec<f64>,
    /// `int eta_hat(v0_nu_eps)`
    pub initial_potential: f64,
    pub c_g: f64,
    pub data_scale: f64,
    pub slack: f64,
    /// Steps with a left-hand term below `-SIGN_TOL`.
    pub negative_terms: Vec<usize>,
    /// Steps where `lhs > bound`.
    pub violations: Vec<usize>,
    /// Set when a conjugate evaluation failed; the vectors stop before that step.
    pub partial: bool,
}

impl EnergyReport {
    pub fn holds(&self) -> bool {
        !self.partial && self.negative_terms.is_empty() && self.violations.is_empty()
    }

    /// Smallest left-hand term over all steps.
    pub fn min_term(&self) -> f64 {
        self.psi
            .iter()
            .chain(&self.ell_v_norm)
            .chain(&self.ell_beta)
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

pub fn energy_report(setup: &Setup, traj: &Trajectory) -> EnergyReport {
    let basis = &setup.basis;
    let h = setup.h();
    let init = &setup.init;
    let data_scale = 1f64.max(init.potential + basis.inner(&init.v0_nu_eps, &init.v0_nu_eps));
    let slack = 10.0 * h.powf(setup.spec.pair.theta()) * data_scale;
    let mut report = EnergyReport {
        initial_potential: init.potential,
        c_g: setup.constants.c_g,
        data_scale,
        slack,
        ..EnergyReport::default()
    };
    let mut v_norms = Vec::with_capacity(traj.u.len());
    let mut pairings = Vec::with_capacity(traj.u.len());
    for u in &traj.u {
        let nodal = basis.synth_unchecked(u);
        let terms: Result<(f64, f64)> = nodal.iter().zip(basis.weights()).try_fold((0.0, 0.0), |(psi, pair), (&s, w)| {
            let c = setup.alpha.conjugate_at_preimage(s)?;
            let b = setup.beta.value(s)?;
            Ok((psi + w * c, pair + w * b * s))
        });
        let Ok((psi, pair)) = terms else {
            report.partial = true;
            break;
        };
        report.psi.push(psi);
        pairings.push(pair);
        v_norms.push(u.iter().zip(basis.lambdas()).map(|(a, l)| l * a * a).sum());
    }
    let pair = &setup.spec.pair;
    report.ell_v_norm = ell_convolve(pair, h, &v_norms);
    report.ell_beta = ell_convolve(pair, h, &pairings);
    for m in 0..report.psi.len() {
        let t = traj.times[m];
        let lhs = report.psi[m] + 0.5 * report.ell_v_norm[m] + report.ell_beta[m];
        let bound = init.potential + pair.ell_l1(t) * report.c_g + slack;
        if report.psi[m].min(report.ell_v_norm[m]).min(report.ell_beta[m]) < -SIGN_TOL {
            report.negative_terms.push(m);
        }
        if !(lhs <= bound) {
            report.violations.push(m);
        }
        report.times.push(t);
        report.lhs.push(lhs);
        report.bound.push(bound);
    }
    report
}

/// `[ell * (D x, partner)]_m - (psi_m - psi_0)` for every step, where `D` is
/// the L1 derivative of the history `x` and `partner_m` lies in the
/// subdifferential of `psi` at `x_m`.
pub fn chain_rule_slack<T: AsRef<[f64]>>(
    weights: &FracWeights,
    pair: &SoninePair,
    x: &[T],
    partner: &[T],
    psi: &[f64],
) -> Result<Vec<f64>> {
    let len = x.len().min(partner.len()).min(psi.len());
    let mut pairing = vec![0.0; len];
    for m in 1..len {
        let d = frac_derivative_apply(weights, &x[..=m])?;
        pairing[m] = d.iter().zip(partner[m].as_ref()).map(|(a, b)| a * b).sum();
    }
    let conv = ell_convolve(pair, weights.h(), &pairing);
    Ok((0..len).map(|m| conv[m] - (psi[m] - psi[0])).collect())
}

/// Which pairing the chain-rule check uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainRuleVariant {
    /// `x = u`, partner `u`, `psi = |u|^2 / 2`.
    Identity,
    /// `x = z`, partner `u`, `psi = int eta_hat(v)`.
    Regularized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleReport {
    pub variant: ChainRuleVariant,
    pub slack: Vec<f64>,
    pub min_slack: f64,
    /// `10 h^theta |data|^2`
    pub tolerance: f64,
}

impl ChainRuleReport {
    pub fn within_tolerance(&self) -> bool {
        self.min_slack >= -self.tolerance
    }
}

pub fn chain_rule_check(setup: &Setup, traj: &Trajectory, variant: ChainRuleVariant) -> Result<ChainRuleReport> {
    let basis = &setup.basis;
    let (x, psi): (&[Vec<f64>], Vec<f64>) = match variant {
        ChainRuleVariant::Identity => (&traj.u, traj.u.iter().map(|u| 0.5 * u.iter().map(|a| a * a).sum::<f64>()).collect()),
        ChainRuleVariant::Regularized => {
            let psi = traj
                .u
                .iter()
                .map(|u| {
                    let vals = basis
                        .synth_unchecked(u)
                        .into_iter()
                        .map(|s| setup.alpha.conjugate_at_preimage(s))
                        .collect::<Result<Vec<f64>>>()?;
                    Ok(basis.integrate(&vals))
                })
                .collect::<Result<Vec<f64>>>()?;
            (&traj.z, psi)
        }
    };
    let slack = chain_rule_slack(&setup.weights, &setup.spec.pair, x, &traj.u, &psi)?;
    let min_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
    let data = match (traj.u.first(), traj.z.first()) {
        (Some(u), Some(z)) => u.iter().chain(z).map(|a| a * a).sum::<f64>(),
        _ => 0.0,
    };
    let tolerance = 10.0 * setup.h().powf(setup.spec.pair.theta()) * data.max(1.0);
    Ok(ChainRuleReport { variant, slack, min_slack, tolerance })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LqReport {
    pub q: f64,
    /// Discrete `|w|_{L^q(Q)}` with `w = beta_eps(u)`.
    pub norm: f64,
    /// `int (beta_{eps q} o eta)^(v_m)` at every step.
    pub trace: Vec<f64>,
    pub initial: BetaQEstimate,
}

pub fn lq_bound(setup: &Setup, traj: &Trajectory) -> Result<LqReport> {
    let basis = &setup.basis;
    let q = setup.spec.q;
    let mut total = 0.0;
    let mut trace = Vec::with_capacity(traj.u.len());
    for (m, u) in traj.u.iter().enumerate() {
        let nodal = basis.synth_unchecked(u);
        let mut pot = Vec::with_capacity(nodal.len());
        let mut power = 0.0;
        for (&s, w) in nodal.iter().zip(basis.weights()) {
            power += w * setup.beta.value(s)?.abs().powf(q);
            pot.push(if setup.beta.is_zero() { 0.0 } else { beta_q_potential(&setup.spec, &setup.alpha, s)? });
        }
        if m > 0 {
            total += setup.h() * power;
        }
        trace.push(basis.integrate(&pot));
    }
    Ok(LqReport {
        q,
        norm: total.powf(1.0 / q),
        trace,
        initial: beta_q_estimate(&setup.spec, &setup.init, basis)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementRow {
    pub lag: usize,
    pub shift: f64,
    /// `h sum_m |z_{m+lag} - z_m|_{V*}^2`
    pub modulus: f64,
}

pub fn increment_modulus(setup: &Setup, traj: &Trajectory, lags: &[usize]) -> Vec<IncrementRow> {
    let lambdas = setup.basis.lambdas();
    let h = setup.h();
    lags.iter()
        .map(|&lag| {
            let mut sum = 0.0;
            for m in 0..traj.z.len().saturating_sub(lag) {
                sum += traj.z[m + lag]
                    .iter()
                    .zip(&traj.z[m])
                    .zip(lambdas)
                    .map(|((a, b), l)| (a - b) * (a - b) / l)
                    .sum::<f64>();
            }
            IncrementRow { lag, shift: lag as f64 * h, modulus: h * sum }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::GraphSpec;
    use crate::presets;
    use crate::problem::{InitialField, ProblemConfig, ProblemSpec};
    use crate::solver::{solve, SolverParams};
    use approx::assert_abs_diff_eq;

    fn run(cfg: &ProblemConfig, params: &SolverParams) -> crate::solver::Solution {
        solve(&ProblemSpec::from_config(cfg).unwrap(), params).unwrap()
    }

    fn linear(steps: usize) -> SolverParams {
        SolverParams { eps: 1e-3, nu: 1e-3, modes: 4, steps, ..SolverParams::default() }
    }

    #[test]
    fn zero_trajectory_has_zero_terms() {
        let cfg = ProblemConfig { u0: InitialField::Zero, ..presets::linear_heat() };
        let sol = run(&cfg, &linear(16));
        let rep = energy_report(&sol.setup, &sol.trajectory);
        assert!(rep.holds());
        assert!(rep.lhs.iter().all(|&v| v == 0.0));
        let rows = increment_modulus(&sol.setup, &sol.trajectory, &[0, 1, 4]);
        assert!(rows.iter().all(|r| r.modulus == 0.0));
    }

    #[test]
    fn quadratic_conjugate_in_linear_run() {
        let params = linear(64);
        let sol = run(&presets::linear_heat(), &params);
        let rep = energy_report(&sol.setup, &sol.trajectory);
        assert!(rep.holds(), "{:?}", rep.violations);
        let c = params.nu + 1.0 / (1.0 + params.eps);
        for (u, psi) in sol.trajectory.u.iter().zip(&rep.psi) {
            let v: Vec<f64> = sol.setup.nodal_v(u).unwrap();
            let closed = 0.5 / c * sol.setup.basis.inner(&v, &v);
            assert_abs_diff_eq!(*psi, closed, epsilon = 1e-8);
        }
        let t = sol.trajectory.times.last().unwrap();
        let young = sol.setup.spec.pair.ell_l1(*t) * sol.trajectory.u.iter().map(|u| 9.0 * u.iter().map(|a| a * a).sum::<f64>()).fold(0.0, f64::max);
        assert!(rep.ell_v_norm.last().unwrap() <= &(young * 1.0001 + 1e-12));
    }

    #[test]
    fn ell_norm_term_is_quadratic() {
        let sol = run(&presets::linear_heat(), &linear(32));
        let mut doubled = sol.trajectory.clone();
        doubled.u.iter_mut().flatten().for_each(|v| *v *= 2.0);
        let a = energy_report(&sol.setup, &sol.trajectory);
        let b = energy_report(&sol.setup, &doubled);
        for (x, y) in a.ell_v_norm.iter().zip(&b.ell_v_norm) {
            assert_abs_diff_eq!(4.0 * x, *y, epsilon = 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn energy_inequality_on_nonlinear_presets() {
        for cfg in [presets::stefan(), presets::hele_shaw(), presets::porous_medium(1.5).unwrap()] {
            let sol = run(&cfg, &SolverParams { modes: 12, steps: 64, ..SolverParams::default() });
            let rep = energy_report(&sol.setup, &sol.trajectory);
            assert!(rep.holds(), "{:?} {:?}", rep.negative_terms, rep.violations);
        }
    }

    #[test]
    fn chain_rule_one_step_by_hand() {
        let params = SolverParams { modes: 1, steps: 1, ..linear(1) };
        let sol = run(&presets::linear_heat(), &params);
        let rep = chain_rule_check(&sol.setup, &sol.trajectory, ChainRuleVariant::Identity).unwrap();
        let (u0, u1) = (sol.trajectory.u[0][0], sol.trajectory.u[1][0]);
        let w = &sol.setup.weights;
        let cell = sol.setup.spec.pair.ell_l1(w.h());
        let expected = cell * w.b0() * w.coefficients()[0] * (u1 - u0) * u1 - 0.5 * (u1 * u1 - u0 * u0);
        assert_abs_diff_eq!(rep.slack[1], expected, epsilon = 1e-14);
        assert_eq!(rep.slack[0], 0.0);
    }

    #[test]
    fn chain_rule_constant_history_is_exact() {
        let params = linear(8);
        let sol = run(&presets::linear_heat(), &params);
        let mut flat = sol.trajectory.clone();
        for m in 0..flat.u.len() {
            flat.u[m] = sol.trajectory.u[0].clone();
            flat.z[m] = sol.trajectory.z[0].clone();
        }
        for variant in [ChainRuleVariant::Identity, ChainRuleVariant::Regularized] {
            let rep = chain_rule_check(&sol.setup, &flat, variant).unwrap();
            assert!(rep.slack.iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn chain_rule_slack_improves_with_refinement() {
        let mut mins = Vec::new();
        for steps in [32, 64, 128, 256] {
            let sol = run(&presets::linear_heat(), &linear(steps));
            let rep = chain_rule_check(&sol.setup, &sol.trajectory, ChainRuleVariant::Identity).unwrap();
            assert!(rep.within_tolerance());
            mins.push(rep.min_slack);
        }
        assert!(mins.windows(2).all(|w| w[1] >= w[0] - 1e-8), "{mins:?}");
    }

    #[test]
    fn lq_norm_cases() {
        let sol = run(&presets::linear_heat(), &linear(16));
        let rep = lq_bound(&sol.setup, &sol.trajectory).unwrap();
        assert_eq!(rep.norm, 0.0);
        assert!(rep.trace.iter().all(|&v| v == 0.0));

        let cfg = ProblemConfig { beta: GraphSpec::Identity, ..presets::linear_heat() };
        let sol = run(&cfg, &linear(16));
        let rep = lq_bound(&sol.setup, &sol.trajectory).unwrap();
        let max_u = sol.trajectory.u.iter().map(|u| sol.setup.nodal_u(u).iter().fold(0.0f64, |a, b| a.max(b.abs()))).fold(0.0, f64::max);
        assert!(rep.norm > 0.0 && rep.norm <= max_u * (1.0f64).powf(1.0 / rep.q));
        assert!(rep.trace.iter().all(|&v| v >= 0.0));

        // a large first mode keeps the clamp active except next to the boundary
        let cfg = ProblemConfig {
            beta: GraphSpec::Linear { slope: 1e6 },
            u0: InitialField::Mode { index: 1, amplitude: 1e3 },
            horizon: 1e-4,
            ..presets::linear_heat()
        };
        let params = SolverParams { eps: 1e-2, nu: 1e-2, modes: 1, steps: 4, ..SolverParams::default() };
        let sol = run(&cfg, &params);
        let rep = lq_bound(&sol.setup, &sol.trajectory).unwrap();
        let saturated = 1e2 * (1e-4f64).powf(1.0 / rep.q);
        assert!(rep.norm <= saturated * (1.0 + 1e-12));
        assert!(rep.norm >= 0.99 * saturated, "{} vs {saturated}", rep.norm);
    }

    #[test]
    fn increment_modulus_shrinks_with_lag() {
        let sol = run(&presets::linear_heat(), &linear(256));
        let rows = increment_modulus(&sol.setup, &sol.trajectory, &[16, 8, 4, 2, 1]);
        assert!(rows.windows(2).all(|w| w[1].modulus < w[0].modulus));
        let rate = (rows[0].modulus / rows[4].modulus).ln() / 16f64.ln();
        assert!(rate >= sol.setup.spec.pair.theta(), "{rate}");
    }
}
