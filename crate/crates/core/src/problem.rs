//! Problem specification, assumption checks, regularized initial data and
//! the explicit constants `c_V`, `C_G` and the uniqueness window.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::graphs::{integrate, GraphSpec, RegularizedGraph, ScalarGraph};
use crate::kernels::{rl_pair, verify_sonine, PowerKernel, SoninePair};
use crate::spectral::{eigenfunction, mode_list, Domain, Eigenbasis};

/// A node is on a jump `s_j` of `alpha` when `|u0 - s_j|` is at most this.
pub const JUMP_TOL: f64 = 1e-12;

/// Perturbation `g(x, t, u)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Forcing {
    Zero,
    Constant { value: f64 },
    /// `amplitude * sin(u)`
    SinU { amplitude: f64 },
    /// `coef * u`
    Linear { coef: f64 },
    /// `u`-independent source given by modal coefficients at each time step
    /// `t_0, ..., t_M`.
    Modal { steps: Vec<Vec<f64>> },
}

impl Forcing {
    /// Value and `u`-derivative for the closed-form variants; `None` for
    /// tabulated sources.
    pub fn pointwise(&self, u: f64) -> Option<(f64, f64)> {
        match *self {
            Forcing::Zero => Some((0.0, 0.0)),
            Forcing::Constant { value } => Some((value, 0.0)),
            Forcing::SinU { amplitude } => Some((amplitude * u.sin(), amplitude * u.cos())),
            Forcing::Linear { coef } => Some((coef * u, coef)),
            Forcing::Modal { .. } => None,
        }
    }

    /// Primitive in `u` vanishing at 0.
    pub fn primitive(&self, u: f64) -> Option<f64> {
        match *self {
            Forcing::Zero => Some(0.0),
            Forcing::Constant { value } => Some(value * u),
            Forcing::SinU { amplitude } => Some(amplitude * (1.0 - u.cos())),
            Forcing::Linear { coef } => Some(0.5 * coef * u * u),
            Forcing::Modal { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }
}

/// Initial field `u0`, or an explicit `v0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialField {
    Zero,
    Constant { value: f64 },
    /// `amplitude * e_index` (1-based index in the eigenvalue ordering).
    Mode { index: usize, amplitude: f64 },
    /// `sum_i coefficients[i] * e_{i+1}`
    Modes { coefficients: Vec<f64> },
    /// `amplitude * sign(s) * max(|s| - width, 0)` with `s = sin(2 pi x / L)`
    /// (a product of such sines on rectangles); zero on plateaus.
    PlateauSine { amplitude: f64, width: f64 },
    /// Linear interpolation of `(x, value)` points, intervals only.
    Tabulated { points: Vec<[f64; 2]> },
    Sum { parts: Vec<InitialField> },
}

impl InitialField {
    pub fn nodal(&self, basis: &Eigenbasis) -> Result<Vec<f64>> {
        let domain = basis.domain();
        let nodes = basis.nodes();
        let out = match self {
            InitialField::Zero => vec![0.0; nodes.len()],
            InitialField::Constant { value } => vec![*value; nodes.len()],
            InitialField::Mode { index, amplitude } => {
                if *index == 0 {
                    return Err(Error::param("mode indices start at 1"));
                }
                let (modes, _) = mode_list(domain, *index);
                let mode = modes[index - 1];
                nodes.iter().map(|x| amplitude * eigenfunction(domain, mode, *x)).collect()
            }
            InitialField::Modes { coefficients } => {
                let (modes, _) = mode_list(domain, coefficients.len());
                nodes
                    .iter()
                    .map(|x| {
                        coefficients
                            .iter()
                            .zip(&modes)
                            .map(|(c, m)| c * eigenfunction(domain, *m, *x))
                            .sum()
                    })
                    .collect()
            }
            InitialField::PlateauSine { amplitude, width } => {
                if !(*width >= 0.0 && *width < 1.0) {
                    return Err(Error::param(format!("plateau width must lie in [0, 1), got {width}")));
                }
                let s = |x: [f64; 2]| match domain {
                    Domain::Interval { length } => (2.0 * std::f64::consts::PI * x[0] / length).sin(),
                    Domain::Rectangle { lx, ly } => {
                        (2.0 * std::f64::consts::PI * x[0] / lx).sin() * (2.0 * std::f64::consts::PI * x[1] / ly).sin()
                    }
                };
                nodes
                    .iter()
                    .map(|x| {
                        let v = s(*x);
                        amplitude * v.signum() * (v.abs() - width).max(0.0)
                    })
                    .collect()
            }
            InitialField::Tabulated { points } => {
                if domain.dimension() != 1 {
                    return Err(Error::param("tabulated initial fields are supported on intervals only"));
                }
                if points.len() < 2 || points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::param("tabulated field needs at least two points with increasing x"));
                }
                nodes.iter().map(|x| interpolate(points, x[0])).collect()
            }
            InitialField::Sum { parts } => {
                let mut acc = vec![0.0; nodes.len()];
                for part in parts {
                    for (a, v) in acc.iter_mut().zip(part.nodal(basis)?) {
                        *a += v;
                    }
                }
                acc
            }
        };
        Ok(out)
    }
}

fn interpolate(points: &[[f64; 2]], x: f64) -> f64 {
    let last = points.len() - 1;
    if x <= points[0][0] {
        return points[0][1];
    }
    if x >= points[last][0] {
        return points[last][1];
    }
    let k = points.partition_point(|p| p[0] <= x) - 1;
    let (a, b) = (points[k], points[k + 1]);
    a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0])
}

/// How `v0 in alpha(u0)` is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSelection {
    /// Minimal section off the jumps; `jump_value` (if given) on jump nodes.
    MinimalSection { jump_value: Option<f64> },
    Field { field: InitialField },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    RiemannLiouville { theta: f64 },
    Power { theta: f64, ell: PowerKernel, kappa: PowerKernel },
}

impl KernelSpec {
    pub fn build(&self) -> Result<SoninePair> {
        match *self {
            KernelSpec::RiemannLiouville { theta } => rl_pair(theta),
            KernelSpec::Power { theta, ell, kappa } => SoninePair::custom(theta, ell, kappa),
        }
    }
}

/// Serializable problem description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: Domain,
    pub horizon: f64,
    pub kernel: KernelSpec,
    pub alpha: GraphSpec,
    pub beta: GraphSpec,
    pub forcing: Forcing,
    pub lambda_g: f64,
    pub q: f64,
    pub u0: InitialField,
    pub v0: InitialSelection,
}

/// Problem with its graphs and kernel pair built.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub domain: Domain,
    pub horizon: f64,
    pub pair: SoninePair,
    pub alpha: ScalarGraph,
    pub beta: ScalarGraph,
    pub forcing: Forcing,
    pub lambda_g: f64,
    pub q: f64,
    pub u0: InitialField,
    pub v0: InitialSelection,
}

impl ProblemSpec {
    pub fn from_config(cfg: &ProblemConfig) -> Result<Self> {
        if !(cfg.horizon > 0.0 && cfg.horizon.is_finite()) {
            return Err(Error::param(format!("horizon must be positive, got {}", cfg.horizon)));
        }
        Ok(Self {
            domain: cfg.domain,
            horizon: cfg.horizon,
            pair: cfg.kernel.build()?,
            alpha: ScalarGraph::from_spec(&cfg.alpha)?,
            beta: ScalarGraph::from_spec(&cfg.beta)?,
            forcing: cfg.forcing.clone(),
            lambda_g: cfg.lambda_g,
            q: cfg.q,
            u0: cfg.u0.clone(),
            v0: cfg.v0.clone(),
        })
    }

    fn jump_of(&self, u: f64) -> Option<crate::graphs::Jump> {
        self.alpha.jumps().iter().copied().find(|j| (u - j.at).abs() <= JUMP_TOL)
    }

    /// Nodal `(u0, v0)`.
    pub fn initial_nodal(&self, basis: &Eigenbasis) -> Result<(Vec<f64>, Vec<f64>)> {
        let u0 = self.u0.nodal(basis)?;
        let v0 = match &self.v0 {
            InitialSelection::Field { field } => field.nodal(basis)?,
            InitialSelection::MinimalSection { jump_value } => u0
                .iter()
                .map(|&u| match (self.jump_of(u), jump_value) {
                    (Some(_), Some(v)) => Ok(*v),
                    _ => self.alpha.minimal_section(u),
                })
                .collect::<Result<Vec<f64>>>()?,
        };
        Ok((u0, v0))
    }
}

/// Outcome of [`validate`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

const SAMPLES: usize = 64;
const SONINE_TOL: f64 = 1e-8;

/// Sampled checks of the standing assumptions.
pub fn validate(spec: &ProblemSpec, basis: &Eigenbasis) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let t_grid: Vec<f64> = (1..=SAMPLES).map(|k| spec.horizon * k as f64 / SAMPLES as f64).collect();

    let dev = verify_sonine(&spec.pair, &t_grid);
    if !(dev <= SONINE_TOL) {
        rep.violations.push(format!("kernel pair violates ell * kappa = 1 (deviation {dev:e})"));
    }
    let fine: Vec<f64> = (1..=1000).map(|k| spec.horizon * k as f64 / 1000.0).collect();
    for (name, k) in [("ell", spec.pair.ell_kernel()), ("kappa", spec.pair.kappa_kernel())] {
        let vals: Vec<f64> = fine.iter().map(|&t| k.value(t)).collect();
        if vals.iter().any(|&v| v < 0.0) || vals.windows(2).any(|w| w[1] > w[0]) {
            rep.violations.push(format!("{name} is not nonnegative and nonincreasing"));
        }
    }

    for (name, g) in [("alpha", &spec.alpha), ("beta", &spec.beta)] {
        if !g.is_normalized() {
            rep.violations.push(format!("{name} does not satisfy 0 in {name}(0)"));
        }
    }
    if !spec.alpha.has_strictly_convex_potential() {
        rep.warnings.push(format!(
            "alpha ({}) has a potential that is not strictly convex",
            spec.alpha.name()
        ));
    }

    if !(spec.q > 2.0) {
        rep.violations.push(format!("growth exponent q must exceed 2, got {}", spec.q));
    }
    if spec.lambda_g < 0.0 || !spec.lambda_g.is_finite() {
        rep.violations.push(format!("Lambda_g must be nonnegative, got {}", spec.lambda_g));
    } else if spec.lambda_g == 0.0 {
        if spec.forcing.is_zero() {
            rep.warnings.push("Lambda_g = 0 accepted because g vanishes identically".into());
        } else {
            rep.violations.push("Lambda_g = 0 is only admissible for g = 0".into());
        }
    }
    check_forcing(spec, basis, &mut rep);

    match spec.initial_nodal(basis) {
        Err(e) => rep.violations.push(format!("initial data: {e}")),
        Ok((u0, v0)) => {
            let bad = u0.iter().zip(&v0).filter(|(u, v)| !spec.alpha.contains(**u, **v)).count();
            if bad > 0 {
                rep.violations.push(format!("v0 is not in alpha(u0) at {bad} nodes"));
            }
            let p = 2.0 * spec.q - 2.0;
            match u0.iter().map(|&u| spec.beta.minimal_section(u)).collect::<Result<Vec<f64>>>() {
                Ok(b0) if basis.lp_norm(&b0, p).is_finite() => {}
                _ => rep.violations.push("beta(u0) has no finite L^(2q-2) selection".into()),
            }
            if !basis.lp_norm(&v0, p).is_finite() {
                rep.violations.push("v0 is not in L^(2q-2)".into());
            }
        }
    }
    rep
}

fn check_forcing(spec: &ProblemSpec, basis: &Eigenbasis, rep: &mut ValidationReport) {
    let lam = spec.lambda_g;
    let growth = |u: f64| lam * (1.0 + u.abs().powf(2.0 / spec.q));
    if let Forcing::Modal { steps } = &spec.forcing {
        let worst = steps
            .iter()
            .filter_map(|c| basis.synth(c).ok())
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()));
        if steps.iter().any(|c| c.len() != basis.n()) {
            rep.violations.push(format!("modal forcing rows must have {} entries", basis.n()));
        }
        if worst > growth(0.0) * (1.0 + 1e-6) {
            rep.violations.push(format!("|g| reaches {worst} which exceeds Lambda_g = {lam}"));
        }
        return;
    }
    let (u0, _) = spec.initial_nodal(basis).unwrap_or_default();
    let radius = u0.iter().fold(10.0, |m: f64, u| m.max(2.0 * u.abs()));
    let u_grid: Vec<f64> = (0..SAMPLES)
        .map(|k| -radius + 2.0 * radius * k as f64 / (SAMPLES - 1) as f64)
        .collect();
    let vals: Vec<f64> = u_grid
        .iter()
        .map(|&u| spec.forcing.pointwise(u).map_or(f64::NAN, |p| p.0))
        .collect();
    let lip = u_grid
        .windows(2)
        .zip(vals.windows(2))
        .map(|(u, g)| (g[1] - g[0]).abs() / (u[1] - u[0]))
        .fold(0.0, f64::max);
    if lip > lam * (1.0 + 1e-6) {
        rep.violations.push(format!("g has sampled Lipschitz constant {lip} > Lambda_g = {lam}"));
    }
    if let Some((u, g)) = u_grid.iter().zip(&vals).find(|(u, g)| g.abs() > growth(**u) * (1.0 + 1e-6)) {
        rep.violations.push(format!(
            "growth bound |g| <= Lambda_g (1 + |u|^(2/q)) fails at u = {u} (|g| = {})",
            g.abs()
        ));
    }
}

/// `(u0_eps, v0_eps)` nodewise: `u0_eps = s_j + eps v0` on jump nodes,
/// `v0_eps = yosida(alpha, eps, u0_eps)`.
pub fn regularize_nodes(alpha: &ScalarGraph, u0: &[f64], v0: &[f64], eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(format!("eps must lie in (0, 1), got {eps}")));
    }
    if u0.len() != v0.len() {
        return Err(Error::Shape { expected: u0.len(), got: v0.len() });
    }
    let u0e: Vec<f64> = u0
        .iter()
        .zip(v0)
        .map(|(&u, &v)| {
            if !u.is_finite() {
                return Err(Error::Domain(u));
            }
            Ok(match alpha.jumps().iter().find(|j| (u - j.at).abs() <= JUMP_TOL) {
                Some(j) => j.at + eps * v,
                None => u,
            })
        })
        .collect::<Result<_>>()?;
    let v0e = u0e.iter().map(|&u| alpha.yosida(eps, u)).collect::<Result<_>>()?;
    Ok((u0e, v0e))
}

pub fn regularize_initial(spec: &ProblemSpec, basis: &Eigenbasis, eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (u0, v0) = spec.initial_nodal(basis)?;
    regularize_nodes(&spec.alpha, &u0, &v0, eps)
}

/// Regularized initial data on the quadrature grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedInit {
    pub eps: f64,
    pub nu: f64,
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
    pub u0_eps: Vec<f64>,
    pub v0_eps: Vec<f64>,
    pub v0_nu_eps: Vec<f64>,
    /// `pi_n v0_nu_eps`
    pub z0: Vec<f64>,
    /// `int eta_hat(v0_nu_eps)`
    pub potential: f64,
    /// `nu ||u0_eps||^2 + |(u0_eps, v0_eps)|`
    pub potential_bound: f64,
}

pub fn build_regularized(spec: &ProblemSpec, eps: f64, nu: f64, basis: &Eigenbasis) -> Result<RegularizedInit> {
    let (u0, v0) = spec.initial_nodal(basis)?;
    let (u0_eps, v0_eps) = regularize_nodes(&spec.alpha, &u0, &v0, eps)?;
    let v0_nu_eps: Vec<f64> = u0_eps.iter().zip(&v0_eps).map(|(u, v)| nu * u + v).collect();
    let z0 = basis.project(&v0_nu_eps)?;
    let reg = RegularizedGraph::new(spec.alpha.clone(), eps, nu)?;
    let eta_hat = u0_eps
        .iter()
        .map(|&u| reg.conjugate_at_preimage(u))
        .collect::<Result<Vec<f64>>>()?;
    let potential = basis.integrate(&eta_hat);
    let potential_bound = nu * basis.inner(&u0_eps, &u0_eps) + basis.inner(&u0_eps, &v0_eps).abs();
    Ok(RegularizedInit {
        eps,
        nu,
        u0,
        v0,
        u0_eps,
        v0_eps,
        v0_nu_eps,
        z0,
        potential,
        potential_bound,
    })
}

/// Both sides of the `beta_{eps q}` potential estimate for the initial data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaQEstimate {
    /// `int (beta_{eps q} o alpha_nu_eps^{-1})^(v0_nu_eps)`
    pub potential: f64,
    /// `C~ (nu ||u0_eps|| + ||v0_eps||)`
    pub bound: f64,
    pub c_tilde: f64,
}

/// `|beta_eps(r)|^(q-2) beta_eps(r)`.
pub fn beta_eps_q(beta: &ScalarGraph, eps: f64, q: f64, r: f64) -> Result<f64> {
    let b = beta.yosida_truncated(eps, r)?;
    Ok(b.abs().powf(q - 2.0) * b)
}

pub fn beta_q_estimate(spec: &ProblemSpec, init: &RegularizedInit, basis: &Eigenbasis) -> Result<BetaQEstimate> {
    let (eps, nu, q) = (init.eps, init.nu, spec.q);
    let reg = RegularizedGraph::new(spec.alpha.clone(), eps, nu)?;
    let nodal = init
        .u0_eps
        .iter()
        .map(|&u| beta_q_potential(spec, &reg, u))
        .collect::<Result<Vec<f64>>>()?;
    let p = 2.0 * q - 2.0;
    let beta0 = init
        .u0
        .iter()
        .map(|&u| spec.beta.minimal_section(u))
        .collect::<Result<Vec<f64>>>()?;
    let c_tilde =
        2f64.powf(q - 1.5) * (basis.lp_norm(&beta0, p).powf(q - 1.0) + basis.lp_norm(&init.v0, p).powf(q - 1.0));
    let bound = c_tilde * (nu * basis.norm(&init.u0_eps) + basis.norm(&init.v0_eps));
    Ok(BetaQEstimate { potential: basis.integrate(&nodal), bound, c_tilde })
}

/// `int_0^u beta_{eps q}(r) alpha_nu_eps'(r) dr`, the potential of
/// `beta_{eps q} o alpha_nu_eps^{-1}` evaluated at `alpha_nu_eps(u)`.
pub fn beta_q_potential(spec: &ProblemSpec, reg: &RegularizedGraph, u: f64) -> Result<f64> {
    let f = |r: f64| -> f64 {
        match (beta_eps_q(&spec.beta, reg.eps(), spec.q, r), reg.slope(r)) {
            (Ok(b), Ok(s)) => b * s,
            _ => f64::NAN,
        }
    };
    let val = if u >= 0.0 { integrate(f, 0.0, u, 1e-12) } else { -integrate(f, u, 0.0, 1e-12) };
    if val.is_finite() {
        Ok(val)
    } else {
        Err(Error::Domain(u))
    }
}

/// Explicit constants of the problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c_v: f64,
    pub c_g: f64,
    pub tau_window: Option<f64>,
    pub notes: Vec<String>,
}

/// `C_G` for given `c_V`, `Lambda_g`, `q` and `|Omega|`.
pub fn c_g(c_v: f64, lambda_g: f64, q: f64, measure: f64) -> f64 {
    if lambda_g == 0.0 {
        return 0.0;
    }
    let first = c_v * c_v * lambda_g * lambda_g * measure;
    let second = (q - 2.0) / (2.0 * q)
        * lambda_g.powf(2.0 * q / (q - 2.0))
        * (q / (2.0 * (2.0 + q) * c_v * c_v)).powf(-(q + 2.0) / (q - 2.0))
        * measure;
    first + second
}

pub fn constants(spec: &ProblemSpec, basis: &Eigenbasis) -> Constants {
    let c_v = basis.c_v();
    let mut notes = Vec::new();
    let c_g = c_g(c_v, spec.lambda_g, spec.q, spec.domain.measure());
    let tau_window = match (spec.alpha.strong_monotonicity(), spec.beta.lipschitz()) {
        (Some(c_alpha), Some(l_beta)) => {
            let denom = std::f64::consts::SQRT_2 * (l_beta + spec.lambda_g);
            if denom == 0.0 {
                notes.push("uniqueness window is unbounded since Lambda_beta + Lambda_g = 0".into());
                None
            } else {
                let level = c_alpha / denom;
                let theta = spec.pair.theta();
                Some(match spec.pair.kind() {
                    crate::kernels::KernelKind::RiemannLiouville => (gamma(theta + 1.0) * level).powf(1.0 / theta),
                    crate::kernels::KernelKind::Custom => spec.pair.ell_l1_inverse(level),
                })
            }
        }
        (c_alpha, l_beta) => {
            if c_alpha.is_none() {
                notes.push(format!("alpha ({}) declares no strong monotonicity constant", spec.alpha.name()));
            }
            if l_beta.is_none() {
                notes.push(format!("beta ({}) declares no Lipschitz constant", spec.beta.name()));
            }
            None
        }
    };
    Constants { c_v, c_g, tau_window, notes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::eigenpairs;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn base(alpha: GraphSpec, forcing: Forcing, lambda_g: f64) -> ProblemConfig {
        ProblemConfig {
            domain: Domain::unit_interval(),
            horizon: 1.0,
            kernel: KernelSpec::RiemannLiouville { theta: 0.5 },
            alpha,
            beta: GraphSpec::Zero,
            forcing,
            lambda_g,
            q: 3.0,
            u0: InitialField::Mode { index: 1, amplitude: 1.0 },
            v0: InitialSelection::MinimalSection { jump_value: None },
        }
    }

    #[test]
    fn validation_examples() {
        let basis = eigenpairs(Domain::unit_interval(), 8).unwrap();
        let ok = ProblemSpec::from_config(&base(GraphSpec::Identity, Forcing::SinU { amplitude: 1.0 }, 1.0)).unwrap();
        assert_eq!(validate(&ok, &basis), ValidationReport::default());
        let bad = ProblemSpec::from_config(&base(GraphSpec::Identity, Forcing::Linear { coef: 2.0 }, 1.0)).unwrap();
        let rep = validate(&bad, &basis);
        assert!(rep.violations.iter().any(|v| v.contains("Lipschitz")), "{rep:?}");
        let mut cfg = base(GraphSpec::Heaviside, Forcing::Zero, 0.0);
        cfg.u0 = InitialField::Zero;
        cfg.v0 = InitialSelection::Field { field: InitialField::Constant { value: 0.5 } };
        let rep = validate(&ProblemSpec::from_config(&cfg).unwrap(), &basis);
        assert!(rep.is_ok(), "{rep:?}");
        assert_eq!(rep.warnings.len(), 2);
        cfg.v0 = InitialSelection::Field { field: InitialField::Constant { value: 1.5 } };
        assert!(!validate(&ProblemSpec::from_config(&cfg).unwrap(), &basis).is_ok());
    }

    #[test]
    fn regularization_on_jump_nodes() {
        let h = ScalarGraph::heaviside();
        let eps = 0.1;
        let (u, v) = regularize_nodes(&h, &[0.0], &[0.3], eps).unwrap();
        assert_abs_diff_eq!(u[0], 0.3 * eps, epsilon = 1e-15);
        assert_abs_diff_eq!(v[0], 0.3, epsilon = 1e-15);
        let (u, v) = regularize_nodes(&h, &[0.0, -1.0], &[0.5, 0.0], 0.01).unwrap();
        assert_eq!(v[0], 0.5);
        assert_eq!((u[1], v[1]), (-1.0, 0.0));
        let id = ScalarGraph::identity();
        let (u, v) = regularize_nodes(&id, &[2.0], &[2.0], eps).unwrap();
        assert_eq!(u[0], 2.0);
        assert_abs_diff_eq!(v[0], 2.0 / (1.0 + eps), epsilon = 1e-15);
        let (u, _) = regularize_nodes(&ScalarGraph::stefan(), &[0.0, 0.4], &[0.0, 1.4], eps).unwrap();
        assert_eq!(u, vec![0.0, 0.4]);
        assert!(matches!(regularize_nodes(&id, &[f64::NAN], &[0.0], eps), Err(Error::Domain(_))));
        assert!(regularize_nodes(&id, &[0.0], &[0.0], 1.5).is_err());
    }

    #[test]
    fn regularized_init_for_identity_alpha() {
        let basis = eigenpairs(Domain::unit_interval(), 4).unwrap();
        let mut cfg = base(GraphSpec::Identity, Forcing::Zero, 0.0);
        cfg.v0 = InitialSelection::Field { field: InitialField::Mode { index: 1, amplitude: 1.0 } };
        let spec = ProblemSpec::from_config(&cfg).unwrap();
        let (eps, nu) = (0.1, 0.2);
        let init = build_regularized(&spec, eps, nu, &basis).unwrap();
        assert_abs_diff_eq!(init.z0[0], nu + 1.0 / (1.0 + eps), epsilon = 1e-12);
        assert!(init.z0[1..].iter().all(|c| c.abs() < 1e-12));
        assert!(init.potential <= init.potential_bound + 1e-14);
        // quadratic conjugate: eta_hat(v) = v^2 / (2 c)
        let c = nu + 1.0 / (1.0 + eps);
        assert_abs_diff_eq!(init.potential, 0.5 * c, epsilon = 1e-12);
        let zero = build_regularized(&spec, eps, 0.0, &basis).unwrap();
        assert_eq!(zero.v0_nu_eps, zero.v0_eps);
    }

    #[test]
    fn constants_examples() {
        let basis = eigenpairs(Domain::unit_interval(), 4).unwrap();
        let mut cfg = base(GraphSpec::Identity, Forcing::Zero, 0.0);
        cfg.beta = GraphSpec::Arctan;
        let spec = ProblemSpec::from_config(&cfg).unwrap();
        let c = constants(&spec, &basis);
        assert_abs_diff_eq!(c.c_v, 1.0 / PI, epsilon = 1e-15);
        assert_eq!(c.c_g, 0.0);
        assert_abs_diff_eq!(c.tau_window.unwrap(), PI / 8.0, epsilon = 1e-12);
        let mut cfg = base(GraphSpec::Heaviside, Forcing::Zero, 0.0);
        cfg.beta = GraphSpec::Arctan;
        let c = constants(&ProblemSpec::from_config(&cfg).unwrap(), &basis);
        assert!(c.tau_window.is_none() && c.notes.len() == 1);
        // C_G by hand for c_V = 1/pi, Lambda_g = 1, q = 3, |Omega| = 1
        let cv2 = 1.0 / (PI * PI);
        let hand = cv2 + (1.0 / 6.0) * (3.0 / (10.0 * cv2)).powi(-5);
        assert_abs_diff_eq!(c_g(1.0 / PI, 1.0, 3.0, 1.0), hand, epsilon = 1e-15);
    }

    #[test]
    fn initial_fields() {
        let basis = eigenpairs(Domain::unit_interval(), 6).unwrap();
        let plateau = InitialField::PlateauSine { amplitude: 2.0, width: 0.5 }.nodal(&basis).unwrap();
        assert!(plateau.iter().any(|&v| v == 0.0));
        assert!(plateau.iter().all(|&v| v.abs() <= 1.0 + 1e-15));
        let tab = InitialField::Tabulated { points: vec![[0.0, 0.0], [1.0, 2.0]] }.nodal(&basis).unwrap();
        for (x, v) in basis.nodes().iter().zip(&tab) {
            assert_abs_diff_eq!(*v, 2.0 * x[0], epsilon = 1e-14);
        }
        let rect = eigenpairs(Domain::Rectangle { lx: 1.0, ly: 1.0 }, 3).unwrap();
        assert!(InitialField::Tabulated { points: vec![[0.0, 0.0], [1.0, 2.0]] }.nodal(&rect).is_err());
        let m = InitialField::Mode { index: 2, amplitude: 3.0 }.nodal(&basis).unwrap();
        let c = basis.project(&m).unwrap();
        assert_abs_diff_eq!(c[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn beta_q_estimate_is_finite_and_bounded() {
        let basis = eigenpairs(Domain::unit_interval(), 8).unwrap();
        let mut cfg = base(GraphSpec::Stefan, Forcing::Zero, 0.0);
        cfg.beta = GraphSpec::Arctan;
        cfg.u0 = InitialField::PlateauSine { amplitude: 1.0, width: 0.3 };
        cfg.v0 = InitialSelection::MinimalSection { jump_value: Some(0.5) };
        let spec = ProblemSpec::from_config(&cfg).unwrap();
        let init = build_regularized(&spec, 0.1, 0.1, &basis).unwrap();
        let est = beta_q_estimate(&spec, &init, &basis).unwrap();
        assert!(est.potential.is_finite() && est.potential >= 0.0);
        assert!(est.potential <= est.bound, "{est:?}");
    }
}
