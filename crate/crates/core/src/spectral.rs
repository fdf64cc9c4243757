//! Dirichlet-Laplacian sine basis on an interval or a rectangle.
//!
//! Fields live in two representations: modal coefficients with respect to
//! the H-orthonormal eigenfunctions `e_i`, and nodal values on a tensor
//! Gauss–Legendre grid that oversamples the highest frequency by a factor of
//! two. Nonlinearities are applied nodewise and projected back.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::RegularizedGraph;
use crate::newton::{self, Method, SolverKind};
use crate::quadrature::gauss_legendre;

/// Extra quadrature points per direction on top of twice the top frequency.
const QUAD_PADDING: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

impl Domain {
    pub fn unit_interval() -> Self {
        Domain::Interval { length: 1.0 }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { length } => length,
            Domain::Rectangle { lx, ly } => lx * ly,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            Domain::Interval { length } => length > 0.0 && length.is_finite(),
            Domain::Rectangle { lx, ly } => lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("domain sides must be positive and finite: {self:?}")))
        }
    }
}

/// First `n` Dirichlet eigenpairs with their quadrature grid.
#[derive(Clone, Debug)]
pub struct Eigenbasis {
    domain: Domain,
    modes: Vec<(usize, usize)>,
    lambdas: Vec<f64>,
    nodes: Vec<[f64; 2]>,
    weights: Vec<f64>,
    synth: DMatrix<f64>,
    proj: DMatrix<f64>,
}

fn sine(k: usize, len: f64, x: f64) -> f64 {
    (2.0 / len).sqrt() * (k as f64 * PI * x / len).sin()
}

/// Mode indices and eigenvalues of the first `n` eigenpairs, sorted by
/// eigenvalue and then by index.
pub fn mode_list(domain: Domain, n: usize) -> (Vec<(usize, usize)>, Vec<f64>) {
    match domain {
        Domain::Interval { length } => (1..=n).map(|i| ((i, 0), (i as f64 * PI / length).powi(2))).unzip(),
        Domain::Rectangle { lx, ly } => {
            let mut all: Vec<((usize, usize), f64)> = (1..=n)
                .flat_map(|i| (1..=n).map(move |j| (i, j)))
                .map(|(i, j)| {
                    let lam = PI * PI * ((i * i) as f64 / (lx * lx) + (j * j) as f64 / (ly * ly));
                    ((i, j), lam)
                })
                .collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            all.truncate(n);
            all.into_iter().unzip()
        }
    }
}

/// Value of the eigenfunction with indices `mode` at `x`.
pub fn eigenfunction(domain: Domain, mode: (usize, usize), x: [f64; 2]) -> f64 {
    match domain {
        Domain::Interval { length } => sine(mode.0, length, x[0]),
        Domain::Rectangle { lx, ly } => sine(mode.0, lx, x[0]) * sine(mode.1, ly, x[1]),
    }
}

pub fn eigenpairs(domain: Domain, n: usize) -> Result<Eigenbasis> {
    Eigenbasis::new(domain, n)
}

impl Eigenbasis {
    pub fn new(domain: Domain, n: usize) -> Result<Self> {
        domain.check()?;
        if n == 0 {
            return Err(Error::param("mode count must be at least 1"));
        }
        let (modes, lambdas) = mode_list(domain, n);
        let (nodes, weights) = match domain {
            Domain::Interval { length } => {
                let q = 2 * n + QUAD_PADDING;
                gauss_legendre(q, 0.0, length)
                    .into_iter()
                    .map(|(x, w)| ([x, 0.0], w))
                    .unzip()
            }
            Domain::Rectangle { lx, ly } => {
                let kx = modes.iter().map(|m| m.0).max().unwrap_or(1);
                let ky = modes.iter().map(|m| m.1).max().unwrap_or(1);
                let gx = gauss_legendre(2 * kx + QUAD_PADDING, 0.0, lx);
                let gy = gauss_legendre(2 * ky + QUAD_PADDING, 0.0, ly);
                let mut nodes = Vec::with_capacity(gx.len() * gy.len());
                let mut weights = Vec::with_capacity(gx.len() * gy.len());
                for &(x, wx) in &gx {
                    for &(y, wy) in &gy {
                        nodes.push([x, y]);
                        weights.push(wx * wy);
                    }
                }
                (nodes, weights)
            }
        };
        let mut basis = Eigenbasis {
            domain,
            modes,
            lambdas,
            nodes,
            weights,
            synth: DMatrix::zeros(0, 0),
            proj: DMatrix::zeros(0, 0),
        };
        let q = basis.nodes.len();
        basis.synth = DMatrix::from_fn(q, n, |k, i| basis.eval_mode(i, basis.nodes[k]));
        basis.proj = DMatrix::from_fn(n, q, |i, k| basis.weights[k] * basis.synth[(k, i)]);
        Ok(basis)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// Mode indices `(i, j)`; `j = 0` on intervals.
    pub fn modes(&self) -> &[(usize, usize)] {
        &self.modes
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn quad_len(&self) -> usize {
        self.nodes.len()
    }

    /// Embedding constant `c_V = lambda_1^(-1/2)`.
    pub fn c_v(&self) -> f64 {
        self.lambdas[0].powf(-0.5)
    }

    /// Value of the `i`-th eigenfunction (zero-based) at a point.
    pub fn eval_mode(&self, i: usize, x: [f64; 2]) -> f64 {
        eigenfunction(self.domain, self.modes[i], x)
    }

    /// Synthesizes modal coefficients at an arbitrary point.
    pub fn eval_at(&self, modal: &[f64], x: [f64; 2]) -> f64 {
        modal.iter().enumerate().map(|(i, c)| c * self.eval_mode(i, x)).sum()
    }

    pub(crate) fn check_len(&self, v: &[f64], expected: usize) -> Result<()> {
        if v.len() == expected {
            Ok(())
        } else {
            Err(Error::Shape { expected, got: v.len() })
        }
    }

    /// Modal coefficients `(f, e_i)` of nodal values.
    pub fn project(&self, nodal: &[f64]) -> Result<Vec<f64>> {
        self.check_len(nodal, self.quad_len())?;
        Ok(self.project_unchecked(nodal))
    }

    pub(crate) fn project_unchecked(&self, nodal: &[f64]) -> Vec<f64> {
        let q = self.quad_len();
        (0..self.n())
            .map(|i| {
                let row = self.proj.row(i);
                (0..q).map(|k| row[k] * nodal[k]).sum()
            })
            .collect()
    }

    /// Nodal values of a modal field.
    pub fn synth(&self, modal: &[f64]) -> Result<Vec<f64>> {
        self.check_len(modal, self.n())?;
        Ok(self.synth_unchecked(modal))
    }

    pub(crate) fn synth_unchecked(&self, modal: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..self.quad_len())
            .map(|k| (0..n).map(|i| self.synth[(k, i)] * modal[i]).sum())
            .collect()
    }

    /// Diagonal Riesz map `(A u)_i = lambda_i u_i`.
    pub fn apply_a(&self, modal: &[f64]) -> Vec<f64> {
        modal.iter().zip(&self.lambdas).map(|(u, l)| u * l).collect()
    }

    /// `<A u, u> = sum lambda_i u_i^2`, the squared V-norm.
    pub fn v_norm_sq(&self, modal: &[f64]) -> f64 {
        modal.iter().zip(&self.lambdas).map(|(u, l)| l * u * u).sum()
    }

    /// Squared V*-norm `sum u_i^2 / lambda_i`.
    pub fn v_dual_norm_sq(&self, modal: &[f64]) -> f64 {
        modal.iter().zip(&self.lambdas).map(|(u, l)| u * u / l).sum()
    }

    /// Discrete L2 inner product of nodal fields.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Discrete `L^p` norm of a nodal field.
    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        let s: f64 = self.weights.iter().zip(f).map(|(w, v)| w * v.abs().powf(p)).sum();
        s.powf(1.0 / p)
    }

    /// Discrete integral of a nodal field.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Modal coefficients of `pi_n(phi(u))`.
    pub fn nodal_map<F>(&self, modal: &[f64], phi: F) -> Result<Vec<f64>>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let nodal = self.synth(modal)?;
        let mapped = nodal.into_iter().map(phi).collect::<Result<Vec<f64>>>()?;
        Ok(self.project_unchecked(&mapped))
    }

    /// `P diag(d) S`, the Galerkin matrix of multiplication by a nodal field.
    pub(crate) fn weighted_gram(&self, diag: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.synth.clone();
        for (k, d) in diag.iter().enumerate() {
            scaled.row_mut(k).scale_mut(*d);
        }
        &self.proj * scaled
    }
}

/// Result of [`eta_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct EtaSolution {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub method: Method,
}

/// Solves `pi_n alpha_nu_eps(u) = z` on the Galerkin space.
pub fn eta_solve(
    basis: &Eigenbasis,
    z: &[f64],
    alpha: &RegularizedGraph,
    tol: f64,
    budget: usize,
) -> Result<EtaSolution> {
    eta_solve_from(basis, z, alpha, None, tol, budget)
}

/// [`eta_solve`] with an explicit starting point.
pub fn eta_solve_from(
    basis: &Eigenbasis,
    z: &[f64],
    alpha: &RegularizedGraph,
    guess: Option<&[f64]>,
    tol: f64,
    budget: usize,
) -> Result<EtaSolution> {
    basis.check_len(z, basis.n())?;
    if alpha.nu() <= 0.0 {
        return Err(Error::param("eta_solve needs nu > 0"));
    }
    let x0 = match guess {
        Some(g) => {
            basis.check_len(g, basis.n())?;
            g.to_vec()
        }
        None => z.iter().map(|v| v / alpha.lipschitz()).collect(),
    };
    let residual = |u: &[f64]| -> Result<Vec<f64>> {
        let mut r = basis.nodal_map(u, |s| alpha.value(s))?;
        for (ri, zi) in r.iter_mut().zip(z) {
            *ri -= zi;
        }
        Ok(r)
    };
    let jacobian = |u: &[f64]| -> Result<DMatrix<f64>> {
        let slopes = basis
            .synth_unchecked(u)
            .into_iter()
            .map(|s| alpha.slope(s))
            .collect::<Result<Vec<f64>>>()?;
        Ok(basis.weighted_gram(&slopes))
    };
    let energy = |u: &[f64]| -> Result<f64> {
        let nodal = basis.synth_unchecked(u);
        let mut e = 0.0;
        for (s, w) in nodal.iter().zip(basis.weights()) {
            e += w * alpha.potential(*s)?;
        }
        Ok(e - u.iter().zip(z).map(|(a, b)| a * b).sum::<f64>())
    };
    let lip = alpha.lipschitz();
    let tau = alpha.nu() / (lip * lip);
    let out = newton::solve(residual, jacobian, Some(&energy), x0, tol, budget, tau, SolverKind::Newton)?;
    Ok(EtaSolution {
        u: out.x,
        iterations: out.iterations,
        residual: out.residual,
        method: out.method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{RegularizedGraph, ScalarGraph};
    use approx::assert_abs_diff_eq;

    fn unit(n: usize) -> Eigenbasis {
        eigenpairs(Domain::unit_interval(), n).unwrap()
    }

    #[test]
    fn eigenvalues_and_embedding_constant() {
        let b = unit(4);
        assert_abs_diff_eq!(b.lambdas()[0], PI * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(b.c_v(), 1.0 / PI, epsilon = 1e-15);
        let r = eigenpairs(Domain::Rectangle { lx: 1.0, ly: 1.0 }, 5).unwrap();
        assert_abs_diff_eq!(r.lambdas()[0], 2.0 * PI * PI, epsilon = 1e-12);
        assert_eq!(r.modes()[..3], [(1, 1), (1, 2), (2, 1)]);
        assert!(r.lambdas().windows(2).all(|w| w[0] <= w[1]));
        assert!(eigenpairs(Domain::unit_interval(), 0).is_err());
        assert!(eigenpairs(Domain::Interval { length: -1.0 }, 3).is_err());
    }

    #[test]
    fn quadrature_orthonormality() {
        for b in [unit(48), eigenpairs(Domain::Rectangle { lx: 1.0, ly: 2.0 }, 20).unwrap()] {
            let gram = &b.proj * &b.synth;
            for i in 0..b.n() {
                for j in 0..b.n() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[(i, j)] - expect).abs() <= 1e-10, "({i},{j}) {}", gram[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn projection_examples() {
        let b = unit(3);
        let e2: Vec<f64> = b.nodes().iter().map(|x| b.eval_mode(1, *x)).collect();
        let c = b.project(&e2).unwrap();
        assert_abs_diff_eq!(c[1], 1.0, epsilon = 1e-12);
        assert!(c[0].abs() < 1e-12 && c[2].abs() < 1e-12);
        let e4: Vec<f64> = b.nodes().iter().map(|x| sine(4, 1.0, x[0])).collect();
        assert!(b.project(&e4).unwrap().iter().all(|v| v.abs() <= 1e-10));
        let ones = vec![1.0; b.quad_len()];
        let c = b.project(&ones).unwrap();
        let s = 2f64.sqrt();
        assert_abs_diff_eq!(c[0], 2.0 * s / PI, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[2], 2.0 * s / (3.0 * PI), epsilon = 1e-12);
        assert!(matches!(b.project(&[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn riesz_map() {
        let b = unit(2);
        assert_eq!(b.apply_a(&[1.0, 0.0]), vec![PI * PI, 0.0]);
        assert_eq!(b.apply_a(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_abs_diff_eq!(b.v_norm_sq(&[1.0, 1.0]), 5.0 * PI * PI, epsilon = 1e-12);
    }

    #[test]
    fn nodal_map_square_matches_fine_quadrature() {
        let b = unit(5);
        let mut u = vec![0.0; 5];
        u[0] = 1.0;
        let c = b.nodal_map(&u, |r| Ok(r * r)).unwrap();
        // midpoint rule on 20000 cells as the reference
        let cells = 20_000;
        for i in 0..5 {
            let fine: f64 = (0..cells)
                .map(|k| {
                    let x = (k as f64 + 0.5) / cells as f64;
                    sine(1, 1.0, x).powi(2) * sine(i + 1, 1.0, x)
                })
                .sum::<f64>()
                / cells as f64;
            assert_abs_diff_eq!(c[i], fine, epsilon = 1e-8);
        }
        assert_eq!(b.nodal_map(&u, |r| Ok(r)).unwrap().len(), 5);
        let id = b.nodal_map(&[0.3, -0.2, 0.1, 0.0, 0.5], Ok).unwrap();
        for (a, e) in id.iter().zip([0.3, -0.2, 0.1, 0.0, 0.5]) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn eta_solve_identity_and_zero() {
        let b = unit(4);
        let (nu, eps) = (0.1, 0.2);
        let alpha = RegularizedGraph::new(ScalarGraph::identity(), eps, nu).unwrap();
        let z = [1.0, -0.5, 0.25, 0.0];
        let sol = eta_solve(&b, &z, &alpha, 1e-12, 50).unwrap();
        let c = nu + 1.0 / (1.0 + eps);
        for (u, zi) in sol.u.iter().zip(z) {
            assert_abs_diff_eq!(*u, zi / c, epsilon = 1e-11);
        }
        let zero = eta_solve(&b, &[0.0; 4], &alpha, 1e-12, 50).unwrap();
        assert!(zero.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eta_solve_heaviside_single_mode_matches_nodal_bisection() {
        let b = unit(1);
        let (nu, eps) = (0.1, 0.1);
        let alpha = RegularizedGraph::new(ScalarGraph::heaviside(), eps, nu).unwrap();
        let z = [0.4];
        let sol = eta_solve(&b, &z, &alpha, 1e-12, 100).unwrap();
        // independent check: residual of pi_1 alpha(u e_1) computed with a
        // hand-coded H_eps = clamp(r/eps, 0, 1)
        let h_eps = |r: f64| (r / eps).clamp(0.0, 1.0);
        let mut acc = 0.0;
        for (x, w) in b.nodes().iter().zip(b.weights()) {
            let e = b.eval_mode(0, *x);
            let r = sol.u[0] * e;
            acc += w * (nu * r + h_eps(r)) * e;
        }
        assert_abs_diff_eq!(acc, z[0], epsilon = 1e-8);
        // scalar bisection on the amplitude
        let f = |a: f64| {
            b.nodes()
                .iter()
                .zip(b.weights())
                .map(|(x, w)| {
                    let e = b.eval_mode(0, *x);
                    w * (nu * a * e + h_eps(a * e)) * e
                })
                .sum::<f64>()
                - z[0]
        };
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert_abs_diff_eq!(sol.u[0], 0.5 * (lo + hi), epsilon = 1e-8);
    }
}
