//! Sonine kernel pairs and the discrete fractional calculus built on them.
//!
//! The time derivative `d/dt (kappa * (z - z0))` is discretized with the L1
//! product-integration rule on a uniform grid: the history is taken piecewise
//! linear and each cell integral of `kappa` is computed exactly. The companion
//! convolution with `ell` uses exact cell integrals of `ell` against a
//! piecewise-constant integrand.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::gauss_jacobi;

/// The kernel `t -> coefficient * t^exponent` on `(0, inf)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerKernel {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerKernel {
    pub fn value(&self, t: f64) -> f64 {
        self.coefficient * t.powf(self.exponent)
    }

    /// Exact integral over `[a, b]`, `0 <= a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let e1 = self.exponent + 1.0;
        self.coefficient * (b.powf(e1) - a.powf(e1)) / e1
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.coefficient >= 0.0 && self.exponent <= 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    RiemannLiouville,
    Custom,
}

/// Kernel pair `(ell, kappa)` with `ell * kappa = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoninePair {
    theta: f64,
    ell: PowerKernel,
    kappa: PowerKernel,
    kind: KernelKind,
}

/// Riemann-Liouville pair `ell(t) = t^(theta-1)/Gamma(theta)`, `kappa(t) = t^(-theta)/Gamma(1-theta)`.
pub fn rl_pair(theta: f64) -> Result<SoninePair> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::param(format!("theta must lie in (0, 1), got {theta}")));
    }
    Ok(SoninePair {
        theta,
        ell: PowerKernel {
            coefficient: 1.0 / gamma(theta),
            exponent: theta - 1.0,
        },
        kappa: PowerKernel {
            coefficient: 1.0 / gamma(1.0 - theta),
            exponent: -theta,
        },
        kind: KernelKind::RiemannLiouville,
    })
}

impl SoninePair {
    /// A user pair of power kernels. The Sonine identity is not assumed;
    /// check it with [`verify_sonine`].
    pub fn custom(theta: f64, ell: PowerKernel, kappa: PowerKernel) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::param(format!("theta must lie in (0, 1), got {theta}")));
        }
        for k in [ell, kappa] {
            if !(k.exponent > -1.0 && k.exponent <= 0.0 && k.coefficient > 0.0) {
                return Err(Error::param(format!(
                    "kernel {}*t^{} is not a nonincreasing integrable power kernel",
                    k.coefficient, k.exponent
                )));
            }
        }
        Ok(Self {
            theta,
            ell,
            kappa,
            kind: KernelKind::Custom,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn ell_kernel(&self) -> PowerKernel {
        self.ell
    }

    pub fn kappa_kernel(&self) -> PowerKernel {
        self.kappa
    }

    pub fn ell(&self, t: f64) -> f64 {
        self.ell.value(t)
    }

    pub fn kappa(&self, t: f64) -> f64 {
        self.kappa.value(t)
    }

    /// `||ell||_{L^1(0, t)}`.
    pub fn ell_l1(&self, t: f64) -> f64 {
        self.ell.integral(0.0, t)
    }

    /// Largest `tau` with `||ell||_{L^1(0, tau)} <= level`.
    pub fn ell_l1_inverse(&self, level: f64) -> f64 {
        let e1 = self.ell.exponent + 1.0;
        (level * e1 / self.ell.coefficient).powf(1.0 / e1)
    }
}

/// Maximum of `|(ell * kappa)(t) - 1|` over `grid`.
///
/// After the substitution `s = t sigma` the singular factors
/// `(1 - sigma)^a sigma^b` become the weight of a Gauss-Jacobi rule, so the
/// remaining smooth factor is integrated exactly for power kernels.
pub fn verify_sonine(pair: &SoninePair, grid: &[f64]) -> f64 {
    let (a, b) = (pair.ell.exponent, pair.kappa.exponent);
    let rule = gauss_jacobi(8, a, b);
    grid.iter()
        .map(|&t| {
            // x in [-1, 1], sigma = (1 + x)/2, weight (1 - x)^a (1 + x)^b
            let sum: f64 = rule
                .iter()
                .map(|&(x, w)| {
                    let sigma = 0.5 * (1.0 + x);
                    let (left, right) = (t * (1.0 - sigma), t * sigma);
                    let smooth = pair.ell(left) / left.powf(a) * pair.kappa(right) / right.powf(b);
                    w * smooth
                })
                .sum();
            let conv = sum * t.powf(1.0 + a + b) * 0.5f64.powf(1.0 + a + b);
            (conv - 1.0).abs()
        })
        .fold(0.0, |acc: f64, d| if d.is_nan() || acc.is_nan() { f64::NAN } else { acc.max(d) })
}

/// L1 weights for `d/dt (kappa * (z - z0))` on a uniform grid of step `h`.
///
/// `D_m(z) = b0 * sum_{j=1}^{m} a_{m-j} (z_j - z_{j-1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct FracWeights {
    theta: f64,
    h: f64,
    a: Vec<f64>,
    b0: f64,
}

/// L1 weights of the Riemann-Liouville derivative of order `theta`.
pub fn l1_weights(theta: f64, h: f64, count: usize) -> Result<FracWeights> {
    FracWeights::new(&rl_pair(theta)?, h, count)
}

impl FracWeights {
    pub fn new(pair: &SoninePair, h: f64, count: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::param(format!("time step must be positive, got {h}")));
        }
        if count == 0 {
            return Err(Error::param("at least one time step is required"));
        }
        let kappa = pair.kappa;
        let e1 = kappa.exponent + 1.0;
        let a = (0..count)
            .map(|k| {
                let k = k as f64;
                (k + 1.0).powf(e1) - k.powf(e1)
            })
            .collect();
        Ok(Self {
            theta: pair.theta,
            h,
            a,
            b0: kappa.coefficient * h.powf(kappa.exponent) / e1,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of steps `M` the weights cover.
    pub fn count(&self) -> usize {
        self.a.len()
    }

    /// Coefficients `a_0 .. a_{M-1}`.
    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    /// Diagonal coefficient `b0`.
    pub fn b0(&self) -> f64 {
        self.b0
    }
}

fn check_history<T: AsRef<[f64]>>(weights: &FracWeights, history: &[T]) -> Result<usize> {
    if history.is_empty() {
        return Err(Error::param("history must contain at least z_0"));
    }
    let m = history.len() - 1;
    if m > weights.count() {
        return Err(Error::param(format!(
            "history has {m} steps but the weights cover {}",
            weights.count()
        )));
    }
    let dim = history[0].as_ref().len();
    if let Some(bad) = history.iter().find(|z| z.as_ref().len() != dim) {
        return Err(Error::Shape {
            expected: dim,
            got: bad.as_ref().len(),
        });
    }
    Ok(dim)
}

/// Discrete derivative `D_m` at the last entry of `history = [z_0, .., z_m]`.
pub fn frac_derivative_apply<T: AsRef<[f64]>>(weights: &FracWeights, history: &[T]) -> Result<Vec<f64>> {
    let dim = check_history(weights, history)?;
    let m = history.len() - 1;
    let mut out = vec![0.0; dim];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 1..=m {
            acc += weights.a[m - j] * (history[j].as_ref()[i] - history[j - 1].as_ref()[i]);
        }
        *o = weights.b0 * acc;
    }
    Ok(out)
}

/// Same value as [`frac_derivative_apply`], evaluated from a contiguous
/// increment buffer in row blocks.
pub fn fast_history<T: AsRef<[f64]>>(weights: &FracWeights, history: &[T]) -> Result<Vec<f64>> {
    check_history(weights, history)?;
    let m = history.len() - 1;
    let mut buffer = HistoryBuffer::new(history[0].as_ref());
    for z in history.iter().take(m).skip(1) {
        buffer.push(z.as_ref())?;
    }
    let mut out = buffer.lagged_sum(weights);
    if m > 0 {
        let prev = history[m - 1].as_ref();
        for ((o, &z), &p) in out.iter_mut().zip(history[m].as_ref()).zip(prev) {
            *o += weights.a[0] * (z - p);
        }
    }
    for o in &mut out {
        *o *= weights.b0;
    }
    Ok(out)
}

const HISTORY_BLOCK: usize = 64;

/// Increments `z_j - z_{j-1}` stored row-major in one contiguous buffer.
#[derive(Clone, Debug)]
pub struct HistoryBuffer {
    dim: usize,
    last: Vec<f64>,
    increments: Vec<f64>,
}

impl HistoryBuffer {
    pub fn new(z0: &[f64]) -> Self {
        Self {
            dim: z0.len(),
            last: z0.to_vec(),
            increments: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored increments.
    pub fn len(&self) -> usize {
        self.increments.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn push(&mut self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::Shape {
                expected: self.dim,
                got: z.len(),
            });
        }
        for (l, &v) in self.last.iter_mut().zip(z) {
            self.increments.push(v - *l);
            *l = v;
        }
        Ok(())
    }

    /// Increment `z_j - z_{j-1}` for `1 <= j <= len()`.
    pub fn increment(&self, j: usize) -> &[f64] {
        &self.increments[(j - 1) * self.dim..j * self.dim]
    }

    /// Lagged history `sum_{j=1}^{k} a_{k+1-j} (z_j - z_{j-1})` for the next
    /// step `k + 1`, where `k = len()`; the `b0` factor is not applied.
    pub fn lagged_sum(&self, weights: &FracWeights) -> Vec<f64> {
        let k = self.len();
        let mut acc = vec![0.0; self.dim];
        if self.dim == 0 {
            return acc;
        }
        for (block_idx, block) in self.increments.chunks(HISTORY_BLOCK * self.dim).enumerate() {
            let first = block_idx * HISTORY_BLOCK + 1;
            for (offset, row) in block.chunks_exact(self.dim).enumerate() {
                let coef = weights.a[k + 1 - (first + offset)];
                for (s, &d) in acc.iter_mut().zip(row) {
                    *s += coef * d;
                }
            }
        }
        acc
    }
}

/// Discrete `(ell * f)(t_m)` for `m = 0..=M`, with `f` constant on each cell
/// `(t_{j-1}, t_j]` and equal to `values[j]` there. `values[0]` is not used.
pub fn ell_convolve(pair: &SoninePair, h: f64, values: &[f64]) -> Vec<f64> {
    let weights = ell_cell_weights(pair, h, values.len().saturating_sub(1));
    convolve_with(&weights, values)
}

/// Cell integrals `w_k = int_{kh}^{(k+1)h} ell`.
pub fn ell_cell_weights(pair: &SoninePair, h: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| pair.ell.integral(k as f64 * h, (k + 1) as f64 * h))
        .collect()
}

pub(crate) fn convolve_with(cell_weights: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for m in 1..values.len() {
        out[m] = (1..=m).map(|j| cell_weights[m - j] * values[j]).sum();
    }
    out
}
