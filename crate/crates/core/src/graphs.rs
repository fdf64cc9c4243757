//! Scalar maximal monotone graphs.
//!
//! A [`ScalarGraph`] is stored as an explicit list of smooth monotone
//! branches plus the finite list of points where the graph is multivalued
//! (its [`Jump`]s). The built-in graphs carry closed forms for their
//! resolvent, potential and convex conjugate; user-supplied piecewise-linear
//! graphs fall back to the generic numerical routines (safeguarded bisection,
//! adaptive Simpson, golden-section search).
//!
//! On top of the raw graph this module provides the regularized operators
//! used by the Galerkin scheme: the Yosida approximation, its truncation at
//! level `1/eps` ([`TruncatedYosida`]) and the strongly monotone shift
//! `nu * id + yosida` ([`RegularizedGraph`]) together with its inverse.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute accuracy of the generic resolvent solve.
pub const RESOLVENT_TOL: f64 = 1e-12;
/// Iteration budget of the generic resolvent solve.
pub const RESOLVENT_MAX_ITER: usize = 200;
/// Tolerance of the adaptive Simpson rule used for generic potentials.
pub const POTENTIAL_TOL: f64 = 1e-10;
/// Search radius beyond which a conjugate is declared infinite.
pub const CONJUGATE_RADIUS_LIMIT: f64 = 1e8;

/// A point where the graph takes a whole interval of values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    pub at: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Smooth monotone law of a single branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BranchLaw {
    Affine { slope: f64, intercept: f64 },
    /// `sign(r + shift) |r + shift|^(p - 1) - offset`
    SignedPower { p: f64, shift: f64, offset: f64 },
    /// `atan(r + shift) - offset`
    Arctan { shift: f64, offset: f64 },
}

impl BranchLaw {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            BranchLaw::Affine { slope, intercept } => slope * r + intercept,
            BranchLaw::SignedPower { p, shift, offset } => {
                let s = r + shift;
                s.signum() * s.abs().powf(p - 1.0) - offset
            }
            BranchLaw::Arctan { shift, offset } => (r + shift).atan() - offset,
        }
    }

    /// Derivative; `+inf` where the law has a vertical tangent.
    pub fn slope(&self, r: f64) -> f64 {
        match *self {
            BranchLaw::Affine { slope, .. } => slope,
            BranchLaw::SignedPower { p, shift, .. } => {
                let s = (r + shift).abs();
                if s == 0.0 {
                    f64::INFINITY
                } else {
                    (p - 1.0) * s.powf(p - 2.0)
                }
            }
            BranchLaw::Arctan { shift, .. } => {
                let s = r + shift;
                1.0 / (1.0 + s * s)
            }
        }
    }
}

/// Smooth piece of the graph on the closed interval `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub start: f64,
    pub end: f64,
    pub law: BranchLaw,
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Zero,
    Linear { slope: f64 },
    Heaviside,
    Stefan,
    Power { p: f64 },
    Arctan,
    Breakpoints(Vec<(f64, f64)>),
}

/// Serializable description of a graph, as used in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Zero,
    Identity,
    Linear { slope: f64 },
    Heaviside,
    Stefan,
    Power { p: f64 },
    Arctan,
    PiecewiseLinear { points: Vec<[f64; 2]> },
}

/// A maximal monotone graph `gamma` in `R x R`.
///
/// Closed-form shapes are stored together with a translation `(a, b)` so that
/// `gamma(r) = base(r + a) - b`; this keeps the closed forms available after
/// [`ScalarGraph::shift_normalize`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGraph {
    name: String,
    shape: Shape,
    shift: (f64, f64),
    branches: Vec<Branch>,
    jumps: Vec<Jump>,
    strong_monotonicity: Option<f64>,
    lipschitz: Option<f64>,
}

impl ScalarGraph {
    pub fn zero() -> Self {
        Self::from_shape("zero", Shape::Zero, (0.0, 0.0))
    }

    pub fn identity() -> Self {
        Self::from_shape("identity", Shape::Linear { slope: 1.0 }, (0.0, 0.0))
    }

    pub fn linear(slope: f64) -> Result<Self> {
        if !(slope.is_finite() && slope >= 0.0) {
            return Err(Error::param(format!("linear graph needs slope >= 0, got {slope}")));
        }
        Ok(Self::from_shape("linear", Shape::Linear { slope }, (0.0, 0.0)))
    }

    /// Heaviside graph `H` (Hele-Shaw): `0` for `r < 0`, `[0, 1]` at `0`, `1` for `r > 0`.
    pub fn heaviside() -> Self {
        Self::from_shape("heaviside", Shape::Heaviside, (0.0, 0.0))
    }

    /// Two-phase Stefan graph `id + H`.
    pub fn stefan() -> Self {
        Self::from_shape("stefan", Shape::Stefan, (0.0, 0.0))
    }

    /// Porous-medium graph `r -> |r|^(p-2) r` for `p` in `(1, 2)`.
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0 && p < 2.0) {
            return Err(Error::param(format!("power graph needs p in (1, 2), got {p}")));
        }
        Ok(Self::from_shape("power", Shape::Power { p }, (0.0, 0.0)))
    }

    pub fn arctan() -> Self {
        Self::from_shape("arctan", Shape::Arctan, (0.0, 0.0))
    }

    /// Piecewise-linear graph through `points`, with a repeated abscissa
    /// encoding a jump. The first and last segments are extended linearly.
    ///
    /// The graph is taken as given; it need not pass through the origin (see
    /// [`ScalarGraph::piecewise_linear`] for the normalized variant).
    pub fn from_breakpoints(points: &[(f64, f64)]) -> Result<Self> {
        check_breakpoints(points)?;
        Ok(Self::from_shape("piecewise_linear", Shape::Breakpoints(points.to_vec()), (0.0, 0.0)))
    }

    /// Piecewise-linear graph, shifted vertically so that `0` is the minimal
    /// section at the origin.
    pub fn piecewise_linear(points: &[(f64, f64)]) -> Result<Self> {
        let raw = Self::from_breakpoints(points)?;
        let y0 = raw.minimal_section(0.0)?;
        raw.shift_normalize(0.0, y0)
    }

    /// Named constructor used by configuration files and the CLI.
    pub fn built_in(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str| {
            params
                .get(key)
                .copied()
                .ok_or_else(|| Error::param(format!("graph `{name}` needs parameter `{key}`")))
        };
        match name {
            "zero" => Ok(Self::zero()),
            "identity" => Ok(Self::identity()),
            "linear" => Self::linear(get("slope")?),
            "heaviside" | "hele_shaw" => Ok(Self::heaviside()),
            "stefan" => Ok(Self::stefan()),
            "power" | "porous_medium" => Self::power(get("p")?),
            "arctan" => Ok(Self::arctan()),
            other => Err(Error::param(format!("unknown graph `{other}`"))),
        }
    }

    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        match spec {
            GraphSpec::Zero => Ok(Self::zero()),
            GraphSpec::Identity => Ok(Self::identity()),
            GraphSpec::Linear { slope } => Self::linear(*slope),
            GraphSpec::Heaviside => Ok(Self::heaviside()),
            GraphSpec::Stefan => Ok(Self::stefan()),
            GraphSpec::Power { p } => Self::power(*p),
            GraphSpec::Arctan => Ok(Self::arctan()),
            GraphSpec::PiecewiseLinear { points } => {
                let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                Self::piecewise_linear(&pts)
            }
        }
    }

    fn from_shape(name: &str, shape: Shape, shift: (f64, f64)) -> Self {
        let (a, b) = shift;
        let mut jumps = Vec::new();
        let branches = match &shape {
            Shape::Zero => vec![full_line(BranchLaw::Affine { slope: 0.0, intercept: -b })],
            Shape::Linear { slope } => vec![full_line(BranchLaw::Affine {
                slope: *slope,
                intercept: slope * a - b,
            })],
            Shape::Heaviside | Shape::Stefan => {
                let slope = if matches!(shape, Shape::Stefan) { 1.0 } else { 0.0 };
                let at = -a;
                jumps.push(Jump { at, lower: -b, upper: 1.0 - b });
                vec![
                    Branch {
                        start: f64::NEG_INFINITY,
                        end: at,
                        law: BranchLaw::Affine { slope, intercept: slope * a - b },
                    },
                    Branch {
                        start: at,
                        end: f64::INFINITY,
                        law: BranchLaw::Affine { slope, intercept: slope * a + 1.0 - b },
                    },
                ]
            }
            Shape::Power { p } => vec![full_line(BranchLaw::SignedPower { p: *p, shift: a, offset: b })],
            Shape::Arctan => vec![full_line(BranchLaw::Arctan { shift: a, offset: b })],
            Shape::Breakpoints(points) => {
                let (branches, pl_jumps) = breakpoint_pieces(points);
                jumps = pl_jumps;
                branches
            }
        };
        let (strong_monotonicity, lipschitz) = match &shape {
            Shape::Zero => (None, Some(0.0)),
            Shape::Linear { slope } => ((*slope > 0.0).then_some(*slope), Some(*slope)),
            Shape::Heaviside => (None, None),
            Shape::Stefan => (Some(1.0), None),
            Shape::Power { .. } => (None, None),
            Shape::Arctan => (None, Some(1.0)),
            Shape::Breakpoints(_) => {
                let slopes = branches.iter().map(|b| match b.law {
                    BranchLaw::Affine { slope, .. } => slope,
                    _ => unreachable!(),
                });
                let min = slopes.clone().fold(f64::INFINITY, f64::min);
                let max = slopes.fold(0.0, f64::max);
                ((min > 0.0).then_some(min), jumps.is_empty().then_some(max))
            }
        };
        Self {
            name: name.to_string(),
            shape,
            shift,
            branches,
            jumps,
            strong_monotonicity,
            lipschitz,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Strong monotonicity constant, when the graph declares one.
    pub fn strong_monotonicity(&self) -> Option<f64> {
        self.strong_monotonicity
    }

    /// Lipschitz constant, when the graph is single-valued and Lipschitz.
    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn is_normalized(&self) -> bool {
        self.contains(0.0, 0.0)
    }

    /// Whether the potential is strictly convex, i.e. no branch is flat.
    pub fn has_strictly_convex_potential(&self) -> bool {
        self.branches.iter().all(|b| match b.law {
            BranchLaw::Affine { slope, .. } => slope > 0.0,
            _ => true,
        })
    }

    fn jump_at(&self, r: f64) -> Option<&Jump> {
        self.jumps.iter().find(|j| j.at == r)
    }

    fn branch_at(&self, r: f64) -> &Branch {
        self.branches
            .iter()
            .find(|b| b.start <= r && r <= b.end)
            .expect("branches cover the real line")
    }

    /// The closed interval `gamma(r)`.
    pub fn value_interval(&self, r: f64) -> Result<(f64, f64)> {
        if !r.is_finite() {
            return Err(Error::Domain(r));
        }
        if let Some(j) = self.jump_at(r) {
            return Ok((j.lower, j.upper));
        }
        let v = self.branch_at(r).law.value(r);
        Ok((v, v))
    }

    pub fn contains(&self, r: f64, y: f64) -> bool {
        let tol = 1e-12 * (1.0 + y.abs());
        match self.value_interval(r) {
            Ok((lo, hi)) => y >= lo - tol && y <= hi + tol,
            Err(_) => false,
        }
    }

    /// Element of `gamma(r)` closest to zero.
    pub fn minimal_section(&self, r: f64) -> Result<f64> {
        let (lo, hi) = self.value_interval(r)?;
        Ok(if lo > 0.0 {
            lo
        } else if hi < 0.0 {
            hi
        } else {
            0.0
        })
    }

    /// Slope of the graph at `r`; `+inf` at jumps and vertical tangents.
    pub fn slope(&self, r: f64) -> f64 {
        if self.jump_at(r).is_some() {
            return f64::INFINITY;
        }
        self.branch_at(r).law.slope(r)
    }

    /// Any selection of `gamma(r)`; the midpoint at jumps.
    fn selection(&self, r: f64) -> f64 {
        if let Some(j) = self.jump_at(r) {
            return 0.5 * (j.lower + j.upper);
        }
        self.branch_at(r).law.value(r)
    }

    /// Resolvent `(id + eps gamma)^{-1}(r)`.
    pub fn resolvent(&self, eps: f64, r: f64) -> Result<f64> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::param(format!("resolvent needs eps > 0, got {eps}")));
        }
        if !r.is_finite() {
            return Err(Error::Domain(r));
        }
        let (a, b) = self.shift;
        let s = r + a + eps * b;
        let base = match self.shape {
            Shape::Zero => return Ok(r),
            Shape::Linear { slope } => s / (1.0 + eps * slope),
            Shape::Heaviside => {
                if s < 0.0 {
                    s
                } else if s <= eps {
                    0.0
                } else {
                    s - eps
                }
            }
            Shape::Stefan => {
                if s < 0.0 {
                    s / (1.0 + eps)
                } else if s <= eps {
                    0.0
                } else {
                    (s - eps) / (1.0 + eps)
                }
            }
            Shape::Power { p } if p == 1.5 => {
                // x + eps sqrt(x) = |s| on the positive half line
                let root = 0.5 * (-eps + (eps * eps + 4.0 * s.abs()).sqrt());
                s.signum() * root * root
            }
            _ => return self.resolvent_generic(eps, r),
        };
        Ok(base - a)
    }

    /// Resolvent by safeguarded Newton/bisection on `x + eps * gamma(x) - r`.
    pub fn resolvent_generic(&self, eps: f64, r: f64) -> Result<f64> {
        for j in &self.jumps {
            if j.at + eps * j.lower <= r && r <= j.at + eps * j.upper {
                return Ok(j.at);
            }
        }
        solve_increasing(
            |x| (x + eps * self.selection(x) - r, 1.0 + eps * self.slope(x)),
            r,
            1e-12 * (1.0 + r.abs()),
        )
        .map_err(|residual| Error::Resolvent { r, eps, residual })
    }

    /// Yosida approximation `(r - resolvent(r)) / eps`.
    pub fn yosida(&self, eps: f64, r: f64) -> Result<f64> {
        let x = self.resolvent(eps, r)?;
        Ok(match self.jump_at(x) {
            Some(j) => ((r - x) / eps).clamp(j.lower, j.upper),
            // the branch value avoids the cancellation in (r - x) / eps
            None => self.branch_at(x).law.value(x),
        })
    }

    /// Derivative of the Yosida approximation (a generalized derivative at kinks).
    pub fn yosida_slope(&self, eps: f64, r: f64) -> Result<f64> {
        let x = self.resolvent(eps, r)?;
        let s = self.slope(x);
        Ok(if s.is_infinite() { 1.0 / eps } else { s / (1.0 + eps * s) })
    }

    /// Yosida approximation clamped to `[-1/eps, 1/eps]`.
    pub fn yosida_truncated(&self, eps: f64, r: f64) -> Result<f64> {
        let bound = 1.0 / eps;
        Ok(self.yosida(eps, r)?.clamp(-bound, bound))
    }

    /// Potential of the Yosida approximation (Moreau envelope of the potential).
    pub fn yosida_potential(&self, eps: f64, r: f64) -> Result<f64> {
        let x = self.resolvent(eps, r)?;
        let y = self.yosida(eps, r)?;
        Ok(self.potential(x)? + 0.5 * eps * y * y)
    }

    /// Convex potential with `potential(0) = 0`.
    pub fn potential(&self, r: f64) -> Result<f64> {
        if !r.is_finite() {
            return Err(Error::Domain(r));
        }
        if let Shape::Breakpoints(_) = self.shape {
            return Ok(self.potential_numeric(r));
        }
        let (a, b) = self.shift;
        Ok(self.base_potential(r + a) - self.base_potential(a) - b * r)
    }

    fn base_potential(&self, s: f64) -> f64 {
        match self.shape {
            Shape::Zero => 0.0,
            Shape::Linear { slope } => 0.5 * slope * s * s,
            Shape::Heaviside => s.max(0.0),
            Shape::Stefan => 0.5 * s * s + s.max(0.0),
            Shape::Power { p } => s.abs().powf(p) / p,
            Shape::Arctan => s * s.atan() - 0.5 * (s * s).ln_1p(),
            Shape::Breakpoints(_) => unreachable!(),
        }
    }

    /// `int_0^r minimal_section` by adaptive Simpson, split at the kinks.
    pub fn potential_numeric(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        let (lo, hi) = if r > 0.0 { (0.0, r) } else { (r, 0.0) };
        let mut cuts: Vec<f64> = self
            .branches
            .iter()
            .flat_map(|b| [b.start, b.end])
            .chain(self.jumps.iter().map(|j| j.at))
            .filter(|&c| c > lo && c < hi)
            .collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let f = |x: f64| self.minimal_section(x).unwrap_or(f64::NAN);
        let total: f64 = cuts
            .windows(2)
            .map(|w| adaptive_simpson(&f, w[0], w[1], POTENTIAL_TOL))
            .sum();
        if r > 0.0 {
            total
        } else {
            -total
        }
    }

    /// Convex conjugate of the potential; `f64::INFINITY` marks `+inf`.
    pub fn conjugate(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::Domain(y));
        }
        if let Shape::Breakpoints(_) = self.shape {
            return Ok(self.conjugate_numeric(y));
        }
        let (a, b) = self.shift;
        let s = y + b;
        let base = match self.shape {
            Shape::Zero => {
                if s == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Shape::Linear { slope } => {
                if slope > 0.0 {
                    0.5 * s * s / slope
                } else if s == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Shape::Heaviside => {
                if (0.0..=1.0).contains(&s) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Shape::Stefan => {
                if s < 0.0 {
                    0.5 * s * s
                } else if s <= 1.0 {
                    0.0
                } else {
                    0.5 * (s - 1.0) * (s - 1.0)
                }
            }
            Shape::Power { p } => {
                let q = p / (p - 1.0);
                s.abs().powf(q) / q
            }
            Shape::Arctan => {
                if s.abs() < FRAC_PI_2 {
                    -s.cos().ln()
                } else {
                    f64::INFINITY
                }
            }
            Shape::Breakpoints(_) => unreachable!(),
        };
        if base.is_infinite() {
            return Ok(base);
        }
        Ok(base - s * a + self.base_potential(a))
    }

    /// Conjugate by golden-section maximization of `y s - potential(s)`.
    ///
    /// The bracket `[-R, R]` is doubled until the concave objective is
    /// nonincreasing towards both ends; past [`CONJUGATE_RADIUS_LIMIT`] the
    /// supremum is reported as `+inf`.
    pub fn conjugate_numeric(&self, y: f64) -> f64 {
        let phi = |s: f64| y * s - self.potential(s).unwrap_or(f64::INFINITY);
        let mut radius = 1.0;
        loop {
            let right_ok = phi(radius) <= phi(0.5 * radius);
            let left_ok = phi(-radius) <= phi(-0.5 * radius);
            if right_ok && left_ok {
                break;
            }
            radius *= 2.0;
            if radius > CONJUGATE_RADIUS_LIMIT {
                return f64::INFINITY;
            }
        }
        let best = golden_max(&phi, -radius, radius, 1e-13 * radius);
        best.max(phi(0.0)).max(0.0)
    }

    /// Graph translated so that `y0 in gamma(r0)` becomes `0 in gamma(0)`.
    pub fn shift_normalize(&self, r0: f64, y0: f64) -> Result<Self> {
        if !self.contains(r0, y0) {
            return Err(Error::InvalidAnchor { r0, y0 });
        }
        let mut g = match &self.shape {
            Shape::Breakpoints(points) => {
                let moved: Vec<(f64, f64)> = points.iter().map(|&(r, y)| (r - r0, y - y0)).collect();
                Self::from_shape(&self.name, Shape::Breakpoints(moved), (0.0, 0.0))
            }
            shape => {
                let (a, b) = self.shift;
                Self::from_shape(&self.name, shape.clone(), (a + r0, b + y0))
            }
        };
        g.name = self.name.clone();
        Ok(g)
    }
}

fn full_line(law: BranchLaw) -> Branch {
    Branch {
        start: f64::NEG_INFINITY,
        end: f64::INFINITY,
        law,
    }
}

fn check_breakpoints(points: &[(f64, f64)]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::param("piecewise-linear graph needs at least two points"));
    }
    if points.iter().any(|(r, y)| !r.is_finite() || !y.is_finite()) {
        return Err(Error::param("piecewise-linear graph has non-finite points"));
    }
    for w in points.windows(2) {
        if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
            return Err(Error::param(format!(
                "breakpoints must be nondecreasing in both columns: ({}, {}) then ({}, {})",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    let n = points.len();
    if points[0].0 == points[1].0 || points[n - 2].0 == points[n - 1].0 {
        return Err(Error::param("first and last segments of a piecewise-linear graph must not be vertical"));
    }
    Ok(())
}

fn breakpoint_pieces(points: &[(f64, f64)]) -> (Vec<Branch>, Vec<Jump>) {
    let mut branches = Vec::new();
    let mut jumps: Vec<Jump> = Vec::new();
    for w in points.windows(2) {
        let ((r0, y0), (r1, y1)) = (w[0], w[1]);
        if r0 == r1 {
            match jumps.last_mut() {
                Some(j) if j.at == r0 => j.upper = y1,
                _ => jumps.push(Jump { at: r0, lower: y0, upper: y1 }),
            }
            continue;
        }
        let slope = (y1 - y0) / (r1 - r0);
        branches.push(Branch {
            start: r0,
            end: r1,
            law: BranchLaw::Affine { slope, intercept: y0 - slope * r0 },
        });
    }
    branches.first_mut().expect("two distinct abscissae").start = f64::NEG_INFINITY;
    branches.last_mut().expect("two distinct abscissae").end = f64::INFINITY;
    (branches, jumps)
}

/// Parses the two-column breakpoint format (`r value` per line, whitespace or
/// comma separated, `#` comments). A repeated `r` encodes a jump.
pub fn parse_breakpoints(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if cols.len() != 2 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected two columns, found {}", cols.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("`{s}`: {e}"),
            })
        };
        points.push((parse(cols[0])?, parse(cols[1])?));
    }
    check_breakpoints(&points)?;
    Ok(points)
}

/// Root of an increasing scalar function by Newton steps safeguarded with
/// bisection. `f` returns `(value, derivative)`; the derivative may be `+inf`.
/// On failure the last residual is returned.
pub(crate) fn solve_increasing<F>(f: F, guess: f64, ftol: f64) -> std::result::Result<f64, f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let mut step = 1.0 + guess.abs();
    let mut lo = guess - step;
    let mut expansions = 0;
    while f(lo).0 > 0.0 {
        step *= 2.0;
        lo = guess - step;
        expansions += 1;
        if expansions > RESOLVENT_MAX_ITER {
            return Err(f(lo).0);
        }
    }
    step = 1.0 + guess.abs();
    let mut hi = guess + step;
    while f(hi).0 < 0.0 {
        step *= 2.0;
        hi = guess + step;
        expansions += 1;
        if expansions > RESOLVENT_MAX_ITER {
            return Err(f(hi).0);
        }
    }
    let mut x = guess.clamp(lo, hi);
    let mut last = f64::INFINITY;
    let mut widths = [f64::INFINITY; 2];
    for _ in 0..RESOLVENT_MAX_ITER {
        let (fx, dfx) = f(x);
        last = fx;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let scale = 1.0 + x.abs();
        let newton = if dfx.is_finite() && dfx > 0.0 { x - fx / dfx } else { f64::NAN };
        // Newton may cycle around points of infinite slope
        let stalled = hi - lo > 0.5 * widths[0];
        widths = [widths[1], hi - lo];
        let next = if newton > lo && newton < hi && !stalled { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * scale
            || ((next - x).abs() <= 1e-15 * scale && fx.abs() <= ftol)
        {
            return Ok(next);
        }
        x = next;
    }
    if hi - lo <= RESOLVENT_TOL * (1.0 + x.abs()) {
        Ok(x)
    } else {
        Err(last)
    }
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Adaptive Simpson quadrature of a scalar function on `[a, b]`.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adaptive_simpson(&f, a, b, tol)
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..400 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd).max(f(0.5 * (a + b)))
}

/// Where `yosida(eps, .)` reaches `sign / eps`, if it does before `1e12`.
fn truncation_point(graph: &ScalarGraph, eps: f64, sign: f64) -> Result<Option<f64>> {
    let level = 1.0 / eps;
    let mut far = sign;
    while sign * graph.yosida(eps, far)? < level {
        far *= 2.0;
        if far.abs() > 1e12 {
            return Ok(None);
        }
    }
    let (mut near, mut far) = (0.0, far);
    for _ in 0..200 {
        let mid = 0.5 * (near + far);
        if mid == near || mid == far {
            break;
        }
        if sign * graph.yosida(eps, mid)? < level {
            near = mid;
        } else {
            far = mid;
        }
    }
    Ok(Some(far))
}

/// `clamp(yosida(beta, eps, r), -1/eps, 1/eps)` with its generalized derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedYosida {
    graph: ScalarGraph,
    eps: f64,
    cuts: (Option<f64>, Option<f64>),
}

impl TruncatedYosida {
    pub fn new(graph: ScalarGraph, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::param(format!("eps must be positive, got {eps}")));
        }
        let cuts = (truncation_point(&graph, eps, -1.0)?, truncation_point(&graph, eps, 1.0)?);
        Ok(Self { graph, eps, cuts })
    }

    pub fn graph(&self) -> &ScalarGraph {
        &self.graph
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        self.graph.yosida_truncated(self.eps, r)
    }

    /// Primitive of [`TruncatedYosida::value`] vanishing at 0.
    pub fn potential(&self, r: f64) -> Result<f64> {
        match self.cuts {
            (_, Some(c)) if r > c => Ok(self.graph.yosida_potential(self.eps, c)? + (r - c) / self.eps),
            (Some(c), _) if r < c => Ok(self.graph.yosida_potential(self.eps, c)? - (r - c) / self.eps),
            _ => self.graph.yosida_potential(self.eps, r),
        }
    }

    pub fn slope(&self, r: f64) -> Result<f64> {
        let y = self.graph.yosida(self.eps, r)?;
        if y.abs() > 1.0 / self.eps {
            Ok(0.0)
        } else {
            self.graph.yosida_slope(self.eps, r)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.graph.shape == Shape::Zero && self.graph.shift.1 == 0.0
    }
}

/// `nu * id + yosida(alpha, eps, .)`, its potential, conjugate and inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedGraph {
    graph: ScalarGraph,
    eps: f64,
    nu: f64,
}

impl RegularizedGraph {
    pub fn new(graph: ScalarGraph, eps: f64, nu: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::param(format!("eps must be positive, got {eps}")));
        }
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::param(format!("nu must be nonnegative, got {nu}")));
        }
        Ok(Self { graph, eps, nu })
    }

    pub fn graph(&self) -> &ScalarGraph {
        &self.graph
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Lipschitz constant `nu + 1/eps`.
    pub fn lipschitz(&self) -> f64 {
        self.nu + 1.0 / self.eps
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        Ok(self.nu * r + self.graph.yosida(self.eps, r)?)
    }

    pub fn slope(&self, r: f64) -> Result<f64> {
        Ok(self.nu + self.graph.yosida_slope(self.eps, r)?)
    }

    pub fn potential(&self, r: f64) -> Result<f64> {
        Ok(0.5 * self.nu * r * r + self.graph.yosida_potential(self.eps, r)?)
    }

    /// Conjugate potential evaluated at `value(r)`, from the Fenchel identity.
    pub fn conjugate_at_preimage(&self, r: f64) -> Result<f64> {
        Ok((r * self.value(r)? - self.potential(r)?).max(0.0))
    }

    /// Inverse map `eta(v)`, the unique `r` with `value(r) = v`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !v.is_finite() {
            return Err(Error::Domain(v));
        }
        if self.nu == 0.0 {
            return Err(Error::param("the inverse needs nu > 0"));
        }
        let guess = v / self.lipschitz();
        solve_increasing(
            |r| match (self.value(r), self.slope(r)) {
                (Ok(f), Ok(df)) => (f - v, df),
                _ => (f64::NAN, f64::NAN),
            },
            guess,
            1e-13 * (1.0 + v.abs()),
        )
        .map_err(|residual| Error::Resolvent { r: v, eps: self.eps, residual })
    }

    /// Conjugate potential of the regularized graph at `v`.
    pub fn conjugate(&self, v: f64) -> Result<f64> {
        let r = self.inverse(v)?;
        Ok((r * v - self.potential(r)?).max(0.0))
    }
}
