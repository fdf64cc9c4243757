//! Named problems: the Stefan, porous-medium and Hele–Shaw models plus two
//! linear test problems.

use crate::error::{Error, Result};
use crate::graphs::GraphSpec;
use crate::problem::{Forcing, InitialField, InitialSelection, KernelSpec, ProblemConfig};
use crate::spectral::Domain;

pub const PRESET_NAMES: [&str; 5] = ["stefan", "porous_medium", "hele_shaw", "linear_heat", "lipschitz_demo"];

fn nonlinear(alpha: GraphSpec, beta: GraphSpec, u0: InitialField, v0: InitialSelection) -> ProblemConfig {
    ProblemConfig {
        domain: Domain::unit_interval(),
        horizon: 1.0,
        kernel: KernelSpec::RiemannLiouville { theta: 0.5 },
        alpha,
        beta,
        forcing: Forcing::SinU { amplitude: 1.0 },
        lambda_g: 1.0,
        q: 3.0,
        u0,
        v0,
    }
}

fn plateau() -> InitialField {
    InitialField::PlateauSine { amplitude: 1.0, width: 0.3 }
}

/// Two-phase Stefan problem, `alpha = id + H`, with a plateau at the melting
/// temperature.
pub fn stefan() -> ProblemConfig {
    nonlinear(
        GraphSpec::Stefan,
        GraphSpec::Arctan,
        plateau(),
        InitialSelection::MinimalSection { jump_value: Some(0.5) },
    )
}

/// Porous-medium problem, `alpha(r) = |r|^(p-2) r`, started from `sin(pi x)`.
pub fn porous_medium(p: f64) -> Result<ProblemConfig> {
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::param(format!("porous_medium needs p in (1, 2), got {p}")));
    }
    Ok(nonlinear(
        GraphSpec::Power { p },
        GraphSpec::Zero,
        InitialField::Mode { index: 1, amplitude: std::f64::consts::FRAC_1_SQRT_2 },
        InitialSelection::MinimalSection { jump_value: None },
    ))
}

/// Hele–Shaw problem, `alpha = H`.
pub fn hele_shaw() -> ProblemConfig {
    nonlinear(
        GraphSpec::Heaviside,
        GraphSpec::Arctan,
        plateau(),
        InitialSelection::MinimalSection { jump_value: Some(0.5) },
    )
}

/// Linear subdiffusion of the first eigenmode.
pub fn linear_heat() -> ProblemConfig {
    ProblemConfig {
        domain: Domain::unit_interval(),
        horizon: 1.0,
        kernel: KernelSpec::RiemannLiouville { theta: 0.5 },
        alpha: GraphSpec::Identity,
        beta: GraphSpec::Zero,
        forcing: Forcing::Zero,
        lambda_g: 0.0,
        q: 3.0,
        u0: InitialField::Mode { index: 1, amplitude: 1.0 },
        v0: InitialSelection::MinimalSection { jump_value: None },
    }
}

/// Strongly monotone `alpha = id` with Lipschitz `beta = arctan`, the regime
/// of the uniqueness argument.
pub fn lipschitz_demo() -> ProblemConfig {
    ProblemConfig {
        beta: GraphSpec::Arctan,
        ..linear_heat()
    }
}

/// Preset by name; `porous_medium` reads its exponent from `p` (default 1.5).
pub fn preset(name: &str, p: Option<f64>) -> Result<ProblemConfig> {
    match name {
        "stefan" => Ok(stefan()),
        "porous_medium" => porous_medium(p.unwrap_or(1.5)),
        "hele_shaw" => Ok(hele_shaw()),
        "linear_heat" => Ok(linear_heat()),
        "lipschitz_demo" => Ok(lipschitz_demo()),
        other => Err(Error::param(format!(
            "unknown preset `{other}` (available: {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}
