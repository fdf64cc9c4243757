pub mod continuation;
pub mod diagnostics;
pub mod error;
pub mod graphs;
pub mod kernels;
mod newton;
pub mod presets;
pub mod problem;
pub mod solver;
pub mod spectral;
pub mod quadrature;

pub use error::{Error, Result};
pub use newton::{Method, SolverKind};
