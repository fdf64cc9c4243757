//! Fixtures shared by the benchmarks.

use fracdnl::presets;
use fracdnl::problem::ProblemSpec;

/// Deterministic pseudo-random history of `len + 1` states in `dim` modes.
pub fn history(len: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    (0..=len).map(|_| (0..dim).map(|_| next()).collect()).collect()
}

pub fn preset_spec(name: &str) -> ProblemSpec {
    ProblemSpec::from_config(&presets::preset(name, None).expect("known preset")).expect("valid preset")
}
