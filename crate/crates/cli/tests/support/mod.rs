//! Reference values shared by the integration tests.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Mittag-Leffler function `E_theta(z) = sum_k z^k / Gamma(theta k + 1)`,
/// summed in `f64` with Kahan compensation until a term drops below
/// `1e-12` relative to the sum. Only usable where the terms stay moderate.
pub fn mittag_leffler_kahan(theta: f64, z: f64) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for k in 0..10_000 {
        let kf = k as f64;
        let g = statrs::function::gamma::gamma(theta * kf + 1.0);
        if !g.is_finite() {
            break;
        }
        let term = z.powi(k) / g;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if k > 2 && term.abs() <= 1e-12 * sum.abs().max(1e-300) && kf * theta > z.abs() {
            break;
        }
    }
    sum
}

const BITS: u64 = 640;

fn unit() -> BigInt {
    BigInt::one() << BITS
}

fn mul(a: &BigInt, b: &BigInt) -> BigInt {
    (a * b) >> BITS
}

fn to_f64(x: &BigInt) -> f64 {
    x.to_f64().expect("finite") * 2f64.powi(-(BITS as i32))
}

/// `atan(1 / k)` in fixed point.
fn atan_inv(k: u32) -> BigInt {
    let k2 = BigInt::from(k) * k;
    let mut power = unit() / k;
    let mut sum = BigInt::zero();
    let mut j = 0u32;
    while !power.is_zero() {
        let term = &power / (2 * j + 1);
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        power /= &k2;
        j += 1;
    }
    sum
}

fn pi() -> BigInt {
    atan_inv(5) * 16 - atan_inv(239) * 4
}

/// `E_{1/2}(-pi^2 t^{1/2})` in 640-bit fixed point. The series terms reach
/// about 1e42 before the alternating sum settles near 0.06, which is why
/// this oracle does not use `f64`.
pub fn mittag_leffler_half_of_neg_pi_sq() -> f64 {
    let p = pi();
    let x = -mul(&p, &p);
    mittag_leffler_half(&x)
}

/// `E_{1/2}(x)` for a fixed-point `x`, through `t_{k+2} = t_k x^2 / (k/2 + 1)`
/// with `t_0 = 1` and `t_1 = x / Gamma(3/2) = 2 x / sqrt(pi)`.
fn mittag_leffler_half(x: &BigInt) -> f64 {
    let sqrt_pi = (pi() << BITS).sqrt();
    let x2 = mul(x, x);
    let mut even = unit();
    let mut odd: BigInt = ((x * 2u32) << BITS) / &sqrt_pi;
    let mut sum = BigInt::zero();
    let mut k = 0u64;
    loop {
        sum += &even + &odd;
        let next_even: BigInt = mul(&even, &x2) * 2u32 / (k + 2);
        let next_odd: BigInt = mul(&odd, &x2) * 2u32 / (k + 3);
        if next_even.is_zero() && next_odd.is_zero() && even.abs() < BigInt::from(1u8) << 8 {
            break;
        }
        even = next_even;
        odd = next_odd;
        k += 2;
    }
    to_f64(&sum)
}

/// `E_{1/2}(v)` for an `f64` argument, through the fixed-point series.
pub fn mittag_leffler_half_f64(v: f64) -> f64 {
    let scaled = BigInt::from((v * 2f64.powi(60)).round() as i64) << (BITS - 60);
    mittag_leffler_half(&scaled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_pi() {
        assert_eq!(to_f64(&pi()), std::f64::consts::PI);
    }

    #[test]
    fn oracles_agree() {
        // E_{1/2}(x) = exp(x^2) erfc(-x); statrs erfc carries about 1e-10
        let closed = |x: f64| (x * x).exp() * statrs::function::erf::erfc(-x);
        for v in [-2.0, -1.0, -0.25, 0.5, 1.0] {
            let big = mittag_leffler_half_f64(v);
            let kahan = mittag_leffler_kahan(0.5, v);
            assert!((big - kahan).abs() <= 2e-12 * big.abs(), "{v}: {big} vs {kahan}");
            assert!((big - closed(v)).abs() <= 1e-9 * big.abs(), "{v}: {big} vs {}", closed(v));
        }
        assert!((mittag_leffler_kahan(1.0, -1.5) - (-1.5f64).exp()).abs() <= 1e-14);
        let e = mittag_leffler_half_of_neg_pi_sq();
        let x = std::f64::consts::PI.powi(2);
        assert!((e - closed(-x)).abs() <= 1e-9 * e, "{e} vs {}", closed(-x));
    }
}
