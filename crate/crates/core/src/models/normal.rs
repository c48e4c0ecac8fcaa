//! Standard normal distribution function.

use libm::erfc;

/// `Φ(x) = P(Z ≤ x)` for `Z ~ N(0, 1)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}
