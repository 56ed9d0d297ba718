//! Exponentially scaled modified Bessel function of order one.

use crate::math::{exp, sqrt, PI};

const ASYMPTOTIC_FROM: f64 = 25.0;

/// `e^{-x} I₁(x) / x` for `x ≥ 0`; equals `1/2` at `x = 0`.
pub fn i1e_over_x(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < ASYMPTOTIC_FROM {
        series_over_x(x) * exp(-x)
    } else {
        asymptotic(x) / x
    }
}

/// `e^{-x} I₁(x)` for `x ≥ 0`.
pub fn i1e(x: f64) -> f64 {
    if x < ASYMPTOTIC_FROM {
        x * series_over_x(x) * exp(-x)
    } else {
        asymptotic(x)
    }
}

// I₁(x)/x = ½ Σ (x²/4)^k / (k! (k+1)!), all terms positive.
fn series_over_x(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 0.5;
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + 1.0));
        sum += term;
        if term < 1e-17 * sum {
            return sum;
        }
        k += 1.0;
    }
}

// Hankel expansion e^{-x} I₁(x) ~ (2πx)^{-1/2} Σ (-1)^k a_k(1) / x^k.
fn asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (4.0 - odd * odd) / (8.0 * k * x);
        if crate::math::abs(next) >= crate::math::abs(term) || crate::math::abs(next) < 1e-17 {
            sum += next;
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    sum / sqrt(2.0 * PI * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, Tolerance};
    use crate::math::cos;

    // e^{-x} I₁(x) = (1/π) ∫₀^π e^{x(cos θ - 1)} cos θ dθ
    fn oracle(x: f64) -> f64 {
        integrate(|th| exp(x * (cos(th) - 1.0)) * cos(th), 0.0, PI, Tolerance::relative(1e-14).with_abs(1e-17))
            .unwrap()
            .value
            / PI
    }

    #[test]
    fn matches_integral_representation() {
        for &x in &[1e-3, 0.1, 1.0, 5.0, 12.0, 24.9, 25.1, 40.0, 300.0, 5000.0] {
            let got = i1e(x);
            let want = oracle(x);
            // Absolute floor: the oracle integrand cancels for small x.
            assert!((got - want).abs() <= 2e-14 * want.abs() + 1e-16, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn small_argument_limit() {
        assert_eq!(i1e_over_x(0.0), 0.5);
        assert!((i1e_over_x(1e-8) - 0.5).abs() < 1e-8);
    }

    #[test]
    fn branches_agree_at_the_switch() {
        let x = ASYMPTOTIC_FROM;
        let s = x * series_over_x(x) * exp(-x);
        let a = asymptotic(x);
        assert!((s - a).abs() < 1e-14 * s);
    }
}
