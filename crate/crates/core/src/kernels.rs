//! Closed-form profiles, the cutoff, and the linearized operator around `Q_μ`
//! together with its two explicit kernels.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{atan, bracket, ln, powf, PI};
use crate::stencil::three_point;

/// The degree-one steady state `Q_μ(r) = π − 2 arctan(r/μ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyProfile {
    mu: f64,
}

impl SteadyProfile {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::Domain("steady profile needs mu > 0"));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `(Q_μ(r), ∂_ρQ)` at `ρ = r/μ`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let rho = r / self.mu;
        // 2 arctan(1/ρ) keeps full relative precision in the tail.
        let q = if rho > 1.0 { 2.0 * atan(1.0 / rho) } else { PI - 2.0 * atan(rho) };
        (q, -2.0 / (rho * rho + 1.0))
    }

    /// `∂_r Q_μ(r)`.
    pub fn dr(&self, r: f64) -> f64 {
        self.eval(r).1 / self.mu
    }
}

/// `(Q_μ(r), ∂_ρQ)`; fails for non-positive `mu` or negative `r`.
pub fn eval_q(mu: f64, r: f64) -> Result<(f64, f64)> {
    if r < 0.0 {
        return Err(Error::Domain("radius must be non-negative"));
    }
    Ok(SteadyProfile::new(mu)?.eval(r))
}

/// `Q₁(ρ) = π − 2 arctan ρ`.
pub fn steady_q(rho: f64) -> f64 {
    SteadyProfile { mu: 1.0 }.eval(rho).0
}

/// `Q − 2/ρ`, evaluated without cancellation for large `ρ`.
pub fn q_minus_two_over_rho(rho: f64) -> f64 {
    if rho < 10.0 {
        return SteadyProfile { mu: 1.0 }.eval(rho).0 - 2.0 / rho;
    }
    // 2(arctan x − x) = 2Σ_{k≥1} (−1)^k x^{2k+1}/(2k+1), x = 1/ρ
    let x = 1.0 / rho;
    let x2 = x * x;
    let mut term = x;
    let mut sum = 0.0;
    let mut k = 1.0;
    loop {
        term *= -x2;
        let add = term / (2.0 * k + 1.0);
        sum += add;
        if crate::math::abs(add) <= 1e-18 * crate::math::abs(sum) {
            return 2.0 * sum;
        }
        k += 1.0;
    }
}

/// Closed forms `(sin 2Q, cos 2Q − 1)` as functions of `ρ`.
pub fn eval_trig_q(rho: f64) -> (f64, f64) {
    let d = rho * rho + 1.0;
    (4.0 * rho * (rho * rho - 1.0) / (d * d), -8.0 * rho * rho / (d * d))
}

/// Quintic smoothstep cutoff: `1` on `[0, 1]`, `0` on `[2, ∞)`, `C²` throughout.
pub fn eta(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let u = x - 1.0;
        1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}

pub fn eta_d1(x: f64) -> f64 {
    if x <= 1.0 || x >= 2.0 {
        0.0
    } else {
        let u = x - 1.0;
        -30.0 * u * u * (u - 1.0) * (u - 1.0)
    }
}

pub fn eta_d2(x: f64) -> f64 {
    if x <= 1.0 || x >= 2.0 {
        0.0
    } else {
        let u = x - 1.0;
        -60.0 * u * (u - 1.0) * (2.0 * u - 1.0)
    }
}

/// Cutoff or one of its first two derivatives.
pub fn eval_cutoff(x: f64, deriv_order: u8) -> Result<f64> {
    match deriv_order {
        0 => Ok(eta(x)),
        1 => Ok(eta_d1(x)),
        2 => Ok(eta_d2(x)),
        _ => Err(Error::Unsupported("cutoff derivatives above order two")),
    }
}

/// `𝒵, 𝒵̃` and their `ρ`-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValues {
    pub z: f64,
    pub z_tilde: f64,
    pub dz: f64,
    pub dz_tilde: f64,
}

impl KernelValues {
    pub fn wronskian(&self) -> f64 {
        self.z * self.dz_tilde - self.dz * self.z_tilde
    }
}

/// Regular kernel `𝒵(ρ) = ρ/(ρ²+1)`, defined on `[0, ∞)`.
pub fn kernel_z(rho: f64) -> f64 {
    rho / (rho * rho + 1.0)
}

pub fn kernel_z_d1(rho: f64) -> f64 {
    let d = rho * rho + 1.0;
    (1.0 - rho * rho) / (d * d)
}

const TINY_RHO: f64 = 1e-8;

/// Singular kernel `𝒵̃(ρ) = (ρ⁴ + 4ρ² ln ρ − 1)/(2ρ(ρ²+1))`.
pub fn kernel_z_tilde(rho: f64) -> f64 {
    if rho < TINY_RHO {
        return -0.5 / rho;
    }
    let r2 = rho * rho;
    (r2 * r2 + 4.0 * r2 * ln(rho) - 1.0) / (2.0 * rho * (r2 + 1.0))
}

pub fn kernel_z_tilde_d1(rho: f64) -> f64 {
    if rho < TINY_RHO {
        return 0.5 / (rho * rho);
    }
    let r2 = rho * rho;
    let num = r2 * r2 + 4.0 * r2 * ln(rho) - 1.0;
    let dnum = 4.0 * rho * r2 + 8.0 * rho * ln(rho) + 4.0 * rho;
    let den = 2.0 * rho * (r2 + 1.0);
    let dden = 6.0 * r2 + 2.0;
    (dnum * den - num * dden) / (den * den)
}

pub fn eval_kernels(rho: f64) -> Result<KernelValues> {
    if !(rho > 0.0) {
        return Err(Error::Domain("the singular kernel is undefined at rho = 0"));
    }
    Ok(KernelValues {
        z: kernel_z(rho),
        z_tilde: kernel_z_tilde(rho),
        dz: kernel_z_d1(rho),
        dz_tilde: kernel_z_tilde_d1(rho),
    })
}

/// Potential of the linearized operator, `(ρ⁴ − 6ρ² + 1)/(ρ²(ρ²+1)²) = cos(2Q)/ρ²`.
pub fn linearized_potential(rho: f64) -> f64 {
    let r2 = rho * rho;
    let d = r2 + 1.0;
    (r2 * r2 - 6.0 * r2 + 1.0) / (r2 * d * d)
}

/// `V(ρ) = 8/(ρ²+1)²`; the potential above equals `1/ρ² − V`.
pub fn bubble_potential(rho: f64) -> f64 {
    let d = rho * rho + 1.0;
    8.0 / (d * d)
}

/// Samples of a scalar function on a strictly increasing radial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialField {
    pub fn sample(nodes: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let values = nodes.iter().map(|&x| f(x)).collect();
        Self { nodes, values }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(crate::math::abs(*v)))
    }
}

/// `𝓛φ = φ'' + φ'/ρ − potential·φ` by three-point differences; the result
/// lives on the interior nodes.
pub fn apply_linearized_l(phi: &RadialField) -> Result<RadialField> {
    let n = phi.len();
    if n < 3 || phi.values.len() != n {
        return Err(Error::Domain("linearized operator needs at least 3 grid points"));
    }
    if phi.nodes[0] <= 0.0 {
        return Err(Error::Domain("grid for the linearized operator must exclude rho = 0"));
    }
    let mut nodes = Vec::with_capacity(n - 2);
    let mut values = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let (x, v) = (&phi.nodes, &phi.values);
        let (d1, d2) = three_point(x[i] - x[i - 1], x[i + 1] - x[i]);
        let first = d1[0] * v[i - 1] + d1[1] * v[i] + d1[2] * v[i + 1];
        let second = d2[0] * v[i - 1] + d2[1] * v[i] + d2[2] * v[i + 1];
        nodes.push(x[i]);
        values.push(second + first / x[i] - linearized_potential(x[i]) * v[i]);
    }
    Ok(RadialField { nodes, values })
}

/// Initial polar angle `v₀(r) = η(r/r₀) Q_{μ_init}(r) + r⟨r⟩^{-γ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub gamma: f64,
    pub profile: SteadyProfile,
    pub r0: f64,
    /// Multiplier on the tail term (one for the construction's data).
    pub tail_amplitude: f64,
    /// Whether the bubble `η Q_μ` is present (false gives pure tail data).
    pub with_bubble: bool,
}

impl InitialData {
    pub fn eval(&self, r: f64) -> f64 {
        let bubble = if self.with_bubble { eta(r / self.r0) * self.profile.eval(r).0 } else { 0.0 };
        bubble + self.tail_amplitude * r * powf(bracket(r), -self.gamma)
    }
}

pub fn build_initial_data(gamma: f64, mu_init: f64, r0: f64) -> Result<InitialData> {
    if !(gamma > 1.0) {
        return Err(Error::Regime { gamma });
    }
    if !(r0 > 0.0) {
        return Err(Error::Domain("cutoff radius must be positive"));
    }
    Ok(InitialData {
        gamma,
        profile: SteadyProfile::new(mu_init)?,
        r0,
        tail_amplitude: 1.0,
        with_bubble: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cos, logspace, sin};
    use proptest::prelude::*;

    #[test]
    fn q_examples() {
        let (q, d) = eval_q(1.0, 0.0).unwrap();
        assert_eq!((q, d), (PI, -2.0));
        let (q, d) = eval_q(1.0, 1.0).unwrap();
        assert!((q - PI / 2.0).abs() < 1e-15 && (d + 1.0).abs() < 1e-15);
        let (q, d) = eval_q(2.0, 2.0).unwrap();
        assert!((q - PI / 2.0).abs() < 1e-15 && (d + 1.0).abs() < 1e-15);
        assert!(matches!(eval_q(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(eval_q(-1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn q_tail_is_two_mu_over_r() {
        let p = SteadyProfile::new(0.7).unwrap();
        let r = 1e7;
        assert!((r * p.eval(r).0 - 1.4).abs() < 1e-6);
        let mut prev = p.eval(0.0).0;
        for r in logspace(1e-4, 1e4, 200) {
            let q = p.eval(r).0;
            assert!(q < prev);
            prev = q;
        }
    }

    #[test]
    fn q_minus_two_over_rho_is_stable() {
        for rho in [0.5, 3.0, 9.99, 10.0, 50.0, 1e3, 1e6] {
            let x = 1.0 / rho;
            // Oracle: tail series of 2arctan(x) - 2x summed to many terms in a different order.
            let mut direct = 0.0;
            for k in (1..60).rev() {
                let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
                direct += sign * crate::math::powi(x, 2 * k + 1) / (2 * k + 1) as f64;
            }
            let want = if rho < 1.0 { PI - 2.0 * atan(rho) - 2.0 / rho } else { 2.0 * direct };
            let got = q_minus_two_over_rho(rho);
            assert!((got - want).abs() <= 1e-13 * want.abs(), "{rho}: {got} {want}");
        }
    }

    #[test]
    fn trig_examples() {
        assert_eq!(eval_trig_q(1.0), (0.0, -2.0));
        assert_eq!(eval_trig_q(0.0), (0.0, 0.0));
        let (s, c) = eval_trig_q(2.0);
        assert!((s - 24.0 / 25.0).abs() < 1e-15 && (c + 32.0 / 25.0).abs() < 1e-15);
        let q = PI - 2.0 * atan(2.0);
        assert!((sin(2.0 * q) - 24.0 / 25.0).abs() < 1e-13);
    }

    #[test]
    fn trig_closed_forms_match_direct_evaluation() {
        for rho in logspace(1e-3, 1e3, 400) {
            let q = PI - 2.0 * atan(rho);
            let (s, c) = eval_trig_q(rho);
            assert!((s - sin(2.0 * q)).abs() < 1e-12);
            assert!((c - (cos(2.0 * q) - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn cutoff_examples_and_junctions() {
        assert_eq!(eval_cutoff(0.5, 0).unwrap(), 1.0);
        assert_eq!(eval_cutoff(3.0, 1).unwrap(), 0.0);
        assert_eq!(eval_cutoff(1.5, 0).unwrap(), 0.5);
        assert!(matches!(eval_cutoff(1.5, 3), Err(Error::Unsupported(_))));
        for x0 in [1.0, 2.0] {
            for d in 0..=2u8 {
                let lo = eval_cutoff(x0 - 1e-12, d).unwrap();
                let hi = eval_cutoff(x0 + 1e-12, d).unwrap();
                assert!((lo - hi).abs() < 1e-9, "order {d} at {x0}: {lo} vs {hi}");
            }
        }
        for k in 0..=1000 {
            let x = k as f64 * 0.003;
            let v = eta(x);
            assert!((0.0..=1.0).contains(&v));
            assert!(eta_d2(x).abs() <= 60.0 * 0.25);
        }
    }

    #[test]
    fn cutoff_derivatives_match_differences() {
        for k in 1..50 {
            let x = 1.0 + k as f64 / 50.0;
            let h = 1e-5;
            let d1 = (eta(x + h) - eta(x - h)) / (2.0 * h);
            let d2 = (eta_d1(x + h) - eta_d1(x - h)) / (2.0 * h);
            assert!((d1 - eta_d1(x)).abs() < 1e-8);
            assert!((d2 - eta_d2(x)).abs() < 1e-7);
        }
    }

    #[test]
    fn kernel_examples() {
        let k = eval_kernels(1.0).unwrap();
        assert!((k.z - 0.5).abs() < 1e-16 && k.z_tilde.abs() < 1e-16);
        let k = eval_kernels(2.0).unwrap();
        assert!((k.wronskian() - 0.5).abs() < 1e-14);
        assert!((kernel_z(1e-9) - 1e-9).abs() < 1e-24);
        assert_eq!(kernel_z(0.0), 0.0);
        assert!(matches!(eval_kernels(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn wronskian_identity_on_log_grid() {
        for rho in logspace(1e-3, 1e3, 600) {
            let k = eval_kernels(rho).unwrap();
            let err = (k.wronskian() - 1.0 / rho).abs();
            assert!(err < 1e-12, "rho={rho}: {err}");
        }
    }

    #[test]
    fn potential_consistency() {
        for rho in logspace(1e-2, 1e2, 100) {
            let q = PI - 2.0 * atan(rho);
            let direct = cos(2.0 * q) / (rho * rho);
            assert!((linearized_potential(rho) - direct).abs() < 1e-11 * direct.abs().max(1.0));
            let alt = 1.0 / (rho * rho) - bubble_potential(rho);
            assert!((linearized_potential(rho) - alt).abs() < 1e-11 * alt.abs().max(1.0));
        }
    }

    fn kernel_residual(n: usize, f: fn(f64) -> f64) -> f64 {
        let field = RadialField::sample(logspace(0.05, 20.0, n), f);
        let l = apply_linearized_l(&field).unwrap();
        // Sup over a fixed interior window so every refinement measures the same region.
        l.nodes
            .iter()
            .zip(&l.values)
            .filter(|(x, _)| **x >= 0.1 && **x <= 10.0)
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    #[test]
    fn linearized_operator_annihilates_kernels_at_second_order() {
        for f in [kernel_z as fn(f64) -> f64, kernel_z_tilde] {
            let coarse = kernel_residual(201, f);
            let fine = kernel_residual(401, f);
            let finer = kernel_residual(801, f);
            let o1 = (coarse / fine).log2();
            let o2 = (fine / finer).log2();
            assert!(o1 >= 1.9 && o2 >= 1.9, "orders {o1} {o2}");
        }
    }

    #[test]
    fn linearized_operator_on_identity_function() {
        // Oracle: sixth-order central differences of ρ ↦ ρ with a fine uniform step.
        let field = RadialField::sample(logspace(0.2, 5.0, 4001), |x| x);
        let l = apply_linearized_l(&field).unwrap();
        for k in 0..10 {
            let idx = 200 + k * 350;
            let x = l.nodes[idx];
            let h = 1e-3;
            let f = |s: f64| s;
            let d1 = (f(x + 3.0 * h) - 9.0 * f(x + 2.0 * h) + 45.0 * f(x + h) - 45.0 * f(x - h)
                + 9.0 * f(x - 2.0 * h)
                - f(x - 3.0 * h))
                / (60.0 * h);
            let d2 = (2.0 * f(x + 3.0 * h) - 27.0 * f(x + 2.0 * h) + 270.0 * f(x + h) - 490.0 * f(x)
                + 270.0 * f(x - h)
                - 27.0 * f(x - 2.0 * h)
                + 2.0 * f(x - 3.0 * h))
                / (180.0 * h * h);
            let oracle = d2 + d1 / x - linearized_potential(x) * f(x);
            assert!((l.values[idx] - oracle).abs() < 1e-6, "{x}");
        }
        assert!(apply_linearized_l(&RadialField::sample(alloc::vec![1.0, 2.0], |x| x)).is_err());
    }

    #[test]
    fn initial_data_examples() {
        let v0 = build_initial_data(3.0, 0.3, 10.0).unwrap();
        assert_eq!(v0.eval(0.0), PI);
        let r = 100.0;
        assert!((v0.eval(r) - r * powf(1.0 + r * r, -1.5)).abs() < 1e-15);
        let v0 = build_initial_data(1.5, 1.0, 10.0).unwrap();
        let mut last = 0.0;
        for r in [1e3, 1e4, 1e5, 1e6] {
            let ratio = v0.eval(r) / powf(r, 1.0 - 1.5);
            assert!(ratio > last && ratio < 1.0);
            last = ratio;
        }
        assert!((last - 1.0).abs() < 1e-11);
        assert!(matches!(build_initial_data(1.0, 1.0, 1.0), Err(Error::Regime { .. })));
    }

    #[test]
    fn initial_slope_at_origin() {
        let mu = 0.25;
        let v0 = build_initial_data(2.0, mu, 10.0).unwrap();
        let h = 1e-7;
        let slope = (v0.eval(h) - v0.eval(0.0)) / h;
        // −2/μ from the bubble, +1 from the tail.
        assert!((slope - (-2.0 / mu + 1.0)).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn wronskian_holds_for_random_rho(log_rho in -3.0f64..3.0) {
            let rho = crate::math::powf(10.0, log_rho);
            let k = eval_kernels(rho).unwrap();
            prop_assert!((k.wronskian() * rho - 1.0).abs() < 1e-12);
        }
    }
}
