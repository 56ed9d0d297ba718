//! Elliptic correction `Φ_e` by variation of parameters, the orthogonality
//! functional `𝓜[μ]`, and the projected right-hand side `H̃`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::interp::HermiteCubic;
use crate::kernels::{eta, kernel_z, linearized_potential, kernel_z_d1, kernel_z_tilde, kernel_z_tilde_d1};
use crate::math::{ceil, log10, logspace, powi, sqrt, KahanSum};
use crate::quad::{gk15, integrate_breaks, Tolerance};

fn bubble_weight(rho: f64) -> f64 {
    let d = rho * rho + 1.0;
    8.0 * rho * rho * rho / (d * d * d)
}

/// `∫₀³ η(x) 𝒵²(x) x dx`.
pub fn projection_denominator() -> f64 {
    integrate_breaks(
        |x| {
            let z = kernel_z(x);
            eta(x) * z * z * x
        },
        &[0.0, 1.0, 2.0, 3.0],
        Tolerance::relative(1e-14),
    )
    .map(|e| e.value)
    .unwrap_or(f64::NAN)
}

/// `𝓜[μ] = ∫₀^∞ η(μρ/√t) 8ρ³/(ρ²+1)³ (φ+ψ*)(μρ) dρ`; `phi_plus_psi` takes `r`.
pub fn eval_m(mu: f64, t: f64, phi_plus_psi: impl Fn(f64) -> f64, tol: Tolerance) -> Result<f64> {
    if !(mu > 0.0) || !(t > 0.0) {
        return Err(Error::Domain("orthogonality functional needs mu, t > 0"));
    }
    let edge = sqrt(t) / mu;
    let mut pts = alloc::vec![0.0];
    let mut x = 1.0;
    while x < edge {
        pts.push(x);
        x *= 10.0;
    }
    pts.push(edge);
    pts.push(2.0 * edge);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    Ok(integrate_breaks(|rho| eta(mu * rho / sqrt(t)) * bubble_weight(rho) * phi_plus_psi(mu * rho), &pts, tol)?.value)
}

/// `H̃(ρ̄)` for fixed `t`.
pub struct Htilde<F> {
    pub mu_bar0: f64,
    pub t: f64,
    pub m_value: f64,
    phi_plus_psi: F,
    denominator: f64,
}

impl<F: Fn(f64) -> f64> Htilde<F> {
    pub fn eval(&self, rho: f64) -> f64 {
        let d = rho * rho + 1.0;
        let mu = self.mu_bar0;
        let source = mu * eta(mu * rho / sqrt(self.t)) * (-8.0 * rho / (d * d)) * (self.phi_plus_psi)(mu * rho);
        source + mu * self.m_value * eta(rho) * kernel_z(rho) / self.denominator
    }

    /// Radius beyond which `H̃` vanishes.
    pub fn support(&self) -> f64 {
        (2.0 * sqrt(self.t) / self.mu_bar0).max(2.0)
    }
}

pub fn build_htilde<F: Fn(f64) -> f64>(mu_bar0: f64, t: f64, phi_plus_psi: F, m_value: f64) -> Htilde<F> {
    build_htilde_with(mu_bar0, t, phi_plus_psi, m_value, projection_denominator())
}

/// As [`build_htilde`] with a precomputed projection denominator.
pub fn build_htilde_with<F: Fn(f64) -> f64>(
    mu_bar0: f64,
    t: f64,
    phi_plus_psi: F,
    m_value: f64,
    denominator: f64,
) -> Htilde<F> {
    Htilde { mu_bar0, t, m_value, phi_plus_psi, denominator }
}

/// Log-grid layout for [`solve_phi_e`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiEGrid {
    pub rho_min: f64,
    pub points_per_decade: usize,
}

impl Default for PhiEGrid {
    fn default() -> Self {
        Self { rho_min: 1e-4, points_per_decade: 1000 }
    }
}

/// `Φ_e` and `∂_ρΦ_e` on a log grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionProfile {
    pub rho: Vec<f64>,
    pub values: Vec<f64>,
    pub d_rho: Vec<f64>,
    pub t: f64,
    /// Cumulative `∫₀^ρ H̃𝒵x` and `∫₀^ρ H̃𝒵̃x` at the last node.
    pub tail: (f64, f64),
    interp: HermiteCubic,
    d_interp: HermiteCubic,
}

impl CorrectionProfile {
    /// Evaluates `Φ_e(ρ)`: cubic growth below the grid, homogeneous continuation above.
    pub fn eval(&self, rho: f64) -> f64 {
        let (lo, hi) = self.interp.range();
        if rho <= 0.0 {
            0.0
        } else if rho < lo {
            self.values[0] * powi(rho / lo, 3)
        } else if rho > hi {
            kernel_z_tilde(rho) * self.tail.0 - kernel_z(rho) * self.tail.1
        } else {
            self.interp.eval(rho)
        }
    }

    /// `∂_ρΦ_e(ρ)` with the same extensions as [`CorrectionProfile::eval`].
    pub fn eval_d_rho(&self, rho: f64) -> f64 {
        let (lo, hi) = self.d_interp.range();
        if rho <= 0.0 {
            0.0
        } else if rho < lo {
            3.0 * self.values[0] / lo * powi(rho / lo, 2)
        } else if rho > hi {
            kernel_z_tilde_d1(rho) * self.tail.0 - kernel_z_d1(rho) * self.tail.1
        } else {
            self.d_interp.eval(rho)
        }
    }
}

/// `Φ_e(ρ) = 𝒵̃(ρ)∫₀^ρ H̃𝒵x dx − 𝒵(ρ)∫₀^ρ H̃𝒵̃x dx` by cumulative GK15 panels.
///
/// Below `rho_min` the source is taken linear, `H̃ ≈ hρ`, giving `Φ_e ≈ hρ³/8`.
pub fn solve_phi_e(h: impl Fn(f64) -> f64, rho_max: f64, grid: PhiEGrid, t: f64) -> Result<CorrectionProfile> {
    if !(rho_max > grid.rho_min) || !(grid.rho_min > 0.0) {
        return Err(Error::Domain("Phi_e grid needs 0 < rho_min < rho_max"));
    }
    let a = grid.rho_min;
    let ha = h(a);
    if !ha.is_finite() {
        return Err(Error::Domain("source is singular at the inner grid edge"));
    }
    let slope = ha / a;
    if !(h(0.5 * a) / (0.5 * a)).is_finite() {
        return Err(Error::Domain("source is singular near rho = 0"));
    }
    let n = ceil(log10(rho_max / a) * grid.points_per_decade as f64) as usize + 1;
    let rho = logspace(a, rho_max, n.max(2));
    // ∫₀^a hx·𝒵·x ≈ h a⁴/4 and ∫₀^a hx·𝒵̃·x ≈ −h a²/4 from the leading terms.
    let mut az = KahanSum::default();
    let mut azt = KahanSum::default();
    az.add(slope * a * a * a * a / 4.0);
    azt.add(-slope * a * a / 4.0);
    let mut cum_z = Vec::with_capacity(rho.len());
    let mut cum_zt = Vec::with_capacity(rho.len());
    cum_z.push(az.value());
    cum_zt.push(azt.value());
    let mut fz = |x: f64| h(x) * kernel_z(x) * x;
    let mut fzt = |x: f64| h(x) * kernel_z_tilde(x) * x;
    for w in rho.windows(2) {
        az.add(gk15(&mut fz, w[0], w[1]).0);
        azt.add(gk15(&mut fzt, w[0], w[1]).0);
        cum_z.push(az.value());
        cum_zt.push(azt.value());
    }
    let mut values = Vec::with_capacity(rho.len());
    let mut d_rho = Vec::with_capacity(rho.len());
    for ((r, a1), a2) in rho.iter().zip(&cum_z).zip(&cum_zt) {
        values.push(kernel_z_tilde(*r) * a1 - kernel_z(*r) * a2);
        // H̃ terms cancel through the Wronskian.
        d_rho.push(kernel_z_tilde_d1(*r) * a1 - kernel_z_d1(*r) * a2);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("Phi_e is not finite on the grid"));
    }
    let tail = (cum_z[cum_z.len() - 1], cum_zt[cum_zt.len() - 1]);
    let interp = HermiteCubic::new(rho.clone(), values.clone(), d_rho.clone())?;
    // Second derivatives from the equation itself: Φ'' = H̃ − Φ'/ρ + VΦ.
    let dd: Vec<f64> = rho
        .iter()
        .zip(values.iter().zip(&d_rho))
        .map(|(r, (v, d))| h(*r) - d / r + linearized_potential(*r) * v)
        .collect();
    let d_interp = HermiteCubic::new(rho.clone(), d_rho.clone(), dd)?;
    Ok(CorrectionProfile { rho, values, d_rho, t, tail, interp, d_interp })
}

/// `∫₀^∞ H̃ 𝒵 x dx`.
pub fn orthogonality_defect<F: Fn(f64) -> f64>(h: &Htilde<F>, tol: Tolerance) -> Result<f64> {
    let s = h.support();
    let mut pts = alloc::vec![0.0, 1.0, 2.0];
    let mut x = 10.0;
    while x < s {
        pts.push(x);
        x *= 10.0;
    }
    pts.push(0.5 * s);
    pts.push(s);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    Ok(integrate_breaks(|x| h.eval(x) * kernel_z(x) * x, &pts, tol)?.value)
}
