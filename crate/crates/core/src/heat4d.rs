//! Radial heat semigroup in R⁴, the initial-data solution `ψ*`, and the
//! constants `C_γ`, `v_γ(t)`.

use alloc::vec::Vec;
use core::cell::Cell;

use crate::error::{Error, Result};
use crate::math::{abs, bracket, ln, ln1p, powf, sqrt, tgamma};
use crate::quad::{integrate_breaks, Estimate, Tolerance};
use crate::special::i1e_over_x;

/// Gaussian factors below this are dropped from the radial integral.
pub const GAUSSIAN_CUTOFF: f64 = 1e-18;

/// Half-width of the retained window around `s = r`, i.e. where `e^{-(r-s)²/4t}` hits the cutoff.
pub fn truncation_halfwidth(t: f64) -> f64 {
    sqrt(4.0 * t * -ln(GAUSSIAN_CUTOFF))
}

/// Weight `K(r, s, t)` with `T₄∘g(r, t) = ∫₀^∞ K(r, s, t) g(s) ds` for radial `g`.
///
/// The angular average is folded into `e^{-κ}I₁(κ)/κ`, `κ = rs/2t`, so only
/// `e^{-(r-s)²/4t}` is left to evaluate.
pub fn ring_kernel(r: f64, s: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain("heat kernel needs t > 0"));
    }
    if r < 0.0 || s < 0.0 {
        return Err(Error::Domain("radii must be non-negative"));
    }
    Ok(ring_kernel_unchecked(r, s, t))
}

#[inline]
pub(crate) fn ring_kernel_unchecked(r: f64, s: f64, t: f64) -> f64 {
    let d = r - s;
    // (4πt)^{-2}·4π² = 1/(4t²)
    s * s * s / (4.0 * t * t) * crate::math::exp(-d * d / (4.0 * t)) * i1e_over_x(r * s / (2.0 * t))
}

/// A radial profile `s ↦ g(s)` fed to the heat semigroup.
pub trait RadialFunction {
    fn eval(&self, s: f64) -> f64;
    /// Algebraic decay rate `g ~ s^{-k}` if known; only used for the tail bound.
    fn decay_hint(&self) -> Option<f64> {
        None
    }
    /// Radii where `g` changes character; seeded as quadrature breakpoints.
    fn features(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: Fn(f64) -> f64> RadialFunction for F {
    fn eval(&self, s: f64) -> f64 {
        self(s)
    }
}

/// `⟨s⟩^{-γ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketPower {
    pub gamma: f64,
}

impl RadialFunction for BracketPower {
    fn eval(&self, s: f64) -> f64 {
        powf(bracket(s), -self.gamma)
    }
    fn decay_hint(&self) -> Option<f64> {
        Some(self.gamma)
    }
    fn features(&self) -> Vec<f64> {
        alloc::vec![1.0]
    }
}

fn radial_breakpoints(r: f64, t: f64, extra: &[f64]) -> Vec<f64> {
    let l = truncation_halfwidth(t);
    let w = sqrt(t);
    let lo = (r - l).max(0.0);
    let hi = r + l;
    let mut pts = alloc::vec![lo, hi];
    // At small r the kernel peaks near s = √(6t); otherwise near s = r.
    let centre = if r < 2.0 * w { sqrt(6.0 * t) } else { r };
    for k in [-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0] {
        pts.push(centre + k * w);
    }
    pts.extend_from_slice(extra);
    let mut pts: Vec<f64> = pts.into_iter().filter(|p| *p >= lo && *p <= hi && p.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| abs(*a - *b) <= 1e-14 * b.abs().max(1e-300));
    pts
}

/// `(T₄∘g)(r, t)` by adaptive quadrature over the truncated window.
pub fn heat_convolve_initial<G: RadialFunction + ?Sized>(g: &G, r: f64, t: f64, tol: Tolerance) -> Result<Estimate> {
    if !(t > 0.0) {
        return Err(Error::Domain("heat semigroup needs t > 0"));
    }
    if r < 0.0 {
        return Err(Error::Domain("radius must be non-negative"));
    }
    let pts = radial_breakpoints(r, t, &g.features());
    let mut est = integrate_breaks(|s| ring_kernel_unchecked(r, s, t) * g.eval(s), &pts, tol)?;
    // Dropped tail: kernel mass outside the window is below the cutoff, times
    // the largest |g| at the window edges (decaying profiles only).
    if g.decay_hint().is_some() {
        let lo = pts[0];
        let hi = pts[pts.len() - 1];
        est.error += GAUSSIAN_CUTOFF * abs(g.eval(lo)).max(abs(g.eval(hi)));
    }
    Ok(est)
}

/// `(T₄•h)(r, t) = ∫_{t_start}^t (T₄∘h(·, σ))(r, t − σ) dσ`.
///
/// The time integral uses `σ = t − u²`, which clusters nodes at `σ → t`, with
/// additional geometric breakpoints in `u` for long intervals.
pub fn heat_convolve_duhamel<H: Fn(f64, f64) -> f64>(
    h: H,
    r: f64,
    t: f64,
    t_start: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    heat_convolve_duhamel_with(h, r, t, t_start, tol, |_| Vec::new())
}

/// As [`heat_convolve_duhamel`]; `features(σ)` lists radii where `h(·, σ)` changes character.
pub fn heat_convolve_duhamel_with<H: Fn(f64, f64) -> f64, P: Fn(f64) -> Vec<f64>>(
    h: H,
    r: f64,
    t: f64,
    t_start: f64,
    tol: Tolerance,
    features: P,
) -> Result<Estimate> {
    if !(t > t_start) || !(t_start > 0.0) {
        return Err(Error::Domain("Duhamel integral needs t > t_start > 0"));
    }
    let umax = sqrt(t - t_start);
    let mut pts = alloc::vec![0.0];
    let mut u = umax;
    while u > 1e-6 * umax.max(1.0) && pts.len() < 40 {
        pts.push(u);
        u *= 0.25;
    }
    pts.sort_by(f64::total_cmp);
    // Inner errors are judged against the outer target, so cancellation inside one slice is harmless.
    let inner_tol = Tolerance { rel: tol.rel * 0.1, abs: tol.abs * 0.1, l1_rel: tol.rel * 0.1, max_intervals: tol.max_intervals };
    let failure: Cell<Option<Error>> = Cell::new(None);
    let inner_evals = Cell::new(0usize);
    let outer = integrate_breaks(
        |u| {
            if u == 0.0 {
                // τ → 0: the semigroup reduces to evaluation at r.
                return 0.0;
            }
            let tau = u * u;
            let sigma = t - tau;
            let g = |s: f64| h(s, sigma);
            let mut pts = radial_breakpoints(r, tau, &features(sigma));
            if pts.len() < 2 {
                pts = alloc::vec![0.0, r + truncation_halfwidth(tau)];
            }
            let slice = |s: f64| ring_kernel_unchecked(r, s, tau) * g(s);
            // A slice that stalls short of the tighter target falls back to the outer one.
            let inner = match integrate_breaks(slice, &pts, inner_tol) {
                Err(Error::Accuracy { .. }) => integrate_breaks(slice, &pts, tol),
                other => other,
            };
            match inner {
                Ok(e) => {
                    inner_evals.set(inner_evals.get() + e.evaluations);
                    2.0 * u * e.value
                }
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            }
        },
        &pts,
        tol,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let mut est = outer?;
    est.evaluations += inner_evals.get();
    Ok(est)
}

/// Regime of the tail exponent relative to the critical value two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Sub,
    Critical,
    Super,
}

impl Regime {
    pub fn of(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::Regime { gamma });
        }
        Ok(if gamma < 2.0 {
            Regime::Sub
        } else if gamma == 2.0 {
            Regime::Critical
        } else {
            Regime::Super
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::Sub => "sub",
            Regime::Critical => "critical",
            Regime::Super => "super",
        }
    }
}

/// Case of the `v_γ` formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VGammaForm {
    Power,
    PowerLog,
    Quartic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaContext {
    pub gamma: f64,
    pub regime: Regime,
    pub c_gamma: f64,
    pub v_form: VGammaForm,
}

impl GammaContext {
    pub fn new(gamma: f64) -> Result<Self> {
        let regime = Regime::of(gamma)?;
        let (c_gamma, v_form) = if gamma < 4.0 {
            // (1/8)∫₀^∞ s^{3-γ} e^{-s²/4} ds = 2^{-γ} Γ(2 - γ/2)
            (powf(2.0, -gamma) * tgamma(2.0 - 0.5 * gamma), VGammaForm::Power)
        } else if gamma == 4.0 {
            (1.0 / 16.0, VGammaForm::PowerLog)
        } else {
            // (1/8)∫₀^∞ s³⟨s⟩^{-γ} ds = (1/16)/((γ/2-1)(γ/2-2))
            let a = 0.5 * gamma;
            (1.0 / (16.0 * (a - 1.0) * (a - 2.0)), VGammaForm::Quartic)
        };
        Ok(Self { gamma, regime, c_gamma, v_form })
    }

    pub fn v_gamma(&self, t: f64) -> f64 {
        match self.v_form {
            VGammaForm::Power => powf(t, -0.5 * self.gamma),
            VGammaForm::PowerLog => ln1p(t) / (t * t),
            VGammaForm::Quartic => 1.0 / (t * t),
        }
    }

    /// `ψ*(r, t)` by quadrature.
    pub fn psi_star(&self, r: f64, t: f64, tol: Tolerance) -> Result<f64> {
        Ok(heat_convolve_initial(&BracketPower { gamma: self.gamma }, r, t, tol)?.value)
    }

    /// Remainder `g_γ(t) = ψ*(0, t)/v_γ(t) − C_γ`.
    pub fn g_gamma(&self, t: f64, tol: Tolerance) -> Result<f64> {
        Ok(self.psi_star(0.0, t, tol)? / self.v_gamma(t) - self.c_gamma)
    }
}

/// `(C_γ, v_γ)`.
pub fn gamma_constants(gamma: f64) -> Result<(f64, impl Fn(f64) -> f64)> {
    let ctx = GammaContext::new(gamma)?;
    Ok((ctx.c_gamma, move |t| ctx.v_gamma(t)))
}

/// `ψ*(r, t)`; multiply by `r` for `Ψ*`.
pub fn eval_psi_star(gamma: f64, r: f64, t: f64) -> Result<f64> {
    GammaContext::new(gamma)?.psi_star(r, t, Tolerance::default())
}
