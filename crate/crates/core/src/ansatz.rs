//! The approximation `v₁ = η(z)Q_μ + Φ₁ + Φ₂ + Ψ* + η(4z)Φ_e`, the error
//! operator, and the Duhamel corrections `Φᵢ = rφᵢ`.

use alloc::collections::BTreeMap;
use alloc::rc::Rc;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::corrector::{build_htilde_with, eval_m, projection_denominator, solve_phi_e, CorrectionProfile, PhiEGrid};
use crate::error::{Error, Result};
use crate::heat4d::{heat_convolve_duhamel_with, GammaContext};
use crate::interp::{HermiteCubic, MonotoneCubic};
use crate::jet::Jet;
use crate::kernels::{eta, eta_d1, eta_d2, eval_trig_q, q_minus_two_over_rho, steady_q};
use crate::math::{ceil, exp, floor, ln, log10, powf, sin, sqrt};
use crate::mu_dynamics::{solve_mu, Corrected, Forcing, Mu0, SolveOptions, SplitParameters, Trajectory};
use crate::quad::{Estimate, Tolerance};
use crate::stencil::three_point;

/// The groups of `E[η(z)Q_μ]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FirstErrorTerms {
    pub e1: f64,
    pub e21: f64,
    pub e22: f64,
    pub trig: f64,
}

impl FirstErrorTerms {
    pub fn sum(&self) -> f64 {
        self.e1 + self.e21 + self.e22 + self.trig
    }
}

fn check_point(r: f64, t: f64) -> Result<()> {
    if r > 0.0 && t > 0.0 && r.is_finite() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain("error terms need r > 0 and t > 0"))
    }
}

/// Closed-form groups of `E[v*]` for `v* = η(r/√t) Q_{μ(t)}(r)`.
pub fn eval_first_error_terms<T: Trajectory + ?Sized>(traj: &T, r: f64, t: f64) -> Result<FirstErrorTerms> {
    check_point(r, t)?;
    let (mu, mu_dot) = (traj.mu(t), traj.mu_dot(t));
    if !(mu > 0.0) {
        return Err(Error::Domain("scale must be positive"));
    }
    let st = sqrt(t);
    let z = r / st;
    let rho = r / mu;
    let (e, e1d, e2d) = (eta(z), eta_d1(z), eta_d2(z));
    let d = rho * rho + 1.0;
    let e1 = -2.0 * (mu_dot / mu) * e * rho / d;
    if e1d == 0.0 && e2d == 0.0 && e == 1.0 {
        return Ok(FirstErrorTerms { e1, ..Default::default() });
    }
    let e21 = r * 2.0 * mu / (t * t) * (e2d / (z * z) + 0.5 * e1d / z - e1d / (z * z * z));
    let tail = q_minus_two_over_rho(rho);
    let dq_tail = 2.0 / (rho * rho * d);
    let e22 = e2d * tail / t + e1d * tail / (r * st) + e1d * z * tail / (2.0 * t) + 2.0 * e1d * dq_tail / (mu * st);
    let q = steady_q(r / mu);
    let (sin2q, _) = eval_trig_q(rho);
    let trig = (e * sin2q - sin(2.0 * e * q)) / (2.0 * r * r);
    Ok(FirstErrorTerms { e1, e21, e22, trig })
}

/// `v*` as a jet in `(r, t)`.
pub fn v_star_jet<T: Trajectory + ?Sized>(traj: &T, r: f64, t: f64) -> Jet {
    let (mu, mu_dot) = (traj.mu(t), traj.mu_dot(t));
    let st = sqrt(t);
    let z = Jet { v: r / st, r: 1.0 / st, rr: 0.0, t: -0.5 * r / (t * st) };
    let rho = Jet { v: r / mu, r: 1.0 / mu, rr: 0.0, t: -r * mu_dot / (mu * mu) };
    let x = z.v;
    let cut = z.compose(eta(x), eta_d1(x), eta_d2(x));
    let p = rho.v;
    let d = p * p + 1.0;
    let q = rho.compose(steady_q(p), -2.0 / d, 4.0 * p / (d * d));
    cut * q
}

/// `E[v] = −v_t + v_rr + v_r/r − sin(2v)/(2r²)` from a jet.
pub fn error_of_jet(v: Jet, r: f64) -> f64 {
    -v.t + v.rr + v.r / r - sin(2.0 * v.v) / (2.0 * r * r)
}

/// `E[v*]` from exact derivatives.
pub fn eval_error_v_star<T: Trajectory + ?Sized>(traj: &T, r: f64, t: f64) -> Result<f64> {
    check_point(r, t)?;
    Ok(error_of_jet(v_star_jet(traj, r, t), r))
}

/// Step sizes for [`apply_error_operator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilOptions {
    /// Spatial step as a fraction of `r`.
    pub rel_h: f64,
    /// Time step as a fraction of `t`.
    pub rel_k: f64,
    /// Earliest time the function may be sampled at.
    pub t_min: f64,
}

impl Default for StencilOptions {
    fn default() -> Self {
        Self { rel_h: 0.02, rel_k: 1e-3, t_min: 0.0 }
    }
}

fn error_stencil<F: FnMut(f64, f64) -> Result<f64>>(v: &mut F, r: f64, t: f64, h: f64, k: f64) -> Result<f64> {
    let f: [f64; 5] = [v(r - 2.0 * h, t)?, v(r - h, t)?, v(r, t)?, v(r + h, t)?, v(r + 2.0 * h, t)?];
    let d1 = (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h);
    let d2 = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h);
    let dt = (v(r, t + k)? - v(r, t - k)?) / (2.0 * k);
    Ok(-dt + d2 + d1 / r - sin(2.0 * f[2]) / (2.0 * r * r))
}

/// `E[v](r, t)` by central differences (fourth order in `r`, second in `t`).
///
/// The error estimate is the change under halving both steps; the finer value is returned.
pub fn apply_error_operator<F: FnMut(f64, f64) -> Result<f64>>(
    mut v: F,
    r: f64,
    t: f64,
    opts: StencilOptions,
) -> Result<Estimate> {
    check_point(r, t)?;
    let h = opts.rel_h * r;
    let k = opts.rel_k * t;
    if !(h > 0.0 && k > 0.0) || r - 2.0 * h <= 0.0 || t - k <= opts.t_min {
        return Err(Error::Domain("stencil leaves the domain"));
    }
    let coarse = error_stencil(&mut v, r, t, h, k)?;
    let fine = error_stencil(&mut v, r, t, 0.5 * h, 0.5 * k)?;
    Ok(Estimate { value: fine, error: (fine - coarse).abs(), evaluations: 14 })
}

/// Source `r⁻¹ℰ₁ = −2μ̇ η(z)/(r² + μ²)`.
pub fn source_e1<T: Trajectory + ?Sized>(traj: &T, s: f64, sigma: f64) -> f64 {
    let mu = traj.mu(sigma);
    -2.0 * traj.mu_dot(sigma) * eta(s / sqrt(sigma)) / (s * s + mu * mu)
}

/// Source `r⁻¹(ℰ₂₁ + ℰ₂₂)`, supported in `√t ≤ r ≤ 2√t`.
pub fn source_e2<T: Trajectory + ?Sized>(traj: &T, s: f64, sigma: f64) -> f64 {
    let z = s / sqrt(sigma);
    if !(z > 1.0 && z < 2.0) {
        return 0.0;
    }
    match eval_first_error_terms(traj, s, sigma) {
        Ok(e) => (e.e21 + e.e22) / s,
        Err(_) => f64::NAN,
    }
}

/// `(φ₁, φ₂)(r, t)` by Duhamel's formula from `t_start`.
pub fn eval_varphi_corrections<T: Trajectory + ?Sized>(
    traj: &T,
    r: f64,
    t: f64,
    t_start: f64,
    tol: Tolerance,
) -> Result<(f64, f64)> {
    if !(t > t_start) || !(t_start > 0.0) {
        return Err(Error::Domain("Duhamel corrections need t > t_start > 0"));
    }
    let features = |sigma: f64| alloc::vec![traj.mu(sigma), sqrt(sigma), 2.0 * sqrt(sigma)];
    let p1 = heat_convolve_duhamel_with(|s, sigma| source_e1(traj, s, sigma), r, t, t_start, tol, features)?;
    let p2 = heat_convolve_duhamel_with(|s, sigma| source_e2(traj, s, sigma), r, t, t_start, tol, features)?;
    Ok((p1.value, p2.value))
}

/// Accuracy and layout knobs for [`AnsatzBundle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzOptions {
    /// Initial time; the Duhamel corrections start at `t0/2`.
    pub t0: f64,
    pub duhamel_tol: Tolerance,
    pub psi_tol: Tolerance,
    pub m_tol: Tolerance,
    /// Nodes per decade of the `φ + ψ*` table feeding `H̃`.
    pub table_per_decade: usize,
    pub phi_e_grid: PhiEGrid,
    /// Half-width of the centred difference for `∂_tΦ_e`, as a fraction of `t`.
    pub dt_fraction: f64,
}

impl Default for AnsatzOptions {
    fn default() -> Self {
        Self {
            t0: 100.0,
            duhamel_tol: Tolerance::relative(1e-8).with_abs(1e-20),
            psi_tol: Tolerance::relative(1e-11).with_abs(1e-300),
            m_tol: Tolerance::relative(1e-10).with_abs(1e-300),
            table_per_decade: 16,
            phi_e_grid: PhiEGrid::default(),
            dt_fraction: 0.01,
        }
    }
}

/// The pieces of `v₁` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Components {
    /// `η(z)Q_μ`.
    pub inner: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub psi: f64,
    /// `η(4z)Φ_e`.
    pub elliptic: f64,
}

impl Components {
    pub fn sum(&self) -> f64 {
        self.inner + self.phi1 + self.phi2 + self.psi + self.elliptic
    }
}

struct EllipticData {
    mu: f64,
    m_value: f64,
    table: HermiteCubic,
    table_lo: (f64, f64),
    table_hi: f64,
    profile: CorrectionProfile,
}

impl EllipticData {
    fn phi_plus_psi(&self, r: f64) -> f64 {
        if r <= self.table_lo.0 {
            self.table_lo.1
        } else if r >= self.table_hi {
            self.table.eval(ln(self.table_hi))
        } else {
            self.table.eval(ln(r))
        }
    }
}

type Key = (u64, u64);

fn key(r: f64, t: f64) -> Key {
    (r.to_bits(), t.to_bits())
}

/// `v₁` with memoized components. Not `Sync`; use one bundle per worker.
pub struct AnsatzBundle<T> {
    pub ctx: GammaContext,
    pub traj: T,
    pub opts: AnsatzOptions,
    denominator: f64,
    phi_cache: RefCell<BTreeMap<Key, (f64, f64)>>,
    psi_cache: RefCell<BTreeMap<Key, f64>>,
    elliptic: RefCell<BTreeMap<u64, Rc<EllipticData>>>,
}

impl<T: Trajectory> AnsatzBundle<T> {
    pub fn new(ctx: GammaContext, traj: T, opts: AnsatzOptions) -> Result<Self> {
        if !(opts.t0 > 0.0) || !(opts.dt_fraction > 0.0 && opts.dt_fraction < 0.5) || opts.table_per_decade < 2 {
            return Err(Error::Domain("invalid ansatz options"));
        }
        Ok(Self {
            ctx,
            traj,
            opts,
            denominator: projection_denominator(),
            phi_cache: RefCell::new(BTreeMap::new()),
            psi_cache: RefCell::new(BTreeMap::new()),
            elliptic: RefCell::new(BTreeMap::new()),
        })
    }

    pub fn t_start(&self) -> f64 {
        0.5 * self.opts.t0
    }

    /// `ψ*(r, t)`.
    pub fn psi_star(&self, r: f64, t: f64) -> Result<f64> {
        if let Some(v) = self.psi_cache.borrow().get(&key(r, t)) {
            return Ok(*v);
        }
        let v = self.ctx.psi_star(r, t, self.opts.psi_tol)?;
        self.psi_cache.borrow_mut().insert(key(r, t), v);
        Ok(v)
    }

    /// `(φ₁, φ₂)(r, t)`.
    pub fn varphi(&self, r: f64, t: f64) -> Result<(f64, f64)> {
        if let Some(v) = self.phi_cache.borrow().get(&key(r, t)) {
            return Ok(*v);
        }
        let v = eval_varphi_corrections(&self.traj, r, t, self.t_start(), self.opts.duhamel_tol)?;
        self.phi_cache.borrow_mut().insert(key(r, t), v);
        Ok(v)
    }

    fn elliptic_data(&self, t: f64) -> Result<Rc<EllipticData>> {
        if let Some(d) = self.elliptic.borrow().get(&t.to_bits()) {
            return Ok(d.clone());
        }
        let mu = self.traj.mu(t);
        // Table nodes sit on a fixed lattice so neighbouring times share them.
        let per = self.opts.table_per_decade as f64;
        let k_lo = floor(per * log10(1e-2 * mu)) as i64;
        let k_hi = ceil(per * log10(2.0 * sqrt(t))) as i64;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for k in k_lo..=k_hi {
            let r = powf(10.0, k as f64 / per);
            let (p1, p2) = self.varphi(r, t)?;
            x.push(ln(r));
            y.push(p1 + p2 + self.psi_star(r, t)?);
        }
        let n = x.len();
        let mut dy = alloc::vec![0.0; n];
        for i in 0..n {
            let c = i.clamp(1, n - 2);
            let (d1, _) = three_point(x[c] - x[c - 1], x[c + 1] - x[c]);
            // Derivative of the quadratic through nodes c−1, c, c+1, evaluated at node i.
            let slope = d1[0] * y[c - 1] + d1[1] * y[c] + d1[2] * y[c + 1];
            dy[i] = if i == c {
                slope
            } else {
                let curv = 2.0 * ((y[c + 1] - y[c]) / (x[c + 1] - x[c]) - (y[c] - y[c - 1]) / (x[c] - x[c - 1]))
                    / (x[c + 1] - x[c - 1]);
                slope + curv * (x[i] - x[c])
            };
        }
        let table_lo = (exp(x[0]), y[0]);
        let table_hi = exp(x[n - 1]);
        let table = HermiteCubic::new(x, y, dy)?;
        let partial = EllipticData {
            mu,
            m_value: 0.0,
            table,
            table_lo,
            table_hi,
            profile: solve_phi_e(|_| 0.0, 2.0, PhiEGrid { rho_min: 1.0, points_per_decade: 2 }, t)?,
        };
        let m_value = eval_m(mu, t, |r| partial.phi_plus_psi(r), self.opts.m_tol)?;
        let h = build_htilde_with(mu, t, |r| partial.phi_plus_psi(r), m_value, self.denominator);
        let profile = solve_phi_e(|rho| h.eval(rho), h.support(), self.opts.phi_e_grid, t)?;
        let data = Rc::new(EllipticData { m_value, profile, ..partial });
        self.elliptic.borrow_mut().insert(t.to_bits(), data.clone());
        Ok(data)
    }

    /// `𝓜[μ](t)` from the tabulated `φ + ψ*`.
    pub fn m_value(&self, t: f64) -> Result<f64> {
        Ok(self.elliptic_data(t)?.m_value)
    }

    /// `(φ₁ + φ₂ + ψ*)(r, t)` as seen by `H̃` (table interpolation).
    pub fn tabulated_phi_plus_psi(&self, r: f64, t: f64) -> Result<f64> {
        Ok(self.elliptic_data(t)?.phi_plus_psi(r))
    }

    /// `(Φ_e, ∂_rΦ_e, ∂_rrΦ_e)` at `(r, t)` with `ρ̄ = r/μ`.
    pub fn phi_e(&self, r: f64, t: f64) -> Result<(f64, f64, f64)> {
        let d = self.elliptic_data(t)?;
        let rho = r / d.mu;
        let v = d.profile.eval(rho);
        let dv = d.profile.eval_d_rho(rho);
        let h = build_htilde_with(d.mu, t, |x| d.phi_plus_psi(x), d.m_value, self.denominator);
        let ddv = h.eval(rho) - dv / rho + crate::kernels::linearized_potential(rho) * v;
        Ok((v, dv / d.mu, ddv / (d.mu * d.mu)))
    }

    /// `∂_tΦ_e` at fixed `r` by centred differences.
    pub fn phi_e_dt(&self, r: f64, t: f64) -> Result<f64> {
        let dt = self.opts.dt_fraction * t;
        if t - dt <= self.t_start() {
            return Err(Error::Domain("time difference leaves the Duhamel range"));
        }
        let plus = self.phi_e(r, t + dt)?.0;
        let minus = self.phi_e(r, t - dt)?.0;
        Ok((plus - minus) / (2.0 * dt))
    }

    pub fn components(&self, r: f64, t: f64) -> Result<Components> {
        if !(r >= 0.0) || !(t > self.t_start()) {
            return Err(Error::Domain("v1 needs r >= 0 and t > t0/2"));
        }
        let mu = self.traj.mu(t);
        let z = r / sqrt(t);
        let inner = eta(z) * steady_q(r / mu);
        if r == 0.0 {
            return Ok(Components { inner, phi1: 0.0, phi2: 0.0, psi: 0.0, elliptic: 0.0 });
        }
        let (p1, p2) = self.varphi(r, t)?;
        let psi = r * self.psi_star(r, t)?;
        let cut = eta(4.0 * z);
        let elliptic = if cut > 0.0 { cut * self.phi_e(r, t)?.0 } else { 0.0 };
        Ok(Components { inner, phi1: r * p1, phi2: r * p2, psi, elliptic })
    }

    /// `E[v*]` from exact derivatives.
    pub fn error_v_star(&self, r: f64, t: f64) -> Result<f64> {
        eval_error_v_star(&self.traj, r, t)
    }

    /// `E[v₁]` from the grouped form, using that `Φ₁`, `Φ₂`, `Ψ*` solve their linear equations.
    pub fn error_v1(&self, r: f64, t: f64) -> Result<f64> {
        check_point(r, t)?;
        let c = self.components(r, t)?;
        let st = sqrt(t);
        let z = r / st;
        let (e4, e4d, e4dd) = (eta(4.0 * z), eta_d1(4.0 * z), eta_d2(4.0 * z));
        let mut lin = 0.0;
        if e4 > 0.0 || e4d != 0.0 {
            let (w, wr, wrr) = self.phi_e(r, t)?;
            let wt = self.phi_e_dt(r, t)?;
            let d_r = 4.0 * e4d / st * w + e4 * wr;
            let d_rr = 16.0 * e4dd / t * w + 8.0 * e4d / st * wr + e4 * wrr;
            let d_t = e4d * 4.0 * (-0.5 * z / t) * w + e4 * wt;
            lin = -d_t + d_rr + d_r / r;
        }
        let first = eval_first_error_terms(&self.traj, r, t)?;
        let a = 2.0 * c.inner;
        let delta = c.phi1 + c.phi2 + c.psi + c.elliptic;
        let s = sin(delta);
        // sin(a + 2δ) − sin a = −2 sin a sin²δ + cos a sin 2δ
        let shift = -2.0 * sin(a) * s * s + crate::math::cos(a) * sin(2.0 * delta);
        Ok(lin + (c.phi1 + c.phi2 + c.psi) / (r * r) + first.trig - shift / (2.0 * r * r))
    }

    /// `E[v₁]` by finite differences of [`assemble_v1`].
    pub fn error_v1_stencil(&self, r: f64, t: f64, mut opts: StencilOptions) -> Result<Estimate> {
        opts.t_min = opts.t_min.max(self.t_start());
        apply_error_operator(|x, s| assemble_v1(self, x, s), r, t, opts)
    }
}

/// `𝓜[μ](t)` at each of `times`, one bundle for all.
pub fn sample_orthogonality<T: Trajectory>(
    ctx: GammaContext,
    traj: T,
    opts: AnsatzOptions,
    times: &[f64],
) -> Result<Vec<f64>> {
    let b = AnsatzBundle::new(ctx, traj, opts)?;
    times.iter().map(|&t| b.m_value(t)).collect()
}

/// Rounds of `μ̄₀ ← μ̄₀ + μ₁` where `μ₁` solves the split equation forced by `𝓜[μ̄₀]`.
///
/// `𝓜` agrees with minus the non-local residual to leading order, so the
/// residual solver serves as an approximate inverse. `sample` evaluates `𝓜`
/// at the given times; `times` must span the solver window.
pub fn refine_orthogonality<S>(
    ctx: &GammaContext,
    split: &SplitParameters,
    opts: &SolveOptions,
    mut traj: Corrected<Mu0>,
    rounds: usize,
    times: &[f64],
    mut sample: S,
) -> Result<Corrected<Mu0>>
where
    S: FnMut(&Corrected<Mu0>, &[f64]) -> Result<Vec<f64>>,
{
    if times.len() < 4 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("orthogonality samples need >= 4 increasing times"));
    }
    for _ in 0..rounds {
        let m = sample(&traj, times)?;
        // t·𝓜 varies slowly in ln t.
        let x = times.iter().map(|t| ln(*t)).collect();
        let y = times.iter().zip(&m).map(|(t, v)| t * v).collect();
        let interp = MonotoneCubic::new(x, y)?;
        let forcing = Forcing::from_a1(move |t| interp.eval(ln(t)) / t);
        let sol = solve_mu(ctx, split, opts, &traj, &forcing, None)?;
        drop(forcing);
        traj.corrections.push(sol.correction);
    }
    Ok(traj)
}

/// `v₁(r, t)`.
pub fn assemble_v1<T: Trajectory>(bundle: &AnsatzBundle<T>, r: f64, t: f64) -> Result<f64> {
    Ok(bundle.components(r, t)?.sum())
}
