//! Method-of-lines solver for `v_t = v_rr + v_r/r − sin(2v)/(2r²)` on a
//! sinh-graded radial grid, with scale extraction and the Dirichlet energy.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::heat4d::GammaContext;
use crate::interp::MonotoneCubic;
use crate::kernels::{build_initial_data, steady_q};
use crate::math::{abs, atan, bracket, cos, exp, powf, sin, sqrt, KahanSum, PI};
use crate::mu_dynamics::Mu0;
use crate::quad::Tolerance;
use crate::stencil::three_point;

/// Graded radial grid `r_i = R sinh(sξ_i)/sinh(s)`, `ξ_i = i/(N−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub stretch: f64,
    /// Three-point weights `(first, second)` at interior nodes (index `i − 1`).
    pub weights: Vec<([f64; 3], [f64; 3])>,
    /// Flux-form coefficients `(a_i, c_i)` of `(1/r)(r v_r)_r` at interior nodes.
    flux: Vec<(f64, f64)>,
    /// Quadrature weight attached to each node in the energy.
    cell: Vec<f64>,
    /// Set when `N < 64` or the spacing misses the requested scale.
    pub under_resolved: bool,
}

fn sinh(x: f64) -> f64 {
    0.5 * (exp(x) - exp(-x))
}

impl RadialGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn min_spacing(&self) -> f64 {
        self.nodes.windows(2).fold(f64::INFINITY, |m, w| m.min(w[1] - w[0]))
    }

    /// Second-derivative weights at interior node `i`.
    pub fn second_derivative_weights(&self, i: usize) -> [f64; 3] {
        self.weights[i - 1].1
    }

    /// Halves every spacing in the stretched coordinate.
    pub fn refine(&self) -> Result<Self> {
        build_grid(self.r_max(), 2 * self.len() - 1, self.stretch)
    }

    fn lift(&self, i: usize, v: &[f64]) -> f64 {
        let (a, c) = self.flux[i - 1];
        a * v[i - 1] - (a + c) * v[i] + c * v[i + 1]
    }
}

/// Builds an `n`-node grid on `[0, r_max]`; `stretch = 0` is uniform.
pub fn build_grid(r_max: f64, n: usize, stretch: f64) -> Result<RadialGrid> {
    if n < 3 || !(r_max > 0.0) || !(stretch >= 0.0) || !stretch.is_finite() {
        return Err(Error::Domain("grid needs n >= 3, r_max > 0, stretch >= 0"));
    }
    let nodes: Vec<f64> = (0..n)
        .map(|i| {
            let xi = i as f64 / (n - 1) as f64;
            if i + 1 == n {
                r_max
            } else if stretch < 1e-8 {
                r_max * xi
            } else {
                r_max * sinh(stretch * xi) / sinh(stretch)
            }
        })
        .collect();
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("grid nodes collapse; reduce the stretch"));
    }
    let mut weights = Vec::with_capacity(n - 2);
    let mut flux = Vec::with_capacity(n - 2);
    let mut cell = alloc::vec![0.0; n];
    for i in 1..n - 1 {
        let (hm, hp) = (nodes[i] - nodes[i - 1], nodes[i + 1] - nodes[i]);
        weights.push(three_point(hm, hp));
        let d = 0.5 * (hm + hp);
        let (rm, rp) = (0.5 * (nodes[i] + nodes[i - 1]), 0.5 * (nodes[i + 1] + nodes[i]));
        flux.push((rm / (hm * nodes[i] * d), rp / (hp * nodes[i] * d)));
        cell[i] = d;
    }
    cell[n - 1] = 0.5 * (nodes[n - 1] - nodes[n - 2]);
    Ok(RadialGrid { nodes, stretch, weights, flux, cell, under_resolved: n < 64 })
}

/// Stretch putting the first spacing at `h_min` (uniform if that is already met).
pub fn stretch_for(r_max: f64, n: usize, h_min: f64) -> Result<f64> {
    if n < 3 || !(h_min > 0.0) || !(r_max > h_min) {
        return Err(Error::Domain("stretch search needs n >= 3 and 0 < h_min < r_max"));
    }
    let first = |s: f64| if s < 1e-8 { r_max / (n - 1) as f64 } else { r_max * sinh(s / (n - 1) as f64) / sinh(s) };
    if first(0.0) <= h_min {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while first(hi) > h_min {
        hi *= 2.0;
        if hi > 600.0 {
            return Err(Error::Domain("requested spacing needs more nodes"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if first(mid) > h_min {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Ratio `h_min/μ` targeted by [`build_grid_resolving`].
///
/// The discrete bubble energy drops as `μ/h` shrinks, a spurious pull of size about `h²/μ³`
/// that has to stay below the physical drift `μ/(t ln t)`; at `t = 10⁶` the scale only
/// converges once `μ/h ≳ 10⁴`.
pub const BUBBLE_RESOLUTION: f64 = 1e-5;

/// Grid whose smallest spacing is `BUBBLE_RESOLUTION · mu_min`.
pub fn build_grid_resolving(r_max: f64, n: usize, mu_min: f64) -> Result<RadialGrid> {
    let h = mu_min * BUBBLE_RESOLUTION;
    let s = stretch_for(r_max, n, h)?;
    let mut g = build_grid(r_max, n, s)?;
    g.under_resolved |= g.min_spacing() > h * (1.0 + 1e-9);
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OriginCondition {
    /// `v(0) = π`, the degree-one class.
    Pi,
    /// `v(0) = 0`, used for small-data linear checks.
    Zero,
}

impl OriginCondition {
    pub fn value(self) -> f64 {
        match self {
            OriginCondition::Pi => PI,
            OriginCondition::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuterCondition {
    Fixed(f64),
    /// `v(R, t) = amplitude · R ψ*(R, t − t_origin)`.
    HeatTail { gamma: f64, t_origin: f64, amplitude: f64 },
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub origin: OriginCondition,
    pub outer: OuterCondition,
}

impl Boundary {
    fn outer_value(&self, r: f64, t: f64) -> Result<Option<f64>> {
        match self.outer {
            OuterCondition::Fixed(v) => Ok(Some(v)),
            OuterCondition::Neumann => Ok(None),
            OuterCondition::HeatTail { gamma, t_origin, amplitude } => {
                let elapsed = t - t_origin;
                if elapsed <= 0.0 {
                    return Ok(Some(amplitude * r * powf(bracket(r), -gamma)));
                }
                let ctx = GammaContext::new(gamma)?;
                Ok(Some(amplitude * r * ctx.psi_star(r, elapsed, Tolerance::relative(1e-12).with_abs(1e-300))?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub v: Vec<f64>,
}

/// Angles beyond this are treated as a blown-up integration.
pub const MAX_ANGLE: f64 = 4.0 * PI;

fn check_state(v: &[f64], t: f64) -> Result<()> {
    if v.iter().any(|x| !x.is_finite() || abs(*x) > MAX_ANGLE) {
        return Err(Error::Instability { t });
    }
    Ok(())
}

/// Nodal `v_t`; pinned nodes get zero.
pub fn semidiscrete_rhs(state: &State, grid: &RadialGrid, boundary: &Boundary) -> Result<Vec<f64>> {
    let n = grid.len();
    if state.v.len() != n {
        return Err(Error::Domain("state and grid sizes differ"));
    }
    check_state(&state.v, state.t)?;
    let mut out = alloc::vec![0.0; n];
    for i in 1..n - 1 {
        let r = grid.nodes[i];
        out[i] = grid.lift(i, &state.v) - sin(2.0 * state.v[i]) / (2.0 * r * r);
    }
    if boundary.outer == OuterCondition::Neumann {
        out[n - 1] = neumann_rhs(grid, &state.v);
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Instability { t: state.t });
    }
    Ok(out)
}

fn neumann_coeff(grid: &RadialGrid) -> f64 {
    let n = grid.len();
    let h = grid.nodes[n - 1] - grid.nodes[n - 2];
    let rm = 0.5 * (grid.nodes[n - 1] + grid.nodes[n - 2]);
    rm / (h * grid.nodes[n - 1] * grid.cell[n - 1])
}

fn neumann_rhs(grid: &RadialGrid, v: &[f64]) -> f64 {
    let n = grid.len();
    let r = grid.nodes[n - 1];
    neumann_coeff(grid) * (v[n - 2] - v[n - 1]) - sin(2.0 * v[n - 1]) / (2.0 * r * r)
}

/// `2π∫(v_r² + sin²v/r²) r dr`, discretised consistently with the flux form.
pub fn dirichlet_energy(state: &State, grid: &RadialGrid) -> f64 {
    let (r, v) = (&grid.nodes, &state.v);
    let mut acc = KahanSum::default();
    for i in 0..r.len() - 1 {
        let h = r[i + 1] - r[i];
        let dv = v[i + 1] - v[i];
        acc.add(0.5 * (r[i] + r[i + 1]) * dv * dv / h);
    }
    // The r = 0 node carries no weight: sin²v/r · r → 0 there.
    for i in 1..r.len() {
        let s = sin(v[i]);
        acc.add(grid.cell[i] * s * s / r[i]);
    }
    2.0 * PI * acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Bdf2Newton,
    /// One Newton correction per step (linearised about the predictor).
    LinearlyImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub dt0: f64,
    pub growth: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_dt_fraction: f64,
    pub max_rejections: usize,
    /// Relative energy increase tolerated as roundoff before a step is rejected.
    pub energy_slack: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Bdf2Newton,
            dt0: 1e-3,
            growth: 1.05,
            newton_tol: 1e-12,
            max_newton: 20,
            max_dt_fraction: 0.05,
            max_rejections: 10,
            energy_slack: 1e-13,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.growth > 1.0 && self.growth <= 1.1) {
            return Err(Error::Domain("growth factor must lie in (1, 1.1]"));
        }
        if !(self.dt0 > 0.0) || !(self.max_dt_fraction > 0.0 && self.max_dt_fraction <= 0.05) {
            return Err(Error::Domain("need dt0 > 0 and 0 < max_dt_fraction <= 0.05"));
        }
        if self.max_newton == 0 || self.max_rejections == 0 || !(self.newton_tol > 0.0) {
            return Err(Error::Domain("Newton limits must be positive"));
        }
        Ok(())
    }
}

/// Thomas algorithm; `lower[0]` and `upper[n−1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = alloc::vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::Degenerate("zero pivot in tridiagonal solve"));
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Degenerate("zero pivot in tridiagonal solve"));
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i + 1] * rhs[i + 1];
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub t: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    pub rejected: usize,
    pub energy: f64,
}

/// One time-integration run: grid, boundary data, and BDF2 history.
#[derive(Debug, Clone)]
pub struct Solver {
    pub grid: RadialGrid,
    pub boundary: Boundary,
    pub cfg: StepperConfig,
    pub state: State,
    previous: Option<(Vec<f64>, f64)>,
    dt: f64,
    energy: f64,
}

impl Solver {
    pub fn new(grid: RadialGrid, boundary: Boundary, cfg: StepperConfig, mut state: State) -> Result<Self> {
        cfg.validate()?;
        if state.v.len() != grid.len() {
            return Err(Error::Domain("state and grid sizes differ"));
        }
        state.v[0] = boundary.origin.value();
        if let Some(b) = boundary.outer_value(grid.r_max(), state.t)? {
            let n = grid.len();
            state.v[n - 1] = b;
        }
        check_state(&state.v, state.t)?;
        let energy = dirichlet_energy(&state, &grid);
        Ok(Self { grid, boundary, cfg, dt: cfg.dt0, previous: None, state, energy })
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn next_dt(&self) -> f64 {
        self.dt
    }

    fn cap(&self, t: f64) -> f64 {
        if t > 0.0 {
            self.cfg.max_dt_fraction * t
        } else {
            f64::INFINITY
        }
    }

    /// Attempts one implicit step of size `dt`; `None` if Newton fails.
    fn try_step(&self, dt: f64, bdf2: bool) -> Result<Option<(Vec<f64>, usize)>> {
        let n = self.grid.len();
        let v0 = &self.state.v;
        let (alpha, base): (f64, Vec<f64>) = match (&self.previous, bdf2) {
            (Some((prev, dt_prev)), true) => {
                let w = dt / dt_prev;
                let a = (1.0 + 2.0 * w) / (1.0 + w);
                (a, v0.iter().zip(prev).map(|(x, p)| (1.0 + w) * x - w * w / (1.0 + w) * p).collect())
            }
            _ => (1.0, v0.clone()),
        };
        let t_new = self.state.t + dt;
        let mut v = v0.clone();
        v[0] = self.boundary.origin.value();
        let neumann = self.boundary.outer == OuterCondition::Neumann;
        if let Some(b) = self.boundary.outer_value(self.grid.r_max(), t_new)? {
            v[n - 1] = b;
        }
        let last = if neumann { n - 1 } else { n - 2 };
        let m = last;
        let (mut lo, mut di, mut up, mut res) =
            (alloc::vec![0.0; m], alloc::vec![0.0; m], alloc::vec![0.0; m], alloc::vec![0.0; m]);
        let max_iter = if self.cfg.scheme == Scheme::LinearlyImplicit { 1 } else { self.cfg.max_newton };
        let mut previous = f64::INFINITY;
        for iter in 1..=max_iter {
            for i in 1..=last {
                let k = i - 1;
                let r = self.grid.nodes[i];
                let (f, a, c, b) = if i < n - 1 {
                    let (a, c) = self.grid.flux[i - 1];
                    (self.grid.lift(i, &v), a, c, -(a + c))
                } else {
                    let a = neumann_coeff(&self.grid);
                    (a * (v[n - 2] - v[n - 1]), a, 0.0, -a)
                };
                let f = f - sin(2.0 * v[i]) / (2.0 * r * r);
                res[k] = -(alpha * v[i] - base[i] - dt * f);
                lo[k] = -dt * a;
                up[k] = -dt * c;
                di[k] = alpha - dt * (b - cos(2.0 * v[i]) / (r * r));
            }
            solve_tridiagonal(&lo, &di, &up, &mut res)?;
            let mut change: f64 = 0.0;
            for i in 1..=last {
                v[i] += res[i - 1];
                change = change.max(abs(res[i - 1]));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Ok(None);
            }
            // Below 100·tol an update that no longer halves is rounding noise on fine meshes.
            let stalled = iter > 1 && change < 100.0 * self.cfg.newton_tol && change > 0.5 * previous;
            if change < self.cfg.newton_tol || stalled || self.cfg.scheme == Scheme::LinearlyImplicit {
                return Ok(Some((v, iter)));
            }
            previous = change;
        }
        Ok(None)
    }

    /// Advances by one accepted step (at most `t_stop − t`).
    pub fn advance_to(&mut self, t_stop: f64) -> Result<StepReport> {
        let mut rejected = 0;
        let mut dt = self.dt.min(self.cap(self.state.t)).min(t_stop - self.state.t);
        if !(dt > 0.0) {
            return Err(Error::Domain("step target lies in the past"));
        }
        let mut bdf2 = self.previous.is_some();
        loop {
            if let Some((v, iters)) = self.try_step(dt, bdf2)? {
                let candidate = State { t: self.state.t + dt, v };
                let e = dirichlet_energy(&candidate, &self.grid);
                let within = check_state(&candidate.v, candidate.t).is_ok();
                let fixed = self.boundary.outer != OuterCondition::Neumann
                    && !matches!(self.boundary.outer, OuterCondition::Fixed(_));
                // Time-dependent boundary data may feed energy in; only pinned or free ends are checked.
                let energy_ok = fixed || e <= self.energy + self.cfg.energy_slack * abs(self.energy);
                if within && energy_ok {
                    let old = core::mem::replace(&mut self.state, candidate);
                    self.previous = Some((old.v, dt));
                    self.energy = e;
                    let full = dt >= self.dt * (1.0 - 1e-12);
                    let grown = if full { dt * self.cfg.growth } else { self.dt };
                    self.dt = grown.min(self.cap(self.state.t));
                    return Ok(StepReport { t: self.state.t, dt, newton_iterations: iters, rejected, energy: e });
                }
            }
            rejected += 1;
            if rejected >= self.cfg.max_rejections {
                return Err(Error::StepFailure { t: self.state.t, dt });
            }
            dt *= 0.5;
            self.dt = dt;
            bdf2 = false;
        }
    }

    /// One step with the current step size.
    pub fn advance(&mut self) -> Result<StepReport> {
        self.advance_to(f64::INFINITY)
    }

    /// Moves the state onto the refined grid and restarts the BDF2 history.
    pub fn regrid(&mut self) -> Result<()> {
        let fine = self.grid.refine()?;
        let interp = MonotoneCubic::new(self.grid.nodes.clone(), self.state.v.clone())?;
        let v = fine.nodes.iter().map(|r| interp.eval(*r)).collect();
        self.state.v = v;
        self.grid = fine;
        self.previous = None;
        self.energy = dirichlet_energy(&self.state, &self.grid);
        Ok(())
    }
}

/// Scale estimates from a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuEstimate {
    /// `2 / max|v_r|`.
    pub grad: f64,
    /// Least-squares scale of `π − 2arctan(r/μ)` over `r ≤ 10·grad`.
    pub fit: f64,
    pub max_gradient: f64,
    pub argmax: f64,
    /// False when the gradient peaks at the outer boundary.
    pub valid: bool,
}

/// `v_r(0)` from a least-squares odd polynomial `a r + b r³ + c r⁵` over `r ≤ window` (at least ten nodes).
fn origin_slope(grid: &RadialGrid, v: &[f64], window: f64) -> Result<f64> {
    let k = grid.nodes.partition_point(|r| *r <= window).saturating_sub(1).clamp(10.min(grid.len() - 1), grid.len() - 1);
    let scale = grid.nodes[k];
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for i in 1..=k {
        let x = grid.nodes[i] / scale;
        let basis = [x, x * x * x, x * x * x * x * x];
        let y = v[i] - v[0];
        for p in 0..3 {
            atb[p] += basis[p] * y;
            for q in 0..3 {
                ata[p][q] += basis[p] * basis[q];
            }
        }
    }
    let sol = solve3(ata, atb)?;
    Ok(sol[0] / scale)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Result<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| abs(a[i][col]).total_cmp(&abs(a[j][col]))).unwrap_or(col);
        if abs(a[piv][col]) < 1e-300 {
            return Err(Error::Degenerate("singular 3x3 system"));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for c in row + 1..3 {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Scale estimates `(2/‖v_r‖_∞, least-squares fit)`.
pub fn extract_mu(state: &State, grid: &RadialGrid) -> Result<MuEstimate> {
    let n = grid.len();
    if state.v.len() != n || n < 12 {
        return Err(Error::Domain("scale extraction needs a matching grid with >= 12 nodes"));
    }
    let v = &state.v;
    let slopes: Vec<f64> = (1..n - 1)
        .map(|i| {
            let (d1, _) = grid.weights[i - 1];
            abs(d1[0] * v[i - 1] + d1[1] * v[i] + d1[2] * v[i + 1])
        })
        .collect();
    let rough = slopes.iter().fold(abs(origin_slope(grid, v, 0.0)?), |m, g| m.max(*g));
    if !(rough > 0.0) {
        return Err(Error::Degenerate("state has no gradient"));
    }
    // Near the origin a polynomial fit averages out nodal noise; further out, three-point differences.
    let core = 0.05 * 2.0 / rough;
    let mut best = abs(origin_slope(grid, v, core)?);
    let mut argmax = 0.0;
    for (i, g) in slopes.iter().enumerate() {
        let r = grid.nodes[i + 1];
        if r > core && *g > best {
            best = *g;
            argmax = r;
        }
    }
    let outer = abs(v[n - 1] - v[n - 2]) / (grid.nodes[n - 1] - grid.nodes[n - 2]);
    let valid = outer < best && best > 0.0;
    if !(best > 0.0) {
        return Err(Error::Degenerate("state has no gradient"));
    }
    let grad = 2.0 / best;
    let window = 10.0 * grad;
    // Gauss–Newton on Σ w_i (v_i − Q_μ(r_i))², weights = node cells.
    let mut mu = grad;
    for _ in 0..100 {
        let (mut jtj, mut jtr) = (0.0, 0.0);
        for i in 1..n {
            let r = grid.nodes[i];
            if r > window {
                break;
            }
            let w = grid.cell[i];
            let res = v[i] - (PI - 2.0 * atan(r / mu));
            let jac = 2.0 * r / (r * r + mu * mu);
            jtj += w * jac * jac;
            jtr += w * jac * res;
        }
        if !(jtj > 0.0) {
            return Err(Error::Degenerate("empty fit window"));
        }
        let step = jtr / jtj;
        let next = (mu + step).clamp(0.5 * mu, 2.0 * mu);
        let done = abs(next - mu) <= 1e-14 * mu;
        mu = next;
        if done {
            break;
        }
    }
    Ok(MuEstimate { grad, fit: mu, max_gradient: best, argmax, valid })
}

/// Samples `Q_μ` on the grid.
pub fn sample_steady_state(grid: &RadialGrid, mu: f64, t: f64) -> State {
    State { t, v: grid.nodes.iter().map(|r| steady_q(r / mu)).collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterKind {
    /// Dirichlet data from the heat evolution of the tail.
    HeatTail,
    Neumann,
}

/// A full simulation scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub gamma: f64,
    pub t0: f64,
    pub horizon: f64,
    /// Initial scale; `μ₀(t₀)` when absent.
    pub mu_init: Option<f64>,
    /// Bubble cutoff radius; `√t₀` when absent.
    pub r0: Option<f64>,
    /// Multiplier on the `r⟨r⟩^{−γ}` tail (and on its boundary feed).
    pub tail_amplitude: f64,
    pub nodes: usize,
    /// Outer radius; `10√T` when absent.
    pub r_max: Option<f64>,
    /// Grading parameter; chosen to resolve the smallest anticipated scale when absent.
    pub stretch: Option<f64>,
    pub stepper: StepperConfig,
    pub outer: OuterKind,
    pub samples_per_decade: usize,
    /// Refinements allowed before a shrinking bubble is declared collapsed.
    pub max_regrids: usize,
}

impl RunConfig {
    pub fn new(gamma: f64, t0: f64, horizon: f64) -> Self {
        Self {
            gamma,
            t0,
            horizon,
            mu_init: None,
            r0: None,
            tail_amplitude: 1.0,
            nodes: 2000,
            r_max: None,
            stretch: None,
            stepper: StepperConfig::default(),
            outer: OuterKind::HeatTail,
            samples_per_decade: 40,
            max_regrids: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        GammaContext::new(self.gamma)?;
        self.stepper.validate()?;
        if !(self.t0 >= 4.0 * exp(2.0)) || !(self.horizon > self.t0) {
            return Err(Error::Domain("need t0 >= 4e^2 and horizon > t0"));
        }
        if self.nodes < 12 || self.samples_per_decade == 0 {
            return Err(Error::Domain("need >= 12 nodes and >= 1 sample per decade"));
        }
        if let Some(s) = self.stretch {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(Error::Domain("stretch must be finite and non-negative"));
            }
        }
        if let Some(r) = self.r_max {
            if !(r >= 8.0 * sqrt(self.horizon)) {
                return Err(Error::Domain("r_max must be at least 8 sqrt(horizon)"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub mu_grad: f64,
    pub mu_fit: f64,
    pub grad_max: f64,
    pub energy: f64,
    pub dt: f64,
    pub valid: bool,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Completed,
    /// The scale fell below the finest admissible mesh (or the stepper stalled while it was unresolved).
    Collapsed { t: f64, mu: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub outcome: Outcome,
    pub samples: Vec<Sample>,
    /// `(t, nodes, values)` at each decade.
    pub snapshots: Vec<(f64, Vec<f64>, Vec<f64>)>,
    pub steps: usize,
    pub rejections: usize,
    pub regrids: usize,
    pub under_resolved: bool,
    pub r_max: f64,
    pub min_spacing: f64,
}

/// Smallest anticipated scale over the run.
fn anticipated_mu_min(ctx: &GammaContext, t0: f64, horizon: f64) -> f64 {
    let m = Mu0::new(*ctx);
    let a = m.eval(t0).0;
    let b = m.eval(horizon).0;
    if ctx.gamma > 2.0 {
        a.min(b)
    } else {
        a
    }
}

/// Runs the scenario, sampling scale, gradient and energy on a geometric time lattice.
pub fn simulate(cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let ctx = GammaContext::new(cfg.gamma)?;
    let mu_init = cfg.mu_init.unwrap_or_else(|| Mu0::new(ctx).eval(cfg.t0).0);
    let r0 = cfg.r0.unwrap_or(sqrt(cfg.t0));
    let r_max = cfg.r_max.unwrap_or(10.0 * sqrt(cfg.horizon));
    let grid = match cfg.stretch {
        Some(s) => build_grid(r_max, cfg.nodes, s)?,
        None => build_grid_resolving(r_max, cfg.nodes, anticipated_mu_min(&ctx, cfg.t0, cfg.horizon))?,
    };
    let under_resolved = grid.under_resolved;
    let mut data = build_initial_data(cfg.gamma, mu_init, r0)?;
    data.tail_amplitude = cfg.tail_amplitude;
    let state = State { t: cfg.t0, v: grid.nodes.iter().map(|r| data.eval(*r)).collect() };
    let outer = match cfg.outer {
        OuterKind::HeatTail => OuterCondition::HeatTail { gamma: cfg.gamma, t_origin: cfg.t0, amplitude: cfg.tail_amplitude },
        OuterKind::Neumann => OuterCondition::Neumann,
    };
    let boundary = Boundary { origin: OriginCondition::Pi, outer };
    let mut solver = Solver::new(grid, boundary, cfg.stepper, state)?;
    let ratio = powf(10.0, 1.0 / cfg.samples_per_decade as f64);
    let mut samples = Vec::new();
    let mut snapshots = Vec::new();
    let (mut steps, mut rejections, mut regrids) = (0, 0, 0);
    let record = |s: &Solver, dt: f64| -> Result<Sample> {
        let est = extract_mu(&s.state, &s.grid)?;
        Ok(Sample {
            t: s.state.t,
            mu_grad: est.grad,
            mu_fit: est.fit,
            grad_max: est.max_gradient,
            energy: s.energy(),
            dt,
            valid: est.valid,
        })
    };
    samples.push(record(&solver, 0.0)?);
    snapshots.push((solver.state.t, solver.grid.nodes.clone(), solver.state.v.clone()));
    let mut k = 1;
    let mut next_decade = cfg.t0 * 10.0;
    let mut outcome = Outcome::Completed;
    'run: loop {
        let target = (cfg.t0 * powf(ratio, k as f64)).min(cfg.horizon);
        let mut last_dt = 0.0;
        while solver.state.t < target * (1.0 - 1e-14) {
            match solver.advance_to(target) {
                Ok(rep) => {
                    steps += 1;
                    rejections += rep.rejected;
                    last_dt = rep.dt;
                }
                Err(e @ Error::StepFailure { .. }) => {
                    let mu = extract_mu(&solver.state, &solver.grid)?.grad;
                    if mu < 16.0 * solver.grid.min_spacing() {
                        outcome = Outcome::Collapsed { t: solver.state.t, mu };
                        break 'run;
                    }
                    return Err(e);
                }
                Err(e) => return Err(e),
            }
        }
        let sample = record(&solver, last_dt)?;
        samples.push(sample);
        if solver.state.t >= next_decade * (1.0 - 1e-12) {
            snapshots.push((solver.state.t, solver.grid.nodes.clone(), solver.state.v.clone()));
            next_decade *= 10.0;
        }
        if sample.mu_grad < 4.0 * solver.grid.min_spacing() {
            if regrids == cfg.max_regrids {
                outcome = Outcome::Collapsed { t: sample.t, mu: sample.mu_grad };
                break;
            }
            solver.regrid()?;
            regrids += 1;
        }
        if target >= cfg.horizon {
            break;
        }
        k += 1;
    }
    Ok(RunRecord {
        outcome,
        samples,
        snapshots,
        steps,
        rejections,
        regrids,
        under_resolved,
        r_max,
        min_spacing: solver.grid.min_spacing(),
    })
}
