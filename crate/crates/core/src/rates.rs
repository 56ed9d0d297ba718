//! Rate post-processing: the `τ(t)` clock, power-log regressions and the
//! three-regime verdict for `‖v_r‖_∞`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, exp, ln, log10, sqrt};
use crate::mu_dynamics::Trajectory;
use crate::quad::{integrate, Tolerance};

/// Default `C_τ`.
pub const C_TAU: f64 = 10.0;

/// `τ(t) = ∫_{t₀}^{t} μ^{−2}(s) ds + C_τ t₀ μ^{−2}(t₀)`.
pub fn tau_of_t<T: Trajectory + ?Sized>(traj: &T, t0: f64, t: f64, c_tau: f64, tol: Tolerance) -> Result<f64> {
    if !(t0 > 0.0) || !(t >= t0) {
        return Err(Error::Domain("tau needs 0 < t0 <= t"));
    }
    let m0 = traj.mu(t0);
    let offset = c_tau * t0 / (m0 * m0);
    if t == t0 {
        return Ok(offset);
    }
    // s = e^x spreads the integrand evenly over decades.
    let est = integrate(
        |x| {
            let s = exp(x);
            let m = traj.mu(s);
            s / (m * m)
        },
        ln(t0),
        ln(t),
        tol,
    )?;
    Ok(est.value + offset)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelClass {
    /// `A t^β (ln t)^σ` with `β`, `σ` free.
    PowerLog,
    /// `σ` held at the given value, `β` free.
    FixedLog(f64),
}

/// Fitted `A t^β (ln t)^σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    pub class: ModelClass,
    pub amplitude: f64,
    pub beta: f64,
    pub sigma: f64,
    /// Root-mean-square residual of `ln y`.
    pub residual: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

impl RateModel {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * exp(self.beta * ln(t) + self.sigma * ln(ln(t)))
    }
}

pub const MIN_SAMPLES: usize = 30;
pub const MIN_DECADES: f64 = 1.5;

/// Least squares of `ln y` on `{1, ln t, ln ln t}` (the last column dropped for `FixedLog`).
pub fn fit_rate(ts: &[f64], ys: &[f64], class: ModelClass) -> Result<RateModel> {
    let n = ts.len();
    if ys.len() != n {
        return Err(Error::Domain("series lengths differ"));
    }
    let (lo, hi) = ts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), t| (a.min(*t), b.max(*t)));
    let decades = if n > 0 { log10(hi / lo) } else { 0.0 };
    if n < MIN_SAMPLES || !(decades >= MIN_DECADES) {
        return Err(Error::InsufficientData { samples: n, decades });
    }
    if ts.iter().any(|t| !(*t > core::f64::consts::E)) || ys.iter().any(|y| !(*y > 0.0)) {
        return Err(Error::Domain("rate fits need t > e and y > 0"));
    }
    let (sigma_fixed, cols) = match class {
        ModelClass::PowerLog => (0.0, 3),
        ModelClass::FixedLog(s) => (s, 2),
    };
    let mut a: Vec<[f64; 3]> = ts.iter().map(|t| [1.0, ln(*t), ln(ln(*t))]).collect();
    let b: Vec<f64> = ts.iter().zip(ys).map(|(t, y)| ln(*y) - sigma_fixed * ln(ln(*t))).collect();
    let coef = least_squares(&mut a, &b, cols)?;
    let sigma = if cols == 3 { coef[2] } else { sigma_fixed };
    let mut ss = 0.0;
    for (t, y) in ts.iter().zip(ys) {
        let pred = coef[0] + coef[1] * ln(*t) + sigma * ln(ln(*t));
        ss += (ln(*y) - pred) * (ln(*y) - pred);
    }
    Ok(RateModel {
        class,
        amplitude: exp(coef[0]),
        beta: coef[1],
        sigma,
        residual: sqrt(ss / n as f64),
        window: (lo, hi),
        samples: n,
    })
}

/// Modified Gram–Schmidt (twice) on the first `cols` columns, then back substitution.
fn least_squares(a: &mut [[f64; 3]], b: &[f64], cols: usize) -> Result<[f64; 3]> {
    let n = a.len();
    let mut q: Vec<[f64; 3]> = a.to_vec();
    let mut r = [[0.0f64; 3]; 3];
    for j in 0..cols {
        let norm0 = sqrt((0..n).map(|i| q[i][j] * q[i][j]).sum::<f64>());
        for _pass in 0..2 {
            for k in 0..j {
                let d: f64 = (0..n).map(|i| q[i][k] * q[i][j]).sum();
                r[k][j] += d;
                for row in q.iter_mut() {
                    row[j] -= d * row[k];
                }
            }
        }
        let norm = sqrt((0..n).map(|i| q[i][j] * q[i][j]).sum::<f64>());
        if !(norm > 1e-12 * norm0) {
            return Err(Error::Degenerate("rate design matrix is rank deficient"));
        }
        r[j][j] = norm;
        for row in q.iter_mut() {
            row[j] /= norm;
        }
    }
    let mut qtb = [0.0f64; 3];
    for j in 0..cols {
        qtb[j] = (0..n).map(|i| q[i][j] * b[i]).sum();
    }
    // One round of refinement on the residual.
    let mut x = back_substitute(&r, &qtb, cols);
    let resid: Vec<f64> = (0..n).map(|i| b[i] - (0..cols).map(|j| a[i][j] * x[j]).sum::<f64>()).collect();
    let mut qtr = [0.0f64; 3];
    for j in 0..cols {
        qtr[j] = (0..n).map(|i| q[i][j] * resid[i]).sum();
    }
    let dx = back_substitute(&r, &qtr, cols);
    for j in 0..cols {
        x[j] += dx[j];
    }
    Ok(x)
}

fn back_substitute(r: &[[f64; 3]; 3], y: &[f64; 3], cols: usize) -> [f64; 3] {
    let mut x = [0.0f64; 3];
    for j in (0..cols).rev() {
        let mut s = y[j];
        for k in j + 1..cols {
            s -= r[j][k] * x[k];
        }
        x[j] = s / r[j][j];
    }
    x
}

/// Predicted `(β, σ)` for `‖v_r‖_∞`: `t^{(γ−2)/2} ln t`, `1`, `ln t`.
pub fn predicted_exponents(gamma: f64) -> (f64, f64) {
    if abs(gamma - 2.0) < 1e-12 {
        (0.0, 0.0)
    } else if gamma < 2.0 {
        (0.5 * (gamma - 2.0), 1.0)
    } else {
        (0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behaviour {
    /// Gradient decays like a negative power (scale grows).
    Decaying,
    Bounded,
    /// Gradient grows like `ln t` (scale shrinks modulo logarithms).
    LogGrowing,
    PowerGrowing,
    Inconclusive,
}

impl Behaviour {
    pub fn label(self) -> &'static str {
        match self {
            Behaviour::Decaying => "decaying",
            Behaviour::Bounded => "bounded",
            Behaviour::LogGrowing => "log-growing",
            Behaviour::PowerGrowing => "power-growing",
            Behaviour::Inconclusive => "inconclusive",
        }
    }
}

/// Expected behaviour of `‖v_r‖_∞` for tail exponent `γ`.
pub fn expected_behaviour(gamma: f64) -> Behaviour {
    if abs(gamma - 2.0) < 1e-12 {
        Behaviour::Bounded
    } else if gamma < 2.0 {
        Behaviour::Decaying
    } else {
        Behaviour::LogGrowing
    }
}

/// Classification thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictOptions {
    /// `|β|` below this counts as no power.
    pub power_tolerance: f64,
    /// Bounded if the last decade stays within `±band` of its mean.
    pub band: f64,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        Self { power_tolerance: 0.05, band: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub gamma: f64,
    pub behaviour: Behaviour,
    pub expected: Behaviour,
    pub predicted_beta: f64,
    pub predicted_sigma: f64,
    pub free: RateModel,
    pub pure_power: RateModel,
    pub log_one: RateModel,
    /// Largest relative deviation from the mean over the last decade.
    pub last_decade_spread: f64,
}

impl Verdict {
    pub fn matches(&self) -> bool {
        self.behaviour == self.expected
    }
}

/// Classifies a `‖v_r‖_∞` series. The fit window is the final two decades (at least 1.5).
pub fn trichotomy_verdict(gamma: f64, ts: &[f64], ys: &[f64], opts: VerdictOptions) -> Result<Verdict> {
    if ts.len() != ys.len() || ts.is_empty() {
        return Err(Error::Domain("series lengths differ or are empty"));
    }
    let t_end = ts.iter().fold(0.0f64, |m, t| m.max(*t));
    let (wt, wy) = window(ts, ys, t_end / 100.0);
    let free = fit_rate(&wt, &wy, ModelClass::PowerLog)?;
    let pure_power = fit_rate(&wt, &wy, ModelClass::FixedLog(0.0))?;
    let log_one = fit_rate(&wt, &wy, ModelClass::FixedLog(1.0))?;
    let (_, dy) = window(ts, ys, t_end / 10.0);
    let mean = dy.iter().sum::<f64>() / dy.len() as f64;
    let spread = dy.iter().fold(0.0f64, |m, y| m.max(abs(y / mean - 1.0)));
    let tol = opts.power_tolerance;
    let log_ok = abs(log_one.beta) < tol && log_one.amplitude > 0.0;
    let bounded_ok = abs(pure_power.beta) <= tol && spread <= opts.band;
    let behaviour = if pure_power.beta < -tol && !log_ok {
        Behaviour::Decaying
    } else if log_ok && bounded_ok {
        if log_one.residual < pure_power.residual {
            Behaviour::LogGrowing
        } else {
            Behaviour::Bounded
        }
    } else if log_ok {
        Behaviour::LogGrowing
    } else if bounded_ok {
        Behaviour::Bounded
    } else if pure_power.beta > tol {
        Behaviour::PowerGrowing
    } else {
        Behaviour::Inconclusive
    };
    let (predicted_beta, predicted_sigma) = predicted_exponents(gamma);
    Ok(Verdict {
        gamma,
        behaviour,
        expected: expected_behaviour(gamma),
        predicted_beta,
        predicted_sigma,
        free,
        pure_power,
        log_one,
        last_decade_spread: spread,
    })
}

fn window(ts: &[f64], ys: &[f64], from: f64) -> (Vec<f64>, Vec<f64>) {
    ts.iter().zip(ys).filter(|(t, _)| **t >= from * (1.0 - 1e-12)).map(|(t, y)| (*t, *y)).unzip()
}

/// A row of the predicted-rate table: label and `(β, σ)` per regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub label: &'static str,
    pub subcritical: &'static str,
    pub critical: &'static str,
    pub supercritical: &'static str,
}

/// Harmonic map flow rates and the N = 4 row of the Fila–King table for `u_t = Δu + u³`.
pub fn rate_table() -> [RateRow; 2] {
    [
        RateRow {
            label: "harmonic map flow, ||v_r||_inf",
            subcritical: "t^{-(2-gamma)/2} ln t",
            critical: "1",
            supercritical: "ln t",
        },
        RateRow {
            label: "Fila-King N=4, ||u||_inf",
            subcritical: "t^{-(2-gamma)/2} ln t",
            critical: "1",
            supercritical: "ln t",
        },
    ]
}
