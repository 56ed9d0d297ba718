//! Exponent inequality systems for the gluing fixed point, a feasibility
//! search over them, and the weight functions they calibrate.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::heat4d::GammaContext;
use crate::math::{abs, powf};
use crate::mu_dynamics::Mu0;
use crate::quad::Tolerance;
use crate::rates::{tau_of_t, C_TAU};

/// Exponents `ω, a, α, ν, κ, ℓ, p, δ` (`R = t^ω`, `R₀ = τ^δ`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterTuple {
    pub omega: f64,
    pub a: f64,
    pub alpha: f64,
    pub nu: f64,
    pub kappa: f64,
    pub ell: f64,
    pub p: f64,
    pub delta: f64,
}

impl ParameterTuple {
    fn with_free(&self, x: &[f64; 6]) -> Self {
        Self { omega: x[0], nu: x[1], alpha: x[2], a: x[3], ell: x[4], kappa: x[5], ..*self }
    }
}

/// How the brace scoping of the inner-problem system is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reading {
    /// Each block applies only in its own γ range.
    PerRegime,
    /// Both inner blocks apply for every γ.
    AllBlocks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scope {
    Sub,
    Super,
    All,
}

/// One literal inequality. `slack > 0` means satisfied.
#[derive(Clone, Copy)]
pub struct Inequality {
    pub name: &'static str,
    /// The inequality as text over `w a al nu k l p d g m`; read by the independent evaluator.
    pub text: &'static str,
    slack: fn(&ParameterTuple, f64) -> f64,
    scope: Scope,
    /// Whether this belongs to the inner-problem blocks whose scoping is ambiguous.
    inner_block: bool,
}

impl core::fmt::Debug for Inequality {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}: {}", self.name, self.text)
    }
}

/// `μ₀ ∼ t^m` up to logarithms.
fn mu0_power(g: f64) -> f64 {
    if g < 2.0 {
        0.5 * (2.0 - g)
    } else {
        0.0
    }
}

macro_rules! ineq {
    ($name:expr, $text:expr, $scope:ident, $inner:expr, |$x:ident, $g:ident| $body:expr) => {
        Inequality {
            name: $name,
            text: $text,
            slack: {
                #[allow(unused_variables)]
                fn f($x: &ParameterTuple, $g: f64) -> f64 {
                    $body
                }
                f
            },
            scope: Scope::$scope,
            inner_block: $inner,
        }
    };
}

/// Every inequality of the three systems plus the explicit scale requirement and the domain constraints.
pub fn all_inequalities() -> Vec<Inequality> {
    alloc::vec![
        // Scale requirement on R, μ₀, t (implied by the first system; checked anyway).
        ineq!("scale-1", "-w*(1+a) + (2*al-2)*m + 1 - al < 0", All, false, |x, g| {
            x.omega * (1.0 + x.a) - (2.0 * x.alpha - 2.0) * mu0_power(g) - 1.0 + x.alpha
        }),
        ineq!("scale-2", "-w*(1+a) - 2*m + 1 - al + (1-nu)*al < 0", All, false, |x, g| {
            x.omega * (1.0 + x.a) + 2.0 * mu0_power(g) - 1.0 + x.nu * x.alpha
        }),
        // First system.
        ineq!("r1-sub-balance", "-w*(1+a) + g - 1 - nu*al < 0", Sub, false, |x, g| {
            x.omega * (1.0 + x.a) - g + 1.0 + x.nu * x.alpha
        }),
        ineq!("r1-sub-omega-pos", "w > 0", Sub, false, |x, _g| x.omega),
        ineq!("r1-sub-omega-max", "w < (g-1)/2", Sub, false, |x, g| 0.5 * (g - 1.0) - x.omega),
        ineq!("r1-sub-nu-pos", "nu > 0", Sub, false, |x, _g| x.nu),
        ineq!("r1-sub-nu-max", "nu < (g-1)/2", Sub, false, |x, g| 0.5 * (g - 1.0) - x.nu),
        ineq!("r1-super-balance", "-w*(1+a) + 1 - nu*al < 0", Super, false, |x, _g| {
            x.omega * (1.0 + x.a) - 1.0 + x.nu * x.alpha
        }),
        ineq!("r1-super-omega-pos", "w > 0", Super, false, |x, _g| x.omega),
        ineq!("r1-super-omega-max", "w < 1/2", Super, false, |x, _g| 0.5 - x.omega),
        ineq!("r1-super-nu-pos", "nu > 0", Super, false, |x, _g| x.nu),
        ineq!("r1-super-nu-max", "nu < 1/2", Super, false, |x, _g| 0.5 - x.nu),
        ineq!("r1-alpha-pos", "al > 0", All, false, |x, _g| x.alpha),
        ineq!("r1-alpha-max", "al < 1", All, false, |x, _g| 1.0 - x.alpha),
        ineq!("r1-a-pos", "a > 0", All, false, |x, _g| x.a),
        ineq!("r1-a-max", "a < l - 2", All, false, |x, _g| x.ell - 2.0 - x.a),
        // Outer problem.
        ineq!("out-sub", "2 - g/2 - k*(g-1) + w*(1-a) > 0", Sub, false, |x, g| {
            2.0 - 0.5 * g - x.kappa * (g - 1.0) + x.omega * (1.0 - x.a)
        }),
        ineq!("out-super", "1 - k + w*(1-a) > 0", Super, false, |x, _g| 1.0 - x.kappa + x.omega * (1.0 - x.a)),
        // Inner problem.
        ineq!("r2-sub-lead", "2 - 2*g + k*(g-1) + w*(l-1) < 0", Sub, false, |x, g| {
            -(2.0 - 2.0 * g + x.kappa * (g - 1.0) + x.omega * (x.ell - 1.0))
        }),
        ineq!("r2-super-lead", "k - 2 + w*(l-1) < 0", Super, false, |x, _g| 2.0 - x.kappa - x.omega * (x.ell - 1.0)),
        ineq!("r2-super-1", "w*(l-3-2*a) - k < 0", Super, true, |x, _g| x.kappa - x.omega * (x.ell - 3.0 - 2.0 * x.a)),
        ineq!("r2-super-2", "w*(l-7-2*a) + 2 - 2*al*nu - k < 0", Super, true, |x, _g| {
            x.kappa - x.omega * (x.ell - 7.0 - 2.0 * x.a) - 2.0 + 2.0 * x.alpha * x.nu
        }),
        ineq!("r2-sub-1", "w*(l-3-2*a) - k*(g-1) < 0", Sub, true, |x, g| {
            x.kappa * (g - 1.0) - x.omega * (x.ell - 3.0 - 2.0 * x.a)
        }),
        ineq!("r2-sub-2", "w*(l-7-2*a) + 2 - 2*al*nu - k*(g-1) - 2*(2-g) < 0", Sub, true, |x, g| {
            -(x.omega * (x.ell - 7.0 - 2.0 * x.a) + 2.0 - 2.0 * x.alpha * x.nu - x.kappa * (g - 1.0) - 2.0 * (2.0 - g))
        }),
        ineq!("r2-sub-3", "4*(1-g) + w*(l+3) + k*(g-1) < 0", Sub, true, |x, g| {
            -(4.0 * (1.0 - g) + x.omega * (x.ell + 3.0) + x.kappa * (g - 1.0))
        }),
        // Domain.
        ineq!("ell-min", "l > 1", All, false, |x, _g| x.ell - 1.0),
        ineq!("ell-max", "l < 3", All, false, |x, _g| 3.0 - x.ell),
        ineq!("kappa-pos", "k > 0", All, false, |x, _g| x.kappa),
        ineq!("delta-pos", "d > 0", All, false, |x, _g| x.delta),
        ineq!("p-not-minus-one", "p != -1", All, false, |x, _g| abs(x.p + 1.0)),
    ]
}

fn applies(q: &Inequality, gamma: f64, reading: Reading) -> bool {
    let sub = gamma < 2.0;
    match q.scope {
        Scope::All => true,
        _ if q.inner_block && reading == Reading::AllBlocks => true,
        Scope::Sub => sub,
        Scope::Super => !sub,
    }
}

/// Inequalities active for `γ` under `reading`.
pub fn active_inequalities(gamma: f64, reading: Reading) -> Vec<Inequality> {
    all_inequalities().into_iter().filter(|q| applies(q, gamma, reading)).collect()
}

/// `(name, slack)` for every active inequality.
pub fn slacks(gamma: f64, x: &ParameterTuple, reading: Reading) -> Vec<(&'static str, f64)> {
    active_inequalities(gamma, reading).iter().map(|q| (q.name, (q.slack)(x, gamma))).collect()
}

fn min_slack(ineqs: &[Inequality], gamma: f64, x: &ParameterTuple) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, q) in ineqs.iter().enumerate() {
        let s = (q.slack)(x, gamma);
        // NaN slacks count as violated.
        let s = if s.is_nan() { f64::NEG_INFINITY } else { s };
        if s < best.0 {
            best = (s, i);
        }
    }
    best
}

/// Required margin for a witness.
pub const WITNESS_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Witness { tuple: ParameterTuple, min_slack: f64, tightest: &'static str },
    Infeasible { best: ParameterTuple, min_slack: f64, tightest: &'static str },
}

/// Checks one tuple; `Err` names the tightest violated inequality.
pub fn check_tuple(gamma: f64, x: &ParameterTuple, reading: Reading) -> core::result::Result<f64, &'static str> {
    let ineqs = active_inequalities(gamma, reading);
    let (s, i) = min_slack(&ineqs, gamma, x);
    if s > 0.0 {
        Ok(s)
    } else {
        Err(ineqs[i].name)
    }
}

/// Split-parameter defaults for the two exponents not searched over.
pub fn fixed_exponents(gamma: f64) -> (f64, f64) {
    let p = if gamma < 2.0 { -0.5 * gamma - 0.1 } else { -1.5 };
    (p, 0.01)
}

/// Search box for `(ω, ν, α, a, ℓ, κ)`.
pub fn search_box(gamma: f64) -> [(f64, f64); 6] {
    let cap = if gamma < 2.0 { 0.5 * (gamma - 1.0) } else { 0.5 };
    [(0.0, cap), (0.0, cap), (0.0, 1.0), (0.0, 1.0), (2.0, 3.0), (0.0, 4.0)]
}

/// Grid (`per_axis` points per exponent) followed by a Nelder–Mead polish of the minimal slack.
pub fn feasible_parameters(gamma: f64, reading: Reading, per_axis: usize) -> Result<Feasibility> {
    if !(gamma > 1.0) {
        return Err(Error::Regime { gamma });
    }
    if per_axis < 2 {
        return Err(Error::Domain("need at least two grid points per exponent"));
    }
    let ineqs = active_inequalities(gamma, reading);
    let (p, delta) = fixed_exponents(gamma);
    let base = ParameterTuple { omega: 0.0, a: 0.0, alpha: 0.0, nu: 0.0, kappa: 0.0, ell: 0.0, p, delta };
    let bx = search_box(gamma);
    let axis = |k: usize, i: usize| bx[k].0 + (i as f64 + 0.5) * (bx[k].1 - bx[k].0) / per_axis as f64;
    // Stage each inequality by the deepest loop variable it involves, so partial minima prune the grid.
    let order = ["w", "nu", "al", "a", "l", "k"];
    let stage: Vec<usize> = ineqs
        .iter()
        .map(|q| {
            let vars = expr::variables(q.text);
            order.iter().rposition(|v| vars.iter().any(|u| u == v)).unwrap_or(0)
        })
        .collect();
    let mut best_x = [0.0f64; 6];
    let mut best = f64::NEG_INFINITY;
    let mut idx = [0usize; 6];
    let mut partial = [f64::INFINITY; 7];
    let mut x = [0.0f64; 6];
    let mut depth = 0usize;
    // Iterative depth-first sweep; lexicographic order makes ties resolve to the smallest index.
    loop {
        if idx[depth] == per_axis {
            if depth == 0 {
                break;
            }
            idx[depth] = 0;
            depth -= 1;
            idx[depth] += 1;
            continue;
        }
        x[depth] = axis(depth, idx[depth]);
        let t = base.with_free(&x);
        let mut m = partial[depth];
        for (q, s) in ineqs.iter().zip(&stage) {
            if *s == depth {
                let v = (q.slack)(&t, gamma);
                m = m.min(if v.is_nan() { f64::NEG_INFINITY } else { v });
            }
        }
        if m <= best {
            idx[depth] += 1;
            continue;
        }
        if depth == 5 {
            best = m;
            best_x = x;
            idx[depth] += 1;
            continue;
        }
        partial[depth + 1] = m;
        depth += 1;
        idx[depth] = 0;
    }
    let objective = |y: &[f64; 6]| -min_slack(&ineqs, gamma, &base.with_free(y)).0;
    let polished = nelder_mead(objective, best_x, &bx, 4000);
    let (x_final, s_final) = {
        let s = -objective(&polished);
        if s > best {
            (polished, s)
        } else {
            (best_x, best)
        }
    };
    let tuple = base.with_free(&x_final);
    let (_, i) = min_slack(&ineqs, gamma, &tuple);
    let tightest = ineqs[i].name;
    Ok(if s_final > WITNESS_MARGIN {
        Feasibility::Witness { tuple, min_slack: s_final, tightest }
    } else {
        Feasibility::Infeasible { best: tuple, min_slack: s_final, tightest }
    })
}

fn nelder_mead<F: Fn(&[f64; 6]) -> f64>(f: F, start: [f64; 6], bx: &[(f64, f64); 6], iters: usize) -> [f64; 6] {
    let clamp = |mut y: [f64; 6]| {
        for k in 0..6 {
            y[k] = y[k].clamp(bx[k].0, bx[k].1);
        }
        y
    };
    let mut simplex: Vec<([f64; 6], f64)> = Vec::with_capacity(7);
    simplex.push((start, f(&start)));
    for k in 0..6 {
        let mut y = start;
        y[k] += 0.05 * (bx[k].1 - bx[k].0);
        let y = clamp(y);
        simplex.push((y, f(&y)));
    }
    for _ in 0..iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut c = [0.0f64; 6];
        for (y, _) in &simplex[..6] {
            for k in 0..6 {
                c[k] += y[k] / 6.0;
            }
        }
        let worst = simplex[6];
        let along = |s: f64| clamp(core::array::from_fn(|k| c[k] + s * (worst.0[k] - c[k])));
        let r = along(-1.0);
        let fr = f(&r);
        if fr < simplex[0].1 {
            let e = along(-2.0);
            let fe = f(&e);
            simplex[6] = if fe < fr { (e, fe) } else { (r, fr) };
        } else if fr < simplex[5].1 {
            simplex[6] = (r, fr);
        } else {
            let k = along(0.5);
            let fk = f(&k);
            if fk < worst.1 {
                simplex[6] = (k, fk);
            } else {
                let b = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    let y = clamp(core::array::from_fn(|k| b[k] + 0.5 * (s.0[k] - b[k])));
                    *s = (y, f(&y));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0].0
}

/// Second code path: evaluates each inequality from its text.
pub fn verify_independently(gamma: f64, x: &ParameterTuple, reading: Reading) -> Result<Vec<(&'static str, f64)>> {
    let m = mu0_power(gamma);
    let env = [
        ("w", x.omega),
        ("a", x.a),
        ("al", x.alpha),
        ("nu", x.nu),
        ("k", x.kappa),
        ("l", x.ell),
        ("p", x.p),
        ("d", x.delta),
        ("g", gamma),
        ("m", m),
    ];
    active_inequalities(gamma, reading).iter().map(|q| Ok((q.name, expr::slack(q.text, &env)?))).collect()
}

/// Tiny parser for the inequality texts.
mod expr {
    use super::*;

    pub fn variables(text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        for c in text.chars().chain(core::iter::once(' ')) {
            if c.is_ascii_alphabetic() {
                cur.push(c);
            } else if !cur.is_empty() {
                out.push(core::mem::take(&mut cur));
            }
        }
        out
    }

    pub fn slack(text: &str, env: &[(&str, f64)]) -> Result<f64> {
        for (op, sign) in [("!=", 0.0), ("<", 1.0), (">", -1.0)] {
            if let Some(i) = text.find(op) {
                let lhs = eval(&text[..i], env)?;
                let rhs = eval(&text[i + op.len()..], env)?;
                return Ok(if sign == 0.0 { abs(lhs - rhs) } else { sign * (rhs - lhs) });
            }
        }
        Err(Error::Domain("inequality text has no comparison"))
    }

    fn eval(src: &str, env: &[(&str, f64)]) -> Result<f64> {
        let toks: Vec<char> = src.chars().filter(|c| !c.is_whitespace()).collect();
        let mut p = Parser { toks: &toks, pos: 0, env };
        let v = p.sum()?;
        if p.pos != toks.len() {
            return Err(Error::Domain("trailing characters in inequality text"));
        }
        Ok(v)
    }

    struct Parser<'a> {
        toks: &'a [char],
        pos: usize,
        env: &'a [(&'a str, f64)],
    }

    impl Parser<'_> {
        fn peek(&self) -> Option<char> {
            self.toks.get(self.pos).copied()
        }

        fn sum(&mut self) -> Result<f64> {
            let mut v = self.product()?;
            while let Some(c) = self.peek() {
                if c == '+' || c == '-' {
                    self.pos += 1;
                    let r = self.product()?;
                    v = if c == '+' { v + r } else { v - r };
                } else {
                    break;
                }
            }
            Ok(v)
        }

        fn product(&mut self) -> Result<f64> {
            let mut v = self.unary()?;
            while let Some(c) = self.peek() {
                if c == '*' || c == '/' {
                    self.pos += 1;
                    let r = self.unary()?;
                    v = if c == '*' { v * r } else { v / r };
                } else {
                    break;
                }
            }
            Ok(v)
        }

        fn unary(&mut self) -> Result<f64> {
            if self.peek() == Some('-') {
                self.pos += 1;
                return Ok(-self.unary()?);
            }
            self.atom()
        }

        fn atom(&mut self) -> Result<f64> {
            match self.peek() {
                Some('(') => {
                    self.pos += 1;
                    let v = self.sum()?;
                    if self.peek() != Some(')') {
                        return Err(Error::Domain("unbalanced parenthesis"));
                    }
                    self.pos += 1;
                    Ok(v)
                }
                Some(c) if c.is_ascii_digit() || c == '.' => {
                    let start = self.pos;
                    while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
                        self.pos += 1;
                    }
                    let s: String = self.toks[start..self.pos].iter().collect();
                    s.parse().map_err(|_| Error::Domain("bad number"))
                }
                Some(c) if c.is_ascii_alphabetic() => {
                    let start = self.pos;
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphabetic()) {
                        self.pos += 1;
                    }
                    let s: String = self.toks[start..self.pos].iter().collect();
                    self.env
                        .iter()
                        .find(|(k, _)| *k == s)
                        .map(|(_, v)| *v)
                        .ok_or(Error::Domain("unknown variable in inequality text"))
                }
                _ => Err(Error::Domain("unexpected end of inequality text")),
            }
        }
    }
}

/// `(ϑ(t), w_o(r,t), v(t))` with `R = t^ω`, `R₀ = τ^δ`, `τ` from the `μ₀` trajectory.
pub fn eval_weights(ctx: &GammaContext, x: &ParameterTuple, t0: f64, r: f64, t: f64) -> Result<(f64, f64, f64)> {
    if !(t >= t0) || !(r >= 0.0) {
        return Err(Error::Domain("weights need t >= t0 and r >= 0"));
    }
    let mu0 = Mu0::new(*ctx);
    let tau = tau_of_t(&mu0, t0, t, C_TAU, Tolerance::relative(1e-10))?;
    let big_r = powf(t, x.omega);
    let theta = powf(tau, -x.kappa) / mu0.eval(t).0 * powf(big_r, -1.0 - x.a);
    let w_o = if r * r <= t { theta } else { theta * t / (r * r) };
    let v = powf(tau, -x.kappa) * powf(tau, -5.0 * x.delta);
    Ok((theta, w_o, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParameterTuple {
        ParameterTuple { omega: 0.45, a: 0.9, alpha: 0.9, nu: 0.45, kappa: 0.5, ell: 2.95, p: -1.5, delta: 0.01 }
    }

    #[test]
    fn hand_checked_tuple_is_feasible_for_gamma_three() {
        let s = check_tuple(3.0, &sample(), Reading::PerRegime).unwrap();
        assert!(s > 0.0);
    }

    #[test]
    fn violation_is_named() {
        let bad = ParameterTuple { omega: 0.3, nu: 0.1, ..sample() };
        assert_eq!(check_tuple(1.5, &bad, Reading::PerRegime), Err("r1-sub-omega-max"));
    }

    #[test]
    fn both_paths_agree() {
        for g in [1.2, 1.5, 2.0, 3.0] {
            for reading in [Reading::PerRegime, Reading::AllBlocks] {
                let a = slacks(g, &sample(), reading);
                let b = verify_independently(g, &sample(), reading).unwrap();
                for ((n1, s1), (n2, s2)) in a.iter().zip(&b) {
                    assert_eq!(n1, n2);
                    assert!((s1 - s2).abs() < 1e-12, "{n1}: {s1} vs {s2}");
                }
            }
        }
    }

    #[test]
    fn scale_requirement_follows_from_first_system() {
        // Wherever the first system holds, both scale lines hold.
        for g in [1.3, 1.7, 2.5] {
            let all = active_inequalities(g, Reading::PerRegime);
            let get = |n: &str| *all.iter().find(|q| q.name == n).unwrap();
            let bal = if g < 2.0 { get("r1-sub-balance") } else { get("r1-super-balance") };
            let cap = if g < 2.0 { get("r1-sub-nu-max") } else { get("r1-super-nu-max") };
            for i in 0..200 {
                let f = i as f64 / 200.0;
                let x = ParameterTuple { omega: 0.2 + 0.3 * f, a: f, alpha: 1.0 - 0.9 * f, nu: 0.4 * f + 0.05, ..sample() };
                if (bal.slack)(&x, g) > 0.0 && (cap.slack)(&x, g) > 0.0 {
                    assert!((get("scale-1").slack)(&x, g) > 0.0 && (get("scale-2").slack)(&x, g) > 0.0);
                }
            }
        }
    }

    #[test]
    fn weight_continuity_at_parabolic_radius() {
        let ctx = GammaContext::new(3.0).unwrap();
        let t: f64 = 1e4;
        let (th, inner, _) = eval_weights(&ctx, &sample(), 100.0, t.sqrt(), t).unwrap();
        let (_, outer, _) = eval_weights(&ctx, &sample(), 100.0, t.sqrt() * (1.0 + 1e-12), t).unwrap();
        assert_eq!(inner, th);
        assert!((outer / inner - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weight_decreases_with_kappa() {
        let ctx = GammaContext::new(2.0).unwrap();
        let lo = eval_weights(&ctx, &sample(), 100.0, 1.0, 1e5).unwrap().0;
        let hi = eval_weights(&ctx, &ParameterTuple { kappa: 0.8, ..sample() }, 100.0, 1.0, 1e5).unwrap().0;
        assert!(lo > 0.0 && hi < lo);
    }

    #[test]
    fn parser_handles_precedence() {
        let env = [("w", 2.0), ("a", 3.0)];
        assert!((expr::slack("-w*(1+a) + 10 > 0", &env).unwrap() - 2.0).abs() < 1e-15);
        assert!((expr::slack("w < 1/2 + a", &env).unwrap() - 1.5).abs() < 1e-15);
        assert!(expr::slack("w + 1", &env).is_err());
    }
}
