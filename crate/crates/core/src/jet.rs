//! Forward-mode jets carrying `(f, ∂_r f, ∂_rr f, ∂_t f)` through arithmetic.
//!
//! Enough to evaluate the parabolic operator `−f_t + f_rr + f_r/r` of closed-form
//! expressions without finite differences.

use core::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub r: f64,
    pub rr: f64,
    pub t: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Self { v, r: 0.0, rr: 0.0, t: 0.0 }
    }

    /// The coordinate `r` itself.
    pub const fn radius(r: f64) -> Self {
        Self { v: r, r: 1.0, rr: 0.0, t: 0.0 }
    }

    /// A function of time only, with value and derivative.
    pub const fn of_time(v: f64, dt: f64) -> Self {
        Self { v, r: 0.0, rr: 0.0, t: dt }
    }

    /// `g(self)` given `g`, `g'`, `g''` at `self.v`.
    pub fn compose(self, g: f64, g1: f64, g2: f64) -> Self {
        Self { v: g, r: g1 * self.r, rr: g2 * self.r * self.r + g1 * self.rr, t: g1 * self.t }
    }

    pub fn recip(self) -> Self {
        let x = self.v;
        self.compose(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn scale(self, c: f64) -> Self {
        Self { v: c * self.v, r: c * self.r, rr: c * self.rr, t: c * self.t }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { v: self.v + o.v, r: self.r + o.r, rr: self.rr + o.rr, t: self.t + o.t }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            r: self.r * o.v + self.v * o.r,
            rr: self.rr * o.v + 2.0 * self.r * o.r + self.v * o.rr,
            t: self.t * o.v + self.v * o.t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{exp, sin, cos};

    #[test]
    fn product_and_composition_rules() {
        // f(r, t) = sin(r·e^{t}) at (r, t) = (0.7, 0.2)
        let (r, t) = (0.7, 0.2);
        let et = Jet::of_time(exp(t), exp(t));
        let x = Jet::radius(r) * et;
        let f = x.compose(sin(x.v), cos(x.v), -sin(x.v));
        let a = r * exp(t);
        assert!((f.v - sin(a)).abs() < 1e-15);
        assert!((f.r - exp(t) * cos(a)).abs() < 1e-15);
        assert!((f.rr + exp(2.0 * t) * sin(a)).abs() < 1e-15);
        assert!((f.t - r * exp(t) * cos(a)).abs() < 1e-15);
        let q = Jet::radius(r).recip();
        assert!((q.rr - 2.0 / (r * r * r)).abs() < 1e-12);
    }
}
