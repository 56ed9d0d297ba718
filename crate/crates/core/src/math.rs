//! Thin wrappers over `libm` so the numerical code reads like ordinary float math.

#![allow(dead_code)]

pub use core::f64::consts::{FRAC_PI_2, PI};

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline]
pub fn atan(x: f64) -> f64 {
    libm::atan(x)
}
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}
#[inline]
pub fn ln1p(x: f64) -> f64 {
    libm::log1p(x)
}
#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}
#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    let mut acc = 1.0;
    let mut base = if n < 0 { 1.0 / x } else { x };
    let mut k = n.unsigned_abs();
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}
#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}
#[inline]
pub fn tgamma(x: f64) -> f64 {
    libm::tgamma(x)
}
#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}
#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}
#[inline]
pub fn log10(x: f64) -> f64 {
    libm::log10(x)
}

/// Japanese bracket `(1 + x²)^{1/2}`.
#[inline]
pub fn bracket(x: f64) -> f64 {
    libm::hypot(1.0, x)
}

/// Log-spaced points `lo..=hi` with `n` nodes.
pub fn logspace(lo: f64, hi: f64, n: usize) -> alloc::vec::Vec<f64> {
    let (a, b) = (ln(lo), ln(hi));
    (0..n)
        .map(|i| {
            if n == 1 {
                lo
            } else if i + 1 == n {
                hi
            } else {
                exp(a + (b - a) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if abs(self.sum) >= abs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
