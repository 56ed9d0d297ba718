//! Shape-preserving (monotone) piecewise-cubic Hermite interpolation.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Fritsch–Carlson monotone cubic through `(x_i, y_i)`.
///
/// Outside the node range the end cubics are extended; callers that must not
/// extrapolate check [`MonotoneCubic::range`] first.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Domain("interpolation needs >= 2 matching nodes"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("interpolation nodes must be strictly increasing"));
        }
        let secant: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut slope = alloc::vec![0.0; n];
        slope[0] = secant[0];
        slope[n - 1] = secant[n - 2];
        for i in 1..n - 1 {
            let (d0, d1) = (secant[i - 1], secant[i]);
            slope[i] = if d0 * d1 <= 0.0 {
                0.0
            } else {
                // Weighted harmonic mean (Fritsch–Butland), monotone by construction.
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                (w1 + w2) / (w1 / d0 + w2 / d1)
            };
        }
        // Limit the end slopes so the first/last cubic stays monotone.
        for (i, s) in [(0usize, 0usize), (n - 1, n - 2)] {
            let d = secant[s];
            if slope[i] * d <= 0.0 {
                slope[i] = 0.0;
            } else if crate::math::abs(slope[i]) > 3.0 * crate::math::abs(d) {
                slope[i] = 3.0 * d;
            }
        }
        Ok(Self { x, y, slope })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn segment(&self, xq: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&v| v <= xq) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let s = (xq - self.x[i]) / h;
        let (h00, h10, h01, h11) = hermite(s);
        h00 * self.y[i] + h10 * h * self.slope[i] + h01 * self.y[i + 1] + h11 * h * self.slope[i + 1]
    }

    pub fn derivative(&self, xq: f64) -> f64 {
        let i = self.segment(xq);
        let h = self.x[i + 1] - self.x[i];
        let s = (xq - self.x[i]) / h;
        let d00 = 6.0 * s * s - 6.0 * s;
        let d10 = 3.0 * s * s - 4.0 * s + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * s * s - 2.0 * s;
        (d00 * self.y[i] + d01 * self.y[i + 1]) / h + d10 * self.slope[i] + d11 * self.slope[i + 1]
    }
}

/// Cubic Hermite interpolant through samples with known slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
}

impl HermiteCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || y.len() != x.len() || dy.len() != x.len() {
            return Err(Error::Domain("interpolation needs >= 2 matching nodes"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("interpolation nodes must be strictly increasing"));
        }
        Ok(Self { x, y, dy })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&v| v <= xq) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (xq - self.x[i]) / h;
        let (h00, h10, h01, h11) = hermite(s);
        h00 * self.y[i] + h10 * h * self.dy[i] + h01 * self.y[i + 1] + h11 * h * self.dy[i + 1]
    }
}

fn hermite(s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    )
}
