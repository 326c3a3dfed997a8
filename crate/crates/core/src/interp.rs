//! Monotone cubic interpolation (Fritsch–Carlson) for tabulated curves.

use crate::error::{Error, Result};

/// Piecewise-cubic Hermite interpolant with Fritsch–Carlson slope limiting;
/// preserves monotonicity of the data.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// `x` must be strictly increasing and at least two points long.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidParams(
                "interpolant needs >= 2 matching knots".into(),
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams(
                "interpolant knots must be strictly increasing".into(),
            ));
        }
        let n = x.len();
        let mut secants = vec![0.0; n - 1];
        for i in 0..n - 1 {
            secants[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        }
        let mut d = vec![0.0; n];
        d[0] = secants[0];
        d[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            d[i] = if secants[i - 1] * secants[i] <= 0.0 {
                0.0
            } else {
                0.5 * (secants[i - 1] + secants[i])
            };
        }
        // limit slopes so the interpolant stays monotone on each interval
        for i in 0..n - 1 {
            if secants[i] == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
                continue;
            }
            let alpha = d[i] / secants[i];
            let beta = d[i + 1] / secants[i];
            let norm = (alpha * alpha + beta * beta).sqrt();
            if norm > 3.0 {
                let tau = 3.0 / norm;
                d[i] = tau * alpha * secants[i];
                d[i + 1] = tau * beta * secants[i];
            }
        }
        Ok(Self { x, y, d })
    }

    /// Evaluate at `xq`, clamped to the knot range.
    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = match self
            .x
            .binary_search_by(|v| v.partial_cmp(&xq).expect("finite knots"))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }
}
