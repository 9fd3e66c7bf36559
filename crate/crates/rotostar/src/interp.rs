//! Cubic Hermite interpolation on sorted 1-D grids.

use crate::quad::diff_matrix;

/// Piecewise-cubic interpolant with nodal values and slopes.
#[derive(Debug, Clone)]
pub struct CubicInterp {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

impl CubicInterp {
    /// Build with slopes estimated by local 5-point polynomial differentiation.
    pub fn from_values(x: &[f64], y: &[f64]) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(x.len() >= 2);
        let dy = fd_slopes(x, y);
        CubicInterp {
            x: x.to_vec(),
            y: y.to_vec(),
            dy,
        }
    }

    /// Build with known exact slopes.
    pub fn with_slopes(x: &[f64], y: &[f64], dy: &[f64]) -> Self {
        assert!(x.len() == y.len() && y.len() == dy.len());
        CubicInterp {
            x: x.to_vec(),
            y: y.to_vec(),
            dy: dy.to_vec(),
        }
    }

    fn panel(&self, xq: f64) -> usize {
        let n = self.x.len();
        if xq <= self.x[0] {
            return 0;
        }
        if xq >= self.x[n - 2] {
            return n - 2;
        }
        match self
            .x
            .binary_search_by(|v| v.partial_cmp(&xq).unwrap())
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        }
    }

    /// Interpolated value; linear extrapolation beyond the grid.
    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq < self.x[0] {
            return self.y[0] + self.dy[0] * (xq - self.x[0]);
        }
        if xq > self.x[n - 1] {
            return self.y[n - 1] + self.dy[n - 1] * (xq - self.x[n - 1]);
        }
        let i = self.panel(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        h00 * self.y[i] + h10 * h * self.dy[i] + h01 * self.y[i + 1] + h11 * h * self.dy[i + 1]
    }

    /// Derivative of the interpolant.
    pub fn eval_deriv(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq < self.x[0] {
            return self.dy[0];
        }
        if xq > self.x[n - 1] {
            return self.dy[n - 1];
        }
        let i = self.panel(xq);
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let dh00 = 6.0 * t * (t - 1.0) / h;
        let dh10 = (1.0 - t) * (1.0 - 3.0 * t);
        let dh01 = -6.0 * t * (t - 1.0) / h;
        let dh11 = t * (3.0 * t - 2.0);
        dh00 * self.y[i] + dh10 * self.dy[i] + dh01 * self.y[i + 1] + dh11 * self.dy[i + 1]
    }
}

/// Nodal derivatives from sliding 5-point polynomial fits.
pub fn fd_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let width = 5.min(n);
    let mut dy = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(width / 2).min(n - width);
        let xs = &x[lo..lo + width];
        let d = diff_matrix(xs);
        let row = i - lo;
        let mut s = 0.0;
        for j in 0..width {
            s += d[[row, j]] * y[lo + j];
        }
        dy[i] = s;
    }
    dy
}
