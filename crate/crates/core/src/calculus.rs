//! Finite differences and cubic interpolation on tabulated data.

use crate::error::{Error, Result};

fn check_table(x: &[f64], y: &[f64], min_points: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "abscissa has {} points but ordinate has {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_points {
        return Err(Error::Shape(format!(
            "need at least {min_points} points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Shape("table contains non-finite values".into()));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Shape("abscissa is not strictly increasing".into()));
    }
    Ok(())
}

/// Second derivative at `at` of the Lagrange interpolant through `nodes`.
///
/// Returns one weight per node. Exact for polynomials of degree < nodes.len().
fn second_derivative_weights(at: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|j| {
            let denom: f64 = (0..n)
                .filter(|&m| m != j)
                .map(|m| nodes[j] - nodes[m])
                .product();
            let mut numer = 0.0;
            for a in 0..n {
                for b in 0..n {
                    if a == j || b == j || a == b {
                        continue;
                    }
                    numer += (0..n)
                        .filter(|&m| m != j && m != a && m != b)
                        .map(|m| at - nodes[m])
                        .product::<f64>();
                }
            }
            numer / denom
        })
        .collect()
}

/// Second derivative of a tabulated function.
///
/// Three-point central stencils in the interior and four-point one-sided
/// stencils at both ends, all second-order accurate on uniform grids.
/// Non-uniform grids are accepted; the stencils are the Lagrange weights on
/// the actual nodes.
pub fn second_derivative_on_grid(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_table(x, y, 5)?;
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    let apply = |at: f64, lo: usize, len: usize| -> f64 {
        let w = second_derivative_weights(at, &x[lo..lo + len]);
        w.iter().zip(&y[lo..lo + len]).map(|(w, y)| w * y).sum()
    };
    out.push(apply(x[0], 0, 4));
    for i in 1..n - 1 {
        out.push(apply(x[i], i - 1, 3));
    }
    out.push(apply(x[n - 1], n - 4, 4));
    Ok(out)
}

/// Cubic spline with end second derivatives taken from one-sided
/// finite-difference stencils, so cubic data are reproduced exactly.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        check_table(x, y, 5)?;
        let n = x.len();
        let d2 = second_derivative_on_grid(x, y)?;
        let mut m = vec![0.0; n];
        m[0] = d2[0];
        m[n - 1] = d2[n - 1];

        // Thomas algorithm on the interior unknowns m[1..n-1].
        let k = n - 2;
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for r in 0..k {
            let i = r + 1;
            diag[r] = 2.0 * (h[i - 1] + h[i]);
            upper[r] = h[i];
            rhs[r] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        rhs[0] -= h[0] * m[0];
        rhs[k - 1] -= h[n - 2] * m[n - 1];
        for r in 1..k {
            let lower = h[r];
            let f = lower / diag[r - 1];
            diag[r] -= f * upper[r - 1];
            rhs[r] -= f * rhs[r - 1];
        }
        m[k] = rhs[k - 1] / diag[k - 1];
        for r in (0..k - 1).rev() {
            m[r + 1] = (rhs[r] - upper[r] * m[r + 2]) / diag[r];
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn contains(&self, at: f64) -> bool {
        let (lo, hi) = self.domain();
        at >= lo && at <= hi
    }

    fn segment(&self, at: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&at).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value, first and second derivative at `at`. Outside the table the end
    /// segment's cubic is continued.
    pub fn eval_all(&self, at: f64) -> (f64, f64, f64) {
        let i = self.segment(at);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - at) / h;
        let b = (at - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let value = a * y0
            + b * y1
            + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0
            + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let curvature = a * m0 + b * m1;
        (value, slope, curvature)
    }

    pub fn eval(&self, at: f64) -> f64 {
        self.eval_all(at).0
    }

    pub fn derivative(&self, at: f64) -> f64 {
        self.eval_all(at).1
    }
}

/// Piecewise-linear interpolation with clamping outside the table.
pub fn interp_linear(x: &[f64], y: &[f64], at: f64) -> f64 {
    let n = x.len();
    if at <= x[0] {
        return y[0];
    }
    if at >= x[n - 1] {
        return y[n - 1];
    }
    let i = match x.binary_search_by(|v| v.partial_cmp(&at).unwrap()) {
        Ok(i) => return y[i],
        Err(i) => i - 1,
    };
    let t = (at - x[i]) / (x[i + 1] - x[i]);
    y[i] + t * (y[i + 1] - y[i])
}

/// Bisection on a bracketed sign change. `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> Result<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(Error::Numerical(format!(
            "bisection interval [{lo:e}, {hi:e}] does not bracket a root"
        )));
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= x_tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
