use super::sorted_points;
use crate::datagen::Dataset;
use crate::error::{Error, Result};

/// Natural cubic spline through sorted knots, extended linearly beyond the
/// end knots.
#[derive(Clone, Debug, PartialEq)]
pub struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// second derivative at each knot; zero at both ends
    m: Vec<f64>,
}

impl Spline {
    /// Builds the spline from knots in any order.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.len() < 2 {
            return Err(Error::domain("a spline needs at least 2 knots"));
        }
        if pts.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain("duplicate spline knots"));
        }
        if pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::numeric("non-finite spline knot"));
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let m = solve_natural(&x, &y);
        Ok(Self { x, y, m })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }

    pub fn second_derivatives(&self) -> &[f64] {
        &self.m
    }

    fn cell(&self, t: f64) -> usize {
        self.x.partition_point(|&k| k <= t).clamp(1, self.x.len() - 1) - 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t < self.x[0] {
            return self.y[0] + self.eval_derivative(self.x[0]) * (t - self.x[0]);
        }
        if t > self.x[n - 1] {
            return self.y[n - 1] + self.eval_derivative(self.x[n - 1]) * (t - self.x[n - 1]);
        }
        let k = self.cell(t);
        let h = self.x[k + 1] - self.x[k];
        let a = (self.x[k + 1] - t) / h;
        let b = (t - self.x[k]) / h;
        a * self.y[k] + b * self.y[k + 1] + ((a * a * a - a) * self.m[k] + (b * b * b - b) * self.m[k + 1]) * h * h / 6.0
    }

    pub fn eval_derivative(&self, t: f64) -> f64 {
        let n = self.x.len();
        let t = t.clamp(self.x[0], self.x[n - 1]);
        let k = self.cell(t);
        let h = self.x[k + 1] - self.x[k];
        let a = (self.x[k + 1] - t) / h;
        let b = (t - self.x[k]) / h;
        (self.y[k + 1] - self.y[k]) / h - (3.0 * a * a - 1.0) / 6.0 * h * self.m[k]
            + (3.0 * b * b - 1.0) / 6.0 * h * self.m[k + 1]
    }

    /// First derivative at every knot.
    pub fn knot_slopes(&self) -> Vec<f64> {
        self.x.iter().map(|&t| self.eval_derivative(t)).collect()
    }

    /// `∫|f″|²` over the knot span.
    pub fn energy(&self) -> f64 {
        self.x
            .windows(2)
            .zip(self.m.windows(2))
            .map(|(x, m)| (x[1] - x[0]) / 3.0 * (m[0] * m[0] + m[0] * m[1] + m[1] * m[1]))
            .sum()
    }

    /// Largest residual of the tridiagonal system defining the second
    /// derivatives.
    pub fn system_residual(&self) -> f64 {
        let (x, y, m) = (&self.x, &self.y, &self.m);
        (1..x.len().saturating_sub(1))
            .map(|i| {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let lhs = h0 * m[i - 1] + 2.0 * (h0 + h1) * m[i] + h1 * m[i + 1];
                let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
                (lhs - rhs).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Thomas algorithm on the symmetric tridiagonal system for interior
/// second derivatives.
fn solve_natural(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    let k = n - 2;
    let mut diag = vec![0.0; k];
    let mut off = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for j in 0..k {
        let i = j + 1;
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[j] = 2.0 * (h0 + h1);
        off[j] = h1;
        rhs[j] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for j in 1..k {
        let f = off[j - 1] / diag[j - 1];
        diag[j] -= f * off[j - 1];
        rhs[j] -= f * rhs[j - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for j in (0..k - 1).rev() {
        m[j + 1] = (rhs[j] - off[j] * m[j + 2]) / diag[j];
    }
    m
}

pub fn natural_cubic_spline(data: &Dataset) -> Result<Spline> {
    Spline::from_points(&sorted_points(data)?)
}

pub fn spline_eval(spline: &Spline, x: f64) -> f64 {
    spline.eval(x)
}

/// `∫|f″|²` of the C¹ piecewise-cubic Hermite interpolant with values `y`
/// and slopes `s` at knots `x`.
pub fn hermite_energy(x: &[f64], y: &[f64], s: &[f64]) -> f64 {
    (0..x.len().saturating_sub(1))
        .map(|k| {
            let h = x[k + 1] - x[k];
            let dy = y[k + 1] - y[k];
            // f″ is linear on the cell, from a at the left end to b at the right
            let a = (6.0 * dy / h - 4.0 * s[k] - 2.0 * s[k + 1]) / h;
            let b = (-6.0 * dy / h + 2.0 * s[k] + 4.0 * s[k + 1]) / h;
            h / 3.0 * (a * a + a * b + b * b)
        })
        .sum()
}
