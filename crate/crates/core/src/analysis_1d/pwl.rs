use crate::error::{Error, Result};
use crate::nn_model::{Activation, NetParams};

/// Kinks closer than this are merged into one breakpoint.
pub const KINK_MERGE_TOL: f64 = 1e-12;

/// Continuous piecewise-linear function on ℝ.
///
/// `slopes[k]` holds on the cell left of `breakpoints[k]` (and `slopes[K]`
/// right of the last one); `value_at_0` anchors the function.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    value_at_0: f64,
    /// f at each breakpoint
    knot_values: Vec<f64>,
}

/// One linear cell `(lo, hi)`, possibly unbounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    pub slope: f64,
}

impl PiecewiseLinear {
    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>, value_at_0: f64) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::shape(format!("{} breakpoints need {} slopes, got {}", breakpoints.len(), breakpoints.len() + 1, slopes.len())));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("breakpoints must be strictly increasing"));
        }
        if !breakpoints.iter().chain(&slopes).all(|v| v.is_finite()) || !value_at_0.is_finite() {
            return Err(Error::numeric("non-finite piecewise-linear data"));
        }
        // walk outwards from the cell containing 0
        let k0 = breakpoints.partition_point(|&b| b <= 0.0);
        let mut knot_values = vec![0.0; breakpoints.len()];
        let mut prev_x = 0.0;
        let mut prev_v = value_at_0;
        for k in k0..breakpoints.len() {
            prev_v += slopes[k] * (breakpoints[k] - prev_x);
            prev_x = breakpoints[k];
            knot_values[k] = prev_v;
        }
        prev_x = 0.0;
        prev_v = value_at_0;
        for k in (0..k0).rev() {
            prev_v -= slopes[k + 1] * (prev_x - breakpoints[k]);
            prev_x = breakpoints[k];
            knot_values[k] = prev_v;
        }
        Ok(Self { breakpoints, slopes, value_at_0, knot_values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn value_at_0(&self) -> f64 {
        self.value_at_0
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.slopes.len()).map(move |k| Cell {
            lo: if k == 0 { f64::NEG_INFINITY } else { self.breakpoints[k - 1] },
            hi: self.breakpoints.get(k).copied().unwrap_or(f64::INFINITY),
            slope: self.slopes[k],
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        // anchor on the nearest knot inside the same cell, or 0 if it is closer
        let k0 = self.breakpoints.partition_point(|&b| b <= 0.0);
        if k == k0 {
            return self.value_at_0 + self.slopes[k] * x;
        }
        if k > 0 {
            self.knot_values[k - 1] + self.slopes[k] * (x - self.breakpoints[k - 1])
        } else {
            self.knot_values[0] + self.slopes[0] * (x - self.breakpoints[0])
        }
    }
}

/// Exact piecewise-linear form of a 1D network.
///
/// Each neuron with `w_i ≠ 0` contributes a kink at `−b_i/w_i` where the
/// slope jumps by `(1 − leak)·a_i·|w_i|`; neurons with `w_i = 0` are
/// constants. Kinks within [`KINK_MERGE_TOL`] are merged.
pub fn extract_pwl(params: &NetParams, act: Activation) -> Result<PiecewiseLinear> {
    if params.input_dim() != 1 {
        return Err(Error::domain(format!("piecewise-linear extraction needs d = 1, got {}", params.input_dim())));
    }
    let leak = act.negative_slope();
    let mut kinks: Vec<(f64, f64)> = Vec::new();
    let mut left_slope = 0.0;
    for i in 0..params.width() {
        let (a, w, b) = (params.a[i], params.w.get(i, 0), params.b[i]);
        if w == 0.0 {
            continue;
        }
        // far left: w > 0 neurons are inactive, w < 0 neurons active
        left_slope += if w > 0.0 { leak * a * w } else { a * w };
        let (t, jump) = (-b / w, (1.0 - leak) * a * w.abs());
        if t.is_finite() {
            kinks.push((t, jump));
        } else if t < 0.0 {
            // the kink lies left of every finite x
            left_slope += jump;
        }
    }
    kinks.sort_by(|p, q| p.0.total_cmp(&q.0));

    let mut breakpoints: Vec<f64> = Vec::new();
    let mut jumps: Vec<f64> = Vec::new();
    for (t, jump) in kinks {
        match breakpoints.last() {
            Some(&last) if t - last <= KINK_MERGE_TOL => *jumps.last_mut().expect("paired") += jump,
            _ => {
                breakpoints.push(t);
                jumps.push(jump);
            }
        }
    }
    let mut slopes = Vec::with_capacity(jumps.len() + 1);
    let mut s = left_slope;
    slopes.push(s);
    for j in &jumps {
        s += j;
        slopes.push(s);
    }
    let value_at_0 = crate::nn_model::forward(params, act, &[0.0])?;
    PiecewiseLinear::new(breakpoints, slopes, value_at_0)
}
