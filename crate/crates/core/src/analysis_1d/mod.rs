//! One-dimensional analysis: exact piecewise-linear form of a trained
//! network, the convex minimum-norm characterization, and the natural cubic
//! spline comparator.

mod pwl;
mod spline;

pub use pwl::{extract_pwl, PiecewiseLinear, KINK_MERGE_TOL};
pub use spline::{hermite_energy, natural_cubic_spline, spline_eval, Spline};

use crate::datagen::Dataset;
use crate::error::{Error, Result};

/// Total variation of the slope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeVariation {
    pub tv: f64,
    /// `min slope ≤ 0 ≤ max slope`: only then is `tv` the Barron semi-norm.
    pub seminorm_hypothesis: bool,
}

/// `Σ_k |slope_{k+1} − slope_k|`.
pub fn tv_of_slope(pwl: &PiecewiseLinear) -> SlopeVariation {
    let s = pwl.slopes();
    let tv = s.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    SlopeVariation { tv, seminorm_hypothesis: min <= 0.0 && max >= 0.0 }
}

/// `Σ_k max(0, slope_k − slope_{k+1})`; zero iff the function is convex.
pub fn convexity_defect(pwl: &PiecewiseLinear) -> f64 {
    pwl.slopes().windows(2).map(|w| (w[0] - w[1]).max(0.0)).sum()
}

/// Number of kinks whose slope change exceeds `threshold`.
pub fn kink_count(pwl: &PiecewiseLinear, threshold: f64) -> usize {
    pwl.slopes().windows(2).filter(|w| (w[1] - w[0]).abs() > threshold).count()
}

/// Per-condition distance of a function from the convex minimum-norm
/// interpolant set of a 1D dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinNormReport {
    /// `max_i |f(x_i) − y_i|`.
    pub data_misfit: f64,
    pub convexity_defect: f64,
    /// Largest slope deviation on `(−∞, x_1)` from `(y_1−y_0)/(x_1−x_0)`.
    pub left_slope_dev: f64,
    /// Largest slope deviation on `(x_{n−1}, ∞)` from the last secant slope.
    pub right_slope_dev: f64,
    pub barron_seminorm: f64,
}

impl MinNormReport {
    pub const CSV_HEADER: &'static str = "run_id,misfit,convexity_defect,left_dev,right_dev,tv";

    pub fn csv_row(&self, run_id: &str) -> String {
        use crate::text::fmt_f64;
        format!(
            "{run_id},{},{},{},{},{}",
            fmt_f64(self.data_misfit),
            fmt_f64(self.convexity_defect),
            fmt_f64(self.left_slope_dev),
            fmt_f64(self.right_slope_dev),
            fmt_f64(self.barron_seminorm)
        )
    }
}

/// Sorted `(x, y)` pairs of a 1D dataset, with duplicate inputs rejected.
pub(crate) fn sorted_points(data: &Dataset) -> Result<Vec<(f64, f64)>> {
    if data.dim() != 1 {
        return Err(Error::domain(format!("expected 1D data, got dimension {}", data.dim())));
    }
    let mut pts: Vec<(f64, f64)> = data.x.as_slice().iter().copied().zip(data.y.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::domain("duplicate input points"));
    }
    Ok(pts)
}

/// Left and right edge slopes `(y_1−y_0)/(x_1−x_0)` and
/// `(y_n−y_{n−1})/(x_n−x_{n−1})` of convex data, after checking that the data
/// come from a convex function with `y_1 < y_0` and `y_n > y_{n−1}`.
pub fn edge_slopes(data: &Dataset) -> Result<(f64, f64)> {
    let pts = sorted_points(data)?;
    let n = pts.len();
    if n < 3 {
        return Err(Error::domain("need at least 3 data points"));
    }
    let secants: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    if !(pts[1].1 < pts[0].1) {
        return Err(Error::domain("hypothesis y_1 < y_0 violated"));
    }
    if !(pts[n - 1].1 > pts[n - 2].1) {
        return Err(Error::domain("hypothesis y_n > y_(n-1) violated"));
    }
    if let Some(k) = secants.windows(2).position(|w| w[1] < w[0] - 1e-12 * (1.0 + w[0].abs())) {
        return Err(Error::domain(format!("data are not convex: secant slope decreases after point {}", k + 1)));
    }
    Ok((secants[0], secants[n - 2]))
}

pub fn minnorm_distance(pwl: &PiecewiseLinear, data: &Dataset) -> Result<MinNormReport> {
    let (left, right) = edge_slopes(data)?;
    let pts = sorted_points(data)?;
    let n = pts.len();
    let data_misfit = pts.iter().map(|&(x, y)| (pwl.eval(x) - y).abs()).fold(0.0, f64::max);
    let x1 = pts[1].0;
    let xn1 = pts[n - 2].0;
    let left_slope_dev =
        pwl.cells().filter(|c| c.lo < x1).map(|c| (c.slope - left).abs()).fold(0.0, f64::max);
    let right_slope_dev =
        pwl.cells().filter(|c| c.hi > xn1).map(|c| (c.slope - right).abs()).fold(0.0, f64::max);
    Ok(MinNormReport {
        data_misfit,
        convexity_defect: convexity_defect(pwl),
        left_slope_dev,
        right_slope_dev,
        barron_seminorm: tv_of_slope(pwl).tv,
    })
}
