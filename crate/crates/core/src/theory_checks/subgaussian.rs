use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

use super::BoundReport;
use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// Which concentration inequality to exercise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SubGaussianKind {
    /// `E[max_i ‖x_i‖] ≤ E‖x‖ + σ√(2 ln n)`.
    MaxMean,
    /// `P(max_i ‖x_i‖ > E‖x‖ + σ√(2 ln(n/δ))) ≤ δ`.
    MaxQuantile { delta: f64 },
    /// `P(mean ‖x_i‖² > E‖x‖² + 8σ² max(L/n, √(L/n))) ≤ δ` with `L = ln(1/δ)`.
    MeanSquare { delta: f64 },
}

impl SubGaussianKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::MaxMean => "max_mean",
            Self::MaxQuantile { .. } => "max_quantile",
            Self::MeanSquare { .. } => "mean_square",
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Self::MaxMean => Ok(()),
            Self::MaxQuantile { delta } | Self::MeanSquare { delta } => {
                if delta > 0.0 && delta < 1.0 {
                    Ok(())
                } else {
                    Err(Error::domain(format!("delta must lie in (0, 1), got {delta}")))
                }
            }
        }
    }
}

impl fmt::Display for SubGaussianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SubGaussianKind {
    type Err = Error;

    /// `max_mean`, `max_quantile[:delta]` or `mean_square[:delta]`; delta
    /// defaults to 0.1.
    fn from_str(s: &str) -> Result<Self> {
        let (name, delta) = match s.split_once(':') {
            Some((n, d)) => (n, d.trim().parse::<f64>().map_err(|_| Error::domain(format!("bad delta '{d}'")))?),
            None => (s, 0.1),
        };
        let kind = match name.trim() {
            "max_mean" => Self::MaxMean,
            "max_quantile" => Self::MaxQuantile { delta },
            "mean_square" => Self::MeanSquare { delta },
            other => return Err(Error::domain(format!("unknown sub-Gaussian check '{other}'"))),
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// `E‖x‖` for a standard Gaussian in ℝ^d (mean of the chi distribution).
pub fn chi_mean(d: usize) -> f64 {
    assert!(d >= 1, "dimension must be positive");
    let pi = std::f64::consts::PI;
    let (mut k, mut mu) = if d % 2 == 1 { (1, (2.0 / pi).sqrt()) } else { (2, (pi / 2.0).sqrt()) };
    while k < d {
        mu *= (k + 1) as f64 / k as f64;
        k += 2;
    }
    mu
}

/// Monte-Carlo check of one concentration inequality for `x ~ N(0, σ²I_d)`.
///
/// `tolerance` in the report is three Monte-Carlo standard errors.
pub fn subgaussian_check(
    kind: SubGaussianKind,
    d: usize,
    n: usize,
    sigma: f64,
    trials: usize,
    stream: &StreamKey,
) -> Result<BoundReport> {
    kind.validate()?;
    if d == 0 || n == 0 {
        return Err(Error::domain("d and n must be positive"));
    }
    if trials < 2 {
        return Err(Error::domain("need at least 2 trials"));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    // per trial: (max norm, mean squared norm)
    let stats: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.rng(t);
            let mut max = 0.0f64;
            let mut sum_sq = 0.0;
            for _ in 0..n {
                let sq: f64 = (0..d)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        (sigma * z) * (sigma * z)
                    })
                    .sum();
                max = max.max(sq.sqrt());
                sum_sq += sq;
            }
            (max, sum_sq / n as f64)
        })
        .collect();
    let t = trials as f64;
    let mean_norm = sigma * chi_mean(d);
    let nf = n as f64;
    let report = match kind {
        SubGaussianKind::MaxMean => {
            let mean = stats.iter().map(|s| s.0).sum::<f64>() / t;
            let var = stats.iter().map(|s| (s.0 - mean) * (s.0 - mean)).sum::<f64>() / (t - 1.0);
            BoundReport::new(mean, mean_norm + sigma * (2.0 * nf.ln()).sqrt(), 3.0 * (var / t).sqrt())
        }
        SubGaussianKind::MaxQuantile { delta } => {
            let threshold = mean_norm + sigma * (2.0 * (nf / delta).ln()).sqrt();
            let freq = stats.iter().filter(|s| s.0 > threshold).count() as f64 / t;
            BoundReport::new(freq, delta, 3.0 * (delta * (1.0 - delta) / t).sqrt())
        }
        SubGaussianKind::MeanSquare { delta } => {
            let l = (1.0 / delta).ln();
            let threshold = sigma * sigma * (d as f64 + 8.0 * (l / nf).max((l / nf).sqrt()));
            let freq = stats.iter().filter(|s| s.1 > threshold).count() as f64 / t;
            BoundReport::new(freq, delta, 3.0 * (delta * (1.0 - delta) / t).sqrt())
        }
    };
    Ok(report)
}
