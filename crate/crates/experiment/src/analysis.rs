//! Post-training analysis: 1D minimum-norm defects or radial profiles.

use minnorm_core::analysis_1d::{
    edge_slopes, extract_pwl, kink_count, minnorm_distance, natural_cubic_spline, tv_of_slope, MinNormReport,
    PiecewiseLinear, SlopeVariation, Spline,
};
use minnorm_core::analysis_radial::{
    fit_rescale, load_profile, radial_stats, surrogate_profile, RadialProfile, RescaleFit,
};
use minnorm_core::datagen::Dataset;
use minnorm_core::rng::StreamKey;
use minnorm_core::theory_checks::{direct_approx_bound, BoundReport};
use minnorm_core::text::fmt_f64;

use crate::config::{BarronNorm, DataKind, ReferenceSource, RunConfig};
use crate::error::{ExpError, ExpResult};
use crate::train::{Model, TrainOutcome};

#[derive(Clone, Debug)]
pub struct OneDReport {
    pub run_id: String,
    /// `None` when the data do not meet the convex sign pattern.
    pub minnorm: Option<MinNormReport>,
    pub minnorm_error: Option<String>,
    pub pwl: PiecewiseLinear,
    pub tv: SlopeVariation,
    pub kinks: usize,
    /// `right edge slope − left edge slope`, the smallest possible TV.
    pub tv_lower_bound: Option<f64>,
    /// `|x|` for `abs1d` data, otherwise the linear interpolant of the data.
    pub target: PiecewiseLinear,
    pub spline: Option<Spline>,
    pub data: Dataset,
    pub final_fit_risk: f64,
    pub final_risk: f64,
    pub erm: Option<BoundReport>,
}

#[derive(Clone, Debug)]
pub struct RadialReport {
    pub run_id: String,
    pub profile: RadialProfile,
    pub reference: RadialProfile,
    pub fit: RescaleFit,
    pub final_fit_risk: f64,
    pub final_risk: f64,
    /// Test minus training fit risk, when a test set exists.
    pub gap: Option<f64>,
}

#[derive(Clone, Debug)]
pub enum Report {
    OneD(Box<OneDReport>),
    Radial(Box<RadialReport>),
}

impl Report {
    pub fn run_id(&self) -> &str {
        match self {
            Report::OneD(r) => &r.run_id,
            Report::Radial(r) => &r.run_id,
        }
    }

    /// `report.csv` contents.
    pub fn render_csv(&self) -> String {
        match self {
            Report::OneD(r) => {
                let mut s = String::from(
                    "run_id,misfit,convexity_defect,left_dev,right_dev,tv,tv_hypothesis,kinks,final_fit_risk,final_risk\n",
                );
                let row = match &r.minnorm {
                    Some(m) => m.csv_row(&r.run_id),
                    None => format!("{},NaN,NaN,NaN,NaN,{}", r.run_id, fmt_f64(r.tv.tv)),
                };
                s.push_str(&format!(
                    "{row},{},{},{},{}\n",
                    r.tv.seminorm_hypothesis,
                    r.kinks,
                    fmt_f64(r.final_fit_risk),
                    fmt_f64(r.final_risk)
                ));
                s
            }
            Report::Radial(r) => format!(
                "run_id,rescale,discrepancy,final_fit_risk,final_risk,gap\n{},{},{},{},{},{}\n",
                r.run_id,
                fmt_f64(r.fit.r),
                fmt_f64(r.fit.l2_discrepancy),
                fmt_f64(r.final_fit_risk),
                fmt_f64(r.final_risk),
                r.gap.map(fmt_f64).unwrap_or_else(|| "NaN".into())
            ),
        }
    }
}

/// Piecewise-linear surrogate of a 1D function from `count` samples on
/// `[lo, hi]`, extended with the end secant slopes.
pub fn sampled_pwl(f: impl Fn(f64) -> f64, lo: f64, hi: f64, count: usize) -> ExpResult<PiecewiseLinear> {
    let xs: Vec<f64> = (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let secants: Vec<f64> = xs.windows(2).zip(ys.windows(2)).map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0])).collect();
    let mut slopes = Vec::with_capacity(count + 1);
    slopes.push(secants[0]);
    slopes.extend_from_slice(&secants);
    slopes.push(*secants.last().expect("count >= 2"));
    Ok(PiecewiseLinear::new(xs, slopes, f(0.0))?)
}

/// Linear interpolant of the data, extended by the outermost secants.
pub fn interpolant(data: &Dataset) -> ExpResult<PiecewiseLinear> {
    let mut pts: Vec<(f64, f64)> = data.x.as_slice().iter().copied().zip(data.y.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() < 2 {
        return Err(ExpError::config("interpolant needs at least two data points"));
    }
    let secants: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let mut slopes = vec![secants[0]];
    slopes.extend_from_slice(&secants);
    slopes.push(secants[secants.len() - 1]);
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let shape = PiecewiseLinear::new(xs.clone(), slopes.clone(), 0.0)?;
    let offset = pts[0].1 - shape.eval(pts[0].0);
    Ok(PiecewiseLinear::new(xs, slopes, offset)?)
}

fn target_pwl(cfg: &RunConfig, data: &Dataset) -> ExpResult<PiecewiseLinear> {
    match cfg.data.kind {
        DataKind::Abs1d { .. } => Ok(PiecewiseLinear::new(vec![0.0], vec![-1.0, 1.0], 0.0)?),
        _ => interpolant(data),
    }
}

pub fn reference_profile(cfg: &RunConfig, d: usize) -> ExpResult<RadialProfile> {
    Ok(match &cfg.analysis.reference {
        ReferenceSource::Surrogate => surrogate_profile(d, 301)?,
        ReferenceSource::File(p) => load_profile(p)?,
    })
}

/// Runs the analysis matching the data dimension.
pub fn analyze(cfg: &RunConfig, outcome: &TrainOutcome, data: &Dataset, test: Option<&Dataset>) -> ExpResult<Report> {
    let model = &outcome.model;
    let act = cfg.model.activation;
    let loss = cfg.model.loss;
    let final_fit_risk = model.fit_risk(act, loss, data);
    let final_risk = final_fit_risk + cfg.lambda * model.weight_decay();
    if data.dim() == 1 {
        let pwl = match model {
            Model::Shallow(p) => extract_pwl(p, act)?,
            Model::Deep(_) => {
                let xs = data.x.as_slice();
                let (lo, hi) = xs.iter().fold((0.0f64, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
                let pad = 0.5 * (hi - lo).max(1.0);
                sampled_pwl(|x| model.eval(act, &[x]), lo - pad, hi + pad, 4001)?
            }
        };
        let (minnorm, minnorm_error) = match minnorm_distance(&pwl, data) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let tv_lower_bound = edge_slopes(data).ok().map(|(l, r)| r - l);
        let barron = match cfg.analysis.barron_norm {
            BarronNorm::Value(v) => Some(v),
            BarronNorm::None => None,
            BarronNorm::Auto => matches!(cfg.data.kind, DataKind::Abs1d { .. }).then_some(2.0),
        };
        let erm = match (barron, model) {
            (Some(b), Model::Shallow(p)) => Some(BoundReport::exact(final_risk, direct_approx_bound(b, data, p.width(), cfg.lambda)?)),
            _ => None,
        };
        Ok(Report::OneD(Box::new(OneDReport {
            run_id: cfg.run_id.clone(),
            minnorm,
            minnorm_error,
            tv: tv_of_slope(&pwl),
            kinks: kink_count(&pwl, cfg.analysis.kink_threshold),
            pwl,
            tv_lower_bound,
            target: target_pwl(cfg, data)?,
            spline: natural_cubic_spline(data).ok(),
            data: data.clone(),
            final_fit_risk,
            final_risk,
            erm,
        })))
    } else {
        let d = data.dim();
        let profile = radial_stats(
            |x| model.eval(act, x),
            d,
            &cfg.radii(),
            cfg.analysis.n_dirs,
            &StreamKey::new(cfg.seed, "analysis/directions"),
        )?;
        let reference = reference_profile(cfg, d)?;
        let fit = fit_rescale(&profile, &reference, &cfg.analysis.rescale_grid)?;
        let gap = test.map(|t| model.fit_risk(act, loss, t) - final_fit_risk);
        Ok(Report::Radial(Box::new(RadialReport {
            run_id: cfg.run_id.clone(),
            profile,
            reference,
            fit,
            final_fit_risk,
            final_risk,
            gap,
        })))
    }
}
