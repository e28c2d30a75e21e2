//! Numerical checks of the risk, Rademacher and concentration bounds.

mod rademacher;
mod subgaussian;

pub use rademacher::{rademacher_bound, rademacher_estimate, RademacherConfig};
pub use subgaussian::{chi_mean, subgaussian_check, SubGaussianKind};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::nn_model::{fit_risk, regularized_risk, Activation, NetParams};
use crate::text::fmt_f64;

/// A measured quantity against its theoretical bound.
///
/// `tolerance` absorbs Monte-Carlo error in `quantity` and is zero for exact
/// comparisons. `slack = bound + tolerance − quantity`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundReport {
    pub quantity: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub slack: f64,
    pub satisfied: bool,
}

impl BoundReport {
    pub const CSV_HEADER: &'static str = "check,quantity,bound,tolerance,slack,satisfied";

    pub fn new(quantity: f64, bound: f64, tolerance: f64) -> Self {
        let slack = bound + tolerance - quantity;
        Self { quantity, bound, tolerance, slack, satisfied: slack >= 0.0 }
    }

    /// Exact comparison with zero tolerance.
    pub fn exact(quantity: f64, bound: f64) -> Self {
        Self::new(quantity, bound, 0.0)
    }

    pub fn csv_row(&self, check: &str) -> String {
        format!(
            "{check},{},{},{},{},{}",
            fmt_f64(self.quantity),
            fmt_f64(self.bound),
            fmt_f64(self.tolerance),
            fmt_f64(self.slack),
            self.satisfied
        )
    }
}

/// `4[f*]²/m · mean‖x‖² + λ[f*]`: direct-approximation error of an `m`-neuron
/// network plus the regularization cost of the target.
pub fn direct_approx_bound(barron_norm_f_star: f64, data: &Dataset, m: usize, lambda: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::domain("m must be at least 1"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
    }
    if !(barron_norm_f_star >= 0.0) {
        return Err(Error::domain("Barron norm must be >= 0"));
    }
    if data.is_empty() {
        return Err(Error::domain("empty dataset"));
    }
    let mean_sq = data.x.norm_sq() / data.len() as f64;
    Ok(4.0 * barron_norm_f_star * barron_norm_f_star / m as f64 * mean_sq + lambda * barron_norm_f_star)
}

/// Compares the regularized empirical risk of trained parameters with the
/// risk of the direct-approximation competitor.
pub fn erm_bound_check(
    params: &NetParams,
    act: Activation,
    loss: LossKind,
    data: &Dataset,
    lambda: f64,
    barron_norm_f_star: f64,
) -> Result<BoundReport> {
    let quantity = regularized_risk(params, act, loss, lambda, data)?;
    let bound = direct_approx_bound(barron_norm_f_star, data, params.width(), lambda)?;
    Ok(BoundReport::exact(quantity, bound))
}

/// Test risk minus training risk, without regularization.
pub fn generalization_gap(params: &NetParams, act: Activation, loss: LossKind, train: &Dataset, test: &Dataset) -> Result<f64> {
    Ok(fit_risk(params, act, loss, test)? - fit_risk(params, act, loss, train)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{dataset_1d_abs, dataset_radial_bump, RadialMixtureConfig};
    use crate::matrix::Matrix;
    use crate::rng::StreamKey;

    fn abs_net(m: usize) -> NetParams {
        // m/2 copies of each half of |x|, scaled to keep the function
        let half = m / 2;
        let s = (1.0 / half as f64).sqrt();
        let mut w = Matrix::zeros(m, 1);
        for i in 0..m {
            w.set(i, 0, if i < half { s } else { -s });
        }
        NetParams::new(vec![s; m], w, vec![0.0; m], 0.0).unwrap()
    }

    #[test]
    fn report_slack_and_flag() {
        let r = BoundReport::exact(1.0, 2.0);
        assert_eq!(r.slack, 1.0);
        assert!(r.satisfied);
        let r = BoundReport::new(2.1, 2.0, 0.1);
        assert!(r.satisfied);
        assert!(!BoundReport::new(2.2, 2.0, 0.1).satisfied);
        assert_eq!(BoundReport::exact(1.0, 2.0).csv_row("x"), "x,1.0,2.0,0.0,1.0,true");
    }

    #[test]
    fn direct_bound_on_abs_grid() {
        let data = dataset_1d_abs(15, (1.0, 2.0), false).unwrap();
        let mean_sq: f64 = data.x.as_slice().iter().map(|x| x * x).sum::<f64>() / 30.0;
        let b = direct_approx_bound(2.0, &data, 200, 0.0).unwrap();
        assert!((b - 0.08 * mean_sq).abs() < 1e-15);
        assert!((b - 0.18583).abs() < 1e-4, "{b}");
        let lam = direct_approx_bound(2.0, &data, 200, 0.01).unwrap() - b;
        assert!((lam - 0.02).abs() < 1e-15);
        let b2 = direct_approx_bound(2.0, &data, 400, 0.0).unwrap();
        assert!((b2 - b / 2.0).abs() < 1e-15);
        assert!(direct_approx_bound(2.0, &data, 0, 0.0).is_err());
        assert!(direct_approx_bound(2.0, &data, 10, -1.0).is_err());
    }

    #[test]
    fn exact_abs_net_satisfies_erm_bound() {
        let data = dataset_1d_abs(15, (1.0, 2.0), false).unwrap();
        let net = abs_net(200);
        let r = erm_bound_check(&net, Activation::Relu, LossKind::Mse, &data, 0.0, 2.0).unwrap();
        assert!(r.quantity < 1e-25);
        assert!(r.satisfied);
        // weight decay of the balanced |x| net is exactly 2
        let r = erm_bound_check(&net, Activation::Relu, LossKind::Mse, &data, 0.002, 2.0).unwrap();
        assert!((r.quantity - 0.004).abs() < 1e-12, "{}", r.quantity);
        assert!(r.satisfied);
    }

    #[test]
    fn gap_is_zero_on_same_data() {
        let data = dataset_1d_abs(15, (1.0, 2.0), false).unwrap();
        let net = abs_net(4);
        assert_eq!(generalization_gap(&net, Activation::Relu, LossKind::Mse, &data, &data).unwrap(), 0.0);
    }

    #[test]
    fn zero_net_gap_is_difference_of_label_moments() {
        let cfg = RadialMixtureConfig::new(3);
        let train = dataset_radial_bump(&cfg, 4000, &StreamKey::new(1, "train")).unwrap();
        let test = dataset_radial_bump(&cfg, 4000, &StreamKey::new(2, "test")).unwrap();
        let zero = NetParams::zeros(5, 3);
        let gap = generalization_gap(&zero, Activation::Relu, LossKind::Mse, &train, &test).unwrap();
        let half_mean_sq = |d: &Dataset| d.y.iter().map(|y| y * y).sum::<f64>() / (2.0 * d.len() as f64);
        assert!((gap - (half_mean_sq(&test) - half_mean_sq(&train))).abs() < 1e-12);
        assert!(gap.abs() < 0.03, "{gap}");
    }
}
