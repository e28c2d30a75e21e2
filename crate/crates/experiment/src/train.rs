//! Training loop: data generation, initialization and per-epoch logging.

use rand::seq::SliceRandom;

use minnorm_core::datagen::{dataset_1d_abs, dataset_radial_bump, load_dataset, Dataset};
use minnorm_core::initializers::{init_deep_net, init_net};
use minnorm_core::losses::LossKind;
use minnorm_core::nn_model::{
    backward_rows, deep_backward, deep_forward, deep_weight_decay, forward, path_norm, weight_decay, Activation,
    DeepNetParams, NetParams,
};
use minnorm_core::optimizers::{optimizer_step, Lbfgs, LbfgsConfig, LbfgsStep, OptimizerKind, OptimizerState};
use minnorm_core::rng::StreamKey;
use minnorm_core::text::fmt_f64;

use crate::config::{Budget, DataKind, RunConfig};
use crate::error::{ExpError, ExpResult};

/// A trained network of either depth.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Shallow(NetParams),
    Deep(DeepNetParams),
}

impl Model {
    pub fn input_dim(&self) -> usize {
        match self {
            Model::Shallow(p) => p.input_dim(),
            Model::Deep(p) => p.input_dim(),
        }
    }

    /// Network output; `NaN` on shape mismatch.
    pub fn eval(&self, act: Activation, x: &[f64]) -> f64 {
        match self {
            Model::Shallow(p) => forward(p, act, x),
            Model::Deep(p) => deep_forward(p, act, x),
        }
        .unwrap_or(f64::NAN)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            Model::Shallow(p) => p.to_flat(),
            Model::Deep(p) => p.to_flat(),
        }
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> ExpResult<()> {
        match self {
            Model::Shallow(p) => p.set_flat(flat)?,
            Model::Deep(p) => p.set_flat(flat)?,
        }
        Ok(())
    }

    pub fn weight_decay(&self) -> f64 {
        match self {
            Model::Shallow(p) => weight_decay(p),
            Model::Deep(p) => deep_weight_decay(p),
        }
    }

    /// `Σ|a_i|‖w_i‖` for shallow nets; for deep nets the ℓ¹ path norm
    /// `1ᵀ|W_L|⋯|W_1|1`.
    pub fn path_norm(&self) -> f64 {
        match self {
            Model::Shallow(p) => path_norm(p),
            Model::Deep(p) => {
                let mut v = vec![1.0; p.input_dim()];
                for (w, _) in &p.layers {
                    v = w.iter_rows().map(|row| row.iter().zip(&v).map(|(a, b)| a.abs() * b).sum()).collect();
                }
                v.iter().sum()
            }
        }
    }

    /// Flat gradient and regularized risk over `rows`.
    pub fn gradient(&self, act: Activation, loss: LossKind, lambda: f64, data: &Dataset, rows: &[usize]) -> ExpResult<(Vec<f64>, f64)> {
        Ok(match self {
            Model::Shallow(p) => {
                let (g, r) = backward_rows(p, act, loss, lambda, data, rows)?;
                (g.to_flat(), r)
            }
            Model::Deep(p) => {
                let (g, r) = deep_backward(p, act, loss, lambda, data, rows)?;
                (g.to_flat(), r)
            }
        })
    }

    /// `(1/2n) Σ ℓ` over all of `data`.
    pub fn fit_risk(&self, act: Activation, loss: LossKind, data: &Dataset) -> f64 {
        let total: f64 = data.x.iter_rows().zip(&data.y).map(|(x, &y)| loss.value(self.eval(act, x), y)).sum();
        total / (2.0 * data.len() as f64)
    }
}

/// One line of `metrics.csv`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRow {
    /// 1-based count of completed epochs.
    pub epoch: usize,
    /// Mean fit term over the epoch's batches (before each update).
    pub fit_risk: f64,
    pub weight_decay: f64,
    pub path_norm: f64,
    pub lr: f64,
}

pub const METRICS_HEADER: &str = "epoch,fit_risk,weight_decay,path_norm,lr";

pub fn render_metrics(rows: &[MetricRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch,
            fmt_f64(r.fit_risk),
            fmt_f64(r.weight_decay),
            fmt_f64(r.path_norm),
            fmt_f64(r.lr)
        ));
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    /// Training hit a non-finite value; the model is the last finite state.
    Diverged { last_finite_epoch: usize, message: String },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub metrics: Vec<MetricRow>,
    pub status: RunStatus,
    pub steps: usize,
}

/// Training data and, for radial runs with `data.test_n > 0`, a test set.
pub fn build_data(cfg: &RunConfig) -> ExpResult<(Dataset, Option<Dataset>)> {
    Ok(match &cfg.data.kind {
        DataKind::Abs1d { k, lo, hi, inclusive } => (dataset_1d_abs(*k, (*lo, *hi), *inclusive)?, None),
        DataKind::Radial { mixture, n } => {
            let train = dataset_radial_bump(mixture, *n, &StreamKey::new(cfg.seed, "data/train"))?;
            let test = match cfg.data.test_n {
                0 => None,
                t => Some(dataset_radial_bump(mixture, t, &StreamKey::new(cfg.seed, "data/test"))?),
            };
            (train, test)
        }
        DataKind::File { path } => (load_dataset(path)?, None),
    })
}

pub fn init_model(cfg: &RunConfig, d: usize) -> ExpResult<Model> {
    let m = cfg.model.m;
    Ok(if cfg.model.depth == 1 {
        let mut p = init_net(cfg.init, m, d, cfg.seed)?;
        p.frozen_inner = cfg.model.frozen_inner;
        Model::Shallow(p)
    } else {
        Model::Deep(init_deep_net(cfg.init, m, cfg.model.depth, d, cfg.seed)?)
    })
}

struct Logger {
    metrics: Vec<MetricRow>,
}

impl Logger {
    fn log(&mut self, model: &Model, fit_risk: f64, lr: f64) -> bool {
        let row = MetricRow {
            epoch: self.metrics.len() + 1,
            fit_risk,
            weight_decay: model.weight_decay(),
            path_norm: model.path_norm(),
            lr,
        };
        let finite = row.fit_risk.is_finite() && row.weight_decay.is_finite() && row.path_norm.is_finite();
        if finite {
            self.metrics.push(row);
        }
        finite
    }
}

/// Trains per the config on `data`.
///
/// Numeric failures end training with [`RunStatus::Diverged`] and keep the
/// last finite parameters; only config-level problems are errors.
pub fn train(cfg: &RunConfig, data: &Dataset) -> ExpResult<TrainOutcome> {
    if data.is_empty() {
        return Err(ExpError::config("training data are empty"));
    }
    let model = init_model(cfg, data.dim())?;
    if let OptimizerKind::Lbfgs { history, max_line_search } = cfg.optim.spec.kind {
        return train_lbfgs(cfg, data, model, history, max_line_search);
    }
    let act = cfg.model.activation;
    let loss = cfg.model.loss;
    let lambda = cfg.lambda;
    let n = data.len();
    let bs = cfg.optim.batch_size.unwrap_or(n).min(n);
    let per_epoch = n.div_ceil(bs);
    let (epochs, max_steps) = match cfg.optim.budget {
        Budget::Epochs(e) => (e, e * per_epoch),
        Budget::Steps(s) => (s.div_ceil(per_epoch), s),
    };

    let mut model = model;
    let mut flat = model.to_flat();
    let mut state = OptimizerState::new(flat.len());
    let mut log = Logger { metrics: Vec::with_capacity(epochs) };
    let shuffle = StreamKey::new(cfg.seed, "shuffle");
    let mut order: Vec<usize> = (0..n).collect();
    let mut steps = 0;

    for epoch in 0..epochs {
        if bs < n {
            order.sort_unstable();
            order.shuffle(&mut shuffle.rng(epoch as u64));
        }
        let (mut fit_sum, mut count) = (0.0, 0usize);
        let mut failure: Option<String> = None;
        for batch in order.chunks(bs) {
            if steps == max_steps {
                break;
            }
            let step = model
                .gradient(act, loss, lambda, data, batch)
                .and_then(|(g, risk)| {
                    let fit = risk - lambda * model.weight_decay();
                    let mut next = flat.clone();
                    optimizer_step(&cfg.optim.spec, &mut state, &mut next, &g, epoch)?;
                    Ok((fit, next))
                });
            match step {
                Ok((fit, next)) => {
                    if !next.iter().all(|v| v.is_finite()) {
                        failure = Some("non-finite parameters".into());
                        break;
                    }
                    model.set_flat(&next)?;
                    flat = next;
                    fit_sum += fit * batch.len() as f64;
                    count += batch.len();
                    steps += 1;
                }
                Err(ExpError::Core(minnorm_core::Error::Numeric(msg))) => {
                    failure = Some(msg);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failure.is_none() && count > 0 && !log.log(&model, fit_sum / count as f64, cfg.optim.spec.lr_at(epoch)) {
            failure = Some(format!("non-finite metrics in epoch {}", epoch + 1));
        }
        if let Some(message) = failure {
            let last = log.metrics.len();
            return Ok(TrainOutcome { model, metrics: log.metrics, status: RunStatus::Diverged { last_finite_epoch: last, message }, steps });
        }
    }
    Ok(TrainOutcome { model, metrics: log.metrics, status: RunStatus::Completed, steps })
}

fn train_lbfgs(cfg: &RunConfig, data: &Dataset, model: Model, history: usize, max_line_search: usize) -> ExpResult<TrainOutcome> {
    let act = cfg.model.activation;
    let loss = cfg.model.loss;
    let lambda = cfg.lambda;
    let rows: Vec<usize> = (0..data.len()).collect();
    let iters = match cfg.optim.budget {
        Budget::Epochs(e) => e,
        Budget::Steps(s) => s,
    };
    let lcfg = LbfgsConfig { history, max_line_search, max_iters: iters, ..LbfgsConfig::default() };
    let mut scratch = model.clone();
    let mut objective = |x: &[f64]| -> minnorm_core::Result<(f64, Vec<f64>)> {
        scratch.set_flat(x).map_err(|e| match e {
            ExpError::Core(c) => c,
            other => minnorm_core::Error::Numeric(other.to_string()),
        })?;
        scratch
            .gradient(act, loss, lambda, data, &rows)
            .map(|(g, v)| (v, g))
            .map_err(|e| match e {
                ExpError::Core(c) => c,
                other => minnorm_core::Error::Numeric(other.to_string()),
            })
    };
    let mut log = Logger { metrics: Vec::with_capacity(iters) };
    let mut model = model;
    let mut opt = match Lbfgs::new(lcfg, model.to_flat(), &mut objective) {
        Ok(o) => o,
        Err(minnorm_core::Error::Numeric(message)) => {
            return Ok(TrainOutcome { model, metrics: vec![], status: RunStatus::Diverged { last_finite_epoch: 0, message }, steps: 0 })
        }
        Err(e) => return Err(e.into()),
    };
    let mut status = RunStatus::Completed;
    while opt.iterations() < iters {
        match opt.step(&mut objective) {
            Ok(s) => {
                model.set_flat(opt.x())?;
                let fit = opt.value() - lambda * model.weight_decay();
                if s == LbfgsStep::Progress || s == LbfgsStep::Converged {
                    if opt.iterations() > log.metrics.len() {
                        log.log(&model, fit, cfg.optim.spec.lr_at(log.metrics.len()));
                    }
                }
                if s != LbfgsStep::Progress {
                    break;
                }
            }
            Err(minnorm_core::Error::Numeric(message)) => {
                status = RunStatus::Diverged { last_finite_epoch: log.metrics.len(), message };
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let steps = opt.iterations();
    model.set_flat(opt.x())?;
    Ok(TrainOutcome { model, metrics: log.metrics, status, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::parse(text, Path::new(".")).unwrap()
    }

    #[test]
    fn epochs_and_steps_budgets() {
        let c = cfg("data.kind = radial\ndata.n = 100\nmodel.m = 8\noptim.kind = sgd\noptim.batch_size = 30\noptim.epochs = 3\noptim.lr = 0.01");
        let (data, _) = build_data(&c).unwrap();
        let out = train(&c, &data).unwrap();
        assert_eq!(out.metrics.len(), 3);
        assert_eq!(out.steps, 12);
        let c = cfg("data.kind = radial\ndata.n = 100\nmodel.m = 8\noptim.kind = sgd\noptim.batch_size = 30\noptim.steps = 6\noptim.lr = 0.01");
        let out = train(&c, &data).unwrap();
        assert_eq!(out.steps, 6);
        assert_eq!(out.metrics.len(), 2);
        assert!(out.status.is_completed());
    }

    #[test]
    fn divergence_is_reported_not_raised() {
        let c = cfg("model.m = 20\noptim.kind = gd\noptim.lr = 1e6\noptim.epochs = 200\ninit.gain = 5");
        let (data, _) = build_data(&c).unwrap();
        let out = train(&c, &data).unwrap();
        match out.status {
            RunStatus::Diverged { last_finite_epoch, .. } => assert_eq!(last_finite_epoch, out.metrics.len()),
            RunStatus::Completed => panic!("expected divergence"),
        }
        assert!(out.model.to_flat().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn frozen_inner_keeps_inner_weights() {
        let c = cfg("data.kind = radial\ndata.n = 50\nmodel.m = 10\nmodel.frozen_inner = true\noptim.kind = momentum\noptim.batch_size = 10\noptim.epochs = 3\noptim.lr = 0.01");
        let (data, _) = build_data(&c).unwrap();
        let out = train(&c, &data).unwrap();
        let (Model::Shallow(init), Model::Shallow(fin)) = (init_model(&c, 3).unwrap(), out.model) else { panic!() };
        assert_eq!(init.w, fin.w);
        assert_eq!(init.b, fin.b);
        assert_ne!(init.a, fin.a);
    }

    #[test]
    fn lbfgs_and_deep_runs() {
        let c = cfg("model.m = 20\noptim.kind = lbfgs\noptim.epochs = 50");
        let (data, _) = build_data(&c).unwrap();
        let out = train(&c, &data).unwrap();
        assert!(out.status.is_completed());
        let first = out.metrics.first().unwrap().fit_risk;
        let last = out.model.fit_risk(Activation::Relu, LossKind::Mse, &data);
        assert!(last < first, "{last} vs {first}");

        let c = cfg("data.kind = radial\ndata.n = 40\nmodel.m = 6\nmodel.depth = 3\noptim.kind = adam\noptim.batch_size = 20\noptim.epochs = 2");
        let (data, _) = build_data(&c).unwrap();
        let out = train(&c, &data).unwrap();
        assert!(matches!(out.model, Model::Deep(_)));
        assert_eq!(out.metrics.len(), 2);
    }

    #[test]
    fn deep_path_norm_of_identity_chain() {
        use minnorm_core::Matrix;
        let p = DeepNetParams::new(vec![
            (Matrix::from_rows(&[vec![1.0, -2.0]]).unwrap(), vec![0.0]),
            (Matrix::from_rows(&[vec![3.0]]).unwrap(), vec![0.0]),
        ])
        .unwrap();
        assert_eq!(Model::Deep(p).path_norm(), 9.0);
    }
}
