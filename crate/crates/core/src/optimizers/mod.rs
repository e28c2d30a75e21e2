//! First-order update rules and an L-BFGS driver.
//!
//! All rules act on flat parameter vectors; the network types expose
//! `to_flat` / `set_flat` in a fixed layout. Weight decay is not applied here:
//! it is part of the risk gradient.

mod lbfgs;

pub use lbfgs::{lbfgs_minimize, Lbfgs, LbfgsConfig, LbfgsOutcome, LbfgsStep};

use crate::error::{Error, Result};

/// Learning-rate drops `(epoch, factor)`, sorted by epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Schedule(pub Vec<(usize, f64)>);

impl Schedule {
    pub fn new(mut drops: Vec<(usize, f64)>) -> Result<Self> {
        if drops.iter().any(|&(_, f)| !(f > 0.0 && f.is_finite())) {
            return Err(Error::domain("schedule factors must be positive"));
        }
        drops.sort_by_key(|&(e, _)| e);
        Ok(Self(drops))
    }

    /// Parses `epoch:factor,epoch:factor`; an empty string is no schedule.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self::default());
        }
        let drops = s
            .split(',')
            .map(|pair| {
                let (e, f) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::domain(format!("schedule entry {pair:?} is not epoch:factor")))?;
                let e = e.trim().parse::<usize>().map_err(|_| Error::domain(format!("bad schedule epoch {e:?}")))?;
                let f = f.trim().parse::<f64>().map_err(|_| Error::domain(format!("bad schedule factor {f:?}")))?;
                Ok((e, f))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(drops)
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(e, f)| format!("{e}:{f}")).collect::<Vec<_>>().join(",")
    }
}

/// Product of all factors whose epoch threshold is `<= epoch`.
pub fn schedule_factor(schedule: &Schedule, epoch: usize) -> f64 {
    schedule.0.iter().filter(|&&(e, _)| e <= epoch).map(|&(_, f)| f).product()
}

#[derive(Clone, Debug, PartialEq)]
pub enum OptimizerKind {
    Gd,
    Sgd { batch_size: usize },
    /// Heavy ball: `v ← μv + g`, `θ ← θ − ηv`.
    Momentum { mu: f64, batch_size: usize },
    Adam { beta1: f64, beta2: f64, eps: f64, batch_size: usize },
    Lbfgs { history: usize, max_line_search: usize },
}

impl OptimizerKind {
    pub fn adam_default(batch_size: usize) -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, batch_size }
    }

    /// Minibatch size, `None` for full-batch methods.
    pub fn batch_size(&self) -> Option<usize> {
        match *self {
            OptimizerKind::Gd | OptimizerKind::Lbfgs { .. } => None,
            OptimizerKind::Sgd { batch_size }
            | OptimizerKind::Momentum { batch_size, .. }
            | OptimizerKind::Adam { batch_size, .. } => Some(batch_size),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Gd => "gd",
            OptimizerKind::Sgd { .. } => "sgd",
            OptimizerKind::Momentum { .. } => "momentum",
            OptimizerKind::Adam { .. } => "adam",
            OptimizerKind::Lbfgs { .. } => "lbfgs",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub schedule: Schedule,
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Self { kind, lr, schedule: Schedule::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::domain(format!("learning rate must be positive, got {}", self.lr)));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must lie in [0, 1), got {v}")))
            }
        };
        let batch = |b: usize| if b == 0 { Err(Error::domain("batch size must be positive")) } else { Ok(()) };
        match self.kind {
            OptimizerKind::Gd => Ok(()),
            OptimizerKind::Sgd { batch_size } => batch(batch_size),
            OptimizerKind::Momentum { mu, batch_size } => {
                unit("mu", mu)?;
                batch(batch_size)
            }
            OptimizerKind::Adam { beta1, beta2, eps, batch_size } => {
                unit("beta1", beta1)?;
                unit("beta2", beta2)?;
                if !(eps > 0.0) {
                    return Err(Error::domain("eps must be positive"));
                }
                batch(batch_size)
            }
            OptimizerKind::Lbfgs { history, max_line_search } => {
                if history == 0 || max_line_search == 0 {
                    return Err(Error::domain("L-BFGS history and line-search budget must be positive"));
                }
                Ok(())
            }
        }
    }

    /// `lr × schedule_factor(epoch)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * schedule_factor(&self.schedule, epoch)
    }
}

/// Mutable buffers of the first-order rules.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizerState {
    pub velocity: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_t: u64,
}

impl OptimizerState {
    pub fn new(n_params: usize) -> Self {
        Self { velocity: vec![0.0; n_params], adam_m: vec![0.0; n_params], adam_v: vec![0.0; n_params], adam_t: 0 }
    }
}

/// One update of `params` in place.
pub fn optimizer_step(spec: &OptimizerSpec, state: &mut OptimizerState, params: &mut [f64], grads: &[f64], epoch: usize) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::shape(format!("{} gradients for {} parameters", grads.len(), params.len())));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::numeric(format!("non-finite gradient entry {i} at epoch {epoch}")));
    }
    let n = params.len();
    let lr = spec.lr_at(epoch);
    match spec.kind {
        OptimizerKind::Gd | OptimizerKind::Sgd { .. } => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Momentum { mu, .. } => {
            if state.velocity.len() != n {
                state.velocity = vec![0.0; n];
            }
            for ((p, v), g) in params.iter_mut().zip(&mut state.velocity).zip(grads) {
                *v = mu * *v + g;
                *p -= lr * *v;
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps, .. } => {
            if state.adam_m.len() != n || state.adam_v.len() != n {
                state.adam_m = vec![0.0; n];
                state.adam_v = vec![0.0; n];
            }
            state.adam_t += 1;
            let t = state.adam_t as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            for i in 0..n {
                let g = grads[i];
                let m = beta1 * state.adam_m[i] + (1.0 - beta1) * g;
                let v = beta2 * state.adam_v[i] + (1.0 - beta2) * g * g;
                state.adam_m[i] = m;
                state.adam_v[i] = v;
                let m_hat = m / c1;
                let v_hat = v / c2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        OptimizerKind::Lbfgs { .. } => {
            return Err(Error::domain("L-BFGS is driven by lbfgs_minimize, not optimizer_step"));
        }
    }
    if let Some(i) = params.iter().position(|p| !p.is_finite()) {
        return Err(Error::numeric(format!("parameter {i} became non-finite at epoch {epoch}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn adam() -> OptimizerSpec {
        OptimizerSpec::new(OptimizerKind::adam_default(1), 1e-3)
    }

    #[test]
    fn gd_step() {
        let spec = OptimizerSpec::new(OptimizerKind::Gd, 0.1);
        let mut p = [1.0];
        optimizer_step(&spec, &mut OptimizerState::new(1), &mut p, &[2.0], 0).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_lr() {
        let mut p = [0.0];
        optimizer_step(&adam(), &mut OptimizerState::new(1), &mut p, &[1.0], 0).unwrap();
        assert_eq!(p[0], -1e-3 / (1.0 + 1e-8));
    }

    #[test]
    fn momentum_two_steps() {
        let spec = OptimizerSpec::new(OptimizerKind::Momentum { mu: 0.99, batch_size: 1 }, 1.0);
        let mut st = OptimizerState::new(1);
        let mut p = [0.0];
        optimizer_step(&spec, &mut st, &mut p, &[1.0], 0).unwrap();
        assert_eq!(p[0], -1.0);
        optimizer_step(&spec, &mut st, &mut p, &[1.0], 0).unwrap();
        assert!((p[0] + 2.99).abs() < 1e-15);
    }

    #[test]
    fn schedule_examples() {
        let s = Schedule::new(vec![(50, 0.1)]).unwrap();
        assert_eq!(schedule_factor(&s, 49), 1.0);
        assert_eq!(schedule_factor(&s, 50), 0.1);
        let s2 = Schedule::parse("100:0.1, 50:0.1").unwrap();
        assert_eq!(s2.0, vec![(50, 0.1), (100, 0.1)]);
        assert!((schedule_factor(&s2, 120) - 0.01).abs() < 1e-17);
        assert!(Schedule::parse("50").is_err());
        assert!(Schedule::parse("50:-1").is_err());
        assert_eq!(Schedule::parse("").unwrap(), Schedule::default());
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut p = [0.0, 0.0];
        assert!(matches!(
            optimizer_step(&adam(), &mut OptimizerState::new(2), &mut p, &[f64::NAN, 0.0], 3),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(optimizer_step(&adam(), &mut OptimizerState::new(2), &mut p, &[0.0], 3), Err(Error::Shape(_))));
        let lb = OptimizerSpec::new(OptimizerKind::Lbfgs { history: 10, max_line_search: 20 }, 1.0);
        assert!(optimizer_step(&lb, &mut OptimizerState::new(2), &mut p, &[0.0, 0.0], 0).is_err());
        assert!(OptimizerSpec::new(OptimizerKind::Momentum { mu: 1.0, batch_size: 5 }, 0.1).validate().is_err());
        assert!(OptimizerSpec::new(OptimizerKind::Gd, 0.0).validate().is_err());
        assert!(OptimizerSpec::new(OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 0.0, batch_size: 1 }, 0.1)
            .validate()
            .is_err());
    }

    fn all_specs() -> Vec<OptimizerSpec> {
        vec![
            OptimizerSpec::new(OptimizerKind::Gd, 0.1),
            OptimizerSpec::new(OptimizerKind::Sgd { batch_size: 3 }, 0.1),
            OptimizerSpec::new(OptimizerKind::Momentum { mu: 0.9, batch_size: 3 }, 0.1),
            OptimizerSpec::new(OptimizerKind::adam_default(3), 0.1),
        ]
    }

    proptest! {
        #[test]
        fn zero_gradient_is_identity(p0 in proptest::collection::vec(-5.0f64..5.0, 1..8)) {
            for spec in all_specs() {
                let mut p = p0.clone();
                let mut st = OptimizerState::new(p.len());
                for e in 0..3 {
                    optimizer_step(&spec, &mut st, &mut p, &vec![0.0; p0.len()], e).unwrap();
                }
                prop_assert_eq!(&p, &p0);
            }
        }

        #[test]
        fn adam_step_bounded(gs in proptest::collection::vec(-1e3f64..1e3, 1..200), lr in 1e-5f64..1.0) {
            let spec = OptimizerSpec::new(OptimizerKind::adam_default(1), lr);
            let mut st = OptimizerState::new(1);
            let mut p = [0.0];
            for g in gs {
                let before = p[0];
                optimizer_step(&spec, &mut st, &mut p, &[g], 0).unwrap();
                prop_assert!((p[0] - before).abs() <= lr / (1.0 - 0.9) * (1.0 + 1e-12));
            }
        }

        #[test]
        fn momentum_zero_mu_equals_sgd(gs in proptest::collection::vec(-5.0f64..5.0, 1..20)) {
            let sgd = OptimizerSpec::new(OptimizerKind::Sgd { batch_size: 1 }, 0.05);
            let mom = OptimizerSpec::new(OptimizerKind::Momentum { mu: 0.0, batch_size: 1 }, 0.05);
            let (mut a, mut b) = ([1.0], [1.0]);
            let (mut sa, mut sb) = (OptimizerState::new(1), OptimizerState::new(1));
            for g in gs {
                optimizer_step(&sgd, &mut sa, &mut a, &[g], 0).unwrap();
                optimizer_step(&mom, &mut sb, &mut b, &[g], 0).unwrap();
            }
            prop_assert_eq!(a, b);
        }
    }
}
