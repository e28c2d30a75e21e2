//! Limited-memory BFGS with a two-loop recursion and a weak Wolfe line search.
//!
//! The line search starts at `t = 1` (the first iteration scales the step to
//! unit length) and brackets a point satisfying the Armijo and weak Wolfe
//! conditions by halving, doubling and bisection. Once a trial is accepted it
//! also tries the minimizer of the quadratic through `φ(0), φ'(0), φ(t)`; the
//! better of the two points is kept, which makes the search exact on
//! quadratics.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm};

const ARMIJO_C: f64 = 1e-4;
const SHRINK: f64 = 0.5;
const WOLFE_C2: f64 = 0.9;

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub history: usize,
    pub max_line_search: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_tol: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { history: 10, max_line_search: 30, max_iters: 1000, grad_tol: 1e-10, step_tol: 1e-14 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// The line search ran out of trials before termination.
    pub stalled: bool,
}

/// Result of one [`Lbfgs::step`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbfgsStep {
    /// Accepted a step; keep iterating.
    Progress,
    /// Gradient or step below tolerance.
    Converged,
    /// No acceptable step length was found.
    Stalled,
}

/// Iteration state, for callers that log between iterations.
pub struct Lbfgs {
    cfg: LbfgsConfig,
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    history: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    iterations: usize,
}

impl Lbfgs {
    pub fn new<F>(cfg: LbfgsConfig, x0: Vec<f64>, objective: &mut F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        if cfg.history == 0 || cfg.max_line_search == 0 {
            return Err(Error::domain("L-BFGS history and line-search budget must be positive"));
        }
        let (value, grad) = objective(&x0)?;
        check(value, &grad, x0.len())?;
        Ok(Self { cfg, x: x0, value, grad, history: VecDeque::new(), iterations: 0 })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn grad_norm(&self) -> f64 {
        norm(&self.grad)
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `-H g` by the two-loop recursion.
    fn direction(&self) -> Vec<f64> {
        let mut q = self.grad.clone();
        let mut alphas = Vec::with_capacity(self.history.len());
        for (s, y, rho) in self.history.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = match self.history.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / norm(&self.grad).max(1e-300),
        };
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in self.history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        q.iter().map(|v| -v).collect()
    }

    pub fn step<F>(&mut self, objective: &mut F) -> Result<LbfgsStep>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        if self.grad_norm() < self.cfg.grad_tol {
            return Ok(LbfgsStep::Converged);
        }
        let mut dir = self.direction();
        let mut slope = dot(&self.grad, &dir);
        if !(slope < 0.0) {
            // not a descent direction: restart from steepest descent
            self.history.clear();
            dir = self.direction();
            slope = dot(&self.grad, &dir);
        }
        let trial = |t: f64| -> Vec<f64> { self.x.iter().zip(&dir).map(|(x, d)| x + t * d).collect() };

        // weak Wolfe bracketing: halve on Armijo failure, expand while the
        // slope is still steep, bisect once bracketed
        let mut t = 1.0;
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        let mut accepted: Option<(f64, Vec<f64>, f64, Vec<f64>)> = None;
        for _ in 0..self.cfg.max_line_search {
            let xt = trial(t);
            let (ft, gt) = objective(&xt)?;
            if !(ft.is_finite() && ft <= self.value + ARMIJO_C * t * slope) {
                hi = t;
            } else {
                let steep = dot(&gt, &dir) < WOLFE_C2 * slope;
                accepted = Some((t, xt, ft, gt));
                if !steep {
                    break;
                }
                lo = t;
            }
            t = if hi.is_finite() { if lo > 0.0 { 0.5 * (lo + hi) } else { t * SHRINK } } else { 2.0 * t };
        }
        let Some((mut t, mut xt, mut ft, mut gt)) = accepted else {
            return Ok(LbfgsStep::Stalled);
        };
        check(ft, &gt, self.x.len())?;

        let curv = ft - self.value - slope * t;
        if curv > 0.0 {
            let tq = -slope * t * t / (2.0 * curv);
            if tq.is_finite() && tq > 0.0 && (tq - t).abs() > 1e-12 * t {
                let xq = trial(tq);
                let (fq, gq) = objective(&xq)?;
                if fq.is_finite() && fq <= self.value + ARMIJO_C * tq * slope && fq < ft {
                    check(fq, &gq, self.x.len())?;
                    (t, xt, ft, gt) = (tq, xq, fq, gq);
                }
            }
        }

        let s: Vec<f64> = xt.iter().zip(&self.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&self.grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if self.history.len() == self.cfg.history {
                self.history.pop_front();
            }
            self.history.push_back((s.clone(), y, 1.0 / sy));
        }
        let step_norm = t * norm(&dir);
        self.x = xt;
        self.value = ft;
        self.grad = gt;
        self.iterations += 1;
        if self.grad_norm() < self.cfg.grad_tol || step_norm < self.cfg.step_tol {
            Ok(LbfgsStep::Converged)
        } else {
            Ok(LbfgsStep::Progress)
        }
    }

    pub fn into_outcome(self, stalled: bool) -> LbfgsOutcome {
        LbfgsOutcome { x: self.x, value: self.value, iterations: self.iterations, stalled }
    }
}

fn check(value: f64, grad: &[f64], n: usize) -> Result<()> {
    if grad.len() != n {
        return Err(Error::shape(format!("objective returned {} gradient entries for {n} parameters", grad.len())));
    }
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numeric("objective returned a non-finite value or gradient"));
    }
    Ok(())
}

/// Minimizes `objective` from `x0`. Accepted values never increase.
pub fn lbfgs_minimize<F>(mut objective: F, x0: Vec<f64>, cfg: &LbfgsConfig) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut opt = Lbfgs::new(cfg.clone(), x0, &mut objective)?;
    while opt.iterations() < cfg.max_iters {
        match opt.step(&mut objective)? {
            LbfgsStep::Progress => {}
            LbfgsStep::Converged => return Ok(opt.into_outcome(false)),
            LbfgsStep::Stalled => return Ok(opt.into_outcome(true)),
        }
    }
    Ok(opt.into_outcome(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (1.0, 100.0);
        let f = (a - x[0]).powi(2) + b * (x[1] - x[0] * x[0]).powi(2);
        let g0 = -2.0 * (a - x[0]) - 4.0 * b * x[0] * (x[1] - x[0] * x[0]);
        let g1 = 2.0 * b * (x[1] - x[0] * x[0]);
        Ok((f, vec![g0, g1]))
    }

    #[test]
    fn scalar_quadratic() {
        let out = lbfgs_minimize(|x| Ok(((x[0] - 3.0).powi(2), vec![2.0 * (x[0] - 3.0)])), vec![0.0], &LbfgsConfig::default())
            .unwrap();
        assert!((out.x[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let cfg = LbfgsConfig { max_iters: 30, ..LbfgsConfig::default() };
        let out = lbfgs_minimize(
            |x| Ok((0.5 * (x[0] * x[0] + 100.0 * x[1] * x[1]), vec![x[0], 100.0 * x[1]])),
            vec![1.0, 1.0],
            &cfg,
        )
        .unwrap();
        assert!(norm(&out.x) < 1e-6, "{:?} after {}", out.x, out.iterations);
        assert!(out.iterations <= 30);
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let cfg = LbfgsConfig { max_iters: 200, ..LbfgsConfig::default() };
        let out = lbfgs_minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
        assert!(out.value < 1e-8, "f = {} after {}", out.value, out.iterations);
        assert!((out.x[0] - 1.0).abs() < 1e-3 && (out.x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn monotone_values() {
        let mut obj = rosenbrock;
        let mut opt = Lbfgs::new(LbfgsConfig::default(), vec![-1.2, 1.0], &mut obj).unwrap();
        let mut last = opt.value();
        for _ in 0..100 {
            if opt.step(&mut obj).unwrap() != LbfgsStep::Progress {
                break;
            }
            assert!(opt.value() <= last);
            last = opt.value();
        }
    }

    #[test]
    fn stalls_on_nonsmooth_trap() {
        // gradient points the wrong way, so no step can satisfy Armijo
        let cfg = LbfgsConfig { max_line_search: 5, ..LbfgsConfig::default() };
        let out = lbfgs_minimize(|x| Ok((x[0].abs() + 1.0, vec![-1.0])), vec![0.0], &cfg).unwrap();
        assert!(out.stalled);
        assert_eq!(out.x, vec![0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn convex_quadratic_terminates(
            (k, entries, x0) in (1usize..8).prop_flat_map(|k| (
                Just(k),
                proptest::collection::vec(-1.0f64..1.0, k * k),
                proptest::collection::vec(-2.0f64..2.0, k),
            ))
        ) {
            // A = BᵀB + I is symmetric positive definite
            let mut a = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    a[i * k + j] = (0..k).map(|l| entries[l * k + i] * entries[l * k + j]).sum::<f64>()
                        + if i == j { 1.0 } else { 0.0 };
                }
            }
            let obj = |x: &[f64]| {
                let g: Vec<f64> = (0..k).map(|i| dot(&a[i * k..(i + 1) * k], x)).collect();
                Ok((0.5 * dot(x, &g), g))
            };
            let cfg = LbfgsConfig { history: k, max_iters: k + 2, ..LbfgsConfig::default() };
            let out = lbfgs_minimize(obj, x0, &cfg).unwrap();
            let g: Vec<f64> = (0..k).map(|i| dot(&a[i * k..(i + 1) * k], &out.x)).collect();
            prop_assert!(norm(&g) < 1e-10, "grad norm {} after {} iterations", norm(&g), out.iterations);
        }
    }
}
