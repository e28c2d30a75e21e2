use rand::Rng;
use rayon::prelude::*;

use crate::datagen::{sample_sphere, Dataset};
use crate::error::{Error, Result};
use crate::matrix::dot;
use crate::rng::StreamKey;

/// `(1 + 3√2)·Q·max‖x_i‖/√n`.
pub fn rademacher_bound(data: &Dataset, q: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::domain("empty dataset"));
    }
    let max_norm = data.x.iter_rows().map(|r| dot(r, r).sqrt()).fold(0.0, f64::max);
    Ok((1.0 + 3.0 * 2f64.sqrt()) * q * max_norm / (data.len() as f64).sqrt())
}

/// Search budget for the sampled Rademacher lower estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RademacherConfig {
    pub q: f64,
    pub n_eps: usize,
    pub n_candidates: usize,
    pub refine_steps: usize,
    /// Bias cap `R` in `|b| ≤ √Q·R`; defaults to `max‖x_i‖`.
    pub bias_radius: Option<f64>,
}

impl RademacherConfig {
    pub fn new(q: f64) -> Self {
        Self { q, n_eps: 20, n_candidates: 200, refine_steps: 20, bias_radius: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(Error::domain(format!("Q must be positive, got {}", self.q)));
        }
        if self.n_eps == 0 || self.n_candidates == 0 {
            return Err(Error::domain("n_eps and n_candidates must be positive"));
        }
        if let Some(r) = self.bias_radius {
            if !(r >= 0.0) {
                return Err(Error::domain("bias radius must be >= 0"));
            }
        }
        Ok(())
    }
}

/// `|Σ ε_i (σ(u·x_i + c) − σ(c))| / n` for a unit direction `u`.
fn correlation(data: &Dataset, eps: &[f64], u: &[f64], c: f64) -> f64 {
    let base = c.max(0.0);
    let s: f64 = data.x.iter_rows().zip(eps).map(|(x, e)| e * ((dot(u, x) + c).max(0.0) - base)).sum();
    s.abs() / data.len() as f64
}

fn normalize(u: &mut [f64]) {
    let n = dot(u, u).sqrt();
    if n > 0.0 {
        u.iter_mut().for_each(|v| *v /= n);
    }
}

/// Coordinate ascent over `(u, c)` that only accepts improvements.
fn refine(data: &Dataset, eps: &[f64], mut u: Vec<f64>, mut c: f64, radius: f64, steps: usize) -> f64 {
    let mut best = correlation(data, eps, &u, c);
    let mut step = 0.25;
    for _ in 0..steps {
        let mut improved = false;
        for j in 0..=u.len() {
            for sign in [1.0, -1.0] {
                let (cand_u, cand_c) = if j < u.len() {
                    let mut v = u.clone();
                    v[j] += sign * step;
                    normalize(&mut v);
                    (v, c)
                } else {
                    (u.clone(), (c + sign * step * radius.max(f64::MIN_POSITIVE)).clamp(-radius, radius))
                };
                if dot(&cand_u, &cand_u) == 0.0 {
                    continue;
                }
                let val = correlation(data, eps, &cand_u, cand_c);
                if val > best {
                    best = val;
                    u = cand_u;
                    c = cand_c;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Monte-Carlo lower estimate of the empirical Rademacher complexity of the
/// Barron ball of radius `Q` (biased-neuron class with `f(0) = 0`).
///
/// The supremum over the class is attained at single neurons, and by
/// homogeneity at balanced ones with `|a| = ‖w‖ = √Q`, so each sign vector
/// is scored over sampled `(u, c)` with `‖u‖ = 1`, `|c| ≤ R`.
pub fn rademacher_estimate(data: &Dataset, cfg: &RademacherConfig, stream: &StreamKey) -> Result<f64> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("empty dataset"));
    }
    let d = data.dim();
    let radius = cfg
        .bias_radius
        .unwrap_or_else(|| data.x.iter_rows().map(|r| dot(r, r).sqrt()).fold(0.0, f64::max));
    let eps_key = stream.child("eps");
    let cand_key = stream.child("candidates");
    let per_eps: Vec<f64> = (0..cfg.n_eps as u64)
        .into_par_iter()
        .map(|k| {
            let mut erng = eps_key.rng(k);
            let eps: Vec<f64> = (0..data.len()).map(|_| if erng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let mut crng = cand_key.rng(k);
            let mut best = 0.0f64;
            for _ in 0..cfg.n_candidates {
                let u = sample_sphere(d, &mut crng).expect("d >= 1");
                let c = if radius > 0.0 { crng.random_range(-radius..=radius) } else { 0.0 };
                best = best.max(refine(data, &eps, u, c, radius, cfg.refine_steps));
            }
            best
        })
        .collect();
    Ok(cfg.q * per_eps.iter().sum::<f64>() / cfg.n_eps as f64)
}
