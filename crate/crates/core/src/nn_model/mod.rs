//! One-hidden-layer networks `f(x) = b0 + Σ_i a_i σ(w_i·x + b_i)`.
//!
//! Gradients are derived by hand; there is no autodiff. Sums over neurons and
//! over data rows run in fixed index order, so results are bit-reproducible.

mod checkpoint;
mod deep;

pub use checkpoint::{load_checkpoint, parse_checkpoint, render_checkpoint, save_checkpoint};
pub use deep::{deep_backward, deep_forward, deep_weight_decay, DeepGradients, DeepNetParams};

use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::matrix::{dot, norm, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Activation {
    #[default]
    Relu,
    /// `max(z, 0) + slope·min(z, 0)` with `slope ∈ (0, 1)`.
    LeakyRelu(f64),
}

impl Activation {
    pub fn leaky(slope: f64) -> Result<Self> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::domain(format!("leaky slope must lie in (0, 1), got {slope}")));
        }
        Ok(Activation::LeakyRelu(slope))
    }

    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    z
                } else {
                    s * z
                }
            }
        }
    }

    /// Derivative with the convention `σ'(0)` = slope of the negative side
    /// (0 for ReLU).
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        if z > 0.0 {
            1.0
        } else {
            self.negative_slope()
        }
    }

    pub fn negative_slope(self) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::LeakyRelu(s) => s,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => f.write_str("relu"),
            Activation::LeakyRelu(_) => f.write_str("leaky_relu"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// `relu`, `leaky_relu` (slope 0.1) or `leaky_relu:<slope>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "leaky_relu" => Activation::leaky(0.1),
            other => match other.strip_prefix("leaky_relu:") {
                Some(v) => {
                    let slope = v
                        .parse::<f64>()
                        .map_err(|_| Error::domain(format!("bad leaky slope {v:?}")))?;
                    Activation::leaky(slope)
                }
                None => Err(Error::domain(format!("unknown activation {other:?}"))),
            },
        }
    }
}

/// Parameters `(a, W, b, b0)` of a one-hidden-layer network.
///
/// `frozen_inner` selects random-feature mode: `W` and `b` never move.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    pub a: Vec<f64>,
    pub w: Matrix,
    pub b: Vec<f64>,
    pub b0: f64,
    pub frozen_inner: bool,
}

/// Gradient of the regularized risk, shaped like [`NetParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub da: Vec<f64>,
    pub dw: Matrix,
    pub db: Vec<f64>,
    pub db0: f64,
}

impl NetParams {
    pub fn new(a: Vec<f64>, w: Matrix, b: Vec<f64>, b0: f64) -> Result<Self> {
        let p = Self { a, w, b, b0, frozen_inner: false };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(m: usize, d: usize) -> Self {
        Self { a: vec![0.0; m], w: Matrix::zeros(m, d), b: vec![0.0; m], b0: 0.0, frozen_inner: false }
    }

    pub fn width(&self) -> usize {
        self.a.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.a.len();
        if self.w.rows() != m || self.b.len() != m {
            return Err(Error::shape(format!(
                "a has {m} entries, W has {} rows, b has {} entries",
                self.w.rows(),
                self.b.len()
            )));
        }
        let finite = self.a.iter().chain(self.w.as_slice()).chain(&self.b).all(|v| v.is_finite())
            && self.b0.is_finite();
        if !finite {
            return Err(Error::numeric("non-finite parameter"));
        }
        Ok(())
    }

    /// Number of scalars in the flat layout `[a, W (row-major), b, b0]`.
    pub fn flat_len(&self) -> usize {
        2 * self.a.len() + self.w.as_slice().len() + 1
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.flat_len());
        v.extend_from_slice(&self.a);
        v.extend_from_slice(self.w.as_slice());
        v.extend_from_slice(&self.b);
        v.push(self.b0);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.flat_len() {
            return Err(Error::shape(format!("flat vector has {} entries, expected {}", flat.len(), self.flat_len())));
        }
        let m = self.a.len();
        let md = self.w.as_slice().len();
        self.a.copy_from_slice(&flat[..m]);
        self.w.as_mut_slice().copy_from_slice(&flat[m..m + md]);
        self.b.copy_from_slice(&flat[m + md..2 * m + md]);
        self.b0 = flat[2 * m + md];
        Ok(())
    }

    /// `b0 + Σ a_i σ(w_i·x + b_i)` without shape checks.
    #[inline]
    fn eval_unchecked(&self, act: Activation, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, (&a, &b)) in self.a.iter().zip(&self.b).enumerate() {
            s += a * act.eval(dot(self.w.row(i), x) + b);
        }
        self.b0 + s
    }
}

impl Gradients {
    pub fn zeros_like(p: &NetParams) -> Self {
        Self {
            da: vec![0.0; p.a.len()],
            dw: Matrix::zeros(p.w.rows(), p.w.cols()),
            db: vec![0.0; p.b.len()],
            db0: 0.0,
        }
    }

    /// Same layout as [`NetParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.da.len() + self.dw.as_slice().len() + 1);
        v.extend_from_slice(&self.da);
        v.extend_from_slice(self.dw.as_slice());
        v.extend_from_slice(&self.db);
        v.push(self.db0);
        v
    }
}

pub fn forward(params: &NetParams, act: Activation, x: &[f64]) -> Result<f64> {
    if x.len() != params.input_dim() {
        return Err(Error::shape(format!("input has {} entries, network expects {}", x.len(), params.input_dim())));
    }
    Ok(params.eval_unchecked(act, x))
}

/// Row-wise [`forward`]. Rows are evaluated independently (and possibly in
/// parallel) with the same summation order, so each entry is bit-identical
/// to the single-point call.
pub fn forward_batch(params: &NetParams, act: Activation, x: &Matrix) -> Result<Vec<f64>> {
    if x.rows() > 0 && x.cols() != params.input_dim() {
        return Err(Error::shape(format!("input has {} columns, network expects {}", x.cols(), params.input_dim())));
    }
    Ok((0..x.rows()).into_par_iter().map(|i| params.eval_unchecked(act, x.row(i))).collect())
}

/// `½(‖a‖² + ‖W‖²_F)`. Biases are not included.
pub fn weight_decay(params: &NetParams) -> f64 {
    let a2: f64 = params.a.iter().map(|v| v * v).sum();
    0.5 * (a2 + params.w.norm_sq())
}

/// `Σ_i |a_i|·‖w_i‖`, the balanced value of the weight-decay regularizer.
pub fn path_norm(params: &NetParams) -> f64 {
    params.a.iter().enumerate().map(|(i, a)| a.abs() * norm(params.w.row(i))).sum()
}

/// Unregularized fit term `(1/2n) Σ ℓ(f(x_i), y_i)`.
pub fn fit_risk(params: &NetParams, act: Activation, loss: LossKind, data: &Dataset) -> Result<f64> {
    if data.len() == 0 {
        return Err(Error::domain("fit risk of an empty dataset"));
    }
    let preds = forward_batch(params, act, &data.x)?;
    let total: f64 = preds.iter().zip(&data.y).map(|(&f, &y)| loss.value(f, y)).sum();
    Ok(total / (2.0 * data.len() as f64))
}

/// Regularized empirical risk `(1/2n) Σ ℓ + λ·½(‖a‖² + ‖W‖²)`.
pub fn regularized_risk(params: &NetParams, act: Activation, loss: LossKind, lambda: f64, data: &Dataset) -> Result<f64> {
    Ok(fit_risk(params, act, loss, data)? + lambda * weight_decay(params))
}

/// Gradient and value of the regularized risk over the whole dataset.
pub fn backward(params: &NetParams, act: Activation, loss: LossKind, lambda: f64, batch: &Dataset) -> Result<(Gradients, f64)> {
    let rows: Vec<usize> = (0..batch.len()).collect();
    backward_rows(params, act, loss, lambda, batch, &rows)
}

/// Gradient and value of the regularized risk restricted to `rows` of `data`.
///
/// The fit term is normalized by `2·rows.len()`. The λ term adds `λa` and
/// `λW`; biases are not regularized. With `frozen_inner` set, `dW` and `db`
/// are zeroed after the computation.
pub fn backward_rows(
    params: &NetParams,
    act: Activation,
    loss: LossKind,
    lambda: f64,
    data: &Dataset,
    rows: &[usize],
) -> Result<(Gradients, f64)> {
    if rows.is_empty() {
        return Err(Error::domain("backward on an empty batch"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::domain(format!("lambda must be >= 0, got {lambda}")));
    }
    let d = params.input_dim();
    if data.x.cols() != d {
        return Err(Error::shape(format!("data has {} columns, network expects {d}", data.x.cols())));
    }
    let m = params.width();
    let scale = 1.0 / (2.0 * rows.len() as f64);
    let mut g = Gradients::zeros_like(params);
    let mut z = vec![0.0; m];
    let mut fit = 0.0;

    for &r in rows {
        let x = data.x.row(r);
        let y = data.y[r];
        let mut f = 0.0;
        for i in 0..m {
            z[i] = dot(params.w.row(i), x) + params.b[i];
            f += params.a[i] * act.eval(z[i]);
        }
        f += params.b0;
        if !f.is_finite() {
            return Err(Error::numeric(format!("non-finite network output at row {r}")));
        }
        fit += loss.value(f, y);
        let dl = scale * loss.derivative(f, y);
        g.db0 += dl;
        for i in 0..m {
            g.da[i] += dl * act.eval(z[i]);
            let gi = dl * params.a[i] * act.derivative(z[i]);
            if gi != 0.0 {
                for (dw, &xj) in g.dw.row_mut(i).iter_mut().zip(x) {
                    *dw += gi * xj;
                }
                g.db[i] += gi;
            }
        }
    }

    let risk = scale * fit + lambda * weight_decay(params);
    if !risk.is_finite() {
        return Err(Error::numeric("non-finite risk"));
    }
    if lambda > 0.0 {
        for (da, &a) in g.da.iter_mut().zip(&params.a) {
            *da += lambda * a;
        }
        for (dw, &w) in g.dw.as_mut_slice().iter_mut().zip(params.w.as_slice()) {
            *dw += lambda * w;
        }
    }
    if params.frozen_inner {
        g.dw.as_mut_slice().fill(0.0);
        g.db.fill(0.0);
    }
    Ok((g, risk))
}
