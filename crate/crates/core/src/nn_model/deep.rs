//! Fully connected networks with several hidden layers.
//!
//! Every hidden layer applies the activation; the output layer is linear and
//! one-dimensional. Weight decay covers all weight matrices, no biases.

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::matrix::{dot, Matrix};

use super::Activation;

#[derive(Clone, Debug, PartialEq)]
pub struct DeepNetParams {
    /// `(W_l, b_l)` with `W_l` of shape `out_l × in_l`.
    pub layers: Vec<(Matrix, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeepGradients {
    pub layers: Vec<(Matrix, Vec<f64>)>,
}

impl DeepNetParams {
    pub fn new(layers: Vec<(Matrix, Vec<f64>)>) -> Result<Self> {
        let p = Self { layers };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::shape("a deep network needs at least one layer"));
        }
        for (k, (w, b)) in self.layers.iter().enumerate() {
            if w.rows() != b.len() {
                return Err(Error::shape(format!("layer {k}: {} weight rows but {} biases", w.rows(), b.len())));
            }
            if let Some((next, _)) = self.layers.get(k + 1) {
                if next.cols() != w.rows() {
                    return Err(Error::shape(format!(
                        "layer {k} outputs {} values but layer {} expects {}",
                        w.rows(),
                        k + 1,
                        next.cols()
                    )));
                }
            }
        }
        let (last, _) = self.layers.last().expect("non-empty");
        if last.rows() != 1 {
            return Err(Error::shape(format!("output layer has {} units, expected 1", last.rows())));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].0.cols()
    }

    /// Layer output sizes, ending with 1.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|(w, _)| w.rows()).collect()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in &self.layers {
            v.extend_from_slice(w.as_slice());
            v.extend_from_slice(b);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let total: usize = self.layers.iter().map(|(w, b)| w.as_slice().len() + b.len()).sum();
        if flat.len() != total {
            return Err(Error::shape(format!("flat vector has {} entries, expected {total}", flat.len())));
        }
        let mut off = 0;
        for (w, b) in &mut self.layers {
            let n = w.as_slice().len();
            w.as_mut_slice().copy_from_slice(&flat[off..off + n]);
            off += n;
            let k = b.len();
            b.copy_from_slice(&flat[off..off + k]);
            off += k;
        }
        Ok(())
    }

    /// Pre-activations of every layer for input `x`.
    fn pre_activations(&self, act: Activation, x: &[f64]) -> Vec<Vec<f64>> {
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut h: Vec<f64> = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, (w, b)) in self.layers.iter().enumerate() {
            let z: Vec<f64> = (0..w.rows()).map(|i| dot(w.row(i), &h) + b[i]).collect();
            if k < last {
                h = z.iter().map(|&v| act.eval(v)).collect();
            }
            zs.push(z);
        }
        zs
    }
}

impl DeepGradients {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (w, b) in &self.layers {
            v.extend_from_slice(w.as_slice());
            v.extend_from_slice(b);
        }
        v
    }
}

pub fn deep_forward(params: &DeepNetParams, act: Activation, x: &[f64]) -> Result<f64> {
    if x.len() != params.input_dim() {
        return Err(Error::shape(format!("input has {} entries, network expects {}", x.len(), params.input_dim())));
    }
    let zs = params.pre_activations(act, x);
    Ok(zs.last().expect("non-empty")[0])
}

/// `½ Σ_l ‖W_l‖²_F`.
pub fn deep_weight_decay(params: &DeepNetParams) -> f64 {
    0.5 * params.layers.iter().map(|(w, _)| w.norm_sq()).sum::<f64>()
}

/// Gradient and value of `(1/2|B|) Σ ℓ + λ·½Σ‖W_l‖²` over `rows` of `data`.
pub fn deep_backward(
    params: &DeepNetParams,
    act: Activation,
    loss: LossKind,
    lambda: f64,
    data: &Dataset,
    rows: &[usize],
) -> Result<(DeepGradients, f64)> {
    if rows.is_empty() {
        return Err(Error::domain("backward on an empty batch"));
    }
    if data.x.cols() != params.input_dim() {
        return Err(Error::shape(format!("data has {} columns, network expects {}", data.x.cols(), params.input_dim())));
    }
    let scale = 1.0 / (2.0 * rows.len() as f64);
    let mut grads = DeepGradients {
        layers: params.layers.iter().map(|(w, b)| (Matrix::zeros(w.rows(), w.cols()), vec![0.0; b.len()])).collect(),
    };
    let last = params.layers.len() - 1;
    let mut fit = 0.0;

    for &r in rows {
        let x = data.x.row(r);
        let zs = params.pre_activations(act, x);
        let f = zs[last][0];
        if !f.is_finite() {
            return Err(Error::numeric(format!("non-finite network output at row {r}")));
        }
        fit += loss.value(f, data.y[r]);
        // delta = ∂(scaled loss)/∂z for the current layer
        let mut delta = vec![scale * loss.derivative(f, data.y[r])];
        for k in (0..=last).rev() {
            let input: Vec<f64> = if k == 0 { x.to_vec() } else { zs[k - 1].iter().map(|&v| act.eval(v)).collect() };
            let (gw, gb) = &mut grads.layers[k];
            for (i, &di) in delta.iter().enumerate() {
                if di != 0.0 {
                    for (g, &h) in gw.row_mut(i).iter_mut().zip(&input) {
                        *g += di * h;
                    }
                    gb[i] += di;
                }
            }
            if k > 0 {
                let w = &params.layers[k].0;
                delta = (0..w.cols())
                    .map(|j| {
                        let back: f64 = delta.iter().enumerate().map(|(i, di)| di * w.get(i, j)).sum();
                        back * act.derivative(zs[k - 1][j])
                    })
                    .collect();
            }
        }
    }

    let risk = scale * fit + lambda * deep_weight_decay(params);
    if !risk.is_finite() {
        return Err(Error::numeric("non-finite risk"));
    }
    if lambda > 0.0 {
        for ((gw, _), (w, _)) in grads.layers.iter_mut().zip(&params.layers) {
            for (g, &v) in gw.as_mut_slice().iter_mut().zip(w.as_slice()) {
                *g += lambda * v;
            }
        }
    }
    Ok((grads, risk))
}
