//! Seeded Xavier and He initialization.
//!
//! Streams: the outer weights use tag `init/a`, inner weights `init/W`, inner
//! biases `init/b`, all under the run seed. Entry `k` of a tensor (row-major)
//! is drawn from sub-stream `k`, so shapes and seeds alone fix the values.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn_model::{DeepNetParams, NetParams};
use crate::rng::StreamKey;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitScheme {
    /// `U(-h, h)` with `h = gain·√(6/(n_in+n_out))`.
    XavierUniform { gain: f64 },
    /// `N(0, gain²·2/(n_in+n_out))`.
    XavierNormal { gain: f64 },
    /// `N(0, 2/n_in)`.
    He,
}

impl InitScheme {
    pub fn validate(self) -> Result<()> {
        match self {
            InitScheme::XavierUniform { gain } | InitScheme::XavierNormal { gain } if !(gain > 0.0 && gain.is_finite()) => {
                Err(Error::domain(format!("gain must be positive, got {gain}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InitScheme::XavierUniform { .. } => "xavier_uniform",
            InitScheme::XavierNormal { .. } => "xavier_normal",
            InitScheme::He => "he",
        }
    }

    pub fn gain(self) -> Option<f64> {
        match self {
            InitScheme::XavierUniform { gain } | InitScheme::XavierNormal { gain } => Some(gain),
            InitScheme::He => None,
        }
    }

    /// Builds a scheme from its config name and gain.
    pub fn from_name(name: &str, gain: f64) -> Result<Self> {
        let s = match name {
            "xavier_uniform" => InitScheme::XavierUniform { gain },
            "xavier_normal" => InitScheme::XavierNormal { gain },
            "he" => InitScheme::He,
            other => return Err(Error::domain(format!("unknown init scheme {other:?}"))),
        };
        s.validate()?;
        Ok(s)
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitScheme {
    type Err = Error;

    /// Name with unit gain.
    fn from_str(s: &str) -> Result<Self> {
        InitScheme::from_name(s, 1.0)
    }
}

fn draw(scheme: InitScheme, n_in: usize, n_out: usize, rng: &mut impl Rng) -> f64 {
    let fan = (n_in + n_out) as f64;
    match scheme {
        InitScheme::XavierUniform { gain } => {
            let h = gain * (6.0 / fan).sqrt();
            rng.random_range(-h..=h)
        }
        InitScheme::XavierNormal { gain } => {
            let z: f64 = StandardNormal.sample(rng);
            gain * (2.0 / fan).sqrt() * z
        }
        InitScheme::He => {
            let z: f64 = StandardNormal.sample(rng);
            (2.0 / n_in as f64).sqrt() * z
        }
    }
}

/// A `rows × cols` tensor for a layer with fans `(n_in, n_out)`.
pub fn init_layer(scheme: InitScheme, n_in: usize, n_out: usize, rows: usize, cols: usize, stream: &StreamKey) -> Result<Matrix> {
    scheme.validate()?;
    if n_in == 0 || n_out == 0 || rows == 0 || cols == 0 {
        return Err(Error::domain(format!("layer dimensions must be positive: n_in={n_in}, n_out={n_out}, {rows}x{cols}")));
    }
    let data = (0..rows * cols).map(|k| draw(scheme, n_in, n_out, &mut stream.rng(k as u64))).collect();
    Matrix::from_vec(rows, cols, data)
}

/// One-hidden-layer network of width `m` on `ℝ^d`.
///
/// `a` uses fans `(m, 1)`, `W` and `b` use `(d, m)`; `b0` starts at 0.
pub fn init_net(scheme: InitScheme, m: usize, d: usize, seed: u64) -> Result<NetParams> {
    let root = StreamKey::new(seed, "init");
    let a = init_layer(scheme, m, 1, m, 1, &root.child("a"))?.into_vec();
    let w = init_layer(scheme, d, m, m, d, &root.child("W"))?;
    let b = init_layer(scheme, d, m, m, 1, &root.child("b"))?.into_vec();
    NetParams::new(a, w, b, 0.0)
}

/// Deep network with `hidden` units in each of `depth - 1` hidden layers.
/// Layer `l` uses fans `(in_l, out_l)` for weights and biases.
pub fn init_deep_net(scheme: InitScheme, hidden: usize, depth: usize, d: usize, seed: u64) -> Result<DeepNetParams> {
    if depth < 2 {
        return Err(Error::domain("depth counts layers and must be at least 2"));
    }
    let root = StreamKey::new(seed, "init-deep");
    let mut layers = Vec::with_capacity(depth);
    let mut n_in = d;
    for l in 0..depth {
        let n_out = if l + 1 == depth { 1 } else { hidden };
        let w = init_layer(scheme, n_in, n_out, n_out, n_in, &root.child(&format!("W{l}")))?;
        let b = init_layer(scheme, n_in, n_out, n_out, 1, &root.child(&format!("b{l}")))?.into_vec();
        layers.push((w, b));
        n_in = n_out;
    }
    DeepNetParams::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::norm;

    fn std_dev(v: &[f64]) -> f64 {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn xavier_uniform_half_width() {
        let h = (6.0f64 / 201.0).sqrt();
        assert!((h - 0.17278).abs() < 1e-5);
        let t = init_layer(InitScheme::XavierUniform { gain: 1.0 }, 1, 200, 100_000, 1, &StreamKey::new(1, "t")).unwrap();
        let max = t.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max <= h);
        assert!(max > 0.99 * h);
    }

    #[test]
    fn he_outer_std() {
        let t = init_layer(InitScheme::He, 200, 1, 100_000, 1, &StreamKey::new(2, "t")).unwrap();
        let s = std_dev(t.as_slice());
        assert!((s / 0.1 - 1.0).abs() < 0.02, "{s}");
    }

    #[test]
    fn xavier_normal_std() {
        let t = init_layer(InitScheme::XavierNormal { gain: 2f64.sqrt() }, 3, 97, 50_000, 2, &StreamKey::new(3, "t")).unwrap();
        let s = std_dev(t.as_slice());
        assert!((s / (2.0 * 2.0 / 100.0f64).sqrt() - 1.0).abs() < 0.02, "{s}");
    }

    #[test]
    fn invalid_requests() {
        assert!(init_layer(InitScheme::XavierUniform { gain: 0.0 }, 1, 1, 1, 1, &StreamKey::new(0, "t")).is_err());
        assert!(InitScheme::from_name("xavier_normal", -1.0).is_err());
        assert!(InitScheme::from_name("orthogonal", 1.0).is_err());
        assert!(init_layer(InitScheme::He, 0, 1, 1, 1, &StreamKey::new(0, "t")).is_err());
        assert!(init_net(InitScheme::He, 0, 3, 1).is_err());
    }

    #[test]
    fn init_net_deterministic_and_bounded() {
        let s = InitScheme::XavierUniform { gain: 5.0 };
        let p = init_net(s, 200, 1, 42).unwrap();
        let q = init_net(s, 200, 1, 42).unwrap();
        assert_eq!(p, q);
        assert_ne!(p, init_net(s, 200, 1, 43).unwrap());
        let h = 5.0 * (6.0f64 / 201.0).sqrt();
        assert!(p.w.as_slice().iter().all(|v| v.abs() <= h));
        assert_eq!(p.b0, 0.0);
    }

    #[test]
    fn he_inner_std() {
        let p = init_net(InitScheme::He, 200, 31, 7).unwrap();
        let s = std_dev(p.w.as_slice());
        assert!((s / (2.0f64 / 31.0).sqrt() - 1.0).abs() < 0.02, "{s}");
    }

    /// Least-squares slope of log(median |a_i|·‖w_i‖) against log m.
    fn scaling_exponent(scheme: InitScheme) -> f64 {
        let ms = [100usize, 400, 1600, 6400];
        let pts: Vec<(f64, f64)> = ms
            .iter()
            .map(|&m| {
                let p = init_net(scheme, m, 3, 11).unwrap();
                let mut prod: Vec<f64> = (0..m).map(|i| p.a[i].abs() * norm(p.w.row(i))).collect();
                prod.sort_by(f64::total_cmp);
                ((m as f64).ln(), prod[m / 2].ln())
            })
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn scale_laws() {
        let xavier = scaling_exponent(InitScheme::XavierUniform { gain: 1.0 });
        let he = scaling_exponent(InitScheme::He);
        assert!((xavier + 1.0).abs() <= 0.15, "xavier exponent {xavier}");
        assert!((he + 0.5).abs() <= 0.15, "he exponent {he}");
    }

    #[test]
    fn deep_init_shapes() {
        let p = init_deep_net(InitScheme::XavierNormal { gain: 2f64.sqrt() }, 8, 4, 3, 1).unwrap();
        assert_eq!(p.widths(), vec![8, 8, 8, 1]);
        assert_eq!(p.input_dim(), 3);
        assert!(init_deep_net(InitScheme::He, 8, 1, 3, 1).is_err());
    }
}
