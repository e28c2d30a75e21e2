//! Benchmark datasets: the symmetric `|x|` grid in 1D and the radial bump
//! mixture `μ = μ1 + μ2 + μ3` in `ℝ^d`, plus CSV persistence.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{norm, Matrix};
use crate::rng::StreamKey;
use crate::text::{data_lines, fmt_f64, parse_f64, read_to_string, write_string};

/// Inputs `x` (one row per sample) and labels `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub meta: DatasetMeta,
}

/// Provenance of a dataset.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetMeta {
    pub generator: String,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::shape(format!("{} input rows but {} labels", x.rows(), y.len())));
        }
        if !x.as_slice().iter().chain(&y).all(|v| v.is_finite()) {
            return Err(Error::numeric("dataset contains non-finite values"));
        }
        Ok(Self { x, y, meta: DatasetMeta::default() })
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }
}

/// Mixture of a point mass at the origin (mass `m1`), the uniform measure on
/// the unit sphere (mass `m2`) and a radial shell with `‖x‖ ~ U[r_lo, r_hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialMixtureConfig {
    pub d: usize,
    pub m1: f64,
    pub m2: f64,
    pub r_lo: f64,
    pub r_hi: f64,
}

impl RadialMixtureConfig {
    pub fn new(d: usize) -> Self {
        Self { d, m1: 0.2, m2: 0.2, r_lo: 1.0, r_hi: 7.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if !(0.0..=1.0).contains(&self.m1) || !(0.0..=1.0).contains(&self.m2) || self.m1 + self.m2 > 1.0 {
            return Err(Error::domain(format!("invalid masses m1={}, m2={}", self.m1, self.m2)));
        }
        if !(self.r_lo >= 1.0 && self.r_hi >= self.r_lo && self.r_hi.is_finite()) {
            return Err(Error::domain(format!("outer radius range [{}, {}] must satisfy 1 <= r_lo <= r_hi", self.r_lo, self.r_hi)));
        }
        Ok(())
    }
}

/// Uniform point on `S^{d-1}` by normalizing a standard Gaussian vector.
pub fn sample_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::domain("sphere dimension must be positive"));
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-300 {
            return Ok(v.into_iter().map(|c| c / n).collect());
        }
    }
}

/// `n` rows drawn from the radial mixture; row `i` uses sub-stream `i`.
pub fn sample_radial_mixture(cfg: &RadialMixtureConfig, n: usize, stream: &StreamKey) -> Result<Matrix> {
    cfg.validate()?;
    let d = cfg.d;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.rng(i as u64);
            let u: f64 = rng.random();
            if u < cfg.m1 {
                vec![0.0; d]
            } else if u < cfg.m1 + cfg.m2 {
                sample_sphere(d, &mut rng).expect("d > 0")
            } else {
                let r = rng.random_range(cfg.r_lo..=cfg.r_hi);
                sample_sphere(d, &mut rng).expect("d > 0").into_iter().map(|c| r * c).collect()
            }
        })
        .collect();
    let mut data = Vec::with_capacity(n * d);
    for r in rows {
        data.extend(r);
    }
    Matrix::from_vec(n, d, data)
}

/// Labels of the bump problem: 1 at the origin, 0 for `‖x‖ ≥ 1`.
pub fn label_bump(x: &Matrix) -> Result<Vec<f64>> {
    x.iter_rows()
        .enumerate()
        .map(|(i, row)| {
            let r = norm(row);
            if r == 0.0 {
                Ok(1.0)
            } else if r >= 1.0 - 1e-9 {
                Ok(0.0)
            } else {
                Err(Error::domain(format!("row {i} has norm {r} inside the open unit ball, where the target is undefined")))
            }
        })
        .collect()
}

/// Radial bump dataset: mixture samples labelled by [`label_bump`].
pub fn dataset_radial_bump(cfg: &RadialMixtureConfig, n: usize, stream: &StreamKey) -> Result<Dataset> {
    let x = sample_radial_mixture(cfg, n, stream)?;
    let y = label_bump(&x)?;
    Ok(Dataset::new(x, y)?.with_meta(DatasetMeta {
        generator: format!("radial_bump(d={},m1={},m2={},r=[{},{}])", cfg.d, cfg.m1, cfg.m2, cfg.r_lo, cfg.r_hi),
        seed: Some(stream.seed),
        config_hash: None,
    }))
}

/// `k` equi-spaced points in `(lo, hi)` mirrored to the negative axis, with
/// labels `|x|`. The default grid is strictly interior,
/// `x_j = lo + j(hi-lo)/(k+1)`; `inclusive` uses both endpoints instead.
pub fn dataset_1d_abs(k_per_side: usize, interval: (f64, f64), inclusive: bool) -> Result<Dataset> {
    let (lo, hi) = interval;
    if k_per_side < 2 {
        return Err(Error::domain("need at least 2 points per side"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain(format!("invalid interval ({lo}, {hi})")));
    }
    let k = k_per_side;
    let pos: Vec<f64> = if inclusive {
        (0..k).map(|j| lo + j as f64 * (hi - lo) / (k - 1) as f64).collect()
    } else {
        (1..=k).map(|j| lo + j as f64 * (hi - lo) / (k + 1) as f64).collect()
    };
    let xs: Vec<f64> = pos.iter().rev().map(|v| -v).chain(pos.iter().copied()).collect();
    let y = xs.iter().map(|v| v.abs()).collect();
    Ok(Dataset::new(Matrix::from_vec(xs.len(), 1, xs)?, y)?.with_meta(DatasetMeta {
        generator: format!("abs1d(k={k},({lo},{hi}),inclusive={inclusive})"),
        seed: None,
        config_hash: None,
    }))
}

pub fn render_dataset(data: &Dataset) -> String {
    let d = data.dim();
    let mut out: String = (1..=d).map(|j| format!("x_{j},")).collect();
    out.push_str("y\n");
    for (row, y) in data.x.iter_rows().zip(&data.y) {
        for v in row {
            out.push_str(&fmt_f64(*v));
            out.push(',');
        }
        out.push_str(&fmt_f64(*y));
        out.push('\n');
    }
    out
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = data_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "empty dataset file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let d = cols.len().saturating_sub(1);
    let expected: Vec<String> = (1..=d).map(|j| format!("x_{j}")).chain(std::iter::once("y".into())).collect();
    if d == 0 || cols != expected {
        return Err(Error::parse(hline, format!("expected header x_1..x_d,y, got {header:?}")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(Error::parse(n, format!("expected {} columns, found {}", d + 1, fields.len())));
        }
        for f in &fields[..d] {
            xs.push(parse_f64(f, n)?);
        }
        ys.push(parse_f64(fields[d], n)?);
    }
    Dataset::new(Matrix::from_vec(ys.len(), d, xs)?, ys)
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    write_string(path, &render_dataset(data))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut data = parse_dataset(&read_to_string(path)?)?;
    data.meta.generator = format!("file({})", path.display());
    Ok(data)
}
