//! Monte-Carlo radial profiles of learned functions, profile CSV I/O, and
//! fitting the rescale factor `r` in `f*(r·x)` against a reference profile.

use rayon::prelude::*;
use std::path::Path;

use crate::datagen::sample_sphere;
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::text::{data_lines, fmt_f64, parse_f64, read_to_string, write_string};

/// Default number of random directions per profile.
pub const DEFAULT_N_DIRS: usize = 500;

/// Mean and standard deviation of a function over spheres of given radii.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub radii: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `false` when loaded from a file without a std column (std is then 0).
    pub has_std: bool,
    /// Directions per radius; 0 when unknown.
    pub n_dirs: usize,
    /// Input dimension; 0 when unknown.
    pub d: usize,
}

impl RadialProfile {
    /// A profile without spread information, e.g. a tabulated reference.
    pub fn from_values(radii: Vec<f64>, mean: Vec<f64>) -> Result<Self> {
        let n = radii.len();
        let p = Self { radii, mean, std: vec![0.0; n], has_std: false, n_dirs: 0, d: 0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != self.radii.len() || self.std.len() != self.radii.len() {
            return Err(Error::shape("profile columns differ in length"));
        }
        if self.radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("profile radii must be strictly increasing"));
        }
        if self.std.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::domain("profile std must be >= 0"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}

/// `count` evenly spaced radii on `[lo, hi]`.
pub fn linear_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Profile of `evaluator` over `n_dirs` directions shared by all radii.
///
/// Direction `j` comes from sub-stream `j`; radii are evaluated in parallel
/// with a fixed summation order, so results do not depend on thread count.
pub fn radial_stats<F>(evaluator: F, d: usize, radii: &[f64], n_dirs: usize, stream: &StreamKey) -> Result<RadialProfile>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_dirs < 2 {
        return Err(Error::domain("need at least 2 directions"));
    }
    if radii.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::domain("radii must be >= 0"));
    }
    if d == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    let dirs: Vec<Vec<f64>> = (0..n_dirs as u64)
        .map(|j| sample_sphere(d, &mut stream.rng(j)))
        .collect::<Result<_>>()?;
    let stats: Vec<(f64, f64)> = radii
        .par_iter()
        .map(|&r| {
            let mut x = vec![0.0; d];
            let vals: Vec<f64> = dirs
                .iter()
                .map(|nu| {
                    x.iter_mut().zip(nu).for_each(|(xi, ni)| *xi = r * ni);
                    evaluator(&x)
                })
                .collect();
            // shift by the first value so identical values give std exactly 0
            let shift = vals[0];
            let n = vals.len() as f64;
            let dm = vals.iter().map(|v| v - shift).sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - shift - dm) * (v - shift - dm)).sum::<f64>() / n;
            (shift + dm, var.sqrt())
        })
        .collect();
    let (mean, std) = stats.into_iter().unzip();
    let profile = RadialProfile { radii: radii.to_vec(), mean, std, has_std: true, n_dirs, d };
    if profile.radii.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::domain("radii must be strictly increasing"));
    }
    Ok(profile)
}

/// CSV with header `r,mean,std` (or `r,mean` when std is absent) and a
/// `# d=..,n_dirs=..` comment line.
pub fn render_profile(profile: &RadialProfile) -> String {
    let mut s = format!("# d={},n_dirs={}\n", profile.d, profile.n_dirs);
    s.push_str(if profile.has_std { "r,mean,std\n" } else { "r,mean\n" });
    for k in 0..profile.len() {
        s.push_str(&fmt_f64(profile.radii[k]));
        s.push(',');
        s.push_str(&fmt_f64(profile.mean[k]));
        if profile.has_std {
            s.push(',');
            s.push_str(&fmt_f64(profile.std[k]));
        }
        s.push('\n');
    }
    s
}

pub fn parse_profile(text: &str) -> Result<RadialProfile> {
    let (mut d, mut n_dirs) = (0usize, 0usize);
    for (line, l) in text.lines().enumerate() {
        let Some(meta) = l.trim().strip_prefix('#') else { continue };
        for kv in meta.split(',') {
            let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| Error::parse(line + 1, format!("bad metadata {kv:?}")));
            match kv.trim().split_once('=') {
                Some(("d", v)) => d = parse(v)?,
                Some(("n_dirs", v)) => n_dirs = parse(v)?,
                _ => {}
            }
        }
    }
    let mut lines = data_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "missing header"))?;
    let has_std = match header.split(',').map(str::trim).collect::<Vec<_>>().as_slice() {
        ["r", "mean", "std"] => true,
        ["r", "mean"] => false,
        _ => return Err(Error::parse(hline, format!("expected header r,mean[,std], got {header:?}"))),
    };
    let cols = if has_std { 3 } else { 2 };
    let (mut radii, mut mean, mut std) = (vec![], vec![], vec![]);
    for (line, l) in lines {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != cols {
            return Err(Error::parse(line, format!("expected {cols} fields, got {}", fields.len())));
        }
        let r = parse_f64(fields[0], line)?;
        if let Some(&prev) = radii.last() {
            if !(r > prev) {
                return Err(Error::parse(line, format!("radius {r} not greater than previous {prev}")));
            }
        }
        let s = if has_std { parse_f64(fields[2], line)? } else { 0.0 };
        if !(s >= 0.0) {
            return Err(Error::parse(line, "negative std"));
        }
        radii.push(r);
        mean.push(parse_f64(fields[1], line)?);
        std.push(s);
    }
    Ok(RadialProfile { radii, mean, std, has_std, n_dirs, d })
}

pub fn save_profile(profile: &RadialProfile, path: &Path) -> Result<()> {
    write_string(path, &render_profile(profile))
}

pub fn load_profile(path: &Path) -> Result<RadialProfile> {
    parse_profile(&read_to_string(path)?)
}

/// Piecewise-linear interpolation of the mean, constant beyond both ends.
pub fn eval_profile(profile: &RadialProfile, r: f64) -> Result<f64> {
    let (xs, ys) = (&profile.radii, &profile.mean);
    let n = xs.len();
    if n == 0 {
        return Err(Error::domain("empty profile"));
    }
    if r <= xs[0] {
        return Ok(ys[0]);
    }
    if r >= xs[n - 1] {
        return Ok(ys[n - 1]);
    }
    let k = xs.partition_point(|&x| x <= r);
    let t = (r - xs[k - 1]) / (xs[k] - xs[k - 1]);
    Ok(ys[k - 1] + t * (ys[k] - ys[k - 1]))
}

/// Candidate rescale factors.
#[derive(Clone, Debug, PartialEq)]
pub struct RescaleGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for RescaleGrid {
    fn default() -> Self {
        Self { lo: 0.125, hi: 2.0, count: 200 }
    }
}

impl RescaleGrid {
    /// `lo:hi:count`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, count] = parts.as_slice() else {
            return Err(Error::domain(format!("rescale grid must be lo:hi:count, got {s:?}")));
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| Error::domain(format!("bad number {v:?} in rescale grid")));
        let g = Self {
            lo: num(lo)?,
            hi: num(hi)?,
            count: count.trim().parse().map_err(|_| Error::domain(format!("bad count {count:?} in rescale grid")))?,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn render(&self) -> String {
        format!("{}:{}:{}", fmt_f64(self.lo), fmt_f64(self.hi), self.count)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::domain("empty rescale grid"));
        }
        if !(self.lo > 0.0 && self.hi >= self.lo && self.hi.is_finite()) {
            return Err(Error::domain("rescale grid needs 0 < lo <= hi"));
        }
        Ok(())
    }

    /// Log-spaced values from `lo` to `hi`.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..self.count)
            .map(|i| match i {
                0 => self.lo,
                i if i + 1 == self.count => self.hi,
                i => (a + (b - a) * i as f64 / (self.count - 1) as f64).exp(),
            })
            .collect()
    }
}

/// Best rescale factor on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RescaleFit {
    pub r: f64,
    pub l2_discrepancy: f64,
    pub grid: RescaleGrid,
}

/// Trapezoid weights of a sorted grid.
fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|k| {
            let left = if k > 0 { x[k] - x[k - 1] } else { 0.0 };
            let right = if k + 1 < n { x[k + 1] - x[k] } else { 0.0 };
            (left + right) / 2.0
        })
        .collect()
}

/// Squared discrepancy between the measured mean and `reference(r·ρ)`.
pub fn rescale_discrepancy(measured: &RadialProfile, reference: &RadialProfile, r: f64) -> Result<f64> {
    let w = trapezoid_weights(&measured.radii);
    let mut s = 0.0;
    for k in 0..measured.len() {
        let diff = measured.mean[k] - eval_profile(reference, r * measured.radii[k])?;
        s += w[k] * diff * diff;
    }
    Ok(s)
}

/// Grid search for `r* = argmin_r Σ_k w_k (mean(ρ_k) − ref(r·ρ_k))²`; ties go
/// to the smaller `r`.
pub fn fit_rescale(measured: &RadialProfile, reference: &RadialProfile, grid: &RescaleGrid) -> Result<RescaleFit> {
    grid.validate()?;
    if measured.is_empty() || reference.is_empty() {
        return Err(Error::domain("empty profile"));
    }
    let r_max = measured.radii[measured.len() - 1];
    if r_max * grid.hi < reference.radii[0] || measured.radii[0] * grid.lo > reference.radii[reference.len() - 1] {
        return Err(Error::domain("measured and reference radii do not overlap"));
    }
    let mut best = (f64::NAN, f64::INFINITY);
    for r in grid.values() {
        let e = rescale_discrepancy(measured, reference, r)?;
        if e < best.1 {
            best = (r, e);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::numeric("non-finite rescale discrepancy"));
    }
    Ok(RescaleFit { r: best.0, l2_discrepancy: best.1, grid: grid.clone() })
}

/// Synthetic stand-in for the tabulated minimum-norm bump in dimension `d`:
/// `(1 − r)_+^{(d+1)/2}` on `count` radii in `[0, 1.5]`. It equals 1 at the
/// origin and its first `(d−1)/2` derivatives vanish at `r = 1`.
pub fn surrogate_profile(d: usize, count: usize) -> Result<RadialProfile> {
    if d == 0 || count < 2 {
        return Err(Error::domain("surrogate profile needs d >= 1 and count >= 2"));
    }
    let p = (d as f64 + 1.0) / 2.0;
    let radii = linear_radii(0.0, 1.5, count);
    let mean = radii.iter().map(|r| (1.0 - r).max(0.0).powf(p)).collect();
    let mut prof = RadialProfile::from_values(radii, mean)?;
    prof.d = d;
    Ok(prof)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::norm;
    use proptest::prelude::*;

    #[test]
    fn radially_symmetric_and_constant_evaluators() {
        let key = StreamKey::new(1, "dirs");
        let radii = linear_radii(0.0, 3.0, 13);
        let c = radial_stats(|_| 0.7, 5, &radii, 100, &key).unwrap();
        assert!(c.mean.iter().all(|&m| m == 0.7));
        assert!(c.std.iter().all(|&s| s == 0.0));
        let g = radial_stats(|x| (-norm(x)).exp(), 5, &radii, 100, &key).unwrap();
        for (k, &r) in radii.iter().enumerate() {
            assert!(g.std[k] < 1e-14, "{}", g.std[k]);
            assert!((g.mean[k] - (-r).exp()).abs() < 1e-14);
        }
        assert_eq!(g.std[0], 0.0);
    }

    #[test]
    fn first_coordinate_moments() {
        let p = radial_stats(|x| x[0], 4, &[2.0], 100_000, &StreamKey::new(2, "dirs")).unwrap();
        assert!(p.mean[0].abs() < 0.01, "{}", p.mean[0]);
        assert!((p.std[0] - 1.0).abs() < 0.02, "{}", p.std[0]);
    }

    #[test]
    fn doubling_directions_is_consistent() {
        let f = |x: &[f64]| x[0] * x[0] + x[1];
        let a = radial_stats(f, 3, &[1.0, 2.0], 2000, &StreamKey::new(3, "dirs")).unwrap();
        let b = radial_stats(f, 3, &[1.0, 2.0], 4000, &StreamKey::new(3, "dirs")).unwrap();
        for k in 0..2 {
            let tol = 3.0 * a.std[k] / 2000f64.sqrt();
            assert!((a.mean[k] - b.mean[k]).abs() < tol, "{k}");
        }
    }

    #[test]
    fn independent_of_thread_count() {
        let f = |x: &[f64]| x.iter().map(|v| v.sin()).sum::<f64>();
        let key = StreamKey::new(4, "dirs");
        let radii = linear_radii(0.0, 4.0, 17);
        let a = radial_stats(f, 6, &radii, 300, &key).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| radial_stats(f, 6, &radii, 300, &key).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_inputs() {
        let key = StreamKey::new(0, "dirs");
        assert!(radial_stats(|_| 0.0, 3, &[1.0], 1, &key).is_err());
        assert!(radial_stats(|_| 0.0, 3, &[-1.0], 10, &key).is_err());
    }

    #[test]
    fn eval_examples() {
        let p = RadialProfile::from_values(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(eval_profile(&p, 0.5).unwrap(), 0.5);
        assert_eq!(eval_profile(&p, 3.0).unwrap(), 0.0);
        assert_eq!(eval_profile(&p, -1.0).unwrap(), 1.0);
        let empty = RadialProfile::from_values(vec![], vec![]).unwrap();
        assert!(eval_profile(&empty, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let p = radial_stats(|x| x[0].abs(), 3, &[0.0, 0.5, 1.25], 10, &StreamKey::new(5, "dirs")).unwrap();
        assert_eq!(parse_profile(&render_profile(&p)).unwrap(), p);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        save_profile(&p, &path).unwrap();
        assert_eq!(load_profile(&path).unwrap(), p);

        let err = parse_profile("r,mean\n0.0,1.0\n0.5,0.2\n0.25,0.1\n").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        let no_std = parse_profile("r,mean\n0.0,1.0\n1.0,0.0\n").unwrap();
        assert!(!no_std.has_std);
        assert_eq!(no_std.std, vec![0.0, 0.0]);
        assert!(parse_profile("r,mean\n0.0,x\n").unwrap_err().to_string().contains("line 2"));
    }

    #[test]
    fn rescale_grid_parse_and_values() {
        let g = RescaleGrid::parse("0.125:2:200").unwrap();
        assert_eq!(g, RescaleGrid::default());
        let v = g.values();
        assert_eq!(v.len(), 200);
        assert_eq!((v[0], v[199]), (0.125, 2.0));
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(RescaleGrid::parse("1:2").is_err());
        assert!(RescaleGrid::parse("1:2:0").is_err());
        assert_eq!(RescaleGrid::parse(&g.render()).unwrap(), g);
    }

    #[test]
    fn fit_identity_and_known_rescale() {
        let reference = surrogate_profile(3, 301).unwrap();
        let grid = RescaleGrid::default();
        let fit = fit_rescale(&reference, &reference, &grid).unwrap();
        let step = (grid.hi / grid.lo).powf(1.0 / (grid.count - 1) as f64);
        assert!(fit.r / step < 1.0 && 1.0 < fit.r * step, "{}", fit.r);
        assert!(fit.l2_discrepancy < 1e-4);

        let radii = linear_radii(0.0, 3.0, 601);
        let mean = radii.iter().map(|&r| eval_profile(&reference, 0.5 * r).unwrap()).collect();
        let measured = RadialProfile::from_values(radii, mean).unwrap();
        let fit = fit_rescale(&measured, &reference, &grid).unwrap();
        assert!((fit.r / 0.5).ln().abs() <= step.ln() + 1e-12, "{}", fit.r);
        assert!(fit_rescale(&measured, &reference, &RescaleGrid { lo: 1.0, hi: 1.0, count: 0 }).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn fit_recovers_grid_value(idx in 0usize..200) {
            let reference = surrogate_profile(5, 401).unwrap();
            let grid = RescaleGrid::default();
            let r0 = grid.values()[idx];
            let radii = linear_radii(0.0, 1.5 / r0, 150);
            let mean = radii.iter().map(|&r| eval_profile(&reference, r0 * r).unwrap()).collect();
            let measured = RadialProfile::from_values(radii, mean).unwrap();
            let fit = fit_rescale(&measured, &reference, &grid).unwrap();
            prop_assert_eq!(fit.r, r0);
        }
    }
}
