//! Coupled (m, λ, n) sweeps with per-triple medians over seeds.
//!
//! Sweep settings live under `sweep.*` next to an ordinary run config:
//! `sweep.triples = 100:0.1, 400:0.05, 1600:0.025` (each `m:λ[:n]`),
//! `sweep.seeds = 0,1,2` and `sweep.coupling = lambda_m | lambda_n | none`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use minnorm_core::text::fmt_f64;

use crate::analysis::Report;
use crate::config::{KeyValues, RunConfig};
use crate::error::{ExpError, ExpResult};
use crate::run::run_training;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triple {
    pub m: usize,
    pub lambda: f64,
    pub n: Option<usize>,
}

impl FromStr for Triple {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let bad = || format!("expected m:lambda[:n], got {s:?}");
        let (m, lambda, n) = match parts.as_slice() {
            [m, l] => (m, l, None),
            [m, l, n] => (m, l, Some(n.parse::<usize>().map_err(|_| bad())?)),
            _ => return Err(bad()),
        };
        let m: usize = m.parse().map_err(|_| bad())?;
        let lambda: f64 = lambda.parse().map_err(|_| bad())?;
        if m == 0 || !(lambda >= 0.0 && lambda.is_finite()) || n == Some(0) {
            return Err(format!("{s:?}: need m ≥ 1, finite λ ≥ 0 and n ≥ 1"));
        }
        Ok(Self { m, lambda, n })
    }
}

/// Which scaling law the triples must follow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    /// Fixed data: m ↑, λ ↓ and m·λ ↑.
    LambdaM,
    /// Growing data: n ↑, λ ↓ and ln n / (λ √n) ↓.
    LambdaN,
    None,
}

impl FromStr for Coupling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "lambda_m" => Ok(Coupling::LambdaM),
            "lambda_n" => Ok(Coupling::LambdaN),
            "none" => Ok(Coupling::None),
            other => Err(format!("unknown coupling {other:?} (expected lambda_m, lambda_n or none)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub triples: Vec<Triple>,
    pub seeds: Vec<u64>,
    pub coupling: Coupling,
}

fn strictly(values: &[f64], increasing: bool) -> bool {
    values.windows(2).all(|w| if increasing { w[0] < w[1] } else { w[0] > w[1] })
}

impl SweepSpec {
    /// Reads and removes the `sweep.*` keys from `kv`.
    pub fn take_from(kv: &mut KeyValues) -> ExpResult<Self> {
        let mut sk = kv.take_prefix("sweep");
        let mut get = |k: &str| sk.0.remove(k);
        let err = |line: usize, key: &str, msg: String| ExpError::config(format!("line {line}: {key}: {msg}"));
        let (triples_text, tl) = get("sweep.triples").ok_or_else(|| ExpError::config("sweep.triples is required"))?;
        let triples = triples_text
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| t.parse::<Triple>().map_err(|e| err(tl, "sweep.triples", e)))
            .collect::<ExpResult<Vec<_>>>()?;
        let seeds = match get("sweep.seeds") {
            None => vec![0],
            Some((v, line)) => v
                .split(',')
                .map(|s| s.trim().parse::<u64>().map_err(|e| err(line, "sweep.seeds", e.to_string())))
                .collect::<ExpResult<Vec<_>>>()?,
        };
        let coupling = match get("sweep.coupling") {
            None => Coupling::LambdaM,
            Some((v, line)) => v.parse().map_err(|e| err(line, "sweep.coupling", e))?,
        };
        if let Some((k, (_, line))) = sk.0.iter().next() {
            return Err(ExpError::config(format!("line {line}: unknown key '{k}'")));
        }
        let spec = Self { triples, seeds, coupling };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> ExpResult<()> {
        if self.triples.is_empty() || self.seeds.is_empty() {
            return Err(ExpError::config("sweep needs at least one triple and one seed"));
        }
        let lambdas: Vec<f64> = self.triples.iter().map(|t| t.lambda).collect();
        match self.coupling {
            Coupling::None => Ok(()),
            Coupling::LambdaM => {
                let ms: Vec<f64> = self.triples.iter().map(|t| t.m as f64).collect();
                let products: Vec<f64> = self.triples.iter().map(|t| t.m as f64 * t.lambda).collect();
                if !strictly(&ms, true) {
                    return Err(ExpError::config("sweep.coupling = lambda_m: m must increase strictly along sweep.triples"));
                }
                if !strictly(&lambdas, false) {
                    return Err(ExpError::config("sweep.coupling = lambda_m: lambda must decrease strictly along sweep.triples"));
                }
                if !strictly(&products, true) {
                    return Err(ExpError::config("sweep.coupling = lambda_m: m * lambda must increase strictly along sweep.triples"));
                }
                Ok(())
            }
            Coupling::LambdaN => {
                let Some(ns) = self.triples.iter().map(|t| t.n.map(|n| n as f64)).collect::<Option<Vec<f64>>>() else {
                    return Err(ExpError::config("sweep.coupling = lambda_n: every triple needs an n"));
                };
                let rates: Vec<f64> = ns.iter().zip(&lambdas).map(|(n, l)| n.ln() / (l * n.sqrt())).collect();
                if !strictly(&ns, true) {
                    return Err(ExpError::config("sweep.coupling = lambda_n: n must increase strictly along sweep.triples"));
                }
                if !strictly(&lambdas, false) {
                    return Err(ExpError::config("sweep.coupling = lambda_n: lambda must decrease strictly along sweep.triples"));
                }
                if !strictly(&rates, false) {
                    return Err(ExpError::config("sweep.coupling = lambda_n: ln n / (lambda sqrt n) must decrease strictly"));
                }
                Ok(())
            }
        }
    }
}

/// Config text for one sweep run.
pub fn triple_config(base: &KeyValues, base_dir: &Path, triple: &Triple, seed: u64, run_id: &str) -> ExpResult<RunConfig> {
    let mut kv = base.clone();
    kv.set("model.m", triple.m.to_string());
    kv.set("lambda", fmt_f64(triple.lambda));
    kv.set("seed", seed.to_string());
    kv.set("run_id", run_id);
    if let Some(n) = triple.n {
        match kv.0.get("data.kind").map(|(v, _)| v.as_str()).unwrap_or("abs1d") {
            "abs1d" if n % 2 == 0 => kv.set("data.k", (n / 2).to_string()),
            "abs1d" => return Err(ExpError::config(format!("abs1d data have an even size, got n = {n}"))),
            "radial" => kv.set("data.n", n.to_string()),
            other => return Err(ExpError::config(format!("data.kind = {other} has a fixed size; drop n from sweep.triples"))),
        }
    }
    RunConfig::from_kv(&kv, base_dir)
}

/// Per-run numbers collected by the sweep.
pub fn run_metrics(report: &Report) -> Vec<f64> {
    match report {
        Report::OneD(r) => {
            let tv_gap = r.tv_lower_bound.map(|b| (r.tv.tv - b).abs()).unwrap_or(f64::NAN);
            match &r.minnorm {
                Some(m) => vec![m.data_misfit, m.convexity_defect, m.left_slope_dev, m.right_slope_dev, r.tv.tv, tv_gap],
                None => vec![f64::NAN, f64::NAN, f64::NAN, f64::NAN, r.tv.tv, tv_gap],
            }
        }
        Report::Radial(r) => vec![r.fit.r, r.fit.l2_discrepancy],
    }
}

pub const ONE_D_METRICS: &[&str] = &["misfit", "convexity_defect", "left_dev", "right_dev", "tv", "tv_gap"];
pub const RADIAL_METRICS: &[&str] = &["rescale", "discrepancy"];

#[derive(Clone, Debug)]
pub struct SweepRun {
    pub triple: usize,
    pub seed: u64,
    pub run_id: String,
    /// Metrics of a completed run, or the failure message.
    pub result: Result<Vec<f64>, String>,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub metric_names: &'static [&'static str],
    pub runs: Vec<SweepRun>,
    /// `medians[t][k]`: median of metric `k` over the completed seeds of triple `t`.
    pub medians: Vec<Vec<f64>>,
    /// Whether the last metric (`tv_gap` or `discrepancy`) has nonincreasing
    /// medians along the sweep.
    pub monotone: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Runs every (triple, seed) pair. Failed runs are recorded and skipped in
/// the medians. With `out`, each run writes `out/<run_id>/` and the summary
/// goes to `out/sweep.csv`.
pub fn run_sweep(base: &KeyValues, base_dir: &Path, spec: &SweepSpec, out: Option<&Path>) -> ExpResult<SweepReport> {
    spec.validate()?;
    let base_id = base.0.get("run_id").map(|(v, _)| v.clone()).unwrap_or_else(|| "sweep".into());
    let jobs: Vec<(usize, u64, RunConfig)> = spec
        .triples
        .iter()
        .enumerate()
        .flat_map(|(t, triple)| spec.seeds.iter().map(move |&s| (t, s, triple)))
        .map(|(t, s, triple)| Ok((t, s, triple_config(base, base_dir, triple, s, &format!("{base_id}-t{t}-s{s}"))?)))
        .collect::<ExpResult<_>>()?;
    let dims: Vec<Option<usize>> = jobs.iter().map(|j| j.2.input_dim()).collect();
    let runs: Vec<SweepRun> = jobs
        .into_par_iter()
        .map(|(triple, seed, cfg)| {
            let result = match run_training(&cfg, out) {
                Ok(r) => match (&r.report, &r.manifest.status) {
                    (Some(rep), _) => Ok(run_metrics(rep)),
                    (None, status) => Err(format!("{status:?}")),
                },
                Err(e) => Err(e.to_string()),
            };
            SweepRun { triple, seed, run_id: cfg.run_id.clone(), result }
        })
        .collect();
    let one_d = match runs.iter().find_map(|r| r.result.as_ref().ok()) {
        Some(v) => v.len() == ONE_D_METRICS.len(),
        None => dims.iter().all(|d| *d == Some(1)),
    };
    let metric_names = if one_d { ONE_D_METRICS } else { RADIAL_METRICS };
    let medians: Vec<Vec<f64>> = (0..spec.triples.len())
        .map(|t| {
            (0..metric_names.len())
                .map(|k| median(runs.iter().filter(|r| r.triple == t).filter_map(|r| r.result.as_ref().ok().map(|v| v[k])).collect()))
                .collect()
        })
        .collect();
    let last = metric_names.len() - 1;
    let monotone = medians.windows(2).all(|w| w[1][last] <= w[0][last]) && medians.iter().all(|m| m[last].is_finite());
    let report = SweepReport { spec: spec.clone(), metric_names, runs, medians, monotone };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
        let p = dir.join("sweep.csv");
        fs::write(&p, report.render_csv()).map_err(|e| ExpError::io(&p, e))?;
    }
    Ok(report)
}

impl SweepReport {
    /// Per-triple medians, then one row per run.
    pub fn render_csv(&self) -> String {
        let mut s = format!("triple,m,lambda,n,completed,failed,{}\n", self.metric_names.join(","));
        for (t, (triple, med)) in self.spec.triples.iter().zip(&self.medians).enumerate() {
            let done = self.runs.iter().filter(|r| r.triple == t && r.result.is_ok()).count();
            let failed = self.runs.iter().filter(|r| r.triple == t && r.result.is_err()).count();
            let n = triple.n.map(|n| n.to_string()).unwrap_or_default();
            let meds: Vec<String> = med.iter().map(|&v| fmt_f64(v)).collect();
            let _ = writeln!(s, "{t},{},{},{n},{done},{failed},{}", triple.m, fmt_f64(triple.lambda), meds.join(","));
        }
        let _ = writeln!(s, "# monotone={}", self.monotone);
        for r in &self.runs {
            match &r.result {
                Ok(_) => {
                    let _ = writeln!(s, "# run {} ok", r.run_id);
                }
                Err(e) => {
                    let _ = writeln!(s, "# run {} failed: {}", r.run_id, e.replace('\n', " "));
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(text: &str) -> ExpResult<SweepSpec> {
        SweepSpec::take_from(&mut KeyValues::parse(text).unwrap())
    }

    #[test]
    fn parses_triples_and_seeds() {
        let s = spec("sweep.triples = 100:0.1, 400:0.05, 1600:0.025\nsweep.seeds = 0,1,2,3,4\n").unwrap();
        assert_eq!(s.triples.len(), 3);
        assert_eq!(s.triples[2], Triple { m: 1600, lambda: 0.025, n: None });
        assert_eq!(s.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.coupling, Coupling::LambdaM);
    }

    #[test]
    fn invalid_couplings_rejected() {
        // λ constant while claiming decay
        let e = spec("sweep.triples = 100:0.1, 400:0.1").unwrap_err().to_string();
        assert!(e.contains("lambda must decrease"), "{e}");
        // λ decays faster than 1/m
        let e = spec("sweep.triples = 100:0.1, 400:0.01").unwrap_err().to_string();
        assert!(e.contains("m * lambda"), "{e}");
        let e = spec("sweep.triples = 100:0.1:100, 400:0.05\nsweep.coupling = lambda_n").unwrap_err().to_string();
        assert!(e.contains("needs an n"), "{e}");
        assert!(spec("sweep.triples = 100:0.1:100, 400:0.05:10000\nsweep.coupling = lambda_n").is_ok());
        assert!(spec("sweep.triples = 100:0.1, 400:0.1\nsweep.coupling = none").is_ok());
        assert!(spec("sweep.triples = 100:0.1\nsweep.bogus = 1").is_err());
        assert!(spec("sweep.triples = 0:0.1").is_err());
    }

    #[test]
    fn single_triple_sweep_matches_a_plain_run() {
        let base = KeyValues::parse("run_id = one\nmodel.m = 8\noptim.epochs = 30\ndata.k = 3\n").unwrap();
        let s = SweepSpec { triples: vec![Triple { m: 8, lambda: 0.0, n: None }], seeds: vec![4], coupling: Coupling::LambdaM };
        let sweep = run_sweep(&base, Path::new("."), &s, None).unwrap();
        let cfg = triple_config(&base, Path::new("."), &s.triples[0], 4, "one-t0-s4").unwrap();
        let direct = run_training(&cfg, None).unwrap();
        let expected = run_metrics(direct.report.as_ref().unwrap());
        let got = sweep.runs[0].result.as_ref().unwrap();
        assert_eq!(got.len(), expected.len());
        for (a, b) in got.iter().zip(&expected) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
        assert_eq!(sweep.medians[0].len(), ONE_D_METRICS.len());
    }

    #[test]
    fn failed_runs_are_recorded() {
        let base = KeyValues::parse("model.m = 4\noptim.kind = gd\noptim.lr = 1e6\noptim.epochs = 50\ndata.k = 3\n").unwrap();
        let s = SweepSpec { triples: vec![Triple { m: 4, lambda: 0.0, n: None }], seeds: vec![0, 1], coupling: Coupling::None };
        let sweep = run_sweep(&base, Path::new("."), &s, None).unwrap();
        assert!(sweep.runs.iter().all(|r| r.result.is_err()));
        assert!(sweep.medians[0].iter().all(|v| v.is_nan()));
        assert!(!sweep.monotone);
    }

    #[test]
    fn median_of_finite_values() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, f64::NAN, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }
}
