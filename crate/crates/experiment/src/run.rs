//! End-to-end runs and their artifact directories.
//!
//! A run directory holds `config.txt` (canonical settings), `manifest.txt`,
//! `metrics.csv`, `params.csv`, `data.csv` and, for completed runs,
//! `report.csv`, `figure.svg` and (radial runs) `profile.csv`. Directories
//! are staged under a temporary name and renamed into place, so a crash
//! leaves either no directory or a complete one.

use std::fs;
use std::path::{Path, PathBuf};

use minnorm_core::analysis_radial::{load_profile, render_profile};
use minnorm_core::datagen::{load_dataset, render_dataset, Dataset};
use minnorm_core::nn_model::{load_checkpoint, render_checkpoint};
use minnorm_core::text::{fmt_f64, parse_f64};

use crate::analysis::{analyze, Report};
use crate::config::{hex_digest, KeyValues, ReferenceSource, RunConfig};
use crate::error::{ExpError, ExpResult};
use crate::svg::render_svg;
use crate::train::{build_data, init_model, render_metrics, train, Model, RunStatus, TrainOutcome};

pub const BUILD_ID: &str = concat!("minnorm-", env!("CARGO_PKG_VERSION"));

/// Identity and outcome of a run, stored as `manifest.txt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub build_id: String,
    pub status: RunStatus,
    pub epochs: usize,
    pub steps: usize,
}

impl Manifest {
    pub fn render(&self) -> String {
        let (status, last, message) = match &self.status {
            RunStatus::Completed => ("completed", self.epochs, String::new()),
            RunStatus::Diverged { last_finite_epoch, message } => ("failed", *last_finite_epoch, message.replace('\n', " ")),
        };
        format!(
            "run_id = {}\nconfig_hash = {}\nseed = {}\nbuild_id = {}\nstatus = {status}\nlast_finite_epoch = {last}\nepochs = {}\nsteps = {}\nmessage = {message}\n",
            self.run_id, self.config_hash, self.seed, self.build_id, self.epochs, self.steps
        )
    }

    pub fn parse(text: &str) -> ExpResult<Self> {
        let kv = KeyValues::parse(text)?;
        let get = |k: &str| -> ExpResult<&str> {
            kv.0.get(k).map(|(v, _)| v.as_str()).ok_or_else(|| ExpError::config(format!("manifest lacks '{k}'")))
        };
        let num = |k: &str| -> ExpResult<usize> { get(k)?.parse().map_err(|e| ExpError::config(format!("manifest {k}: {e}"))) };
        let status = match get("status")? {
            "completed" => RunStatus::Completed,
            "failed" => RunStatus::Diverged { last_finite_epoch: num("last_finite_epoch")?, message: get("message")?.to_string() },
            other => return Err(ExpError::config(format!("manifest status {other:?}"))),
        };
        Ok(Self {
            run_id: get("run_id")?.to_string(),
            config_hash: get("config_hash")?.to_string(),
            seed: get("seed")?.parse().map_err(|e| ExpError::config(format!("manifest seed: {e}")))?,
            build_id: get("build_id")?.to_string(),
            status,
            epochs: num("epochs")?,
            steps: num("steps")?,
        })
    }
}

/// Everything a run produced, in memory.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub manifest: Manifest,
    pub outcome: TrainOutcome,
    /// Present for completed runs.
    pub report: Option<Report>,
    pub data: Dataset,
    pub test: Option<Dataset>,
    /// Where the artifacts were written, if anywhere.
    pub dir: Option<PathBuf>,
}

fn render_params(model: &Model) -> String {
    match model {
        Model::Shallow(p) => render_checkpoint(p),
        Model::Deep(p) => {
            let widths: Vec<String> = p.widths().iter().map(|w| w.to_string()).collect();
            let mut s = format!("# deep widths={}\nvalue\n", widths.join(":"));
            for v in p.to_flat() {
                s.push_str(&fmt_f64(v));
                s.push('\n');
            }
            s
        }
    }
}

fn load_params(cfg: &RunConfig, d: usize, path: &Path) -> ExpResult<Model> {
    if cfg.model.depth == 1 {
        // the checkpoint holds parameters only; the training mode comes from the config
        let mut p = load_checkpoint(path)?;
        p.frozen_inner = cfg.model.frozen_inner;
        return Ok(Model::Shallow(p));
    }
    let text = fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
    let flat = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#') && l.trim() != "value")
        .map(|(i, l)| parse_f64(l, i + 1))
        .collect::<minnorm_core::Result<Vec<f64>>>()?;
    let mut model = init_model(cfg, d)?;
    model.set_flat(&flat)?;
    Ok(model)
}

/// Files of a report: `report.csv`, `figure.svg` and the radial profile.
pub fn report_files(report: &Report) -> ExpResult<Vec<(&'static str, String)>> {
    let mut files = vec![("report.csv", report.render_csv()), ("figure.svg", render_svg(report)?)];
    if let Report::Radial(r) = report {
        files.push(("profile.csv", render_profile(&r.profile)));
    }
    Ok(files)
}

/// Writes `files` into `dir` via a sibling staging directory and a rename.
/// An existing `dir` is replaced.
pub fn write_atomic(dir: &Path, files: &[(&str, String)]) -> ExpResult<()> {
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| ExpError::io(&parent, e))?;
    let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("run");
    let staging = tempfile::Builder::new()
        .prefix(&format!(".{name}.staging-"))
        .tempdir_in(&parent)
        .map_err(|e| ExpError::io(&parent, e))?;
    for (file, contents) in files {
        let p = staging.path().join(file);
        fs::write(&p, contents).map_err(|e| ExpError::io(&p, e))?;
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
    }
    let staged = staging.keep();
    fs::rename(&staged, dir).map_err(|e| ExpError::io(dir, e))?;
    Ok(())
}

/// Trains, analyzes and (when `out_root` is given) writes
/// `out_root/<run_id>/`.
pub fn run_training(cfg: &RunConfig, out_root: Option<&Path>) -> ExpResult<RunResult> {
    let (data, test) = build_data(cfg)?;
    let outcome = train(cfg, &data)?;
    let report = match outcome.status {
        RunStatus::Completed => Some(analyze(cfg, &outcome, &data, test.as_ref())?),
        RunStatus::Diverged { .. } => None,
    };
    let manifest = Manifest {
        run_id: cfg.run_id.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        build_id: BUILD_ID.to_string(),
        status: outcome.status.clone(),
        epochs: outcome.metrics.len(),
        steps: outcome.steps,
    };
    let dir = match out_root {
        None => None,
        Some(root) => {
            let dir = root.join(&cfg.run_id);
            let mut files = vec![
                ("config.txt", cfg.canonical_text().to_string()),
                ("manifest.txt", manifest.render()),
                ("metrics.csv", render_metrics(&outcome.metrics)),
                ("params.csv", render_params(&outcome.model)),
                ("data.csv", render_dataset(&data)),
            ];
            if let Some(t) = &test {
                files.push(("test.csv", render_dataset(t)));
            }
            if let ReferenceSource::File(p) = &cfg.analysis.reference {
                files.push(("reference.csv", render_profile(&load_profile(p)?)));
            }
            if let Some(r) = &report {
                files.extend(report_files(r)?);
            }
            write_atomic(&dir, &files)?;
            Some(dir)
        }
    };
    Ok(RunResult { manifest, outcome, report, data, test, dir })
}

/// A run directory read back from disk.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub manifest: Manifest,
    pub model: Model,
    pub data: Dataset,
    pub test: Option<Dataset>,
}

/// Reads a run directory, checking the manifest hash against `config.txt`.
pub fn load_run(dir: &Path) -> ExpResult<LoadedRun> {
    let read = |f: &str| -> ExpResult<String> {
        let p = dir.join(f);
        fs::read_to_string(&p).map_err(|e| ExpError::io(&p, e))
    };
    let text = read("config.txt")?;
    let manifest = Manifest::parse(&read("manifest.txt")?)?;
    if hex_digest(text.as_bytes()) != manifest.config_hash {
        return Err(ExpError::config(format!("{}: config.txt does not match the manifest hash", dir.display())));
    }
    // file references point at the copies stored in the run directory
    let mut kv = KeyValues::parse(&text)?;
    if kv.0.get("data.kind").is_some_and(|(v, _)| v == "file") {
        kv.set("data.path", "data.csv");
    }
    if kv.0.get("analysis.reference_profile").is_some_and(|(v, _)| v != "surrogate") {
        kv.set("analysis.reference_profile", "reference.csv");
    }
    let config = RunConfig::from_kv(&kv, dir)?;
    let data = load_dataset(&dir.join("data.csv"))?;
    let test_path = dir.join("test.csv");
    let test = if test_path.is_file() { Some(load_dataset(&test_path)?) } else { None };
    let model = load_params(&config, data.dim(), &dir.join("params.csv"))?;
    Ok(LoadedRun { dir: dir.to_path_buf(), config, manifest, model, data, test })
}

impl LoadedRun {
    /// Re-runs the analysis on the stored parameters.
    pub fn analyze(&self) -> ExpResult<Report> {
        let outcome = TrainOutcome { model: self.model.clone(), metrics: vec![], status: RunStatus::Completed, steps: self.manifest.steps };
        analyze(&self.config, &outcome, &self.data, self.test.as_ref())
    }

    /// Rewrites the report files in place.
    pub fn write_report(&self, report: &Report) -> ExpResult<()> {
        for (file, contents) in report_files(report)? {
            let p = self.dir.join(file);
            fs::write(&p, contents).map_err(|e| ExpError::io(&p, e))?;
        }
        Ok(())
    }
}
