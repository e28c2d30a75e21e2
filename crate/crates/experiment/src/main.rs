//! `minnorm` command-line interface.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use minnorm::analysis::Report;
use minnorm::config::{BarronNorm, DataKind, KeyValues, ReferenceSource, RunConfig};
use minnorm::run::{load_run, run_training, LoadedRun};
use minnorm::svg::render_svg;
use minnorm::sweep::{run_sweep, SweepSpec};
use minnorm::train::{build_data, Model, RunStatus};
use minnorm::{ExpError, ExpResult};
use minnorm_core::analysis_1d::natural_cubic_spline;
use minnorm_core::analysis_radial::RescaleGrid;
use minnorm_core::datagen::{load_dataset, Dataset};
use minnorm_core::rng::StreamKey;
use minnorm_core::text::fmt_f64;
use minnorm_core::theory_checks::{
    erm_bound_check, generalization_gap, rademacher_bound, rademacher_estimate, subgaussian_check, BoundReport,
    RademacherConfig, SubGaussianKind,
};

#[derive(Parser)]
#[command(name = "minnorm", version, about = "Minimum-norm interpolation experiments with shallow ReLU networks")]
struct Cli {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use one worker thread for bit-reproducible output.
    #[arg(long, global = true)]
    single_thread: bool,
    /// Exit with code 3 when a checked inequality fails.
    #[arg(long = "assert", global = true)]
    assert_checks: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one network and write its run directory.
    Train(SetArgs),
    /// Run a coupled (m, λ, n) sweep over seeds.
    Sweep(SetArgs),
    /// Recompute the 1D report of a run directory.
    #[command(name = "analyze-1d")]
    Analyze1d {
        #[arg(long)]
        run: PathBuf,
    },
    /// Recompute the radial report of a run directory.
    AnalyzeRadial {
        #[arg(long)]
        run: PathBuf,
        /// Tabulated reference profile CSV (default: as configured).
        #[arg(long)]
        reference_profile: Option<PathBuf>,
        /// Rescale grid `lo:hi:count`.
        #[arg(long)]
        rescale_grid: Option<String>,
    },
    /// Evaluate a theoretical inequality and append it to `checks.csv`.
    TheoryCheck(CheckArgs),
    /// Evaluate the natural cubic spline through 1D data.
    Spline {
        /// Dataset CSV (default: the configured training data).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Evaluation grid `lo:hi:count` (default: data range, 201 points).
        #[arg(long)]
        grid: Option<String>,
    },
    /// Redraw `figure.svg` of a run directory.
    Render {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Args)]
struct SetArgs {
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Rademacher,
    Subgaussian,
    ErmBound,
    Gap,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_enum)]
    kind: CheckKind,
    /// Dataset CSV for `rademacher` (default: run data or configured data).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run directory for `erm-bound` and `gap`.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Parameter radius Q for `rademacher`.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 20)]
    n_eps: usize,
    #[arg(long, default_value_t = 200)]
    n_candidates: usize,
    /// `max_mean`, `max_quantile[:δ]` or `mean_square[:δ]`.
    #[arg(long, default_value = "max_mean")]
    sg_kind: SubGaussianKind,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Barron norm of the target for `erm-bound` (default: as configured).
    #[arg(long)]
    barron: Option<f64>,
    /// Test dataset CSV for `gap` (default: the run's test set).
    #[arg(long)]
    test: Option<PathBuf>,
}

fn config_kv(cli: &Cli, set: &[String]) -> ExpResult<(KeyValues, PathBuf)> {
    let (mut kv, base) = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| ExpError::io(p, e))?;
            (KeyValues::parse(&text)?, p.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")))
        }
        None => (KeyValues::default(), PathBuf::from(".")),
    };
    for s in set {
        let Some((k, v)) = s.split_once('=') else {
            return Err(ExpError::config(format!("--set expects KEY=VALUE, got {s:?}")));
        };
        kv.set(k.trim(), v.trim());
    }
    if let Some(seed) = cli.seed {
        kv.set("seed", seed.to_string());
    }
    Ok((kv, base))
}

fn out_root(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn check(cli: &Cli, ok: bool, what: &str) -> ExpResult<()> {
    if cli.assert_checks && !ok {
        return Err(ExpError::Check(what.to_string()));
    }
    Ok(())
}

fn cmd_train(cli: &Cli, args: &SetArgs) -> ExpResult<()> {
    let (kv, base) = config_kv(cli, &args.set)?;
    let cfg = RunConfig::from_kv(&kv, &base)?;
    let res = run_training(&cfg, Some(&out_root(cli, Some(&cfg))))?;
    let dir = res.dir.as_deref().unwrap_or(Path::new("."));
    println!("run {} -> {}", cfg.run_id, dir.display());
    if let RunStatus::Diverged { last_finite_epoch, message } = &res.manifest.status {
        return Err(ExpError::Core(minnorm_core::Error::Numeric(format!(
            "training diverged after epoch {last_finite_epoch}: {message}"
        ))));
    }
    let report = res.report.as_ref().expect("completed runs carry a report");
    print!("{}", report.render_csv());
    if let Report::OneD(r) = report {
        if let Some(erm) = &r.erm {
            println!("erm_bound: quantity {} bound {} satisfied {}", fmt_f64(erm.quantity), fmt_f64(erm.bound), erm.satisfied);
            check(cli, erm.satisfied, "empirical risk exceeds the direct-approximation bound")?;
        }
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, args: &SetArgs) -> ExpResult<()> {
    let (mut kv, base) = config_kv(cli, &args.set)?;
    let spec = SweepSpec::take_from(&mut kv)?;
    // validate the base settings before any training
    let cfg = RunConfig::from_kv(&kv, &base)?;
    let root = out_root(cli, Some(&cfg)).join(&cfg.run_id);
    let report = run_sweep(&kv, &base, &spec, Some(&root))?;
    print!("{}", report.render_csv());
    println!("sweep -> {}", root.join("sweep.csv").display());
    check(cli, report.monotone, "sweep medians are not monotone")
}

fn reanalyze(cli: &Cli, run: &LoadedRun, want_1d: bool) -> ExpResult<()> {
    let is_1d = run.data.dim() == 1;
    if is_1d != want_1d {
        return Err(ExpError::config(format!(
            "{} holds {}-dimensional data; use {}",
            run.dir.display(),
            run.data.dim(),
            if is_1d { "analyze-1d" } else { "analyze-radial" }
        )));
    }
    let report = run.analyze()?;
    run.write_report(&report)?;
    print!("{}", report.render_csv());
    if let Report::OneD(r) = &report {
        if let Some(erm) = &r.erm {
            check(cli, erm.satisfied, "empirical risk exceeds the direct-approximation bound")?;
        }
    }
    Ok(())
}

fn load_overridden(run: &Path, reference: Option<&PathBuf>, grid: Option<&String>) -> ExpResult<LoadedRun> {
    let mut loaded = load_run(run)?;
    if let Some(p) = reference {
        if !p.is_file() {
            return Err(ExpError::config(format!("--reference-profile {}: file does not exist", p.display())));
        }
        loaded.config.analysis.reference = ReferenceSource::File(p.clone());
    }
    if let Some(g) = grid {
        loaded.config.analysis.rescale_grid = RescaleGrid::parse(g)?;
    }
    Ok(loaded)
}

fn append_check(cli: &Cli, name: &str, row: &str) -> ExpResult<()> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| ExpError::io(&dir, e))?;
    let path = dir.join("checks.csv");
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| ExpError::io(&path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(BoundReport::CSV_HEADER);
        text.push('\n');
    }
    text.push_str(row);
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(|e| ExpError::io(&path, e))?;
    println!("{name}: {row}");
    Ok(())
}

fn configured_data(cli: &Cli) -> ExpResult<(Dataset, u64)> {
    let (kv, base) = config_kv(cli, &[])?;
    let cfg = RunConfig::from_kv(&kv, &base)?;
    Ok((build_data(&cfg)?.0, cfg.seed))
}

fn cmd_check(cli: &Cli, a: &CheckArgs) -> ExpResult<()> {
    let run = a.run.as_deref().map(load_run).transpose()?;
    match a.kind {
        CheckKind::Rademacher => {
            let (data, seed) = match (&a.data, &run) {
                (Some(p), _) => (load_dataset(p)?, cli.seed.unwrap_or(0)),
                (None, Some(r)) => (r.data.clone(), r.config.seed),
                (None, None) => configured_data(cli)?,
            };
            let cfg = RademacherConfig { n_eps: a.n_eps, n_candidates: a.n_candidates, ..RademacherConfig::new(a.q) };
            let estimate = rademacher_estimate(&data, &cfg, &StreamKey::new(seed, "theory/rademacher"))?;
            let report = BoundReport::exact(estimate, rademacher_bound(&data, a.q)?);
            append_check(cli, "rademacher", &report.csv_row("rademacher"))?;
            check(cli, report.satisfied, "Rademacher estimate exceeds its bound")
        }
        CheckKind::Subgaussian => {
            let seed = cli.seed.unwrap_or(0);
            let report = subgaussian_check(a.sg_kind, a.d, a.n, a.sigma, a.trials, &StreamKey::new(seed, "theory/subgaussian"))?;
            let name = format!("subgaussian_{}_d{}_n{}", a.sg_kind, a.d, a.n).replace(':', "_");
            append_check(cli, &name, &report.csv_row(&name))?;
            check(cli, report.satisfied, "sub-Gaussian inequality violated beyond Monte-Carlo tolerance")
        }
        CheckKind::ErmBound => {
            let run = run.ok_or_else(|| ExpError::config("erm-bound needs --run <dir>"))?;
            let Model::Shallow(params) = &run.model else {
                return Err(ExpError::config("erm-bound applies to depth-1 networks"));
            };
            let barron = match (a.barron, &run.config.analysis.barron_norm) {
                (Some(b), _) | (None, &BarronNorm::Value(b)) => b,
                (None, BarronNorm::Auto) if matches!(run.config.data.kind, DataKind::Abs1d { .. }) => 2.0,
                _ => return Err(ExpError::config("erm-bound needs --barron for this data")),
            };
            let c = &run.config;
            let report = erm_bound_check(params, c.model.activation, c.model.loss, &run.data, c.lambda, barron)?;
            append_check(cli, "erm_bound", &report.csv_row("erm_bound"))?;
            check(cli, report.satisfied, "empirical risk exceeds the direct-approximation bound")
        }
        CheckKind::Gap => {
            let run = run.ok_or_else(|| ExpError::config("gap needs --run <dir>"))?;
            let test = match (&a.test, &run.test) {
                (Some(p), _) => load_dataset(p)?,
                (None, Some(t)) => t.clone(),
                (None, None) => return Err(ExpError::config("gap needs --test or a run trained with data.test_n > 0")),
            };
            let Model::Shallow(params) = &run.model else {
                return Err(ExpError::config("gap applies to depth-1 networks"));
            };
            let c = &run.config;
            let gap = generalization_gap(params, c.model.activation, c.model.loss, &run.data, &test)?;
            // no bound: the constant of the gap inequality is not explicit
            append_check(cli, "gap", &format!("gap,{},NaN,NaN,NaN,NA", fmt_f64(gap)))
        }
    }
}

fn cmd_spline(cli: &Cli, data: Option<&PathBuf>, grid: Option<&String>) -> ExpResult<()> {
    let data = match data {
        Some(p) => load_dataset(p)?,
        None => configured_data(cli)?.0,
    };
    let spline = natural_cubic_spline(&data)?;
    let (lo, hi, count) = match grid {
        Some(g) => {
            let parts: Vec<&str> = g.split(':').collect();
            let parsed = match parts.as_slice() {
                [lo, hi, n] => lo.parse::<f64>().ok().zip(hi.parse::<f64>().ok()).zip(n.parse::<usize>().ok()),
                _ => None,
            };
            match parsed {
                Some(((lo, hi), n)) if n >= 2 && lo < hi => (lo, hi, n),
                _ => return Err(ExpError::config(format!("--grid expects lo:hi:count with lo < hi and count >= 2, got {g:?}"))),
            }
        }
        None => {
            let (xs, _) = spline.knots();
            (xs[0], xs[xs.len() - 1], 201)
        }
    };
    let mut text = String::from("x,spline\n");
    for i in 0..count {
        let x = lo + (hi - lo) * i as f64 / (count - 1) as f64;
        text.push_str(&format!("{},{}\n", fmt_f64(x), fmt_f64(spline.eval(x))));
    }
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| ExpError::io(dir, e))?;
            let p = dir.join("spline.csv");
            fs::write(&p, &text).map_err(|e| ExpError::io(&p, e))?;
            println!("spline -> {} (system residual {:e})", p.display(), spline.system_residual());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_render(run: &Path) -> ExpResult<()> {
    let loaded = load_run(run)?;
    let svg = render_svg(&loaded.analyze()?)?;
    let p = run.join("figure.svg");
    fs::write(&p, svg).map_err(|e| ExpError::io(&p, e))?;
    println!("figure -> {}", p.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> ExpResult<()> {
    if cli.single_thread {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .map_err(|e| ExpError::config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Train(a) => cmd_train(cli, a),
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::Analyze1d { run } => reanalyze(cli, &load_run(run)?, true),
        Command::AnalyzeRadial { run, reference_profile, rescale_grid } => {
            reanalyze(cli, &load_overridden(run, reference_profile.as_ref(), rescale_grid.as_ref())?, false)
        }
        Command::TheoryCheck(a) => cmd_check(cli, a),
        Command::Spline { data, grid } => cmd_spline(cli, data.as_ref(), grid.as_ref()),
        Command::Render { run } => cmd_render(run),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
