//! The `minnorm` binary: subcommands, artifacts and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use minnorm::config::{KeyValues, RunConfig};
use minnorm::sweep::SweepSpec;

fn minnorm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minnorm")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SMALL_1D: &str = "run_id = small\nmodel.m = 12\ndata.k = 4\noptim.epochs = 40\n";

#[test]
fn train_writes_artifacts_and_reanalysis_agrees() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "run.cfg", SMALL_1D);
    let o = minnorm(tmp.path(), &["--config", "run.cfg", "--out", "out", "train"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("out/small");
    let report = fs::read_to_string(run.join("report.csv")).unwrap();
    let o = minnorm(tmp.path(), &["analyze-1d", "--run", "out/small"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(run.join("report.csv")).unwrap(), report);
    let svg = fs::read_to_string(run.join("figure.svg")).unwrap();
    fs::remove_file(run.join("figure.svg")).unwrap();
    assert_eq!(code(&minnorm(tmp.path(), &["render", "--run", "out/small"])), 0);
    assert_eq!(fs::read_to_string(run.join("figure.svg")).unwrap(), svg);
    // wrong analysis for the data dimension is a usage error
    assert_eq!(code(&minnorm(tmp.path(), &["analyze-radial", "--run", "out/small"])), 1);
}

#[test]
fn seed_flag_and_set_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "run.cfg", SMALL_1D);
    let o = minnorm(tmp.path(), &["--config", "run.cfg", "--seed", "9", "--out", "out", "train", "--set", "run_id=s9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(tmp.path().join("out/s9/manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 9") && manifest.contains("status = completed"), "{manifest}");
}

#[test]
fn single_thread_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "rad.cfg",
        "run_id = rad\ndata.kind = radial\ndata.d = 3\ndata.n = 60\nmodel.m = 16\noptim.kind = momentum\noptim.batch_size = 10\noptim.epochs = 5\nanalysis.n_dirs = 20\nanalysis.radii = 0:3:13\n",
    );
    for out in ["a", "b"] {
        let o = minnorm(tmp.path(), &["--config", "rad.cfg", "--single-thread", "--out", out, "train"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["metrics.csv", "figure.svg", "profile.csv", "params.csv"] {
        assert_eq!(fs::read(tmp.path().join("a/rad").join(f)).unwrap(), fs::read(tmp.path().join("b/rad").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "typo.cfg", "model.widht = 3\n");
    let o = minnorm(tmp.path(), &["--config", "typo.cfg", "train"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.widht"));
    assert!(!tmp.path().join("runs").exists(), "config errors must come before any work");

    write(tmp.path(), "diverge.cfg", "run_id = boom\nmodel.m = 4\ndata.k = 3\noptim.kind = gd\noptim.lr = 1e6\noptim.epochs = 50\n");
    let o = minnorm(tmp.path(), &["--config", "diverge.cfg", "--out", "out", "train"]);
    assert_eq!(code(&o), 2);
    let manifest = fs::read_to_string(tmp.path().join("out/boom/manifest.txt")).unwrap();
    assert!(manifest.contains("status = failed"), "{manifest}");

    // an untrained large-gain network misses the risk bound
    write(tmp.path(), "raw.cfg", "run_id = raw\nmodel.m = 50\ninit.gain = 5\noptim.kind = gd\noptim.lr = 1e-12\noptim.epochs = 1\n");
    assert_eq!(code(&minnorm(tmp.path(), &["--config", "raw.cfg", "--out", "out", "train"])), 0);
    assert_eq!(code(&minnorm(tmp.path(), &["--config", "raw.cfg", "--out", "out", "--assert", "train"])), 3);
    assert_eq!(code(&minnorm(tmp.path(), &["--assert", "theory-check", "--kind", "erm-bound", "--run", "out/raw"])), 3);

    write(tmp.path(), "sweep.cfg", "sweep.triples = 100:0.1, 400:0.1\n");
    assert_eq!(code(&minnorm(tmp.path(), &["--config", "sweep.cfg", "sweep"])), 1);
}

#[test]
fn theory_checks_append_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = minnorm(tmp.path(), &["--out", "checks", "--assert", "theory-check", "--kind", "rademacher", "--n-eps", "4", "--n-candidates", "20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = minnorm(
        tmp.path(),
        &["--out", "checks", "--assert", "theory-check", "--kind", "subgaussian", "--sg-kind", "max_quantile:0.1", "--d", "5", "--n", "10", "--trials", "2000"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("checks/checks.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "{csv}");
    assert_eq!(lines[0], "check,quantity,bound,tolerance,slack,satisfied");
    assert!(lines[1].starts_with("rademacher,") && lines[2].starts_with("subgaussian_max_quantile"));

    write(tmp.path(), "gap.cfg", "run_id = g\ndata.kind = radial\ndata.d = 2\ndata.n = 30\ndata.test_n = 30\nmodel.m = 8\noptim.epochs = 3\nanalysis.n_dirs = 4\nanalysis.radii = 0:2:3\n");
    assert_eq!(code(&minnorm(tmp.path(), &["--config", "gap.cfg", "--out", "out", "train"])), 0);
    let o = minnorm(tmp.path(), &["--out", "checks", "theory-check", "--kind", "gap", "--run", "out/g"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(tmp.path().join("checks/checks.csv")).unwrap().lines().last().unwrap().starts_with("gap,"));
}

#[test]
fn spline_subcommand_interpolates() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "pts.csv", "x_1,y\n0,0\n1,1\n2,0\n3,1\n");
    let o = minnorm(tmp.path(), &["spline", "--data", "pts.csv", "--grid", "0:3:4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let ys: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    for (got, want) in ys.iter().zip([0.0, 1.0, 0.0, 1.0]) {
        assert!((got - want).abs() < 1e-12, "{text}");
    }
    assert_eq!(code(&minnorm(tmp.path(), &["spline", "--data", "pts.csv", "--grid", "3:0:4"])), 1);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("cfg") {
            continue;
        }
        let mut kv = KeyValues::parse(&fs::read_to_string(&path).unwrap()).unwrap();
        if kv.0.keys().any(|k| k.starts_with("sweep.")) {
            SweepSpec::take_from(&mut kv).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
        RunConfig::from_kv(&kv, &dir).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    for name in ["fig-1d-grid", "fig-momentum-d15", "fig-comparative-d31", "fig-he-init", "fig-ntk-frozen", "fig-leaky", "fig-deeper"] {
        assert!(dir.join(format!("{name}.cfg")).is_file(), "{name}.cfg missing");
    }
    assert!(count >= 7);
}
