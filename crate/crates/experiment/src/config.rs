//! Run configuration: flat `key = value` text with dotted keys and `#`
//! comments. Unknown keys are rejected.

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use minnorm_core::analysis_radial::RescaleGrid;
use minnorm_core::datagen::RadialMixtureConfig;
use minnorm_core::initializers::InitScheme;
use minnorm_core::losses::LossKind;
use minnorm_core::nn_model::Activation;
use minnorm_core::optimizers::{OptimizerKind, OptimizerSpec, Schedule};

use crate::error::{ExpError, ExpResult};

/// Every accepted key with its default value.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("run_id", "run"),
    ("seed", "0"),
    ("lambda", "0"),
    ("output_dir", ""),
    ("data.kind", "abs1d"),
    ("data.k", "15"),
    ("data.lo", "1"),
    ("data.hi", "2"),
    ("data.inclusive", "false"),
    ("data.d", "3"),
    ("data.n", "2000"),
    ("data.m1", "0.2"),
    ("data.m2", "0.2"),
    ("data.r_lo", "1"),
    ("data.r_hi", "7"),
    ("data.path", ""),
    ("data.test_n", "0"),
    ("model.m", "200"),
    ("model.activation", "relu"),
    ("model.depth", "1"),
    ("model.frozen_inner", "false"),
    ("model.loss", "mse"),
    ("init.scheme", "xavier_uniform"),
    ("init.gain", "1"),
    ("optim.kind", "adam"),
    ("optim.lr", "0.001"),
    ("optim.batch_size", "full"),
    ("optim.momentum", "0.9"),
    ("optim.beta1", "0.9"),
    ("optim.beta2", "0.999"),
    ("optim.eps", "1e-8"),
    ("optim.history", "10"),
    ("optim.max_line_search", "30"),
    ("optim.schedule", ""),
    ("optim.epochs", "1000"),
    ("optim.steps", "0"),
    ("analysis.radii", "0:5:101"),
    ("analysis.n_dirs", "500"),
    ("analysis.reference_profile", "surrogate"),
    ("analysis.rescale_grid", "0.125:2:200"),
    ("analysis.barron_norm", "auto"),
    ("analysis.kink_threshold", "0.001"),
];

/// Raw key/value pairs with the line each came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues(pub BTreeMap<String, (String, usize)>);

impl KeyValues {
    pub fn parse(text: &str) -> ExpResult<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ExpError::config(format!("line {}: expected key = value, got {raw:?}", i + 1)));
            };
            let k = k.trim().to_string();
            if k.is_empty() {
                return Err(ExpError::config(format!("line {}: empty key", i + 1)));
            }
            if let Some((_, prev)) = map.insert(k.clone(), (v.trim().to_string(), i + 1)) {
                return Err(ExpError::config(format!("line {}: key '{k}' already set on line {prev}", i + 1)));
            }
        }
        Ok(Self(map))
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.0.insert(key.to_string(), (value.into(), 0));
    }

    /// Removes and returns all keys under `prefix.`.
    pub fn take_prefix(&mut self, prefix: &str) -> KeyValues {
        let dotted = format!("{prefix}.");
        let keys: Vec<String> = self.0.keys().filter(|k| k.starts_with(&dotted)).cloned().collect();
        KeyValues(keys.into_iter().map(|k| { let v = self.0.remove(&k).expect("listed"); (k, v) }).collect())
    }
}

/// Where the training data come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataKind {
    /// `|x|` sampled at `k` interior points per side of `[lo, hi]`.
    Abs1d { k: usize, lo: f64, hi: f64, inclusive: bool },
    /// Radial bump labels on the radial mixture.
    Radial { mixture: RadialMixtureConfig, n: usize },
    /// A dataset CSV file.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub kind: DataKind,
    /// Size of an independent test set for radial data (0 = none).
    pub test_n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub m: usize,
    pub activation: Activation,
    /// Number of hidden layers; 1 is the shallow network.
    pub depth: usize,
    pub frozen_inner: bool,
    pub loss: LossKind,
}

/// Training length: whole epochs, or an exact number of parameter updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Epochs(usize),
    Steps(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimConfig {
    pub spec: OptimizerSpec,
    /// `None` means full batch.
    pub batch_size: Option<usize>,
    pub budget: Budget,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceSource {
    Surrogate,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum BarronNorm {
    /// 2 for the `|x|` data, none otherwise.
    Auto,
    None,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub radii: (f64, f64, usize),
    pub n_dirs: usize,
    pub reference: ReferenceSource,
    pub rescale_grid: RescaleGrid,
    pub barron_norm: BarronNorm,
    pub kink_threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub run_id: String,
    pub seed: u64,
    pub lambda: f64,
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub init: InitScheme,
    pub optim: OptimConfig,
    pub analysis: AnalysisConfig,
    /// Canonical `key = value` text of all settings except `output_dir`.
    canonical: String,
}

struct Reader<'a> {
    kv: &'a KeyValues,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> (&str, usize) {
        match self.kv.0.get(key) {
            Some((v, line)) => (v.as_str(), *line),
            None => (DEFAULTS.iter().find(|(k, _)| *k == key).expect("known key").1, 0),
        }
    }

    fn err(&self, key: &str, msg: impl std::fmt::Display) -> ExpError {
        let (v, line) = self.raw(key);
        if line > 0 {
            ExpError::config(format!("line {line}: {key} = {v:?}: {msg}"))
        } else {
            ExpError::config(format!("{key} = {v:?}: {msg}"))
        }
    }

    fn str(&self, key: &str) -> String {
        self.raw(key).0.to_string()
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> ExpResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key).0.parse::<T>().map_err(|e| self.err(key, e))
    }

    fn f64(&self, key: &str) -> ExpResult<f64> {
        let v: f64 = self.parse(key)?;
        if !v.is_finite() {
            return Err(self.err(key, "must be finite"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str) -> ExpResult<usize> {
        let v: usize = self.parse(key)?;
        if v == 0 {
            return Err(self.err(key, "must be at least 1"));
        }
        Ok(v)
    }

    fn path(&self, key: &str, base: &Path) -> PathBuf {
        let p = PathBuf::from(self.raw(key).0);
        if p.is_relative() {
            base.join(p)
        } else {
            p
        }
    }
}

fn parse_triple(s: &str) -> Option<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else { return None };
    Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?, n.trim().parse().ok()?))
}

impl RunConfig {
    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> ExpResult<Self> {
        Self::from_kv(&KeyValues::parse(text)?, base_dir)
    }

    pub fn from_file(path: &Path) -> ExpResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ExpError::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_kv(kv: &KeyValues, base_dir: &Path) -> ExpResult<Self> {
        for (k, (_, line)) in &kv.0 {
            if !DEFAULTS.iter().any(|(d, _)| d == k) {
                return Err(ExpError::config(format!("line {line}: unknown key '{k}'")));
            }
        }
        let r = Reader { kv };

        let data_kind = match r.str("data.kind").as_str() {
            "abs1d" => {
                let (lo, hi) = (r.f64("data.lo")?, r.f64("data.hi")?);
                if !(0.0 < lo && lo < hi) {
                    return Err(r.err("data.hi", "need 0 < data.lo < data.hi"));
                }
                DataKind::Abs1d { k: r.positive("data.k")?, lo, hi, inclusive: r.parse("data.inclusive")? }
            }
            "radial" => {
                let mixture = RadialMixtureConfig {
                    d: r.positive("data.d")?,
                    m1: r.f64("data.m1")?,
                    m2: r.f64("data.m2")?,
                    r_lo: r.f64("data.r_lo")?,
                    r_hi: r.f64("data.r_hi")?,
                };
                mixture.validate().map_err(|e| r.err("data.kind", e))?;
                DataKind::Radial { mixture, n: r.positive("data.n")? }
            }
            "file" => {
                let path = r.path("data.path", base_dir);
                if r.str("data.path").is_empty() || !path.is_file() {
                    return Err(r.err("data.path", "data file does not exist"));
                }
                DataKind::File { path }
            }
            _ => return Err(r.err("data.kind", "expected abs1d, radial or file")),
        };

        let model = ModelConfig {
            m: r.positive("model.m")?,
            activation: r.parse("model.activation")?,
            depth: r.positive("model.depth")?,
            frozen_inner: r.parse("model.frozen_inner")?,
            loss: r.parse("model.loss")?,
        };
        if model.frozen_inner && model.depth > 1 {
            return Err(r.err("model.frozen_inner", "random-feature mode needs model.depth = 1"));
        }

        let gain = r.f64("init.gain")?;
        let init = InitScheme::from_name(&r.str("init.scheme"), gain).map_err(|e| r.err("init.scheme", e))?;

        let batch_size = match r.str("optim.batch_size").as_str() {
            "full" => None,
            _ => Some(r.positive("optim.batch_size")?),
        };
        let mb = batch_size.unwrap_or(usize::MAX);
        let kind = match r.str("optim.kind").as_str() {
            "gd" => OptimizerKind::Gd,
            "sgd" => OptimizerKind::Sgd { batch_size: mb },
            "momentum" => OptimizerKind::Momentum { mu: r.f64("optim.momentum")?, batch_size: mb },
            "adam" => OptimizerKind::Adam {
                beta1: r.f64("optim.beta1")?,
                beta2: r.f64("optim.beta2")?,
                eps: r.f64("optim.eps")?,
                batch_size: mb,
            },
            "lbfgs" => OptimizerKind::Lbfgs {
                history: r.positive("optim.history")?,
                max_line_search: r.positive("optim.max_line_search")?,
            },
            _ => return Err(r.err("optim.kind", "expected gd, sgd, momentum, adam or lbfgs")),
        };
        if matches!(kind, OptimizerKind::Gd | OptimizerKind::Lbfgs { .. }) && batch_size.is_some() {
            return Err(r.err("optim.batch_size", "gd and lbfgs are full-batch methods"));
        }
        let mut spec = OptimizerSpec::new(kind, r.f64("optim.lr")?);
        spec.schedule = Schedule::parse(&r.str("optim.schedule")).map_err(|e| r.err("optim.schedule", e))?;
        spec.validate().map_err(|e| r.err("optim.kind", e))?;
        let steps: usize = r.parse("optim.steps")?;
        let budget = if steps > 0 { Budget::Steps(steps) } else { Budget::Epochs(r.positive("optim.epochs")?) };

        let radii = parse_triple(&r.str("analysis.radii")).ok_or_else(|| r.err("analysis.radii", "expected lo:hi:count"))?;
        if !(radii.0 >= 0.0 && radii.1 > radii.0 && radii.2 >= 2) {
            return Err(r.err("analysis.radii", "need 0 <= lo < hi and count >= 2"));
        }
        let n_dirs = r.positive("analysis.n_dirs")?;
        if n_dirs < 2 {
            return Err(r.err("analysis.n_dirs", "need at least 2 directions"));
        }
        let reference = match r.str("analysis.reference_profile").as_str() {
            "surrogate" => ReferenceSource::Surrogate,
            _ => {
                let p = r.path("analysis.reference_profile", base_dir);
                if !p.is_file() {
                    return Err(r.err("analysis.reference_profile", "profile file does not exist"));
                }
                ReferenceSource::File(p)
            }
        };
        let rescale_grid = RescaleGrid::parse(&r.str("analysis.rescale_grid")).map_err(|e| r.err("analysis.rescale_grid", e))?;
        let barron_norm = match r.str("analysis.barron_norm").as_str() {
            "auto" => BarronNorm::Auto,
            "none" => BarronNorm::None,
            _ => {
                let v = r.f64("analysis.barron_norm")?;
                if v < 0.0 {
                    return Err(r.err("analysis.barron_norm", "must be >= 0"));
                }
                BarronNorm::Value(v)
            }
        };
        let kink_threshold = r.f64("analysis.kink_threshold")?;

        let lambda = r.f64("lambda")?;
        if lambda < 0.0 {
            return Err(r.err("lambda", "must be >= 0"));
        }
        let output_dir = match r.str("output_dir").as_str() {
            "" => None,
            _ => Some(r.path("output_dir", base_dir)),
        };
        let run_id = r.str("run_id");
        if run_id.is_empty() || run_id.contains(|c: char| c.is_whitespace() || c == ',' || c == '/') {
            return Err(r.err("run_id", "must be non-empty without whitespace, commas or slashes"));
        }

        let canonical = DEFAULTS
            .iter()
            .filter(|(k, _)| *k != "output_dir")
            .map(|(k, _)| format!("{k} = {}\n", r.str(k)))
            .collect();

        Ok(Self {
            run_id,
            seed: r.parse("seed")?,
            lambda,
            output_dir,
            data: DataConfig { kind: data_kind, test_n: r.parse("data.test_n")? },
            model,
            init,
            optim: OptimConfig { spec, batch_size, budget },
            analysis: AnalysisConfig {
                radii,
                n_dirs,
                reference,
                rescale_grid,
                barron_norm,
                kink_threshold,
            },
            canonical,
        })
    }

    /// All settings (defaults filled in) as sorted-by-declaration text.
    pub fn canonical_text(&self) -> &str {
        &self.canonical
    }

    /// SHA-256 of [`Self::canonical_text`], lowercase hex.
    pub fn hash(&self) -> String {
        hex_digest(self.canonical.as_bytes())
    }

    /// Input dimension of the training data, if known without loading files.
    pub fn input_dim(&self) -> Option<usize> {
        match &self.data.kind {
            DataKind::Abs1d { .. } => Some(1),
            DataKind::Radial { mixture, .. } => Some(mixture.d),
            DataKind::File { .. } => None,
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        minnorm_core::analysis_radial::linear_radii(self.analysis.radii.0, self.analysis.radii.1, self.analysis.radii.2)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Applies `key=value` overrides to config text (appended, replacing any
/// earlier setting of the same key).
pub fn with_overrides(kv: &KeyValues, overrides: &[(&str, String)]) -> KeyValues {
    let mut kv = kv.clone();
    for (k, v) in overrides {
        kv.set(k, v.clone());
    }
    kv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExpResult<RunConfig> {
        RunConfig::parse(text, Path::new("."))
    }

    #[test]
    fn defaults_parse() {
        let c = parse("").unwrap();
        assert_eq!(c.model.m, 200);
        assert_eq!(c.optim.batch_size, None);
        assert_eq!(c.optim.budget, Budget::Epochs(1000));
        assert_eq!(c.input_dim(), Some(1));
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let e = parse("model.m = 3\nmodel.widht = 4\n").unwrap_err().to_string();
        assert!(e.contains("unknown key 'model.widht'") && e.contains("line 2"), "{e}");
        let e = parse("seed = 1\nseed = 2\n").unwrap_err().to_string();
        assert!(e.contains("already set"), "{e}");
        assert!(parse("just text\n").is_err());
    }

    #[test]
    fn comments_and_values() {
        let c = parse("# header\nmodel.m = 12 # width\noptim.kind = momentum\noptim.batch_size = 50\n").unwrap();
        assert_eq!(c.model.m, 12);
        assert_eq!(c.optim.batch_size, Some(50));
        assert!(matches!(c.optim.spec.kind, OptimizerKind::Momentum { batch_size: 50, .. }));
    }

    #[test]
    fn range_errors_name_the_key() {
        for (text, key) in [
            ("model.m = 0", "model.m"),
            ("lambda = -1", "lambda"),
            ("optim.lr = 0", "optim.kind"),
            ("optim.kind = gd\noptim.batch_size = 5", "optim.batch_size"),
            ("data.kind = radial\ndata.m1 = 0.9\ndata.m2 = 0.5", "data.kind"),
            ("data.kind = file\ndata.path = /nonexistent.csv", "data.path"),
            ("analysis.reference_profile = /nonexistent.csv", "analysis.reference_profile"),
            ("init.gain = -1", "init.scheme"),
            ("model.frozen_inner = true\nmodel.depth = 2", "model.frozen_inner"),
        ] {
            let e = parse(text).unwrap_err().to_string();
            assert!(e.contains(key), "{text}: {e}");
        }
    }

    #[test]
    fn hash_ignores_output_dir_and_tracks_settings() {
        let a = parse("seed = 1").unwrap();
        let b = parse("seed = 1\noutput_dir = /tmp/x").unwrap();
        let c = parse("seed = 2").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        // setting a key to its default value changes nothing
        assert_eq!(parse("model.m = 200").unwrap().hash(), parse("").unwrap().hash());
    }

    #[test]
    fn canonical_text_reparses_to_same_config() {
        let c = parse("data.kind = radial\ndata.d = 5\nmodel.activation = leaky_relu:0.1\noptim.steps = 7").unwrap();
        let again = parse(c.canonical_text()).unwrap();
        assert_eq!(again, c);
    }
}
