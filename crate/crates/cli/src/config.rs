//! Run settings assembled from defaults, a `sage.toml` file, `SAGE_*`
//! environment variables and command-line flags, in increasing precedence.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sage_core::dsl::AbmProgram;
use sage_core::eval::CodeBleuWeights;
use sage_core::generator::RemoteConfig;
use sage_core::pipeline::Budgets;

pub const DEFAULT_CONFIG_FILE: &str = "sage.toml";
pub const CONFIG_ENV: &str = "SAGE_CONFIG";

/// Every accepted key, as written in the config file. Nested keys use the
/// table name as prefix (`budgets.modeling` is `[budgets] modeling = ..`).
pub const KEYS: &[&str] = &[
    "backend",
    "endpoint",
    "model",
    "timeout_s",
    "max_retries",
    "max_in_flight",
    "fixtures_dir",
    "runs_dir",
    "seed",
    "steps",
    "budgets.modeling",
    "budgets.solving",
    "budgets.inner_repair",
    "weights.ngram",
    "weights.weighted_ngram",
    "weights.ast",
    "weights.dataflow",
];

/// `budgets.modeling` is read from `SAGE_BUDGETS_MODELING`, and so on.
pub fn env_var(key: &str) -> String {
    format!("SAGE_{}", key.replace('.', "_").to_ascii_uppercase())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config key `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub backend: BackendKind,
    pub remote: RemoteConfig,
    pub fixtures_dir: Option<PathBuf>,
    pub runs_dir: PathBuf,
    /// Explicitly configured seed; see [`Settings::seed_for`].
    pub seed: Option<u64>,
    pub steps: u64,
    pub budgets: Budgets,
    pub weights: CodeBleuWeights,
}

/// Seed used when neither the settings nor the program name one.
pub const DEFAULT_SEED: u64 = 42;

impl Settings {
    /// The configured seed, else the program's `init { seed N; }`, else
    /// [`DEFAULT_SEED`].
    pub fn seed_for(&self, program: &AbmProgram) -> u64 {
        self.seed.or(program.init.seed).unwrap_or(DEFAULT_SEED)
    }
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            backend: BackendKind::Mock,
            remote: RemoteConfig::default(),
            fixtures_dir: None,
            runs_dir: PathBuf::from("runs"),
            seed: None,
            steps: 50,
            budgets: Budgets::default(),
            weights: CodeBleuWeights::default(),
        }
    }
}

#[derive(Debug, Clone)]
enum Raw {
    Toml(toml::Value),
    Text(String),
}

#[derive(Debug, Clone)]
struct Entry {
    raw: Raw,
    origin: String,
}

/// Raw values by key; later layers overwrite earlier ones.
#[derive(Debug, Default, Clone)]
pub struct Layers {
    values: BTreeMap<String, Entry>,
}

impl Layers {
    /// Add the keys of a TOML document. Unknown keys are rejected.
    pub fn file(&mut self, text: &str, path: &Path) -> Result<(), ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| bad("(file)", format!("{}: {}", path.display(), e.message())))?;
        let origin = path.display().to_string();
        for (k, v) in table {
            match v {
                toml::Value::Table(inner) if k == "budgets" || k == "weights" => {
                    for (ik, iv) in inner {
                        self.put_toml(&format!("{k}.{ik}"), iv, &origin)?;
                    }
                }
                other => self.put_toml(&k, other, &origin)?,
            }
        }
        Ok(())
    }

    fn put_toml(&mut self, key: &str, v: toml::Value, origin: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(bad(key, format!("unknown key in {origin}")));
        }
        self.values.insert(
            key.to_string(),
            Entry {
                raw: Raw::Toml(v),
                origin: origin.to_string(),
            },
        );
        Ok(())
    }

    /// Add every `SAGE_*` variable that `lookup` knows.
    pub fn env(&mut self, lookup: &dyn Fn(&str) -> Option<String>) {
        for key in KEYS {
            let var = env_var(key);
            if let Some(v) = lookup(&var) {
                self.text(key, v, &var);
            }
        }
    }

    /// Add a textual value, e.g. from a flag.
    pub fn text(&mut self, key: &str, value: impl Into<String>, origin: &str) {
        debug_assert!(KEYS.contains(&key), "unknown key {key}");
        self.values.insert(
            key.to_string(),
            Entry {
                raw: Raw::Text(value.into()),
                origin: origin.to_string(),
            },
        );
    }

    fn err(&self, key: &str, message: impl fmt::Display) -> ConfigError {
        let origin = self.values.get(key).map(|e| e.origin.as_str()).unwrap_or("default");
        bad(key, format!("{message} (from {origin})"))
    }

    fn string(&self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.values.get(key).map(|e| &e.raw) {
            None => Ok(None),
            Some(Raw::Text(s)) => Ok(Some(s.clone())),
            Some(Raw::Toml(toml::Value::String(s))) => Ok(Some(s.clone())),
            Some(Raw::Toml(v)) => Err(self.err(key, format!("expected a string, found {}", v.type_str()))),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.values.get(key).map(|e| &e.raw) {
            None => Ok(None),
            Some(Raw::Text(s)) => s
                .trim()
                .parse::<u64>()
                .map(Some)
                .map_err(|_| self.err(key, format!("expected a non-negative integer, found `{s}`"))),
            Some(Raw::Toml(toml::Value::Integer(i))) if *i >= 0 => Ok(Some(*i as u64)),
            Some(Raw::Toml(v)) => Err(self.err(key, format!("expected a non-negative integer, found `{v}`"))),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v = match self.values.get(key).map(|e| &e.raw) {
            None => return Ok(None),
            Some(Raw::Text(s)) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| self.err(key, format!("expected a number, found `{s}`")))?,
            Some(Raw::Toml(toml::Value::Float(f))) => *f,
            Some(Raw::Toml(toml::Value::Integer(i))) => *i as f64,
            Some(Raw::Toml(v)) => return Err(self.err(key, format!("expected a number, found `{v}`"))),
        };
        if !v.is_finite() {
            return Err(self.err(key, "must be finite"));
        }
        Ok(Some(v))
    }

    fn u32(&self, key: &str) -> Result<Option<u32>, ConfigError> {
        match self.uint(key)? {
            None => Ok(None),
            Some(v) => u32::try_from(v).map(Some).map_err(|_| self.err(key, "too large")),
        }
    }

    fn positive_u32(&self, key: &str) -> Result<Option<u32>, ConfigError> {
        match self.u32(key)? {
            Some(0) => Err(self.err(key, "must be at least 1")),
            v => Ok(v),
        }
    }

    /// Resolve all layers into validated settings.
    pub fn resolve(&self) -> Result<Settings, ConfigError> {
        let mut s = Settings::default();
        if let Some(b) = self.string("backend")? {
            s.backend = match b.as_str() {
                "mock" => BackendKind::Mock,
                "remote" => BackendKind::Remote,
                other => return Err(self.err("backend", format!("expected `mock` or `remote`, found `{other}`"))),
            };
        }
        if let Some(e) = self.string("endpoint")? {
            if !(e.starts_with("http://") || e.starts_with("https://")) {
                return Err(self.err("endpoint", "must be an http:// or https:// URL"));
            }
            s.remote.endpoint = e;
        }
        if let Some(m) = self.string("model")? {
            if m.trim().is_empty() {
                return Err(self.err("model", "must not be empty"));
            }
            s.remote.model = m;
        }
        if let Some(t) = self.real("timeout_s")? {
            if t <= 0.0 {
                return Err(self.err("timeout_s", "must be positive"));
            }
            s.remote.timeout = Duration::from_secs_f64(t);
        }
        if let Some(r) = self.u32("max_retries")? {
            s.remote.max_retries = r;
        }
        if let Some(n) = self.positive_u32("max_in_flight")? {
            s.remote.max_in_flight = n as usize;
        }
        s.fixtures_dir = self.string("fixtures_dir")?.map(PathBuf::from);
        if let Some(d) = self.string("runs_dir")? {
            if d.is_empty() {
                return Err(self.err("runs_dir", "must not be empty"));
            }
            s.runs_dir = PathBuf::from(d);
        }
        if let Some(v) = self.uint("seed")? {
            s.seed = Some(v);
        }
        if let Some(v) = self.uint("steps")? {
            s.steps = v;
        }
        if let Some(v) = self.positive_u32("budgets.modeling")? {
            s.budgets.modeling = v;
        }
        if let Some(v) = self.positive_u32("budgets.solving")? {
            s.budgets.solving = v;
        }
        if let Some(v) = self.positive_u32("budgets.inner_repair")? {
            s.budgets.inner_repair = v;
        }
        let mut w = s.weights;
        for (key, slot) in [
            ("weights.ngram", &mut w.ngram),
            ("weights.weighted_ngram", &mut w.weighted_ngram),
            ("weights.ast", &mut w.ast),
            ("weights.dataflow", &mut w.dataflow),
        ] {
            if let Some(v) = self.real(key)? {
                *slot = v;
            }
        }
        if let Err(e) = w.validate() {
            let key = [
                "weights.ngram",
                "weights.weighted_ngram",
                "weights.ast",
                "weights.dataflow",
            ]
            .into_iter()
            .find(|k| self.values.contains_key(*k))
            .unwrap_or("weights.ngram");
            return Err(self.err(key, e));
        }
        s.weights = w;
        Ok(s)
    }
}

/// The config file to read: the explicit path, then `SAGE_CONFIG`, then
/// `sage.toml` in the working directory when present.
pub fn config_path(explicit: Option<&Path>, lookup: &dyn Fn(&str) -> Option<String>) -> Option<(PathBuf, bool)> {
    if let Some(p) = explicit {
        return Some((p.to_path_buf(), true));
    }
    if let Some(p) = lookup(CONFIG_ENV) {
        return Some((PathBuf::from(p), true));
    }
    let default = PathBuf::from(DEFAULT_CONFIG_FILE);
    default.is_file().then_some((default, false))
}
