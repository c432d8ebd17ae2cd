//! Flat `key = value` experiment configs.
//!
//! One assignment per line, `#` starts a comment, sections are spelled with
//! dots (`attack.kind = disbelieve`). Unknown and repeated keys are errors.
//! Every key is optional; defaults are listed in [`KEYS`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fedpoison_core::attacks::{AttackKind, MinMaxDirection};
use fedpoison_core::federation::{
    DataSource, DefenseKind, ExperimentConfig, OptimizerChoice, PartitionSpec,
};
use fedpoison_core::UpdateKind;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    DuplicateKey { line: usize, key: String, first: usize },
    #[error("line {line}: invalid value for `{key}`: {reason}")]
    BadValue { line: usize, key: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown {what} `{name}`")]
    UnknownName { what: &'static str, name: String },
}

/// Recognised keys with their defaults.
pub const KEYS: &[(&str, &str)] = &[
    ("n", "10"),
    ("f", "4"),
    ("rounds", "30"),
    ("mode", "parameters"),
    ("local_epochs", "1"),
    ("batch_size", "16"),
    ("lr_local", "0.01"),
    ("lr_server", "1.0"),
    ("optimizer", "sgd"),
    ("seed", "0"),
    ("model.hidden", "16"),
    ("defense.kind", "dos"),
    ("defense.trim_k", "f"),
    ("defense.krum_f", "f"),
    ("attack.kind", "none"),
    ("attack.z", "1.5"),
    ("attack.direction", "inverse_unit"),
    ("attack.sigma", "1.0"),
    ("attack.lambda", "-10.0"),
    ("attack.epochs", "5 (parameters) / 1 (gradients)"),
    ("attack.lr", "lr_local"),
    ("attack.optimizer", "optimizer"),
    ("attack.batch_size", "batch_size"),
    ("data.source", "blobs"),
    ("data.classes", "2"),
    ("data.per_class", "500"),
    ("data.input_dim", "20"),
    ("data.spread", "1.0"),
    ("data.path", "(required for data.source = csv)"),
    ("data.partition", "iid"),
    ("data.alpha", "0.5"),
    ("data.seed", "seed"),
];

/// Attack settings kept apart from the attack kind so a sweep can swap the
/// kind and still honour them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackParams {
    pub z: f64,
    pub direction: MinMaxDirection,
    pub sigma: f64,
    pub lambda: f64,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self { z: 1.5, direction: MinMaxDirection::InverseUnit, sigma: 1.0, lambda: -10.0 }
    }
}

impl AttackParams {
    pub fn attack(&self, name: &str) -> Result<AttackKind, ConfigError> {
        Ok(match name {
            "none" => AttackKind::None,
            "disbelieve" => AttackKind::Disbelieve,
            "lie" => AttackKind::Lie { z: self.z },
            "min_max" => AttackKind::MinMax { direction: self.direction },
            "noise" => AttackKind::Noise { sigma: self.sigma },
            "scale" => AttackKind::Scale { lambda: self.lambda },
            "label_flip" => AttackKind::LabelFlip,
            _ => return Err(ConfigError::UnknownName { what: "attack", name: name.into() }),
        })
    }
}

pub fn defense_kind(name: &str) -> Result<DefenseKind, ConfigError> {
    Ok(match name {
        "fedavg" => DefenseKind::FedAvg,
        "krum" => DefenseKind::Krum,
        "trimmed_mean" => DefenseKind::TrimmedMean,
        "dos" => DefenseKind::Dos,
        _ => return Err(ConfigError::UnknownName { what: "defense", name: name.into() }),
    })
}

/// A parsed config file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub attack_params: AttackParams,
}

impl RunConfig {
    /// Copy with a different attack and/or defense, re-validated.
    pub fn with_matrix_cell(&self, attack: &str, defense: &str) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = self.experiment.clone();
        cfg.attack.kind = self.attack_params.attack(attack)?;
        cfg.defense.kind = defense_kind(defense)?;
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config_str("", Path::new(".")).expect("defaults are valid")
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_config_str(&text, path.parent().unwrap_or(Path::new(".")))
}

struct Entry {
    line: usize,
    value: String,
}

struct Entries(BTreeMap<String, Entry>);

impl Entries {
    fn get<T, F>(&self, key: &str, parse: F) -> Result<Option<T>, ConfigError>
    where
        F: FnOnce(&str) -> Result<T, String>,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).map_err(|reason| ConfigError::BadValue {
                line: e.line,
                key: key.to_string(),
                reason,
            }),
        }
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key, |v| v.parse::<T>().map_err(|e| format!("`{v}`: {e}")))
    }
}

fn one_of<T: Copy>(v: &str, options: &[(&str, T)]) -> Result<T, String> {
    options.iter().find(|(name, _)| *name == v).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        format!("`{v}` is not one of {}", names.join(", "))
    })
}

fn parse_hidden(v: &str) -> Result<Vec<usize>, String> {
    if v == "none" {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

const OPTIMIZERS: &[(&str, OptimizerChoice)] =
    &[("sgd", OptimizerChoice::Sgd), ("adam", OptimizerChoice::Adam)];

/// Parse config text. Relative `data.path` values resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let mut map: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .filter(|(k, v)| !k.is_empty() && !v.is_empty())
            .ok_or_else(|| ConfigError::Syntax { line, text: content.to_string() })?;
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(ConfigError::UnknownKey { line, key: key.to_string() });
        }
        if let Some(first) = map.get(key) {
            return Err(ConfigError::DuplicateKey { line, key: key.to_string(), first: first.line });
        }
        map.insert(key.to_string(), Entry { line, value: value.to_string() });
    }
    let e = Entries(map);

    let mut cfg = ExperimentConfig::default();
    let defaults = DataDefaults::default();
    macro_rules! set {
        ($field:expr, $key:literal) => {
            if let Some(v) = e.num($key)? {
                $field = v;
            }
        };
    }
    set!(cfg.n, "n");
    set!(cfg.f, "f");
    set!(cfg.rounds, "rounds");
    set!(cfg.local_epochs, "local_epochs");
    set!(cfg.batch_size, "batch_size");
    set!(cfg.lr_local, "lr_local");
    set!(cfg.lr_server, "lr_server");
    set!(cfg.seed, "seed");
    if let Some(mode) = e.get("mode", |v| {
        one_of(v, &[("parameters", UpdateKind::Parameters), ("gradients", UpdateKind::Gradients)])
    })? {
        cfg.mode = mode;
    }
    if let Some(opt) = e.get("optimizer", |v| one_of(v, OPTIMIZERS))? {
        cfg.optimizer = opt;
    }
    if let Some(hidden) = e.get("model.hidden", parse_hidden)? {
        cfg.hidden = hidden;
    }

    if let Some(kind) = e.get("defense.kind", |v| defense_kind(v).map_err(|e| e.to_string()))? {
        cfg.defense.kind = kind;
    }
    cfg.defense.trim_k = e.num("defense.trim_k")?;
    cfg.defense.krum_f = e.num("defense.krum_f")?;

    let mut params = AttackParams::default();
    set!(params.z, "attack.z");
    set!(params.sigma, "attack.sigma");
    set!(params.lambda, "attack.lambda");
    if let Some(d) = e.get("attack.direction", |v| {
        one_of(
            v,
            &[("inverse_unit", MinMaxDirection::InverseUnit), ("negative_std", MinMaxDirection::NegativeStd)],
        )
    })? {
        params.direction = d;
    }
    if let Some(kind) = e.get("attack.kind", |v| params.attack(v).map_err(|e| e.to_string()))? {
        cfg.attack.kind = kind;
    }
    cfg.attack.malicious.epochs = e.num("attack.epochs")?;
    cfg.attack.malicious.lr = e.num("attack.lr")?;
    cfg.attack.malicious.batch_size = e.num("attack.batch_size")?;
    cfg.attack.malicious.optimizer = e.get("attack.optimizer", |v| one_of(v, OPTIMIZERS))?;

    let source = e
        .get("data.source", |v| one_of(v, &[("blobs", true), ("csv", false)]))?
        .unwrap_or(true);
    cfg.data.source = if source {
        if e.0.contains_key("data.path") {
            return Err(ConfigError::Invalid("data.path is only used with data.source = csv".into()));
        }
        DataSource::Blobs {
            classes: e.num("data.classes")?.unwrap_or(defaults.classes),
            per_class: e.num("data.per_class")?.unwrap_or(defaults.per_class),
            input_dim: e.num("data.input_dim")?.unwrap_or(defaults.input_dim),
            spread: e.num("data.spread")?.unwrap_or(defaults.spread),
        }
    } else {
        for key in ["data.classes", "data.per_class", "data.input_dim", "data.spread"] {
            if e.0.contains_key(key) {
                return Err(ConfigError::Invalid(format!("{key} is only used with data.source = blobs")));
            }
        }
        let path: String = e
            .num("data.path")?
            .ok_or_else(|| ConfigError::Invalid("data.path is required for data.source = csv".into()))?;
        DataSource::Csv { path: base_dir.join(PathBuf::from(path)) }
    };
    let iid = e
        .get("data.partition", |v| one_of(v, &[("iid", true), ("dirichlet", false)]))?
        .unwrap_or(true);
    let alpha: Option<f64> = e.num("data.alpha")?;
    cfg.data.partition = if iid {
        if alpha.is_some() {
            return Err(ConfigError::Invalid("data.alpha is only used with data.partition = dirichlet".into()));
        }
        PartitionSpec::Iid
    } else {
        PartitionSpec::Dirichlet { alpha: alpha.unwrap_or(0.5) }
    };
    cfg.data.seed = e.num("data.seed")?;

    cfg.validate().map_err(|err| ConfigError::Invalid(err.to_string()))?;
    Ok(RunConfig { experiment: cfg, attack_params: params })
}

struct DataDefaults {
    classes: usize,
    per_class: usize,
    input_dim: usize,
    spread: f64,
}

impl Default for DataDefaults {
    fn default() -> Self {
        Self { classes: 2, per_class: 500, input_dim: 20, spread: 1.0 }
    }
}

/// Canonical `key = value` text of everything that affects a run except the
/// seed. Optional settings that were left unset are written as `default`.
pub fn canonical_text(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let opt = |v: Option<String>| v.unwrap_or_else(|| "default".into());
    let mut kv = |k: &str, v: String| {
        writeln!(s, "{k} = {v}").unwrap();
    };
    kv("n", cfg.n.to_string());
    kv("f", cfg.f.to_string());
    kv("rounds", cfg.rounds.to_string());
    kv("mode", cfg.mode.to_string());
    kv("local_epochs", cfg.local_epochs.to_string());
    kv("batch_size", cfg.batch_size.to_string());
    kv("lr_local", format!("{:?}", cfg.lr_local));
    kv("lr_server", format!("{:?}", cfg.lr_server));
    kv("optimizer", cfg.optimizer.name().into());
    kv(
        "model.hidden",
        if cfg.hidden.is_empty() {
            "none".into()
        } else {
            cfg.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",")
        },
    );
    kv("defense.kind", cfg.defense.kind.name().into());
    kv("defense.trim_k", opt(cfg.defense.trim_k.map(|v| v.to_string())));
    kv("defense.krum_f", opt(cfg.defense.krum_f.map(|v| v.to_string())));
    kv("attack.kind", cfg.attack.kind.name().into());
    match cfg.attack.kind {
        AttackKind::Lie { z } => kv("attack.z", format!("{z:?}")),
        AttackKind::MinMax { direction } => kv(
            "attack.direction",
            match direction {
                MinMaxDirection::InverseUnit => "inverse_unit",
                MinMaxDirection::NegativeStd => "negative_std",
            }
            .into(),
        ),
        AttackKind::Noise { sigma } => kv("attack.sigma", format!("{sigma:?}")),
        AttackKind::Scale { lambda } => kv("attack.lambda", format!("{lambda:?}")),
        _ => {}
    }
    let m = &cfg.attack.malicious;
    kv("attack.epochs", opt(m.epochs.map(|v| v.to_string())));
    kv("attack.lr", opt(m.lr.map(|v| format!("{v:?}"))));
    kv("attack.optimizer", opt(m.optimizer.map(|o| o.name().to_string())));
    kv("attack.batch_size", opt(m.batch_size.map(|v| v.to_string())));
    match &cfg.data.source {
        DataSource::Blobs { classes, per_class, input_dim, spread } => {
            kv("data.source", "blobs".into());
            kv("data.classes", classes.to_string());
            kv("data.per_class", per_class.to_string());
            kv("data.input_dim", input_dim.to_string());
            kv("data.spread", format!("{spread:?}"));
        }
        DataSource::Csv { path } => {
            kv("data.source", "csv".into());
            kv("data.path", path.display().to_string());
        }
    }
    match cfg.data.partition {
        PartitionSpec::Iid => kv("data.partition", "iid".into()),
        PartitionSpec::Dirichlet { alpha } => {
            kv("data.partition", "dirichlet".into());
            kv("data.alpha", format!("{alpha:?}"));
        }
    }
    kv("data.seed", opt(cfg.data.seed.map(|v| v.to_string())));
    s
}

/// First 12 hex digits of the SHA-256 of [`canonical_text`].
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(canonical_text(cfg).as_bytes());
    hex::encode(digest)[..12].to_string()
}
