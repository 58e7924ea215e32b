//! Run configuration: one TOML file per run, with `--set key=value`
//! overrides applied before validation.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use qanogan::anogan::AnomalyConfig;
use qanogan::data::{SplitSpec, SynthSpec};
use qanogan::gan::{ModelConfig, TrainConfig};

pub const OUT_DIR_ENV: &str = "QANOGAN_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// CSV input; when absent, `synth` generates the data.
    pub path: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
    /// Feature columns to keep, as indices into the file's feature columns.
    pub features: Option<Vec<usize>>,
    /// Require the 29 credit-card feature columns.
    pub creditcard_schema: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Root seed; every sub-seed below is overwritten with it.
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub split: SplitSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub anomaly: AnomalyConfig,
}

impl RunConfig {
    /// Copies the root seed into every component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.split.seed = seed;
        self.train.seed = seed;
        self.anomaly.seed = seed;
        self
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Every accepted key, with optional entries filled in.
    fn schema() -> Table {
        let full = RunConfig {
            out_dir: Some(PathBuf::new()),
            data: DataConfig {
                path: Some(PathBuf::new()),
                synth: Some(SynthSpec { mean: Some(Vec::new()), ..Default::default() }),
                features: Some(Vec::new()),
                creditcard_schema: false,
            },
            train: TrainConfig { shots: Some(1), ..Default::default() },
            anomaly: AnomalyConfig { shots: Some(1), ..Default::default() },
            ..Default::default()
        };
        Table::try_from(full).expect("config serializes to a table")
    }

    fn validate(&self, problems: &mut Vec<String>) {
        let mut check = |key: &str, r: qanogan::Result<()>| {
            if let Err(e) = r {
                problems.push(format!("{key}: {e}"));
            }
        };
        check("split", self.split.validate());
        check("model", self.model.validate());
        check("train", self.train.validate());
        check("anomaly", self.anomaly.validate());
        if self.data.path.is_none() && self.data.synth.is_none() {
            problems.push("data: set either data.path or a [data.synth] table".into());
        }
    }
}

/// Parses `key.path=value`; the value is read as a TOML literal when it
/// parses as one and as a plain string otherwise.
pub fn parse_override(s: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) =
        s.split_once('=').with_context(|| format!("override {s:?} is not of the form key=value"))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        bail!("override {s:?} has an empty key segment");
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((path, value))
}

pub fn apply_override(table: &mut Table, path: &[String], value: Value) -> Result<()> {
    let (last, parents) = path.split_last().expect("non-empty key");
    let mut cur = table;
    for (i, seg) in parents.iter().enumerate() {
        let entry = cur.entry(seg.clone()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => bail!("cannot set `{}`: `{}` is not a table", path.join("."), parents[..=i].join(".")),
        };
    }
    cur.insert(last.clone(), value);
    Ok(())
}

fn unknown_keys(given: &Table, schema: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in given {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (schema.get(k), v) {
            (None, _) => out.push(key),
            (Some(Value::Table(s)), Value::Table(g)) => unknown_keys(g, s, &key, out),
            _ => {}
        }
    }
}

/// Builds a validated config from a TOML table plus overrides. All problems
/// found are reported together.
pub fn config_from_table(mut table: Table, overrides: &[String]) -> Result<RunConfig> {
    for o in overrides {
        let (path, value) = parse_override(o)?;
        apply_override(&mut table, &path, value)?;
    }
    let mut problems = Vec::new();
    let mut unknown = Vec::new();
    unknown_keys(&table, &RunConfig::schema(), "", &mut unknown);
    problems.extend(unknown.into_iter().map(|k| format!("{k}: unknown key")));
    if problems.is_empty() {
        match RunConfig::deserialize(Value::Table(table)) {
            Ok(cfg) => {
                let cfg = cfg.clone().with_seed(cfg.seed);
                cfg.validate(&mut problems);
                if problems.is_empty() {
                    return Ok(cfg);
                }
            }
            Err(e) => problems.push(e.to_string().trim().to_string()),
        }
    }
    bail!("invalid configuration:\n  - {}", problems.join("\n  - "))
}

pub fn load_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<Table>().with_context(|| format!("parsing {}", path.display()))
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let table = match path {
        Some(p) => load_table(p)?,
        None => Table::new(),
    };
    config_from_table(table, overrides)
}

/// `--out` flag, then the config file, then the environment, then `runs`.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}
