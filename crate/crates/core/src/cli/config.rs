//! Run configuration: defaults, then a TOML file, then overrides.
//!
//! Every key is optional. Top-level keys are `seed`, `data`, `test_data`
//! and `out`; architecture keys live under `[model]` and optimisation keys
//! under `[train]`, e.g.
//!
//! ```toml
//! seed = 7
//! [model]
//! connectivity = "linear"   # linear | ring | all-to-all
//! quantum_enabled = false
//! [train]
//! max_epochs = 10
//! ```
//!
//! Overrides use the same dotted names, `model.connectivity=linear`; a
//! value that does not parse as TOML is taken as a string.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_data: Option<PathBuf>,
    pub out: PathBuf,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            data: None,
            test_data: None,
            out: PathBuf::from("runs/latest"),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `a.b.c = value` in `table`, creating intermediate tables.
pub fn set_dotted(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("bad override key {key:?}")));
    }
    let mut t = table;
    for p in &parts[..parts.len() - 1] {
        let entry = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = match entry {
            toml::Value::Table(inner) => inner,
            _ => return Err(Error::config(format!("override {key:?}: {p} is not a section"))),
        };
    }
    t.insert(parts[parts.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::config(format!("override {s:?} is not key=value")))
}

impl RunConfig {
    /// Defaults ← `file` ← `overrides` (in order).
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = toml::Table::try_from(RunConfig::default()).expect("defaults serialise");
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
            let t: toml::Table = toml::from_str(&text)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
            merge(&mut table, t);
        }
        for (k, v) in overrides {
            set_dotted(&mut table, k, v)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        cfg.train.seed = cfg.seed;
        cfg.model.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Writes `config.resolved` into `dir`, creating it.
    pub fn echo(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let p = dir.join("config.resolved");
        fs::write(&p, self.to_toml()).map_err(|e| Error::file(&p, e))
    }
}
