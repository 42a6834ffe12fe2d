//! Service configuration file (TOML).
//!
//! ```toml
//! store_path = "./store"
//! model_path = "./models/linear"   # optional
//! default_tau = 0.05
//! port = 8080
//! reveal_explanations = false
//!
//! [default_level_gates]
//! 1 = ["get_worked_example"]
//! 3 = ["submit_annotation", "export_brief"]
//! ```
//!
//! Levels missing from `default_level_gates` allow no operations; omit the
//! table entirely to use the built-in gating.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use casebrief_core::session::{GatingTable, Operation, ProficiencyLevel};
use casebrief_core::warnings::WarningThreshold;
use serde::Deserialize;

pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    store_path: Option<PathBuf>,
    model_path: Option<PathBuf>,
    default_tau: Option<f64>,
    default_level_gates: Option<BTreeMap<String, BTreeSet<Operation>>>,
    port: Option<u16>,
    reveal_explanations: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub store_path: PathBuf,
    pub model_path: Option<PathBuf>,
    pub default_tau: WarningThreshold,
    pub gates: GatingTable,
    pub port: u16,
    pub reveal_explanations: bool,
}

impl Config {
    pub fn new(store_path: impl Into<PathBuf>) -> Self {
        Self {
            store_path: store_path.into(),
            model_path: None,
            default_tau: WarningThreshold::DEFAULT,
            gates: GatingTable::default(),
            port: DEFAULT_PORT,
            reveal_explanations: false,
        }
    }
}

/// Settings read from a config file; every field may be overridden on the
/// command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileConfig {
    pub store_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub default_tau: Option<WarningThreshold>,
    pub gates: Option<GatingTable>,
    pub port: Option<u16>,
    pub reveal_explanations: Option<bool>,
}

impl FileConfig {
    pub fn parse(source: &str, base: &Path) -> anyhow::Result<Self> {
        let raw: RawConfig = toml::from_str(source).context("invalid config")?;
        let gates = raw
            .default_level_gates
            .map(|table| {
                let mut levels = BTreeMap::new();
                for (key, ops) in table {
                    let n: i64 = key.trim().parse().map_err(|_| anyhow!("gating level `{key}` is not a number"))?;
                    levels.insert(ProficiencyLevel::try_from(n)?, ops);
                }
                Ok::<_, anyhow::Error>(GatingTable::new(levels)?)
            })
            .transpose()?;
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        Ok(Self {
            store_path: raw.store_path.map(resolve),
            model_path: raw.model_path.map(resolve),
            default_tau: raw.default_tau.map(WarningThreshold::new).transpose()?,
            gates,
            port: raw.port,
            reveal_explanations: raw.reveal_explanations,
        })
    }

    /// Reads a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let source = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&source, path.parent().unwrap_or(Path::new(".")))
    }
}
