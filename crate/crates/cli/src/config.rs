//! Declarative config file support. Every flag value can also be set in a
//! TOML file, one section per subcommand; explicit flags override file
//! values, which override built-in defaults.

use anyhow::Context;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub cutoff: CutoffSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSection {
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub rejects: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub data: Option<PathBuf>,
    pub strategy: Option<String>,
    pub task: Option<String>,
    pub provider: Option<String>,
    pub cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub direct_answer: Option<bool>,
    pub workers: Option<usize>,
    pub budget: Option<usize>,
    pub table_budget: Option<usize>,
    pub model: Option<String>,
    pub benchmark: Option<String>,
    pub mock_script: Option<PathBuf>,
    pub selection_shots: Option<PathBuf>,
    pub answer_shots: Option<PathBuf>,
    pub requests_per_minute: Option<u32>,
    pub max_attempts: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub pred: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub metrics: Option<String>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    pub pred: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSection {
    pub data: Option<PathBuf>,
    pub threshold: Option<u64>,
    pub report: Option<PathBuf>,
    pub pred: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }
}

/// Flag value wins, then the config file, then the default.
pub fn effective<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// As [`effective`] but for settings with no usable default.
pub fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> anyhow::Result<T> {
    flag.or(file)
        .ok_or_else(|| anyhow::anyhow!("missing required option --{name} (or config key)"))
}
