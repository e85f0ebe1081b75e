//! Training config file and dataset loading.

use std::path::{Path, PathBuf};

use hnsd_core::fixtures::two_block_dataset;
use hnsd_core::hypergraph::Hypergraph;
use hnsd_core::nn::{parse_features, parse_labels, Dataset, ModelConfig};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_RUNS: usize = 10;

/// Generated two-class fixture used in place of data files.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub nodes: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Relative paths resolve against the config file's directory. Exactly one of the file triple
/// and `synthetic` must be given.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub hypergraph: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub synthetic: Option<SyntheticSource>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Directory receiving `run_<r>.csv` metric traces.
    pub metrics_dir: Option<PathBuf>,
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}

pub(crate) fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

impl TrainConfig {
    /// Parses the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut config: TrainConfig = serde_json::from_str(&read(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.hypergraph, &mut config.features, &mut config.labels, &mut config.metrics_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if config.runs == 0 {
            return Err(CliError::Schema("runs must be at least 1".into()));
        }
        config.model.validate()?;
        Ok(config)
    }

    pub fn dataset(&self) -> Result<Dataset, CliError> {
        match (&self.synthetic, &self.hypergraph, &self.features, &self.labels) {
            (Some(s), None, None, None) => {
                if s.nodes < 10 || s.nodes % 2 == 1 {
                    return Err(CliError::Schema("synthetic.nodes must be even and at least 10".into()));
                }
                Ok(two_block_dataset(s.nodes, s.seed))
            }
            (None, Some(h), Some(x), Some(y)) => {
                let hypergraph = Hypergraph::parse(&read(h)?)?;
                let features = parse_features(&read(x)?)?;
                let labels = parse_labels(&read(y)?)?;
                Ok(Dataset::new(hypergraph, features, labels)?)
            }
            (Some(_), ..) => Err(CliError::Schema("give either synthetic or data files, not both".into())),
            _ => Err(CliError::Schema("hypergraph, features, and labels are all required".into())),
        }
    }
}
