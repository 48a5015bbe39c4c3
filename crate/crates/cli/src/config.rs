use std::path::Path;

use serde::{Deserialize, Serialize};

use polyfract::environment::DisorderSpec;
use polyfract::graph::{build_line, build_sierpinski_gasket, WeightedGraph};
use polyfract::rng::derive_seed;

use crate::CliError;

/// Labels of the child seeds derived from the root seed.
pub const DISORDER_STREAM: u64 = 1;
pub const PERCOLATION_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSection,
    #[serde(default)]
    pub disorder: DisorderSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub coarse_grain: CoarseGrainSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// `gasket`, `line` or `file`.
    pub family: String,
    pub level: Option<u32>,
    pub radius: Option<u32>,
    /// Edge list for `family = "file"`.
    pub path: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    /// `gaussian`, `rademacher` or `discrete`.
    pub family: String,
    pub values: Option<Vec<f64>>,
    pub probs: Option<Vec<f64>>,
}

impl Default for DisorderSection {
    fn default() -> Self {
        DisorderSection {
            family: "gaussian".into(),
            values: None,
            probs: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub beta: Option<f64>,
    pub betas: Option<Vec<f64>>,
    pub horizon: Option<usize>,
    pub replicas: Option<usize>,
    pub checkpoints: Option<Vec<usize>>,
    pub n_max: Option<usize>,
    pub source: Option<u32>,
    pub schedule: Option<ScheduleSection>,
    pub synthetic: Option<SyntheticSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub c1: f64,
    /// Defaults to the theoretical `4 / (2 - d_s)`.
    pub exponent: Option<f64>,
    #[serde(default)]
    pub min_n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub exponent: f64,
    #[serde(default = "one")]
    pub prefactor: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseGrainSection {
    pub n: Option<usize>,
    pub c1: Option<Vec<f64>>,
    pub c2: Option<Vec<f64>>,
    pub r_split: Option<Vec<f64>>,
    pub y_radius: Option<u32>,
    pub c_v_prime: Option<f64>,
    pub threshold: Option<f64>,
    pub c7: Option<f64>,
    pub i_max: Option<usize>,
    pub beta: Option<f64>,
    /// Omitted: half the minimal tube probability.
    pub c_tilde: Option<f64>,
    pub replica: Option<u64>,
    pub conditional_row: Option<usize>,
    pub samples: Option<u64>,
    pub rho: Option<Vec<f64>>,
    pub horizon: Option<usize>,
    pub runs: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub format: Option<Format>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
}

pub fn require<T: Clone>(value: &Option<T>, key: &str, command: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Config(format!("`{key}` is required for `{command}`")))
}

impl ExperimentConfig {
    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(0)
    }

    pub fn build_graph(&self) -> Result<WeightedGraph, CliError> {
        let g = &self.graph;
        match g.family.as_str() {
            "gasket" => Ok(build_sierpinski_gasket(require(&g.level, "graph.level", "gasket")?)?),
            "line" => Ok(build_line(require(&g.radius, "graph.radius", "line")?)?),
            "file" => {
                let path = require(&g.path, "graph.path", "file")?;
                let text =
                    std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
                Ok(WeightedGraph::from_edge_list(&text)?)
            }
            other => Err(CliError::Config(format!(
                "graph.family must be gasket, line or file, got `{other}`"
            ))),
        }
    }

    pub fn disorder(&self) -> Result<DisorderSpec, CliError> {
        let seed = derive_seed(self.seed(), DISORDER_STREAM);
        let d = &self.disorder;
        match d.family.as_str() {
            "gaussian" => Ok(DisorderSpec::gaussian(seed)),
            "rademacher" => Ok(DisorderSpec::rademacher(seed)),
            "discrete" => {
                let values = require(&d.values, "disorder.values", "discrete")?;
                let probs = require(&d.probs, "disorder.probs", "discrete")?;
                DisorderSpec::discrete(values, probs, seed).map_err(|e| CliError::Config(e.to_string()))
            }
            other => Err(CliError::Config(format!(
                "disorder.family must be gaussian, rademacher or discrete, got `{other}`"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = parse("[graph]\nfamily = \"line\"\nradius = 4\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn defaults_fill_in() {
        let c = parse("[graph]\nfamily = \"gasket\"\nlevel = 3\n").unwrap();
        assert_eq!(c.disorder.family, "gaussian");
        assert_eq!(c.seed(), 0);
        assert_eq!(c.build_graph().unwrap().vertex_count(), 42);
    }
}
