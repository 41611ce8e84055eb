//! Pipeline configuration: a JSON file with optional overrides from flags.
//! Every path is optional; built-in defaults (farm graph, farm SCM, cotton
//! rules) fill the gaps.

use agrocausal::blend::TrendUnits;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPaths {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationConfig {
    pub csv: PathBuf,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub features_per_split: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 200,
            min_leaf: 5,
            max_depth: None,
            features_per_split: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub graph_file: Option<PathBuf>,
    pub dataset_file: Option<PathBuf>,
    pub scm_file: Option<PathBuf>,
    pub rules_file: Option<PathBuf>,
    pub forecast_grid: Option<GridPaths>,
    pub fine_grid: Option<GridPaths>,
    pub coarse_grid: Option<GridPaths>,
    pub station: Option<StationConfig>,

    /// Estimator names; `None` means all five.
    pub estimators: Option<Vec<String>>,
    /// Refuter names; `None` means all four.
    pub refuters: Option<Vec<String>>,
    /// Explicit adjustment set (node names); `None` selects the first
    /// minimal back-door set.
    pub adjustment_set: Option<Vec<String>>,

    pub bootstrap_b: usize,
    pub refuter_replicates: usize,
    pub keep_fraction: f64,
    pub trim: [f64; 2],
    pub forest: ForestConfig,
    pub ucc_alpha_t: Option<Vec<f64>>,
    pub ucc_alpha_y: Option<Vec<f64>>,

    /// Rows to draw when simulating from an SCM.
    pub n_simulate: usize,
    /// Monte-Carlo draws for the interventional oracle effect.
    pub n_oracle: usize,
    pub trend_units: TrendUnits,

    /// Graph-node to dataset-column mapping for observational data; node
    /// names map to themselves when absent.
    pub column_map: Option<BTreeMap<String, String>>,
    pub treatment_column: String,
    pub outcome_column: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            graph_file: None,
            dataset_file: None,
            scm_file: None,
            rules_file: None,
            forecast_grid: None,
            fine_grid: None,
            coarse_grid: None,
            station: None,
            estimators: None,
            refuters: None,
            adjustment_set: None,
            bootstrap_b: 1000,
            refuter_replicates: 50,
            keep_fraction: 0.8,
            trim: [0.2, 0.8],
            forest: ForestConfig::default(),
            ucc_alpha_t: None,
            ucc_alpha_y: None,
            n_simulate: 5000,
            n_oracle: 20_000,
            trend_units: TrendUnits::default(),
            column_map: None,
            treatment_column: "treated".into(),
            outcome_column: "yield_kg_ha".into(),
        }
    }
}

pub struct LoadedConfig {
    pub config: PipelineConfig,
    /// SHA-256 of the raw config bytes (or of the serialized defaults when
    /// no file was given), for the provenance block.
    pub sha256: String,
}

impl LoadedConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<LoadedConfig> {
        let (config, bytes) = match path {
            Some(p) => {
                let raw = std::fs::read(p)
                    .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", p.display()))?;
                let config: PipelineConfig = serde_json::from_slice(&raw)
                    .map_err(|e| anyhow::anyhow!("bad config {}: {e}", p.display()))?;
                (config, raw)
            }
            None => {
                let config = PipelineConfig::default();
                let raw = serde_json::to_vec(&config)?;
                (config, raw)
            }
        };
        let sha256 = format!("{:x}", Sha256::digest(&bytes));
        Ok(LoadedConfig { config, sha256 })
    }
}
