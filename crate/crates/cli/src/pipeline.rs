//! Shared plumbing for the subcommands: loading graphs/SCMs/datasets,
//! choosing the adjustment set, mapping graph nodes to dataset columns, and
//! running the estimate-and-refute matrix.

use crate::config::PipelineConfig;
use crate::report::{
    AnalysisReport, EstimateRow, OracleEffect, Provenance, RefutationCell, UccCell,
};
use agrocausal::dataset::{ColumnData, ColumnSpec, ColumnType, FieldDataset};
use agrocausal::estimators::{EstimatorKind, ForestParams, Method};
use agrocausal::graph::CausalGraph;
use agrocausal::refute::{self, RefuterKind};
use agrocausal::scm::{ScmFile, ScmSpec};
use agrocausal::{exec, AdjustmentSet};
use anyhow::{anyhow, bail, Context};
use std::path::Path;

/// Distinguishes "no valid adjustment set" (exit 3) from config errors
/// (exit 2) at the top level.
#[derive(Debug)]
pub struct NoAdjustmentSet;

impl std::fmt::Display for NoAdjustmentSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("no valid back-door adjustment set exists for this graph")
    }
}

impl std::error::Error for NoAdjustmentSet {}

pub fn load_graph(config: &PipelineConfig) -> anyhow::Result<CausalGraph> {
    match &config.graph_file {
        Some(p) => {
            let raw = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read graph {}", p.display()))?;
            CausalGraph::from_json(&raw).map_err(|e| anyhow!("bad graph {}: {e}", p.display()))
        }
        None => Ok(CausalGraph::farm_default()),
    }
}

pub fn load_scm(config: &PipelineConfig, flag: Option<&str>) -> anyhow::Result<ScmSpec> {
    let path = match flag {
        Some("") | None => config.scm_file.as_deref(),
        Some(p) => Some(Path::new(p)),
    };
    match path {
        Some(p) => {
            let raw = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read SCM {}", p.display()))?;
            let file: ScmFile =
                serde_json::from_str(&raw).map_err(|e| anyhow!("bad SCM {}: {e}", p.display()))?;
            ScmSpec::from_file(&file).map_err(|e| anyhow!("bad SCM {}: {e}", p.display()))
        }
        None => Ok(ScmSpec::farm_default()),
    }
}

/// Enumerates back-door sets and picks the configured or first minimal one.
pub fn choose_adjustment(
    graph: &CausalGraph,
    config: &PipelineConfig,
) -> anyhow::Result<(Vec<AdjustmentSet>, Vec<String>)> {
    let sets = graph
        .enumerate_backdoor_sets(64)
        .map_err(|e| anyhow!("identification failed: {e}"))?;
    let chosen: Vec<String> = match &config.adjustment_set {
        Some(explicit) => {
            let refs: Vec<&str> = explicit.iter().map(|s| s.as_str()).collect();
            let ok = graph
                .is_valid_backdoor(&refs)
                .map_err(|e| anyhow!("bad adjustment set in config: {e}"))?;
            if !ok {
                return Err(NoAdjustmentSet.into());
            }
            explicit.clone()
        }
        None => match sets.first() {
            Some(s) => s.members.iter().cloned().collect(),
            None => return Err(NoAdjustmentSet.into()),
        },
    };
    Ok((sets, chosen))
}

pub struct PreparedData {
    pub dataset: FieldDataset,
    /// Estimation columns for the adjustment set (categoricals one-hot,
    /// constants dropped).
    pub z_columns: Vec<String>,
    pub simulated: bool,
    pub oracle: Option<OracleEffect>,
}

/// Builds the analysis dataset: either an SCM draw (with its interventional
/// oracle effect) or an observational field table.
pub fn prepare_data(
    config: &PipelineConfig,
    graph: &CausalGraph,
    adjustment: &[String],
    simulate: Option<&str>,
    seed: u64,
) -> anyhow::Result<PreparedData> {
    let (dataset, simulated, oracle) = if simulate.is_some() || config.dataset_file.is_none() {
        let scm = load_scm(config, simulate)?;
        let dataset = scm
            .sample(config.n_simulate, exec::derive_seed(seed, 101))
            .map_err(|e| anyhow!("simulation failed: {e}"))?;
        let (ate, mc_se) = scm
            .true_ate(config.n_oracle, exec::derive_seed(seed, 102))
            .map_err(|e| anyhow!("oracle simulation failed: {e}"))?;
        let oracle = OracleEffect {
            ate,
            mc_se,
            n_mc: config.n_oracle,
        };
        (dataset, true, Some(oracle))
    } else {
        let path = config.dataset_file.as_ref().unwrap();
        let mut schema = agrocausal::dataset::field_schema();
        schema.push(ColumnSpec {
            name: config.treatment_column.clone(),
            column_type: ColumnType::Binary,
            optional: false,
        });
        let mut ds = agrocausal::dataset::load_fields_csv(path, &schema)
            .map_err(|e| anyhow!("cannot load dataset {}: {e}", path.display()))?;
        ds.treatment_column = Some(config.treatment_column.clone());
        ds.outcome_column = Some(config.outcome_column.clone());
        (ds, false, None)
    };

    let mut dataset = dataset;
    let mut z_columns = Vec::new();
    for node in adjustment {
        graph
            .node_id(node)
            .map_err(|_| anyhow!("adjustment node {node} not in graph"))?;
        let column = config
            .column_map
            .as_ref()
            .and_then(|m| m.get(node).cloned())
            .unwrap_or_else(|| node.clone());
        if !dataset.has_column(&column) {
            bail!("adjustment node {node} has no dataset column {column}");
        }
        match dataset.column(&column)? {
            ColumnData::Categorical(_) => {
                let hot = dataset.one_hot(&column)?;
                // first level is the reference; keeping all dummies would be
                // collinear with the intercept
                for name in hot.into_iter().skip(1) {
                    let values = dataset.real_column(&name)?;
                    if values.windows(2).all(|w| w[0] == w[1]) {
                        log::info!("dropping constant dummy column {name}");
                    } else {
                        z_columns.push(name);
                    }
                }
            }
            ColumnData::Date(_) => bail!("column {column} is a date; cannot adjust on it"),
            _ => {
                let values = dataset.real_column(&column)?;
                let constant = values.windows(2).all(|w| w[0] == w[1]);
                if constant {
                    log::info!("dropping constant adjustment column {column}");
                } else {
                    z_columns.push(column);
                }
            }
        }
    }
    Ok(PreparedData {
        dataset,
        z_columns,
        simulated,
        oracle,
    })
}

pub fn parse_methods(flag: Option<&str>, config: &PipelineConfig) -> anyhow::Result<Vec<Method>> {
    let names: Option<Vec<String>> = match flag {
        Some(s) => Some(s.split(',').map(|p| p.trim().to_string()).collect()),
        None => config.estimators.clone(),
    };
    match names {
        None => Ok(Method::ALL.to_vec()),
        Some(names) => names
            .iter()
            .map(|n| n.parse::<Method>().map_err(|e| anyhow!(e)))
            .collect(),
    }
}

pub fn parse_refuters(
    flag: Option<&str>,
    config: &PipelineConfig,
) -> anyhow::Result<Vec<RefuterKind>> {
    let names: Option<Vec<String>> = match flag {
        Some(s) => Some(s.split(',').map(|p| p.trim().to_string()).collect()),
        None => config.refuters.clone(),
    };
    match names {
        None => Ok(vec![
            RefuterKind::Placebo,
            RefuterKind::Rcc,
            RefuterKind::Rsr,
            RefuterKind::Ucc,
        ]),
        Some(names) => names
            .iter()
            .map(|n| n.parse::<RefuterKind>().map_err(|e| anyhow!(e)))
            .collect(),
    }
}

fn estimator_kind(method: Method, config: &PipelineConfig) -> EstimatorKind {
    EstimatorKind {
        method,
        forest: ForestParams {
            n_trees: config.forest.n_trees,
            min_leaf: config.forest.min_leaf,
            max_depth: config.forest.max_depth,
            features_per_split: config.forest.features_per_split,
            seed: 0,
        },
        trim: config.trim,
    }
}

/// Runs the full estimate + bootstrap + refute matrix and assembles the
/// report.
pub fn run_matrix(
    config: &PipelineConfig,
    data: &PreparedData,
    adjustment: &[String],
    methods: &[Method],
    refuters: &[RefuterKind],
    seed: u64,
    config_sha256: &str,
) -> anyhow::Result<AnalysisReport> {
    let mut estimates = Vec::new();
    let mut refutations = Vec::new();
    let z = &data.z_columns;

    for (i, &method) in methods.iter().enumerate() {
        let est = estimator_kind(method, config);
        let est_seed = exec::derive_seed(seed, 1000 + i as u64);
        log::info!("estimating with {}", method.name());
        let point = est
            .run(&data.dataset, z, est_seed)
            .map_err(|e| anyhow!("{} failed on the full dataset: {e}", method.name()))?;
        let boot = refute::bootstrap_effect(
            &est,
            &data.dataset,
            z,
            config.bootstrap_b,
            exec::derive_seed(seed, 2000 + i as u64),
        )
        .map_err(|e| anyhow!("bootstrap failed for {}: {e}", method.name()))?;
        estimates.push(EstimateRow {
            method,
            ate: point.ate,
            ci_low: boot.ci_low,
            ci_high: boot.ci_high,
            p_value: boot.p_value,
            n_treated: point.n_treated,
            n_control: point.n_control,
        });

        let k = config.refuter_replicates;
        for &refuter in refuters {
            log::info!("refuting {} with {}", method.name(), refuter.name());
            let mut cell = RefutationCell {
                estimator: method,
                refuter,
                result: None,
                ucc: None,
                error: None,
            };
            let rseed = exec::derive_seed(seed, 3000 + i as u64 * 16 + refuter as u64);
            match refuter {
                RefuterKind::Placebo => {
                    match refute::refute_placebo(&est, &data.dataset, z, k, rseed) {
                        Ok(r) => cell.result = Some(r),
                        Err(e) => cell.error = Some(e.to_string()),
                    }
                }
                RefuterKind::Rcc => {
                    match refute::refute_rcc(&est, &data.dataset, z, point.ate, k, rseed) {
                        Ok(r) => cell.result = Some(r),
                        Err(e) => cell.error = Some(e.to_string()),
                    }
                }
                RefuterKind::Rsr => {
                    match refute::refute_rsr(
                        &est,
                        &data.dataset,
                        z,
                        point.ate,
                        config.keep_fraction,
                        k,
                        rseed,
                    ) {
                        Ok(r) => cell.result = Some(r),
                        Err(e) => cell.error = Some(e.to_string()),
                    }
                }
                RefuterKind::Ucc => {
                    let (default_t, default_y) = refute::default_ucc_grid();
                    let at = config.ucc_alpha_t.clone().unwrap_or(default_t);
                    let ay = config.ucc_alpha_y.clone().unwrap_or(default_y);
                    match refute::refute_ucc(&est, &data.dataset, z, &at, &ay, rseed, est_seed) {
                        Ok(h) => {
                            cell.ucc = Some(UccCell {
                                origin_ate: h.ate_grid[0][0],
                                heatmap: h,
                            })
                        }
                        Err(e) => cell.error = Some(e.to_string()),
                    }
                }
            }
            refutations.push(cell);
        }
    }

    Ok(AnalysisReport {
        provenance: Provenance {
            config_sha256: config_sha256.to_string(),
            seed,
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        adjustment_set: adjustment.to_vec(),
        adjustment_columns: z.clone(),
        n_rows: data.dataset.n_rows(),
        simulated: data.simulated,
        oracle: data.oracle.clone(),
        estimates,
        refutations,
    })
}
