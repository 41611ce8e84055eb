//! Empirical evaluation of decision-support recommendations from observational data.
//!
//! The crate covers the full pipeline: blending coarse and fine weather
//! forecasts into field-level series ([`blend`]), turning them into sowing
//! recommendations and binary treatment labels ([`rules`]), encoding the farm
//! system as a causal DAG and identifying back-door adjustment sets
//! ([`graph`]), estimating the average treatment effect with five methods
//! ([`estimators`]), stress-testing estimates with bootstrap and refutation
//! machinery ([`refute`]), and validating everything against a structural
//! causal model that doubles as a ground-truth oracle ([`scm`]).
//!
//! Replicated work (bootstrap draws, refuter replicates, forest trees) runs
//! on rayon when the default `parallel` feature is enabled and falls back to
//! sequential execution otherwise; per-replicate seeds are derived from the
//! master seed so results are identical either way.

pub mod blend;
pub mod dataset;
pub mod estimators;
pub mod exec;
pub mod graph;
pub mod refute;
pub mod rules;
pub mod scm;

pub use dataset::FieldDataset;
pub use estimators::{EffectEstimate, EstimatorKind, ForestParams};
pub use graph::{AdjustmentSet, CausalGraph, NodeRole};
pub use refute::{BootstrapResult, RefutationReport, UccHeatmap};
pub use scm::ScmSpec;

/// The farm-system graph reconstructed from the case study, as shipped JSON.
pub const FARM_GRAPH_JSON: &str = include_str!("../data/farm_graph.json");
/// Default structural causal model over the farm graph (synthetic oracle).
pub const FARM_SCM_JSON: &str = include_str!("../data/scm/farm_default.json");
/// Default cotton sowing rule set (temperature thresholds and windows).
pub const COTTON_RULES_JSON: &str = include_str!("../data/rules/cotton_default.json");
