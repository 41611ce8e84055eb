//! ATE estimation under back-door adjustment: OLS, nearest-neighbor
//! matching, stabilized inverse propensity weighting, and forest-based
//! T-/X-learners, plus the propensity model and its diagnostics.

mod forest;
mod ips;
mod learners;
mod linear;
mod matching;
mod propensity;

pub use forest::{fit_forest, ForestModel, ForestParams};
pub use ips::{ate_ips, ips_from_scores, trim_overlap};
pub use learners::{ate_t_learner, ate_x_learner};
pub use linear::ate_linear;
pub use matching::ate_matching;
pub use propensity::{fit_propensity, propensity_diagnostics, PropensityDiagnostics, PropensityModel};

use crate::dataset::{DataError, FieldDataset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("only one treatment class present")]
    SingleClass,
    #[error("design matrix is rank deficient; collinear columns: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("a treatment group is empty")]
    EmptyGroup,
    #[error("no rows left after propensity trimming")]
    EmptyAfterTrim,
    #[error("too few rows: need {needed}, have {available}")]
    TooFewRows { needed: usize, available: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Linear,
    Matching,
    Ips,
    TLearner,
    XLearner,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Linear,
        Method::Matching,
        Method::Ips,
        Method::TLearner,
        Method::XLearner,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::Matching => "matching",
            Method::Ips => "ips",
            Method::TLearner => "t_learner",
            Method::XLearner => "x_learner",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Method::Linear),
            "matching" => Ok(Method::Matching),
            "ips" => Ok(Method::Ips),
            "t_learner" => Ok(Method::TLearner),
            "x_learner" => Ok(Method::XLearner),
            other => Err(format!("unknown estimator `{other}`")),
        }
    }
}

/// ATE point estimate with optional interval. Linear regression fills the
/// interval analytically; the other methods leave it to the bootstrap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub method: Method,
    pub ate: f64,
    pub ci: Option<[f64; 2]>,
    pub p_value: Option<f64>,
    pub n_treated: usize,
    pub n_control: usize,
    pub adjustment_columns: Vec<String>,
}

impl EffectEstimate {
    pub fn ci_contains(&self, value: f64) -> bool {
        self.ci.map_or(false, |[lo, hi]| lo <= value && value <= hi)
    }
}

/// Uniform estimator interface used by the bootstrap and the refuters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorKind {
    pub method: Method,
    /// Forest settings for the learner methods; ignored by the rest.
    #[serde(default)]
    pub forest: ForestParams,
    /// Propensity trimming bounds applied on the IPS path.
    #[serde(default = "default_trim")]
    pub trim: [f64; 2],
}

fn default_trim() -> [f64; 2] {
    [0.2, 0.8]
}

impl EstimatorKind {
    pub fn new(method: Method) -> Self {
        EstimatorKind {
            method,
            forest: ForestParams::default(),
            trim: default_trim(),
        }
    }

    /// Runs the estimator on the dataset. `seed` feeds the forest methods;
    /// the deterministic methods ignore it.
    pub fn run(
        &self,
        dataset: &FieldDataset,
        z: &[String],
        seed: u64,
    ) -> Result<EffectEstimate, EstimatorError> {
        match self.method {
            Method::Linear => ate_linear(dataset, z),
            Method::Matching => ate_matching(dataset, z),
            Method::Ips => ate_ips(dataset, z, self.trim[0], self.trim[1]),
            Method::TLearner => {
                let params = self.forest.with_seed(seed);
                ate_t_learner(dataset, z, &params)
            }
            Method::XLearner => {
                let params = self.forest.with_seed(seed);
                ate_x_learner(dataset, z, &params)
            }
        }
    }
}

/// Splits row indices by treatment. Errors if either side is empty.
pub(crate) fn split_groups(t: &[u8]) -> Result<(Vec<usize>, Vec<usize>), EstimatorError> {
    let treated: Vec<usize> = t.iter().enumerate().filter(|(_, &v)| v == 1).map(|(i, _)| i).collect();
    let control: Vec<usize> = t.iter().enumerate().filter(|(_, &v)| v == 0).map(|(i, _)| i).collect();
    if treated.is_empty() || control.is_empty() {
        return Err(EstimatorError::EmptyGroup);
    }
    Ok((treated, control))
}

/// Standardized row-major covariate matrix (population sd, constants to 0).
pub(crate) fn standardized_matrix(
    dataset: &FieldDataset,
    z: &[String],
) -> Result<Vec<Vec<f64>>, EstimatorError> {
    let mut ds = dataset.clone();
    ds.standardize(&z.to_vec())?;
    Ok(ds.matrix(z)?)
}
