//! Bootstrap intervals/p-values for any estimator and the four refutation
//! tests: placebo treatment, random common cause, random subset removal and
//! unobserved common cause.

use crate::dataset::{ColumnData, FieldDataset};
use crate::estimators::{EstimatorError, EstimatorKind};
use crate::exec;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RefuteError {
    #[error("{failed} of {total} replicates failed (first: {first})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("need at least 2 replicates, got {0}")]
    InsufficientReplicates(usize),
    #[error("too few rows after subsetting: {kept} (need >= 10)")]
    TooFewRows { kept: usize },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Data(#[from] crate::dataset::DataError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub replicate_ates: Vec<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub n_failed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefuterKind {
    Placebo,
    Rcc,
    Rsr,
    Ucc,
}

impl RefuterKind {
    pub fn name(&self) -> &'static str {
        match self {
            RefuterKind::Placebo => "placebo",
            RefuterKind::Rcc => "rcc",
            RefuterKind::Rsr => "rsr",
            RefuterKind::Ucc => "ucc",
        }
    }
}

impl std::str::FromStr for RefuterKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "placebo" => Ok(RefuterKind::Placebo),
            "rcc" => Ok(RefuterKind::Rcc),
            "rsr" => Ok(RefuterKind::Rsr),
            "ucc" => Ok(RefuterKind::Ucc),
            other => Err(format!("unknown refuter `{other}`")),
        }
    }
}

/// Outcome of a perturb-and-reestimate refutation test. The test fails when
/// the p-value drops below 0.05.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefutationReport {
    pub test: RefuterKind,
    pub new_effect: f64,
    pub p_value: f64,
    pub passed: bool,
    pub n_replicates: usize,
    pub n_failed: usize,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n as f64 - 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    }
}

fn collect_replicates(
    results: Vec<Result<f64, EstimatorError>>,
) -> Result<(Vec<f64>, usize), RefuteError> {
    let total = results.len();
    let mut values = Vec::with_capacity(total);
    let mut first_error = None;
    let mut failed = 0;
    for r in results {
        match r {
            Ok(v) => values.push(v),
            Err(e) => {
                failed += 1;
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    // failed replicates are dropped; more than 10% failing voids the run
    if failed * 10 > total {
        return Err(RefuteError::TooManyFailures {
            failed,
            total,
            first: first_error.unwrap_or_default(),
        });
    }
    Ok((values, failed))
}

/// Row-resampling bootstrap: percentile 95% interval and a two-sided sign
/// p-value `2 min(frac <= 0, frac >= 0)` clipped to `[1/B, 1]`.
pub fn bootstrap_effect(
    estimator: &EstimatorKind,
    dataset: &FieldDataset,
    z: &[String],
    b: usize,
    seed: u64,
) -> Result<BootstrapResult, RefuteError> {
    if b < 2 {
        return Err(RefuteError::InsufficientReplicates(b));
    }
    let n = dataset.n_rows();
    let results = exec::map_replicates(b, |k| {
        let rep_seed = exec::derive_seed(seed, k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
        let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let resampled = dataset.select_rows(&rows);
        estimator.run(&resampled, z, rep_seed).map(|e| e.ate)
    });
    let (mut values, n_failed) = collect_replicates(results)?;
    let b_eff = values.len();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci_low = percentile(&values, 0.025);
    let ci_high = percentile(&values, 0.975);
    let frac_le = values.iter().filter(|&&v| v <= 0.0).count() as f64 / b_eff as f64;
    let frac_ge = values.iter().filter(|&&v| v >= 0.0).count() as f64 / b_eff as f64;
    let p_value = (2.0 * frac_le.min(frac_ge)).clamp(1.0 / b as f64, 1.0);
    Ok(BootstrapResult {
        replicate_ates: values,
        ci_low,
        ci_high,
        p_value,
        n_failed,
    })
}

/// Two-sided tail probability of `target` under a normal fit to the
/// replicate estimates.
fn normal_tail_p(replicates: &[f64], target: f64) -> f64 {
    let n = replicates.len() as f64;
    let mean = replicates.iter().sum::<f64>() / n;
    let sd = (replicates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return if (target - mean).abs() < 1e-12 { 1.0 } else { 0.0 };
    }
    let zscore = ((target - mean) / sd).abs();
    2.0 * (1.0 - 0.5 * (1.0 + statrs::function::erf::erf(zscore / std::f64::consts::SQRT_2)))
}

fn report(
    test: RefuterKind,
    replicates: &[f64],
    target: f64,
    n_failed: usize,
) -> RefutationReport {
    let new_effect = replicates.iter().sum::<f64>() / replicates.len() as f64;
    let p_value = normal_tail_p(replicates, target);
    RefutationReport {
        test,
        new_effect,
        p_value,
        passed: p_value >= 0.05,
        n_replicates: replicates.len(),
        n_failed,
    }
}

fn run_refuter<F>(
    test: RefuterKind,
    k: usize,
    target: f64,
    replicate: F,
) -> Result<RefutationReport, RefuteError>
where
    F: Fn(usize) -> Result<f64, EstimatorError> + Sync + Send,
{
    if k < 2 {
        return Err(RefuteError::InsufficientReplicates(k));
    }
    let results = exec::map_replicates(k, &replicate);
    let (values, n_failed) = collect_replicates(results)?;
    if values.len() < 2 {
        return Err(RefuteError::InsufficientReplicates(values.len()));
    }
    Ok(report(test, &values, target, n_failed))
}

/// Placebo treatment: permute T and expect the effect to vanish. The
/// p-value tests 0 against the replicate distribution.
pub fn refute_placebo(
    estimator: &EstimatorKind,
    dataset: &FieldDataset,
    z: &[String],
    k: usize,
    seed: u64,
) -> Result<RefutationReport, RefuteError> {
    let t = dataset.treatment()?;
    run_refuter(RefuterKind::Placebo, k, 0.0, |i| {
        let rep_seed = exec::derive_seed(seed, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
        let mut permuted = t.clone();
        permuted.shuffle(&mut rng);
        let mut ds = dataset.clone();
        let name = ds.treatment_column.clone().unwrap();
        ds.set_column(&name, ColumnData::Binary(permuted));
        estimator.run(&ds, z, rep_seed).map(|e| e.ate)
    })
}

/// Random common cause: append an independent standard-normal covariate and
/// expect the original estimate to survive.
pub fn refute_rcc(
    estimator: &EstimatorKind,
    dataset: &FieldDataset,
    z: &[String],
    original_ate: f64,
    k: usize,
    seed: u64,
) -> Result<RefutationReport, RefuteError> {
    let n = dataset.n_rows();
    run_refuter(RefuterKind::Rcc, k, original_ate, |i| {
        let rep_seed = exec::derive_seed(seed, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
        let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut ds = dataset.clone();
        ds.set_column("__random_cause", ColumnData::Real(noise));
        let mut z2 = z.to_vec();
        z2.push("__random_cause".into());
        estimator.run(&ds, &z2, rep_seed).map(|e| e.ate)
    })
}

/// Random subset removal: re-estimate on uniform subsamples without
/// replacement.
pub fn refute_rsr(
    estimator: &EstimatorKind,
    dataset: &FieldDataset,
    z: &[String],
    original_ate: f64,
    keep_fraction: f64,
    k: usize,
    seed: u64,
) -> Result<RefutationReport, RefuteError> {
    assert!(keep_fraction > 0.0 && keep_fraction <= 1.0);
    let n = dataset.n_rows();
    let kept = (keep_fraction * n as f64).floor() as usize;
    if kept < 10 {
        return Err(RefuteError::TooFewRows { kept });
    }
    run_refuter(RefuterKind::Rsr, k, original_ate, |i| {
        let rep_seed = exec::derive_seed(seed, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        rows.truncate(kept);
        rows.sort_unstable();
        estimator.run(&dataset.select_rows(&rows), z, rep_seed).map(|e| e.ate)
    })
}

/// Sensitivity surface for unobserved confounding: a latent binary U flips
/// the treatment with probability `alpha_t` and shifts the outcome by
/// `alpha_y` outcome-sd, and the effect is re-estimated without adjusting
/// for U.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UccHeatmap {
    pub alpha_t: Vec<f64>,
    pub alpha_y: Vec<f64>,
    /// Rows indexed by `alpha_t`, columns by `alpha_y`.
    pub ate_grid: Vec<Vec<f64>>,
    pub mean_ate: f64,
}

impl UccHeatmap {
    /// CSV matrix with an `alpha_t \ alpha_y` header row.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("alpha_t\\alpha_y");
        for ay in &self.alpha_y {
            out.push_str(&format!(",{ay}"));
        }
        out.push('\n');
        for (i, at) in self.alpha_t.iter().enumerate() {
            out.push_str(&at.to_string());
            for v in &self.ate_grid[i] {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Default 5x5 strength grid.
pub fn default_ucc_grid() -> (Vec<f64>, Vec<f64>) {
    (
        vec![0.0, 0.125, 0.25, 0.375, 0.5],
        vec![0.0, 0.25, 0.5, 0.75, 1.0],
    )
}

/// `estimator_seed` must match the seed used for the unperturbed estimate so
/// the (0, 0) cell reproduces it bit-for-bit.
pub fn refute_ucc(
    estimator: &EstimatorKind,
    dataset: &FieldDataset,
    z: &[String],
    alpha_t: &[f64],
    alpha_y: &[f64],
    seed: u64,
    estimator_seed: u64,
) -> Result<UccHeatmap, RefuteError> {
    assert!(
        alpha_t.contains(&0.0) && alpha_y.contains(&0.0),
        "grid must include the unperturbed cell"
    );
    let n = dataset.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // common random numbers across cells: one latent draw, one flip draw
    let latent: Vec<u8> = (0..n).map(|_| rng.gen_bool(0.5) as u8).collect();
    let flip: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();

    let y = dataset.outcome()?;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sd_y = (y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / n as f64).sqrt();
    let t = dataset.treatment()?;
    let t_name = dataset.treatment_column.clone().expect("treatment designated");
    let y_name = dataset.outcome_column.clone().expect("outcome designated");

    let cells: Vec<(usize, usize)> = (0..alpha_t.len())
        .flat_map(|i| (0..alpha_y.len()).map(move |j| (i, j)))
        .collect();
    let results = exec::map_replicates(cells.len(), |c| {
        let (i, j) = cells[c];
        let (at, ay) = (alpha_t[i], alpha_y[j]);
        if at == 0.0 && ay == 0.0 {
            return estimator.run(dataset, z, estimator_seed).map(|e| e.ate);
        }
        let new_t: Vec<u8> = (0..n)
            .map(|r| if flip[r] < at { latent[r] } else { t[r] })
            .collect();
        let new_y: Vec<f64> = (0..n)
            .map(|r| y[r] + ay * sd_y * (2.0 * latent[r] as f64 - 1.0))
            .collect();
        let mut ds = dataset.clone();
        ds.set_column(&t_name, ColumnData::Binary(new_t));
        ds.set_column(&y_name, ColumnData::Real(new_y));
        estimator.run(&ds, z, estimator_seed).map(|e| e.ate)
    });

    let mut grid = vec![vec![0.0; alpha_y.len()]; alpha_t.len()];
    let mut first_error = None;
    let mut failed = 0;
    for (c, r) in results.into_iter().enumerate() {
        let (i, j) = cells[c];
        match r {
            Ok(v) => grid[i][j] = v,
            Err(e) => {
                failed += 1;
                first_error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failed > 0 {
        return Err(RefuteError::TooManyFailures {
            failed,
            total: cells.len(),
            first: first_error.unwrap_or_default(),
        });
    }
    let mean_ate =
        grid.iter().flatten().sum::<f64>() / (alpha_t.len() * alpha_y.len()) as f64;
    Ok(UccHeatmap {
        alpha_t: alpha_t.to_vec(),
        alpha_y: alpha_y.to_vec(),
        ate_grid: grid,
        mean_ate,
    })
}
