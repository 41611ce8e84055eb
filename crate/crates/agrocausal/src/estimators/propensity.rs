//! Logistic propensity model (IRLS with a small ridge penalty) and its
//! classification diagnostics.

use super::{EstimatorError};
use crate::dataset::FieldDataset;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const RIDGE: f64 = 1e-6;
const MAX_ITER: usize = 100;
const TOL: f64 = 1e-8;

/// Fitted logistic regression on standardized covariates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropensityModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub columns: Vec<String>,
    /// Set when IRLS hit the iteration cap before the coefficient change
    /// dropped below tolerance; the best iterate is kept.
    pub converged: bool,
}

impl PropensityModel {
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let eta = self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(c, x)| c * x)
                .sum::<f64>();
        sigmoid(eta)
    }

    pub fn scores(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.score_row(r)).collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fits the propensity model on the (already standardized) columns `z`.
pub fn fit_propensity(
    dataset: &FieldDataset,
    z: &[String],
) -> Result<PropensityModel, EstimatorError> {
    let t = dataset.treatment()?;
    if t.iter().all(|&v| v == 1) || t.iter().all(|&v| v == 0) {
        return Err(EstimatorError::SingleClass);
    }
    let x = dataset.matrix(z)?;
    fit_logistic(&x, &t, z)
}

pub(crate) fn fit_logistic(
    x: &[Vec<f64>],
    t: &[u8],
    columns: &[String],
) -> Result<PropensityModel, EstimatorError> {
    let n = x.len();
    let p = columns.len() + 1;
    let mut design = DMatrix::zeros(n, p);
    for i in 0..n {
        design[(i, 0)] = 1.0;
        for j in 0..columns.len() {
            design[(i, j + 1)] = x[i][j];
        }
    }
    let target = DVector::from_iterator(n, t.iter().map(|&v| v as f64));

    let mut beta = DVector::zeros(p);
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let eta = &design * &beta;
        let mu: DVector<f64> = eta.map(sigmoid);
        let w: DVector<f64> = mu.map(|m| (m * (1.0 - m)).max(1e-10));
        // X' W X + ridge
        let mut xtwx = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let mut s = 0.0;
                for i in 0..n {
                    s += design[(i, a)] * w[i] * design[(i, b)];
                }
                xtwx[(a, b)] = s;
                xtwx[(b, a)] = s;
            }
        }
        for a in 0..p {
            xtwx[(a, a)] += RIDGE;
        }
        let grad = design.transpose() * (&target - &mu) - RIDGE * &beta;
        let delta = match xtwx.cholesky() {
            Some(chol) => chol.solve(&grad),
            None => break,
        };
        beta += &delta;
        if delta.amax() < TOL {
            converged = true;
            break;
        }
    }

    Ok(PropensityModel {
        intercept: beta[0],
        coefficients: beta.as_slice()[1..].to_vec(),
        columns: columns.to_vec(),
        converged,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropensityDiagnostics {
    pub accuracy: f64,
    pub f1: f64,
    pub roc_auc: f64,
}

/// Accuracy/F1 at the given threshold plus rank-statistic ROC-AUC with
/// ties averaged.
pub fn propensity_diagnostics(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<PropensityDiagnostics, EstimatorError> {
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EstimatorError::SingleClass);
    }

    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fnn = 0.0;
    let mut correct = 0usize;
    for (s, &l) in scores.iter().zip(labels) {
        let pred = (*s >= threshold) as u8;
        if pred == l {
            correct += 1;
        }
        match (pred, l) {
            (1, 1) => tp += 1.0,
            (1, 0) => fp += 1.0,
            (0, 1) => fnn += 1.0,
            _ => {}
        }
    }
    let accuracy = correct as f64 / labels.len() as f64;
    let f1 = if 2.0 * tp + fp + fnn == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fnn)
    };

    // AUC via the Mann-Whitney rank statistic
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg_rank;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == 1)
        .map(|(r, _)| r)
        .sum();
    let roc_auc =
        (rank_sum_pos - n_pos as f64 * (n_pos as f64 + 1.0) / 2.0) / (n_pos as f64 * n_neg as f64);

    Ok(PropensityDiagnostics {
        accuracy,
        f1,
        roc_auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnData;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn no_signal_gives_flat_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 2000;
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen::<f64>() * 2.0 - 1.0]).collect();
        let t: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let m = fit_logistic(&x, &t, &["x".to_string()]).unwrap();
        assert!(m.coefficients[0].abs() < 1e-1, "{}", m.coefficients[0]);
        let share = 0.5;
        let mean_score: f64 = m.scores(&x).iter().sum::<f64>() / n as f64;
        assert!((mean_score - share).abs() < 0.02);
    }

    #[test]
    fn recovers_known_logistic_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let mut x = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(n);
        for _ in 0..n {
            let v: f64 = rng.sample(rand_distr::StandardNormal);
            let p = 1.0 / (1.0 + (-2.0 * v).exp());
            x.push(vec![v]);
            t.push(rng.gen_bool(p) as u8);
        }
        let m = fit_logistic(&x, &t, &["x".to_string()]).unwrap();
        assert!(m.converged);
        assert!(
            (m.coefficients[0] - 2.0).abs() < 0.2,
            "slope {}",
            m.coefficients[0]
        );
    }

    #[test]
    fn single_class_rejected() {
        let mut ds = FieldDataset::new(vec!["a".into()]);
        ds.set_column("t", ColumnData::Binary(vec![1]));
        ds.set_column("x", ColumnData::Real(vec![0.5]));
        ds.treatment_column = Some("t".into());
        assert!(matches!(
            fit_propensity(&ds, &["x".into()]),
            Err(EstimatorError::SingleClass)
        ));
    }

    #[test]
    fn perfect_scores_perfect_metrics() {
        let labels = [1u8, 0, 1, 0];
        let scores = [1.0, 0.0, 1.0, 0.0];
        let d = propensity_diagnostics(&scores, &labels, 0.5).unwrap();
        assert_eq!(d.accuracy, 1.0);
        assert_eq!(d.f1, 1.0);
        assert_eq!(d.roc_auc, 1.0);
    }

    #[test]
    fn constant_scores_auc_half() {
        let labels = [1u8, 0, 1, 0];
        let scores = [0.5; 4];
        let d = propensity_diagnostics(&scores, &labels, 0.5).unwrap();
        assert!((d.roc_auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hand_counted_auc() {
        let scores = [0.9, 0.8, 0.7, 0.4, 0.3, 0.2];
        let labels = [1u8, 1, 0, 1, 0, 0];
        let d = propensity_diagnostics(&scores, &labels, 0.5).unwrap();
        assert!((d.roc_auc - 8.0 / 9.0).abs() < 1e-12, "{}", d.roc_auc);
    }
}
