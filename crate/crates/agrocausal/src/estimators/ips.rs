//! Stabilized (self-normalized) inverse propensity weighting with overlap
//! trimming.

use super::{fit_propensity, split_groups, EffectEstimate, EstimatorError, Method};
use crate::dataset::FieldDataset;

/// Retains rows with `low <= score <= high`.
pub fn trim_overlap(
    dataset: &FieldDataset,
    scores: &[f64],
    low: f64,
    high: f64,
) -> Result<(FieldDataset, Vec<f64>), EstimatorError> {
    assert_eq!(scores.len(), dataset.n_rows());
    let keep: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i] >= low && scores[i] <= high)
        .collect();
    if keep.is_empty() {
        return Err(EstimatorError::EmptyAfterTrim);
    }
    let kept_scores = keep.iter().map(|&i| scores[i]).collect();
    Ok((dataset.select_rows(&keep), kept_scores))
}

/// Hajek estimator on given scores:
/// `sum(T Y / e) / sum(T / e) - sum((1-T) Y / (1-e)) / sum((1-T) / (1-e))`.
pub fn ips_from_scores(t: &[u8], y: &[f64], scores: &[f64]) -> Result<f64, EstimatorError> {
    let (treated, control) = split_groups(t)?;
    let mut num1 = 0.0;
    let mut den1 = 0.0;
    for &i in &treated {
        let w = 1.0 / scores[i];
        num1 += w * y[i];
        den1 += w;
    }
    let mut num0 = 0.0;
    let mut den0 = 0.0;
    for &i in &control {
        let w = 1.0 / (1.0 - scores[i]);
        num0 += w * y[i];
        den0 += w;
    }
    Ok(num1 / den1 - num0 / den0)
}

/// Fits the propensity model on standardized `z`, trims extreme scores, and
/// applies the stabilized weighting estimator to the retained rows.
pub fn ate_ips(
    dataset: &FieldDataset,
    z: &[String],
    trim_low: f64,
    trim_high: f64,
) -> Result<EffectEstimate, EstimatorError> {
    let mut scaled = dataset.clone();
    scaled.standardize(&z.to_vec())?;
    let model = fit_propensity(&scaled, z)?;
    let scores = model.scores(&scaled.matrix(z)?);

    let (trimmed, kept_scores) = trim_overlap(dataset, &scores, trim_low, trim_high)?;
    let t = trimmed.treatment()?;
    let y = trimmed.outcome()?;
    let ate = ips_from_scores(&t, &y, &kept_scores)?;
    let (treated, control) = split_groups(&t)?;

    Ok(EffectEstimate {
        method: Method::Ips,
        ate,
        ci: None,
        p_value: None,
        n_treated: treated.len(),
        n_control: control.len(),
        adjustment_columns: z.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnData;

    fn dataset(t: &[u8], y: &[f64]) -> FieldDataset {
        let mut ds = FieldDataset::new((0..t.len()).map(|i| i.to_string()).collect());
        ds.set_column("t", ColumnData::Binary(t.to_vec()));
        ds.set_column("y", ColumnData::Real(y.to_vec()));
        ds.treatment_column = Some("t".into());
        ds.outcome_column = Some("y".into());
        ds
    }

    #[test]
    fn trim_thresholds() {
        let ds = dataset(&[1, 0, 1, 0], &[1.0, 2.0, 3.0, 4.0]);
        let scores = [0.1, 0.3, 0.9, 0.5];
        let (trimmed, kept) = trim_overlap(&ds, &scores, 0.2, 0.8).unwrap();
        assert_eq!(trimmed.n_rows(), 2);
        assert_eq!(trimmed.field_ids(), &["1".to_string(), "3".to_string()]);
        assert_eq!(kept, vec![0.3, 0.5]);
    }

    #[test]
    fn trim_noop_and_empty() {
        let ds = dataset(&[1, 0], &[1.0, 2.0]);
        let (same, _) = trim_overlap(&ds, &[0.5, 0.5], 0.2, 0.8).unwrap();
        assert_eq!(same.n_rows(), 2);
        assert!(matches!(
            trim_overlap(&ds, &[0.05, 0.05], 0.2, 0.8),
            Err(EstimatorError::EmptyAfterTrim)
        ));
    }

    #[test]
    fn constant_scores_reduce_to_mean_difference() {
        let t = [1, 0, 1, 0, 0];
        let y = [10.0, 2.0, 14.0, 4.0, 6.0];
        let ate = ips_from_scores(&t, &y, &[0.5; 5]).unwrap();
        assert!((ate - (12.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_hajek() {
        let e = [0.25, 0.25, 0.75, 0.75];
        let t = [1u8, 0, 1, 0];
        let y = [10.0, 8.0, 12.0, 6.0];
        let ate = ips_from_scores(&t, &y, &e).unwrap();
        let treated = (10.0 / 0.25 + 12.0 / 0.75) / (1.0 / 0.25 + 1.0 / 0.75);
        let control = (8.0 / 0.75 + 6.0 / 0.25) / (1.0 / 0.75 + 1.0 / 0.25);
        assert!((ate - (treated - control)).abs() < 1e-12);
    }

    #[test]
    fn group_swap_negates() {
        let t = [1u8, 0, 1, 0, 0, 1];
        let y = [4.0, 1.5, 5.0, 2.0, 1.0, 6.0];
        let e = [0.6, 0.4, 0.7, 0.3, 0.45, 0.55];
        let a = ips_from_scores(&t, &y, &e).unwrap();
        let flipped: Vec<u8> = t.iter().map(|&v| 1 - v).collect();
        let e_flipped: Vec<f64> = e.iter().map(|&v| 1.0 - v).collect();
        let b = ips_from_scores(&flipped, &y, &e_flipped).unwrap();
        assert!((a + b).abs() < 1e-12);
    }
}
