//! 1-nearest-neighbor distance matching with replacement.

use super::{split_groups, standardized_matrix, EffectEstimate, EstimatorError, Method};
use crate::dataset::FieldDataset;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index (into `pool`) of the nearest row to `row`; ties break to the
/// lowest pool index by strict comparison in scan order.
fn nearest(row: &[f64], x: &[Vec<f64>], pool: &[usize]) -> usize {
    let mut best = pool[0];
    let mut best_d = sq_dist(row, &x[pool[0]]);
    for &j in &pool[1..] {
        let d = sq_dist(row, &x[j]);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Matches every unit to its nearest opposite-group unit on standardized
/// covariates (Euclidean, with replacement) and averages the per-unit
/// treated-minus-control outcome differences over all units, targeting the
/// ATE.
pub fn ate_matching(dataset: &FieldDataset, z: &[String]) -> Result<EffectEstimate, EstimatorError> {
    let t = dataset.treatment()?;
    let y = dataset.outcome()?;
    let (treated, control) = split_groups(&t)?;
    let x = standardized_matrix(dataset, z)?;

    let mut total = 0.0;
    for &i in &treated {
        let j = nearest(&x[i], &x, &control);
        total += y[i] - y[j];
    }
    for &i in &control {
        let j = nearest(&x[i], &x, &treated);
        total += y[j] - y[i];
    }
    let ate = total / (t.len() as f64);

    Ok(EffectEstimate {
        method: Method::Matching,
        ate,
        ci: None,
        p_value: None,
        n_treated: treated.len(),
        n_control: control.len(),
        adjustment_columns: z.to_vec(),
    })
}
