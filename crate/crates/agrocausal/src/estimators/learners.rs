//! Forest-based meta-learners: T-learner and X-learner.

use super::{
    fit_forest, fit_propensity, split_groups, EffectEstimate, EstimatorError, ForestParams, Method,
};
use crate::dataset::FieldDataset;
use crate::exec;

fn group_matrices(
    dataset: &FieldDataset,
    z: &[String],
) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<u8>, Vec<usize>, Vec<usize>), EstimatorError> {
    let t = dataset.treatment()?;
    let y = dataset.outcome()?;
    let x = dataset.matrix(z)?;
    let (treated, control) = split_groups(&t)?;
    Ok((x, y, t, treated, control))
}

fn rows(x: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| x[i].clone()).collect()
}

fn vals(y: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| y[i]).collect()
}

/// Fits outcome forests per group and averages the predicted contrast
/// `mu1(x) - mu0(x)` over all rows.
pub fn ate_t_learner(
    dataset: &FieldDataset,
    z: &[String],
    params: &ForestParams,
) -> Result<EffectEstimate, EstimatorError> {
    let (x, y, _, treated, control) = group_matrices(dataset, z)?;
    let p1 = params.with_seed(exec::derive_seed(params.seed, 1));
    let p0 = params.with_seed(exec::derive_seed(params.seed, 2));
    let mu1 = fit_forest(&rows(&x, &treated), &vals(&y, &treated), &p1)?;
    let mu0 = fit_forest(&rows(&x, &control), &vals(&y, &control), &p0)?;

    let ate = x
        .iter()
        .map(|row| mu1.predict(row) - mu0.predict(row))
        .sum::<f64>()
        / x.len() as f64;

    Ok(EffectEstimate {
        method: Method::TLearner,
        ate,
        ci: None,
        p_value: None,
        n_treated: treated.len(),
        n_control: control.len(),
        adjustment_columns: z.to_vec(),
    })
}

/// X-learner: stage-1 group forests, stage-2 forests on imputed per-unit
/// effects, combined with propensity weights
/// `tau(x) = e(x) tau0(x) + (1 - e(x)) tau1(x)`.
pub fn ate_x_learner(
    dataset: &FieldDataset,
    z: &[String],
    params: &ForestParams,
) -> Result<EffectEstimate, EstimatorError> {
    let (x, y, _, treated, control) = group_matrices(dataset, z)?;
    let p1 = params.with_seed(exec::derive_seed(params.seed, 1));
    let p0 = params.with_seed(exec::derive_seed(params.seed, 2));
    let mu1 = fit_forest(&rows(&x, &treated), &vals(&y, &treated), &p1)?;
    let mu0 = fit_forest(&rows(&x, &control), &vals(&y, &control), &p0)?;

    // imputed treatment effects
    let d1: Vec<f64> = treated.iter().map(|&i| y[i] - mu0.predict(&x[i])).collect();
    let d0: Vec<f64> = control.iter().map(|&i| mu1.predict(&x[i]) - y[i]).collect();

    let q1 = params.with_seed(exec::derive_seed(params.seed, 3));
    let q0 = params.with_seed(exec::derive_seed(params.seed, 4));
    let tau1 = fit_forest(&rows(&x, &treated), &d1, &q1)?;
    let tau0 = fit_forest(&rows(&x, &control), &d0, &q0)?;

    let mut scaled = dataset.clone();
    scaled.standardize(&z.to_vec())?;
    let prop = fit_propensity(&scaled, z)?;
    let scores = prop.scores(&scaled.matrix(z)?);

    let ate = x
        .iter()
        .zip(&scores)
        .map(|(row, &e)| e * tau0.predict(row) + (1.0 - e) * tau1.predict(row))
        .sum::<f64>()
        / x.len() as f64;

    Ok(EffectEstimate {
        method: Method::XLearner,
        ate,
        ci: None,
        p_value: None,
        n_treated: treated.len(),
        n_control: control.len(),
        adjustment_columns: z.to_vec(),
    })
}
