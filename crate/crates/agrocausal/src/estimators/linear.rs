//! OLS adjustment estimator with analytic interval.

use super::{split_groups, EffectEstimate, EstimatorError, Method};
use crate::dataset::FieldDataset;
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

/// Regresses the outcome on `[1, T, z]`; the ATE is the treatment
/// coefficient, with a normal-approximation CI and p-value from its
/// standard error.
pub fn ate_linear(dataset: &FieldDataset, z: &[String]) -> Result<EffectEstimate, EstimatorError> {
    let t = dataset.treatment()?;
    let y = dataset.outcome()?;
    let (treated, control) = split_groups(&t)?;
    let n = y.len();
    let p = z.len() + 2;

    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        x[(i, 1)] = t[i] as f64;
    }
    for (j, col) in z.iter().enumerate() {
        let v = dataset.real_column(col)?;
        for i in 0..n {
            x[(i, j + 2)] = v[i];
        }
    }
    let yv = DVector::from_column_slice(&y);

    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &yv;
    let chol = xtx.clone().cholesky().ok_or_else(|| {
        EstimatorError::RankDeficient(collinear_columns(&xtx, z))
    })?;
    let beta = chol.solve(&xty);

    let residuals = &yv - &x * &beta;
    let dof = (n as f64 - p as f64).max(1.0);
    let sigma2 = residuals.norm_squared() / dof;
    let xtx_inv = chol.inverse();
    let se = (sigma2 * xtx_inv[(1, 1)]).sqrt();

    let ate = beta[1];
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (ci, p_value) = if se > 0.0 {
        let zcrit = normal.inverse_cdf(0.975);
        let p = 2.0 * (1.0 - normal.cdf((ate / se).abs()));
        (Some([ate - zcrit * se, ate + zcrit * se]), Some(p))
    } else {
        (Some([ate, ate]), Some(if ate == 0.0 { 1.0 } else { 0.0 }))
    };

    Ok(EffectEstimate {
        method: Method::Linear,
        ate,
        ci,
        p_value,
        n_treated: treated.len(),
        n_control: control.len(),
        adjustment_columns: z.to_vec(),
    })
}

/// Names z-columns implicated in rank deficiency: those whose diagonal in
/// X'X is (numerically) reproducible from the other columns. A cheap
/// heuristic: report columns with near-zero pivot in the LDL-style sweep.
fn collinear_columns(xtx: &DMatrix<f64>, z: &[String]) -> Vec<String> {
    let p = xtx.nrows();
    let mut a = xtx.clone();
    let mut bad = Vec::new();
    let scale = (0..p).map(|i| xtx[(i, i)].abs()).fold(1.0_f64, f64::max);
    for k in 0..p {
        let pivot = a[(k, k)];
        if pivot.abs() <= 1e-10 * scale {
            if k >= 2 {
                bad.push(z[k - 2].clone());
            } else {
                bad.push(if k == 0 { "<intercept>".into() } else { "<treatment>".into() });
            }
            continue;
        }
        for i in (k + 1)..p {
            let f = a[(i, k)] / pivot;
            for j in k..p {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    bad
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
    fn exact_shift_recovered() {
        let t = [1, 0, 1, 0, 1, 0];
        let y: Vec<f64> = t.iter().map(|&v| 2.0 + 3.0 * v as f64).collect();
        let est = ate_linear(&dataset(&t, &y), &[]).unwrap();
        assert!((est.ate - 3.0).abs() < 1e-10);
        assert!(est.p_value.unwrap() < 1e-6);
    }

    #[test]
    fn empty_z_equals_difference_of_means() {
        let t = [1, 1, 0, 0, 1, 0, 0];
        let y = [5.0, 7.0, 1.0, 2.0, 6.0, 3.0, 2.5];
        let est = ate_linear(&dataset(&t, &y), &[]).unwrap();
        let mt = (5.0 + 7.0 + 6.0) / 3.0;
        let mc = (1.0 + 2.0 + 3.0 + 2.5) / 4.0;
        assert!((est.ate - (mt - mc)).abs() < 1e-12);
    }

    #[test]
    fn null_simulation_rarely_significant() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rejections = 0;
        for seed in 0..40u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 1000;
            let t: Vec<u8> = (0..n).map(|_| rng.gen_bool(0.5) as u8).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 10.0).collect();
            let est = ate_linear(&dataset(&t, &y), &[]).unwrap();
            assert!(est.ate.abs() < 1.0);
            if est.p_value.unwrap() < 0.05 {
                rejections += 1;
            }
        }
        assert!(rejections <= 4, "{rejections} rejections out of 40");
    }

    #[test]
    fn rank_deficiency_names_duplicate_column() {
        let t = [1, 0, 1, 0];
        let y = [1.0, 2.0, 3.0, 4.0];
        let mut ds = dataset(&t, &y);
        ds.set_column("a", ColumnData::Real(vec![1.0, 2.0, 3.0, 4.0]));
        ds.set_column("b", ColumnData::Real(vec![2.0, 4.0, 6.0, 8.0]));
        match ate_linear(&ds, &["a".into(), "b".into()]) {
            Err(EstimatorError::RankDeficient(cols)) => {
                assert!(cols.contains(&"b".to_string()), "{cols:?}");
            }
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn group_swap_negates() {
        let t = [1u8, 0, 1, 0, 0, 1];
        let y = [4.0, 1.5, 5.0, 2.0, 1.0, 6.0];
        let est = ate_linear(&dataset(&t, &y), &[]).unwrap();
        let flipped: Vec<u8> = t.iter().map(|&v| 1 - v).collect();
        let est2 = ate_linear(&dataset(&flipped, &y), &[]).unwrap();
        assert!((est.ate + est2.ate).abs() < 1e-12);
    }
}
