//! Least-squares baseline: exact RSS minimizer via the normal equations.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::geometry::ShapeParams;

/// Intercept plus one coefficient per feature (θ₁..θ₄, width).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: [f64; 5],
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for col in 0..n {
        let (piv, piv_val) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if piv_val < 1e-12 * scale {
            return Err(Error::SingularFit(format!("pivot {piv_val:.3e} at column {col}")));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let m = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= m * a[col][c];
            }
            b[r] -= m * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Ok(x)
}

/// Exact RSS minimizer with intercept. A dataset's width column is constant
/// by construction (collinear with the intercept), so it is excluded from
/// the solve and its coefficient reported as zero; when widths do vary the
/// column participates normally.
pub fn fit_linear(ds: &Dataset) -> Result<LinearModel> {
    if ds.len() < 6 {
        return Err(Error::invalid("dataset", format!("need >= 6 samples, got {}", ds.len())));
    }
    let widths: Vec<f64> = ds.samples.iter().map(|s| s.params.width).collect();
    let width_varies = widths.iter().any(|&w| w != widths[0]);

    // active columns: intercept, θ1..θ4, and width when informative
    let ncols = if width_varies { 6 } else { 5 };
    let row_of = |s: &crate::dataset::DragSample| -> Vec<f64> {
        let mut row = vec![1.0];
        row.extend_from_slice(&s.params.theta);
        if width_varies {
            row.push(s.params.width);
        }
        row
    };

    let mut ata = vec![vec![0.0; ncols]; ncols];
    let mut atb = vec![0.0; ncols];
    for s in &ds.samples {
        let row = row_of(s);
        for r in 0..ncols {
            for c in 0..ncols {
                ata[r][c] += row[r] * row[c];
            }
            atb[r] += row[r] * s.drag;
        }
    }
    let beta = solve_dense(ata, atb)?;
    let mut coefficients = [0.0; 5];
    coefficients[..4].copy_from_slice(&beta[1..5]);
    if width_varies {
        coefficients[4] = beta[5];
    }
    Ok(LinearModel { intercept: beta[0], coefficients })
}

pub fn predict_linear(m: &LinearModel, p: &ShapeParams) -> f64 {
    let x = p.as_features();
    m.intercept + m.coefficients.iter().zip(x.iter()).map(|(c, v)| c * v).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

/// k-fold cross-validation of the linear baseline with a seeded shuffle.
pub fn kfold_cv(ds: &Dataset, k: usize, seed: u64) -> Result<CvReport> {
    if k < 2 || k > ds.len() {
        return Err(Error::invalid("k", format!("need 2 <= k <= {}, got {k}", ds.len())));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let n = ds.len();
    let base = n / k;
    let extra = n % k;
    let mut fold_mse = Vec::with_capacity(k);
    let mut start = 0usize;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        let test_idx = &order[start..start + size];
        start += size;
        let train_samples: Vec<_> = order
            .iter()
            .filter(|i| !test_idx.contains(i))
            .map(|&i| ds.samples[i])
            .collect();
        let model = fit_linear(&Dataset { samples: train_samples, width: ds.width })?;
        let mse = test_idx
            .iter()
            .map(|&i| {
                let s = &ds.samples[i];
                let e = predict_linear(&model, &s.params) - s.drag;
                e * e
            })
            .sum::<f64>()
            / size as f64;
        fold_mse.push(mse);
    }
    let mean_mse = fold_mse.iter().sum::<f64>() / k as f64;
    Ok(CvReport { fold_mse, mean_mse })
}
