use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::cd::{coordinate_descent_gram, CdOptions, GramSystem};
use super::standardize::standardize;
use crate::error::{Error, Result};
use crate::lifting::RegressionProblem;

/// Rows one fold holds out from one operating-point block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSlice {
    pub op: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub lambdas: Vec<f64>,
    pub mean_mse: Vec<f64>,
    /// Sample standard deviation across folds.
    pub std_mse: Vec<f64>,
    /// `fold_mse[f][i]`: held-out MSE of fold `f` at `lambdas[i]`.
    pub fold_mse: Vec<Vec<f64>>,
    pub chosen_index: usize,
    pub chosen_lambda: f64,
    /// Held-out rows of every fold: one contiguous slice per block.
    pub folds: Vec<Vec<FoldSlice>>,
}

/// Splits every block into `k` contiguous chunks; fold `f` takes chunk `f`
/// of each block.
pub fn contiguous_folds(blocks: &[Range<usize>], k: usize) -> Result<Vec<Vec<FoldSlice>>> {
    if k < 2 {
        return Err(Error::InvalidInput("cross-validation needs k >= 2".into()));
    }
    (0..k)
        .map(|f| {
            blocks
                .iter()
                .enumerate()
                .map(|(op, r)| {
                    let n = r.len();
                    let start = r.start + f * n / k;
                    let end = r.start + (f + 1) * n / k;
                    if start == end {
                        Err(Error::EmptyFold { fold: f, op })
                    } else {
                        Ok(FoldSlice { op, start, end })
                    }
                })
                .collect()
        })
        .collect()
}

/// Index of the smallest value; ties go to the larger λ.
pub(crate) fn argmin_prefer_large(lambdas: &[f64], values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        let better = values[i] < values[best]
            || (values[i] == values[best] && lambdas[i] > lambdas[best]);
        if better {
            best = i;
        }
    }
    best
}

/// k-fold cross-validation of one-step prediction error along `grid`
/// (walked in the given order with warm starts). Each fold is standardized
/// on its own training rows.
pub fn cross_validate(
    problem: &RegressionProblem,
    gamma: f64,
    k: usize,
    grid: &[f64],
    opts: &CdOptions,
) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty lambda grid".into()));
    }
    let folds = contiguous_folds(&problem.block_ranges(), k)?;
    let intercept = problem.intercept_column();
    let n = problem.n_rows();
    let mut fold_mse = Vec::with_capacity(k);
    for fold in &folds {
        let mut held = alloc::vec![false; n];
        for s in fold {
            held[s.start..s.end].fill(true);
        }
        let train_rows: Vec<usize> = (0..n).filter(|&r| !held[r]).collect();
        let test_rows: Vec<usize> = (0..n).filter(|&r| held[r]).collect();
        let train = problem.select_rows(&train_rows);
        let test = problem.select_rows(&test_rows);
        let std = standardize(&train.z, intercept);
        let sys = GramSystem::new(&std.z, &train.y)?;
        let z_test = std.apply(&test.z);
        let mut warm: Option<Vec<f64>> = None;
        let mut mses = Vec::with_capacity(grid.len());
        for &lambda in grid {
            let fit = coordinate_descent_gram(&sys, &std.roles, lambda, gamma, opts, warm.as_deref())?;
            let pred = &z_test * nalgebra::DVector::from_row_slice(&fit.beta);
            let mse = (&test.y - pred).norm_squared() / test.y.len() as f64;
            mses.push(mse);
            warm = Some(fit.beta);
        }
        fold_mse.push(mses);
    }
    let m = grid.len();
    let kf = k as f64;
    let mean_mse: Vec<f64> = (0..m)
        .map(|i| fold_mse.iter().map(|f| f[i]).sum::<f64>() / kf)
        .collect();
    let std_mse: Vec<f64> = (0..m)
        .map(|i| {
            let ss: f64 = fold_mse.iter().map(|f| (f[i] - mean_mse[i]) * (f[i] - mean_mse[i])).sum();
            libm::sqrt(ss / (kf - 1.0))
        })
        .collect();
    let chosen_index = argmin_prefer_large(grid, &mean_mse);
    Ok(CvReport {
        lambdas: grid.to_vec(),
        mean_mse,
        std_mse,
        fold_mse,
        chosen_index,
        chosen_lambda: grid[chosen_index],
        folds,
    })
}
