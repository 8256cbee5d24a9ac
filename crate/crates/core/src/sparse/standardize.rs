use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// How the solver treats a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    /// Unpenalized constant column.
    Intercept,
    Penalized,
    /// Zero variance: held at zero and never selected.
    Excluded,
}

/// Column transform `(z - mean) / scale` with population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub z: DMatrix<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub roles: Vec<ColumnRole>,
}

/// Relative spread below which a column counts as constant.
const ZERO_VARIANCE_RTOL: f64 = 1e-10;

/// Centres and scales every non-intercept column. Constant columns are
/// flagged [`ColumnRole::Excluded`] and zeroed.
pub fn standardize(z: &DMatrix<f64>, intercept: Option<usize>) -> Standardization {
    let (n, p) = z.shape();
    let mut means = alloc::vec![0.0; p];
    let mut scales = alloc::vec![1.0; p];
    let mut roles = alloc::vec![ColumnRole::Penalized; p];
    let mut out = z.clone();
    for j in 0..p {
        if Some(j) == intercept {
            roles[j] = ColumnRole::Intercept;
            continue;
        }
        let col = z.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = libm::sqrt(var);
        means[j] = mean;
        if !(sd > ZERO_VARIANCE_RTOL * mean.abs().max(1.0)) {
            roles[j] = ColumnRole::Excluded;
            out.column_mut(j).fill(0.0);
            continue;
        }
        scales[j] = sd;
        for v in out.column_mut(j).iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
    Standardization {
        z: out,
        means,
        scales,
        roles,
    }
}

impl Standardization {
    /// Applies the recorded transform to other rows of the same columns.
    pub fn apply(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = z.clone();
        for (j, role) in self.roles.iter().enumerate() {
            let mut col = out.column_mut(j);
            match role {
                ColumnRole::Intercept => {}
                ColumnRole::Excluded => col.fill(0.0),
                ColumnRole::Penalized => {
                    for v in col.iter_mut() {
                        *v = (*v - self.means[j]) / self.scales[j];
                    }
                }
            }
        }
        out
    }

    /// Coefficients on the raw columns; centring is folded into the intercept
    /// column when there is one.
    pub fn to_raw(&self, beta_std: &[f64]) -> Vec<f64> {
        let mut raw = alloc::vec![0.0; beta_std.len()];
        let mut offset = 0.0;
        for (j, role) in self.roles.iter().enumerate() {
            if *role == ColumnRole::Penalized {
                raw[j] = beta_std[j] / self.scales[j];
                offset += raw[j] * self.means[j];
            }
        }
        if let Some(i) = self.roles.iter().position(|r| *r == ColumnRole::Intercept) {
            raw[i] = beta_std[i] - offset;
        }
        raw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_column() {
        let z = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let s = standardize(&z, None);
        assert_eq!(s.means[0], 2.0);
        assert!((s.scales[0] - 0.816_496_580_927_726).abs() < 1e-12);
        let expect = [-1.224_744_871_391_589, 0.0, 1.224_744_871_391_589];
        for (a, b) in s.z.column(0).iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn idempotent_on_standardized_data() {
        let z = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 4.0, 7.0]);
        let once = standardize(&z, None);
        let twice = standardize(&once.z, None);
        for (a, b) in once.z.iter().zip(twice.z.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_is_excluded_and_intercept_untouched() {
        let z = DMatrix::from_row_slice(3, 3, &[1.0, 5.0, 1.0, 1.0, 5.0, 2.0, 1.0, 5.0, 3.0]);
        let s = standardize(&z, Some(0));
        assert_eq!(
            s.roles,
            alloc::vec![ColumnRole::Intercept, ColumnRole::Excluded, ColumnRole::Penalized]
        );
        assert!(s.z.column(0).iter().all(|&v| v == 1.0));
        assert!(s.z.column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn raw_coefficients_reproduce_predictions() {
        let z = DMatrix::from_row_slice(4, 3, &[1.0, 0.5, 3.0, 1.0, 1.5, 1.0, 1.0, 2.0, 0.0, 1.0, 4.0, 2.0]);
        let s = standardize(&z, Some(0));
        let beta = [0.7, -1.3, 2.1];
        let raw = s.to_raw(&beta);
        let a = &s.z * nalgebra::DVector::from_row_slice(&beta);
        let b = &z * nalgebra::DVector::from_vec(raw);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
