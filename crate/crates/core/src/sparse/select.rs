use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::cd::ElasticNetFit;
use super::standardize::ColumnRole;
use crate::error::{Error, Result};
use crate::linalg;

/// Columns whose standardized coefficient exceeds `epsilon_sel` in
/// magnitude, plus the intercept. Returns column indices in ascending order.
pub fn select_features(fit: &ElasticNetFit, roles: &[ColumnRole], epsilon_sel: f64) -> Result<Vec<usize>> {
    if !fit.converged {
        return Err(Error::InvalidInput(
            "feature selection needs a converged elastic-net fit".into(),
        ));
    }
    if roles.len() != fit.beta.len() {
        return Err(Error::LengthMismatch {
            what: "column roles/coefficients",
            left: roles.len(),
            right: fit.beta.len(),
        });
    }
    let picked: Vec<usize> = (0..roles.len())
        .filter(|&j| match roles[j] {
            ColumnRole::Intercept => true,
            ColumnRole::Penalized => fit.beta[j].abs() > epsilon_sel,
            ColumnRole::Excluded => false,
        })
        .collect();
    if picked.iter().all(|&j| roles[j] == ColumnRole::Intercept) {
        return Err(Error::EmptySelection);
    }
    Ok(picked)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refit {
    pub beta_f: Vec<f64>,
    /// `‖y - Z_f β_f‖²`.
    pub rss: f64,
}

/// Unpenalized least squares on the selected columns.
pub fn refit_ols(y: &DVector<f64>, z: &DMatrix<f64>, selected: &[usize]) -> Result<Refit> {
    if let Some(&j) = selected.iter().find(|&&j| j >= z.ncols()) {
        return Err(Error::InvalidInput(alloc::format!("column {j} out of range")));
    }
    let zf = z.select_columns(selected);
    let sol = linalg::lstsq(&zf, y)?;
    Ok(Refit {
        beta_f: sol.x.iter().copied().collect(),
        rss: sol.rss,
    })
}
