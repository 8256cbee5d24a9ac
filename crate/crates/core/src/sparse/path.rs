use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::standardize::ColumnRole;
use crate::error::{Error, Result};
use crate::linalg;

/// Residual of `y` after fitting the unpenalized columns alone.
fn unpenalized_residual(y: &DVector<f64>, z: &DMatrix<f64>, roles: &[ColumnRole]) -> Result<DVector<f64>> {
    let free: Vec<usize> = (0..roles.len())
        .filter(|&j| roles[j] == ColumnRole::Intercept)
        .collect();
    if free.is_empty() {
        return Ok(y.clone());
    }
    let zf = z.select_columns(&free);
    let sol = linalg::lstsq(&zf, y)?;
    Ok(y - zf * sol.x)
}

/// Smallest λ at which every penalized coefficient is zero,
/// `max_j |z_jᵀ r| / γ` with `r` the unpenalized residual.
pub fn lambda_max(y: &DVector<f64>, z: &DMatrix<f64>, roles: &[ColumnRole], gamma: f64) -> Result<f64> {
    if roles.len() != z.ncols() {
        return Err(Error::LengthMismatch {
            what: "column roles/columns",
            left: roles.len(),
            right: z.ncols(),
        });
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidInput("gamma must lie strictly inside (0,1)".into()));
    }
    let r = unpenalized_residual(y, z, roles)?;
    let corr = (0..z.ncols())
        .filter(|&j| roles[j] == ColumnRole::Penalized)
        .map(|j| z.column(j).dot(&r).abs())
        .fold(0.0, f64::max);
    let mut lmax = corr / gamma;
    // make sure λ_max·γ does not round below the largest correlation
    while lmax * gamma < corr {
        lmax = lmax.next_up();
    }
    Ok(lmax)
}

/// Descending log-spaced grid from `λ_max` down to `λ_max · 10^-decades`.
/// A target with nothing left to explain yields the single value `0`.
pub fn lambda_path(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    roles: &[ColumnRole],
    gamma: f64,
    grid_size: usize,
    decades: f64,
) -> Result<Vec<f64>> {
    if grid_size < 2 {
        return Err(Error::InvalidInput("lambda grid needs at least 2 values".into()));
    }
    if !(decades > 0.0 && decades.is_finite()) {
        return Err(Error::InvalidInput("lambda grid decades must be > 0".into()));
    }
    let lmax = lambda_max(y, z, roles, gamma)?;
    if lmax == 0.0 {
        return Ok(vec![0.0]);
    }
    let last = (grid_size - 1) as f64;
    Ok((0..grid_size)
        .map(|i| {
            if i == 0 {
                lmax
            } else {
                lmax * libm::pow(10.0, -decades * i as f64 / last)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::cd::{coordinate_descent, CdOptions};
    use crate::sparse::standardize::standardize;

    fn data() -> (DVector<f64>, DMatrix<f64>) {
        let z = DMatrix::from_fn(30, 4, |r, c| libm::sin((r * (c + 2)) as f64 * 0.37 + c as f64));
        let y = DVector::from_fn(30, |r, _| libm::cos(r as f64 * 0.2) + 0.1 * r as f64);
        (y, z)
    }

    #[test]
    fn all_penalized_zero_at_lambda_max() {
        let (y, z) = data();
        let mut zi = z.clone().insert_column(0, 1.0);
        zi.column_mut(0).fill(1.0);
        let s = standardize(&zi, Some(0));
        for gamma in [0.1, 0.5, 0.9] {
            let lmax = lambda_max(&y, &s.z, &s.roles, gamma).unwrap();
            let fit = coordinate_descent(&y, &s.z, &s.roles, lmax, gamma, &CdOptions::default(), None).unwrap();
            assert!(fit.beta[1..].iter().all(|&b| b == 0.0), "{:?}", fit.beta);
            // slightly below, something enters
            let fit = coordinate_descent(&y, &s.z, &s.roles, 0.99 * lmax, gamma, &CdOptions::default(), None)
                .unwrap();
            assert!(fit.beta[1..].iter().any(|&b| b != 0.0));
        }
    }

    #[test]
    fn grid_of_two_is_endpoints() {
        let (y, z) = data();
        let roles = vec![ColumnRole::Penalized; 4];
        let g = lambda_path(&y, &z, &roles, 0.5, 2, 4.0).unwrap();
        let lmax = lambda_max(&y, &z, &roles, 0.5).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0], lmax);
        assert!((g[1] - lmax * 1e-4).abs() < 1e-12 * lmax);
    }

    #[test]
    fn grid_is_descending_log_spaced() {
        let (y, z) = data();
        let roles = vec![ColumnRole::Penalized; 4];
        let g = lambda_path(&y, &z, &roles, 0.5, 100, 4.0).unwrap();
        assert_eq!(g.len(), 100);
        let ratio = g[1] / g[0];
        for w in g.windows(2) {
            assert!(w[1] < w[0]);
            assert!((w[1] / w[0] - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_target_doubles_lambda_max() {
        let (y, z) = data();
        let roles = vec![ColumnRole::Penalized; 4];
        let a = lambda_max(&y, &z, &roles, 0.5).unwrap();
        let b = lambda_max(&(&y * 2.0), &z, &roles, 0.5).unwrap();
        assert!((b - 2.0 * a).abs() <= 4.0 * f64::EPSILON * b);
    }

    #[test]
    fn zero_target_gives_single_zero() {
        let (_, z) = data();
        let roles = vec![ColumnRole::Penalized; 4];
        let g = lambda_path(&DVector::zeros(30), &z, &roles, 0.5, 10, 4.0).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn grid_size_precondition() {
        let (y, z) = data();
        assert!(lambda_path(&y, &z, &[ColumnRole::Penalized; 4], 0.5, 1, 4.0).is_err());
    }
}
