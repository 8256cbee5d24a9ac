//! Cyclic coordinate descent for
//!
//! ```text
//! ½‖y - Zβ‖² + λ (γ‖β_P‖₁ + (1-γ)/2 ‖β_P‖²)
//! ```
//!
//! where `P` is the set of penalized columns. Updates run on the Gram matrix
//! so a sweep costs `O(p²)` regardless of the number of rows.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::standardize::ColumnRole;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdOptions {
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Keep the objective after every full sweep in the fit.
    pub record_objective: bool,
}

impl Default for CdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 100_000,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetFit {
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub n_iter: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

/// Sufficient statistics `ZᵀZ`, `Zᵀy`, `yᵀy` of a least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    pub gram: DMatrix<f64>,
    pub zty: DVector<f64>,
    pub yty: f64,
}

impl GramSystem {
    pub fn new(z: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        if z.nrows() != y.len() {
            return Err(Error::LengthMismatch {
                what: "regressor rows/targets",
                left: z.nrows(),
                right: y.len(),
            });
        }
        Ok(Self {
            gram: z.tr_mul(z),
            zty: z.tr_mul(y),
            yty: y.norm_squared(),
        })
    }

    pub fn n_cols(&self) -> usize {
        self.zty.len()
    }

    /// `Zᵀ(y - Zβ)`.
    pub fn residual_correlation(&self, beta: &[f64]) -> DVector<f64> {
        &self.zty - &self.gram * DVector::from_row_slice(beta)
    }

    /// `‖y - Zβ‖²`.
    pub fn rss(&self, beta: &[f64]) -> f64 {
        let b = DVector::from_row_slice(beta);
        (self.yty - 2.0 * self.zty.dot(&b) + b.dot(&(&self.gram * &b))).max(0.0)
    }
}

/// Soft-threshold `sign(x) · max(|x| - t, 0)`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Penalized objective at `beta`.
pub fn objective(sys: &GramSystem, roles: &[ColumnRole], beta: &[f64], lambda: f64, gamma: f64) -> f64 {
    let (mut l1, mut l2) = (0.0, 0.0);
    for (b, r) in beta.iter().zip(roles) {
        if *r == ColumnRole::Penalized {
            l1 += b.abs();
            l2 += b * b;
        }
    }
    0.5 * sys.rss(beta) + lambda * (gamma * l1 + 0.5 * (1.0 - gamma) * l2)
}

/// Largest violation of the optimality conditions: for a zero penalized
/// coefficient `max(0, |ρ_j| - λγ)`, for a nonzero one
/// `|ρ_j - λ(1-γ)β_j - λγ sign β_j|`, and `|ρ_j|` for unpenalized columns,
/// with `ρ = Zᵀ(y - Zβ)`.
pub fn kkt_violation(sys: &GramSystem, roles: &[ColumnRole], beta: &[f64], lambda: f64, gamma: f64) -> f64 {
    let rho = sys.residual_correlation(beta);
    let mut worst: f64 = 0.0;
    for (j, role) in roles.iter().enumerate() {
        let v = match role {
            ColumnRole::Excluded => 0.0,
            ColumnRole::Intercept => rho[j].abs(),
            ColumnRole::Penalized if beta[j] == 0.0 => (rho[j].abs() - lambda * gamma).max(0.0),
            ColumnRole::Penalized => {
                (rho[j] - lambda * (1.0 - gamma) * beta[j] - lambda * gamma * beta[j].signum()).abs()
            }
        };
        worst = worst.max(v);
    }
    worst
}

fn check_args(roles: &[ColumnRole], p: usize, lambda: f64, gamma: f64) -> Result<()> {
    if roles.len() != p {
        return Err(Error::LengthMismatch {
            what: "column roles/columns",
            left: roles.len(),
            right: p,
        });
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput("lambda must be finite and >= 0".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidInput("gamma must lie strictly inside (0,1)".into()));
    }
    Ok(())
}

/// Elastic net by cyclic coordinate descent on raw data.
pub fn coordinate_descent(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    roles: &[ColumnRole],
    lambda: f64,
    gamma: f64,
    opts: &CdOptions,
    warm_start: Option<&[f64]>,
) -> Result<ElasticNetFit> {
    let sys = GramSystem::new(z, y)?;
    coordinate_descent_gram(&sys, roles, lambda, gamma, opts, warm_start)
}

/// Elastic net by cyclic coordinate descent on precomputed statistics.
///
/// Each update sets `β_j ← S(ρ_j, λγ) / (c_j + λ(1-γ))` for penalized
/// columns and `β_j ← ρ_j / c_j` for the intercept, where `ρ_j` is the
/// partial-residual correlation and `c_j = ‖z_j‖²`. Full sweeps alternate with
/// sweeps over the current nonzero set until a full sweep moves no
/// coefficient by `tol` or more.
pub fn coordinate_descent_gram(
    sys: &GramSystem,
    roles: &[ColumnRole],
    lambda: f64,
    gamma: f64,
    opts: &CdOptions,
    warm_start: Option<&[f64]>,
) -> Result<ElasticNetFit> {
    let p = sys.n_cols();
    check_args(roles, p, lambda, gamma)?;
    let mut beta: Vec<f64> = match warm_start {
        Some(w) if w.len() == p => w.to_vec(),
        Some(w) => {
            return Err(Error::LengthMismatch {
                what: "warm start/columns",
                left: w.len(),
                right: p,
            })
        }
        None => alloc::vec![0.0; p],
    };
    for (b, r) in beta.iter_mut().zip(roles) {
        if *r == ColumnRole::Excluded || !b.is_finite() {
            *b = 0.0;
        }
    }
    let l1 = lambda * gamma;
    let l2 = lambda * (1.0 - gamma);
    // gb = Gβ, kept in sync with every coordinate move
    let mut gb: Vec<f64> = (&sys.gram * DVector::from_row_slice(&beta)).iter().copied().collect();
    let mut trace = Vec::new();
    if opts.record_objective {
        trace.push(objective(sys, roles, &beta, lambda, gamma));
    }

    let update = |j: usize, beta: &mut [f64], gb: &mut [f64]| -> Result<f64> {
        let c = sys.gram[(j, j)];
        let old = beta[j];
        let rho = sys.zty[j] - gb[j] + c * old;
        if !rho.is_finite() {
            return Err(Error::NonFiniteCoordinate { column: j });
        }
        let new = match roles[j] {
            ColumnRole::Excluded => 0.0,
            _ if c <= 0.0 => 0.0,
            ColumnRole::Intercept => rho / c,
            ColumnRole::Penalized => soft_threshold(rho, l1) / (c + l2),
        };
        if !new.is_finite() {
            return Err(Error::NonFiniteCoordinate { column: j });
        }
        let delta = new - old;
        if delta != 0.0 {
            beta[j] = new;
            for (k, g) in gb.iter_mut().enumerate() {
                *g += delta * sys.gram[(k, j)];
            }
        }
        Ok(delta.abs())
    };

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        // full sweep
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            max_delta = max_delta.max(update(j, &mut beta, &mut gb)?);
        }
        sweeps += 1;
        if opts.record_objective {
            trace.push(objective(sys, roles, &beta, lambda, gamma));
        }
        if max_delta < opts.tol {
            converged = true;
            break;
        }
        // inner sweeps over the active set
        let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        while sweeps < opts.max_sweeps {
            let mut d: f64 = 0.0;
            for &j in &active {
                d = d.max(update(j, &mut beta, &mut gb)?);
            }
            sweeps += 1;
            if opts.record_objective {
                trace.push(objective(sys, roles, &beta, lambda, gamma));
            }
            if d < opts.tol {
                break;
            }
        }
    }
    Ok(ElasticNetFit {
        beta,
        lambda,
        gamma,
        n_iter: sweeps,
        converged,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(5.0, 2.0), 3.0);
        assert_eq!(soft_threshold(-5.0, 2.0), -3.0);
        assert_eq!(soft_threshold(1.0, 2.0), 0.0);
        assert_eq!(soft_threshold(-2.0, 2.0), 0.0);
    }

    #[test]
    fn single_orthonormal_column_closed_form() {
        // unit-norm column, y with correlation rho = z·y
        let z = DMatrix::from_column_slice(4, 1, &[0.5, 0.5, 0.5, 0.5]);
        let y = DVector::from_vec(vec![1.0, 2.0, 0.5, 1.5]);
        let rho = 0.5 * (1.0 + 2.0 + 0.5 + 1.5);
        for (lambda, gamma) in [(0.3, 0.5), (1.0, 0.2), (4.0, 0.9), (0.0, 0.5)] {
            let fit = coordinate_descent(&y, &z, &[ColumnRole::Penalized], lambda, gamma, &CdOptions::default(), None)
                .unwrap();
            let expect = soft_threshold(rho, lambda * gamma) / (1.0 + lambda * (1.0 - gamma));
            assert!((fit.beta[0] - expect).abs() < 1e-14, "{lambda} {gamma}");
            assert!(fit.converged);
        }
    }

    #[test]
    fn excluded_columns_stay_zero() {
        let z = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 1.0, 3.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let fit = coordinate_descent(
            &y,
            &z,
            &[ColumnRole::Penalized, ColumnRole::Excluded],
            0.0,
            0.5,
            &CdOptions::default(),
            Some(&[0.0, 9.0]),
        )
        .unwrap();
        assert_eq!(fit.beta[1], 0.0);
        assert!((fit.beta[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_gamma_and_lambda() {
        let z = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let o = CdOptions::default();
        let r = [ColumnRole::Penalized];
        assert!(coordinate_descent(&y, &z, &r, 1.0, 1.0, &o, None).is_err());
        assert!(coordinate_descent(&y, &z, &r, -1.0, 0.5, &o, None).is_err());
        assert!(coordinate_descent(&y, &z, &r, 1.0, 0.5, &o, Some(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn non_finite_update_reports_column() {
        let sys = GramSystem {
            gram: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            zty: DVector::from_vec(vec![1.0, f64::NAN]),
            yty: 1.0,
        };
        let err = coordinate_descent_gram(
            &sys,
            &[ColumnRole::Penalized, ColumnRole::Intercept],
            0.1,
            0.5,
            &CdOptions::default(),
            None,
        )
        .unwrap_err();
        assert_eq!(err, Error::NonFiniteCoordinate { column: 1 });
    }
}
