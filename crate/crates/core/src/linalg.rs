//! Dense least squares with rank detection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values of the column-scaled triangular factor below this fraction
/// of the largest one count as zero.
pub const RANK_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub x: DVector<f64>,
    /// Sum of squared residuals.
    pub rss: f64,
}

/// Solves `min ‖y - Z x‖²` through a thin QR factorization of the
/// column-equilibrated matrix, checking the numerical rank on the singular
/// values of `R`.
pub fn lstsq(z: &DMatrix<f64>, y: &DVector<f64>) -> Result<LstsqSolution> {
    let (m, n) = z.shape();
    if y.len() != m {
        return Err(Error::LengthMismatch {
            what: "regressor rows/targets",
            left: m,
            right: y.len(),
        });
    }
    if n == 0 {
        return Ok(LstsqSolution {
            x: DVector::zeros(0),
            rss: y.norm_squared(),
        });
    }
    let scales: DVector<f64> = DVector::from_iterator(n, z.column_iter().map(|c| c.norm()));
    let rank_err = |rank| Error::RankDeficient { rank, columns: n };
    if m < n {
        return Err(rank_err(m));
    }
    if scales.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("regressor matrix"));
    }
    let zero_cols = scales.iter().filter(|s| **s == 0.0).count();
    if zero_cols > 0 {
        return Err(rank_err(n - zero_cols));
    }
    let mut scaled = z.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= scales[j];
    }
    let qr = scaled.qr();
    let r = qr.r();
    let sv = r.singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|s| **s > smax * RANK_RTOL).count();
    if rank < n {
        return Err(rank_err(rank));
    }
    let qty = qr.q().transpose() * y;
    let xs = r.solve_upper_triangular(&qty).ok_or_else(|| rank_err(rank))?;
    let x = xs.component_div(&scales);
    let rss = (y - z * &x).norm_squared();
    Ok(LstsqSolution { x, rss })
}
