//! Lagged regressors, polynomial lifting and stacking of per-operating-point
//! regression blocks.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::{FeatureDescriptor, TimeSeries, Variable};

/// `[y[k-1] .. y[k-n_y], u[k-1] .. u[k-n_u]]`.
pub fn linear_descriptors(n_y: usize, n_u: usize) -> Vec<FeatureDescriptor> {
    (1..=n_y)
        .map(|l| FeatureDescriptor::linear(Variable::Output, l))
        .chain((1..=n_u).map(|l| FeatureDescriptor::linear(Variable::Input, l)))
        .collect()
}

/// Number of non-constant monomials of degree `1..=degree` in `n_l`
/// variables, `C(n_l + degree, degree) - 1`.
pub fn feature_count(n_l: usize, degree: u32) -> usize {
    let mut c: usize = 1;
    for i in 1..=degree as usize {
        c = c * (n_l + i) / i;
    }
    c - 1
}

/// Linear regressors of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedBlock {
    pub targets: Vec<f64>,
    pub rows: DMatrix<f64>,
    pub descriptors: Vec<FeatureDescriptor>,
}

/// One row per `k = max(n_y, n_u) .. N-1`; rows with incomplete history are
/// dropped.
pub fn build_lagged(data: &TimeSeries, n_y: usize, n_u: usize) -> Result<LaggedBlock> {
    let m = n_y.max(n_u);
    if data.len() <= m {
        return Err(Error::TooShort {
            needed: m,
            got: data.len(),
        });
    }
    let (y, u) = (data.y(), data.u());
    let n_rows = data.len() - m;
    let rows = DMatrix::from_fn(n_rows, n_y + n_u, |r, c| {
        let k = m + r;
        if c < n_y {
            y[k - c - 1]
        } else {
            u[k - (c - n_y) - 1]
        }
    });
    Ok(LaggedBlock {
        targets: y[m..].to_vec(),
        rows,
        descriptors: linear_descriptors(n_y, n_u),
    })
}

/// Every multiset of `size` indices from `0..n`, in lexicographic order.
fn multisets(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if size == 0 || n == 0 {
        return out;
    }
    let mut idx = alloc::vec![0usize; size];
    loop {
        out.push(idx.clone());
        // rightmost position that can still grow
        let Some(p) = (0..size).rev().find(|&p| idx[p] + 1 < n) else {
            return out;
        };
        let v = idx[p] + 1;
        idx[p..].fill(v);
    }
}

/// Full dictionary: intercept, the linear descriptors, then every monomial of
/// degree `2..=degree`.
pub fn lifted_descriptors(linear: &[FeatureDescriptor], degree: u32) -> Vec<FeatureDescriptor> {
    let mut out = Vec::with_capacity(1 + feature_count(linear.len(), degree));
    out.push(FeatureDescriptor::intercept());
    out.extend_from_slice(linear);
    for d in 2..=degree as usize {
        for set in multisets(linear.len(), d) {
            let f = set
                .iter()
                .fold(FeatureDescriptor::intercept(), |acc, &i| acc.product(&linear[i]));
            out.push(f);
        }
    }
    out
}

/// Appends all monomials of total degree `2..=degree` of the linear columns
/// and prepends an intercept column of ones.
pub fn lift_polynomial(
    rows: &DMatrix<f64>,
    descriptors: &[FeatureDescriptor],
    degree: u32,
) -> Result<(DMatrix<f64>, Vec<FeatureDescriptor>)> {
    if degree == 0 {
        return Err(Error::InvalidInput("degree must be >= 1".into()));
    }
    if rows.ncols() != descriptors.len() {
        return Err(Error::LengthMismatch {
            what: "linear columns/descriptors",
            left: rows.ncols(),
            right: descriptors.len(),
        });
    }
    if let Some(d) = descriptors.iter().find(|d| d.degree() != 1) {
        return Err(Error::InvalidInput(format!("lifting expects linear features, got {d}")));
    }
    let full = lifted_descriptors(descriptors, degree);
    let column_of = |var: Variable, lag: usize| {
        descriptors
            .iter()
            .position(|d| d.terms()[0].variable == var && d.terms()[0].lag == lag)
            .expect("monomials are built from the given linear features")
    };
    // (variable, lag) -> linear column for each factor, resolved once
    let plans: Vec<Vec<(Variable, usize, usize)>> = full
        .iter()
        .map(|f| {
            f.terms()
                .iter()
                .map(|t| (t.variable, t.lag, column_of(t.variable, t.lag)))
                .collect()
        })
        .collect();
    let z = DMatrix::from_fn(rows.nrows(), full.len(), |r, c| {
        let plan = &plans[c];
        full[c].evaluate(|var, lag| {
            let col = plan
                .iter()
                .find(|p| p.0 == var && p.1 == lag)
                .map(|p| p.2)
                .unwrap_or(usize::MAX);
            rows[(r, col)]
        })
    });
    Ok((z, full))
}

/// Lagged values preceding one prediction instant: `y[0] = y[k-1]`,
/// `y[1] = y[k-2]`, and likewise for `u`.
#[derive(Debug, Clone, Copy)]
pub struct LagHistory<'a> {
    pub y: &'a [f64],
    pub u: &'a [f64],
}

impl LagHistory<'_> {
    fn get(&self, var: Variable, lag: usize) -> Option<f64> {
        let src = match var {
            Variable::Output => self.y,
            Variable::Input => self.u,
        };
        src.get(lag.checked_sub(1)?).copied()
    }
}

/// Numeric value of each feature at the given history.
pub fn evaluate_features(features: &[FeatureDescriptor], history: &LagHistory<'_>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(features.len());
    evaluate_features_into(features, history, &mut out)?;
    Ok(out)
}

pub(crate) fn evaluate_features_into(
    features: &[FeatureDescriptor],
    history: &LagHistory<'_>,
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    for f in features {
        for t in f.terms() {
            if history.get(t.variable, t.lag).is_none() {
                return Err(Error::InvalidInput(format!(
                    "insufficient history for {f}: need lag {} of {:?}",
                    t.lag, t.variable
                )));
            }
        }
        out.push(f.evaluate(|v, l| history.get(v, l).unwrap_or(f64::NAN)));
    }
    Ok(())
}

/// Lifted regression data of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionBlock {
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub descriptors: Vec<FeatureDescriptor>,
}

/// Lagged, lifted regression for one series.
pub fn build_block(data: &TimeSeries, n_y: usize, n_u: usize, degree: u32) -> Result<RegressionBlock> {
    let lagged = build_lagged(data, n_y, n_u)?;
    let (z, descriptors) = lift_polynomial(&lagged.rows, &lagged.descriptors, degree)?;
    Ok(RegressionBlock {
        y: DVector::from_vec(lagged.targets),
        z,
        descriptors,
    })
}

/// Stacked regression `Y = Z β` over all operating points.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub descriptors: Vec<FeatureDescriptor>,
    /// Operating-point index of every row.
    pub provenance: Vec<usize>,
}

impl RegressionProblem {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.provenance.last().map_or(0, |&p| p + 1)
    }

    /// Row range of each operating-point block, in order.
    pub fn block_ranges(&self) -> Vec<Range<usize>> {
        let mut out: Vec<Range<usize>> = Vec::new();
        for (r, &p) in self.provenance.iter().enumerate() {
            match out.get_mut(p) {
                Some(range) => range.end = r + 1,
                None => out.push(r..r + 1),
            }
        }
        out
    }

    pub fn intercept_column(&self) -> Option<usize> {
        self.descriptors.iter().position(|d| d.is_constant())
    }

    /// Sub-problem with the given rows (provenance preserved).
    pub fn select_rows(&self, rows: &[usize]) -> RegressionProblem {
        RegressionProblem {
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r])),
            z: self.z.select_rows(rows),
            descriptors: self.descriptors.clone(),
            provenance: rows.iter().map(|&r| self.provenance[r]).collect(),
        }
    }
}

/// Row-concatenates blocks in order; all blocks must share one dictionary.
pub fn stack(blocks: &[RegressionBlock]) -> Result<RegressionProblem> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::InvalidInput("nothing to stack".into()))?;
    for (i, b) in blocks.iter().enumerate().skip(1) {
        if b.descriptors != first.descriptors {
            return Err(Error::DescriptorMismatch { block: i });
        }
    }
    let n: usize = blocks.iter().map(|b| b.y.len()).sum();
    let p = first.z.ncols();
    let mut z = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    let mut provenance = Vec::with_capacity(n);
    let mut r0 = 0;
    for (i, b) in blocks.iter().enumerate() {
        let m = b.y.len();
        z.rows_mut(r0, m).copy_from(&b.z);
        y.rows_mut(r0, m).copy_from(&b.y);
        provenance.extend(core::iter::repeat_n(i, m));
        r0 += m;
    }
    if z.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("stacked regression"));
    }
    Ok(RegressionProblem {
        y,
        z,
        descriptors: first.descriptors.clone(),
        provenance,
    })
}
