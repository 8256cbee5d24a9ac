//! Local ARX identification around operating points and free-run simulation
//! of the resulting models.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::plants::{poly_roots, Plant, DEFAULT_DIVERGENCE_BOUND};
use crate::signal::gen_prbs;
use crate::types::{ArxModel, OperatingPoint, TimeSeries};

/// Model orders for local identification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArxOrders {
    pub n_a: usize,
    pub n_b: usize,
    pub delay: usize,
}

impl Default for ArxOrders {
    fn default() -> Self {
        Self {
            n_a: 2,
            n_b: 2,
            delay: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArxFit {
    pub model: ArxModel,
    /// Euclidean norm of the one-step equation-error residuals.
    pub residual_norm: f64,
    pub rows: usize,
}

/// Ordinary least squares on the one-step equation error in deviation
/// variables around `op`.
pub fn fit_arx(
    data: &TimeSeries,
    op: OperatingPoint,
    n_a: usize,
    n_b: usize,
    delay: usize,
) -> Result<ArxFit> {
    if n_a == 0 || n_b == 0 {
        return Err(Error::InvalidInput("n_a and n_b must be >= 1".into()));
    }
    let needed = n_a + n_b + delay + 10;
    if data.len() <= needed {
        return Err(Error::TooShort {
            needed,
            got: data.len(),
        });
    }
    let dy: Vec<f64> = data.y().iter().map(|y| y - op.y_s).collect();
    let du: Vec<f64> = data.u().iter().map(|u| u - op.u_s).collect();
    let start = n_a.max(delay + n_b);
    let rows = data.len() - start;
    let cols = n_a + n_b;
    let mut z = DMatrix::zeros(rows, cols);
    let mut target = DVector::zeros(rows);
    for (r, k) in (start..data.len()).enumerate() {
        for i in 1..=n_a {
            z[(r, i - 1)] = dy[k - i];
        }
        for j in 1..=n_b {
            z[(r, n_a + j - 1)] = du[k - delay - j];
        }
        target[r] = dy[k];
    }
    let sol = linalg::lstsq(&z, &target)?;
    let a = sol.x.rows(0, n_a).iter().copied().collect();
    let b = sol.x.rows(n_a, n_b).iter().copied().collect();
    Ok(ArxFit {
        model: ArxModel::new(a, b, delay, op)?,
        residual_norm: libm::sqrt(sol.rss),
        rows,
    })
}

/// Free-run simulation from zero deviations; input and output are in
/// absolute units.
pub fn simulate_arx(model: &ArxModel, u: &[f64], dt: f64) -> Result<TimeSeries> {
    simulate_arx_bounded(model, u, dt, DEFAULT_DIVERGENCE_BOUND)
}

pub fn simulate_arx_bounded(
    model: &ArxModel,
    u: &[f64],
    dt: f64,
    divergence_bound: f64,
) -> Result<TimeSeries> {
    if !u.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite("ARX input"));
    }
    let op = model.op();
    let du: Vec<f64> = u.iter().map(|x| x - op.u_s).collect();
    let mut dy = vec![0.0; u.len()];
    for k in 0..u.len() {
        let mut acc = 0.0;
        for (i, a) in model.a().iter().enumerate() {
            if let Some(idx) = k.checked_sub(i + 1) {
                acc += a * dy[idx];
            }
        }
        for (j, b) in model.b().iter().enumerate() {
            if let Some(idx) = k.checked_sub(model.delay() + j + 1) {
                acc += b * du[idx];
            }
        }
        let y = acc + op.y_s;
        if !y.is_finite() || y.abs() > divergence_bound {
            return Err(Error::Divergence { index: k, value: y });
        }
        dy[k] = acc;
    }
    let y = dy.iter().map(|d| d + op.y_s).collect();
    TimeSeries::new(u.to_vec(), y, dt)
}

/// Deviation response to a unit step applied at `k = 0`.
pub fn step_response(model: &ArxModel, length: usize) -> Result<Vec<f64>> {
    let centered = ArxModel::new(
        model.a().to_vec(),
        model.b().to_vec(),
        model.delay(),
        OperatingPoint::new(0.0, 0.0)?,
    )?;
    Ok(simulate_arx(&centered, &vec![1.0; length], 1.0)?.y().to_vec())
}

/// Poles of the autoregressive part as `(re, im)`.
pub fn poles(model: &ArxModel) -> Vec<(f64, f64)> {
    let tail: Vec<f64> = model.a().iter().map(|a| -a).collect();
    poly_roots(&tail)
}

/// `-dt / ln|p|` for the slowest pole; infinite if a pole sits on or
/// outside the unit circle.
pub fn dominant_time_constant(model: &ArxModel, dt: f64) -> f64 {
    let r = poles(model)
        .iter()
        .map(|&(re, im)| libm::hypot(re, im))
        .fold(0.0, f64::max);
    if r >= 1.0 {
        f64::INFINITY
    } else if r == 0.0 {
        0.0
    } else {
        -dt / libm::log(r)
    }
}

/// PRBS design for local experiments and fusion training data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationSpec {
    pub length: usize,
    /// Amplitude as a fraction of `|u_s|` ...
    pub fraction: f64,
    /// ... but never below this absolute value.
    pub floor: f64,
    pub switch_period: usize,
    pub seed: u64,
}

impl ExcitationSpec {
    pub fn new(length: usize, seed: u64) -> Self {
        Self {
            length,
            fraction: 0.05,
            floor: 0.01,
            switch_period: 10,
            seed,
        }
    }

    pub fn amplitude(&self, u_s: f64) -> f64 {
        (self.fraction * u_s.abs()).max(self.floor)
    }

    /// Seed used for the operating point at position `index`.
    pub fn seed_for(&self, index: usize) -> u64 {
        self.seed
            .wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    /// PRBS centred at `op.u_s`.
    pub fn signal(&self, op: OperatingPoint, index: usize) -> Result<Vec<f64>> {
        gen_prbs(
            self.length,
            self.amplitude(op.u_s),
            op.u_s,
            self.switch_period,
            self.seed_for(index),
        )
    }
}

pub(crate) fn check_distinct(ops: &[OperatingPoint]) -> Result<()> {
    for (i, a) in ops.iter().enumerate() {
        if let Some(j) = ops[..i].iter().position(|b| b == a) {
            return Err(Error::DegenerateOperatingPoints(format!(
                "operating points {j} and {i} coincide at {a}"
            )));
        }
    }
    Ok(())
}

/// Runs a PRBS experiment on the true plant around each operating point and
/// fits one ARX model per point.
pub fn make_local_models<P: Plant + ?Sized>(
    plant: &P,
    ops: &[OperatingPoint],
    excitation: &ExcitationSpec,
    orders: ArxOrders,
) -> Result<Vec<ArxModel>> {
    check_distinct(ops)?;
    ops.iter()
        .enumerate()
        .map(|(i, &op)| {
            let u = excitation.signal(op, i)?;
            let data = plant.simulate_from(op, &u)?;
            fit_arx(&data, op, orders.n_a, orders.n_b, orders.delay).map(|f| f.model)
        })
        .collect()
}
