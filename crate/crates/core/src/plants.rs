//! Reference nonlinear plants used to manufacture local models and
//! ground-truth validation data.

use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::{OperatingPoint, TimeSeries};

pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e6;

/// Maximum bisection iterations in [`solve_steady_state`].
pub const STEADY_STATE_MAX_ITER: usize = 400;

/// Residual bound a steady state must meet.
pub const STEADY_STATE_RTOL: f64 = 1e-10;

/// A SISO plant with a computable steady state.
pub trait Plant {
    fn name(&self) -> &'static str;

    /// Sampling interval of simulated series.
    fn dt(&self) -> f64;

    /// Residual of the steady-state equation; zero exactly when `(u_s, y)` is
    /// an equilibrium.
    fn steady_state_residual(&self, u_s: f64, y: f64) -> f64;

    /// Interval expected to contain exactly one equilibrium output for `u_s`.
    fn steady_state_bracket(&self, u_s: f64) -> (f64, f64);

    /// Simulates `u` starting from rest at `op`.
    fn simulate_from(&self, op: OperatingPoint, u: &[f64]) -> Result<TimeSeries>;
}

impl<P: Plant + ?Sized> Plant for &P {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn dt(&self) -> f64 {
        (**self).dt()
    }
    fn steady_state_residual(&self, u_s: f64, y: f64) -> f64 {
        (**self).steady_state_residual(u_s, y)
    }
    fn steady_state_bracket(&self, u_s: f64) -> (f64, f64) {
        (**self).steady_state_bracket(u_s)
    }
    fn simulate_from(&self, op: OperatingPoint, u: &[f64]) -> Result<TimeSeries> {
        (**self).simulate_from(op, u)
    }
}

fn check_finite(u: &[f64]) -> Result<()> {
    if u.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("plant input"))
    }
}

/// Bisection on the plant's steady-state residual inside its bracket.
pub fn solve_steady_state<P: Plant + ?Sized>(plant: &P, u_s: f64) -> Result<OperatingPoint> {
    solve_steady_state_in(plant, u_s, plant.steady_state_bracket(u_s))
}

pub fn solve_steady_state_in<P: Plant + ?Sized>(
    plant: &P,
    u_s: f64,
    (mut lo, mut hi): (f64, f64),
) -> Result<OperatingPoint> {
    if !u_s.is_finite() {
        return Err(Error::NonFinite("steady-state input"));
    }
    let r = |y: f64| plant.steady_state_residual(u_s, y);
    let (mut rlo, rhi) = (r(lo), r(hi));
    if rlo == 0.0 {
        return OperatingPoint::new(u_s, lo);
    }
    if rhi == 0.0 {
        return OperatingPoint::new(u_s, hi);
    }
    if !(rlo.is_finite() && rhi.is_finite()) || rlo.signum() == rhi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    for _ in 0..STEADY_STATE_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let rm = r(mid);
        if rm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if rm.signum() == rlo.signum() {
            lo = mid;
            rlo = rm;
        } else {
            hi = mid;
        }
    }
    let y = if r(lo).abs() <= r(hi).abs() { lo } else { hi };
    if r(y).abs() >= STEADY_STATE_RTOL {
        return Err(Error::NotConverged {
            iterations: STEADY_STATE_MAX_ITER,
        });
    }
    OperatingPoint::new(u_s, y)
}

/// Quadratic toy system
/// `y[k] = 0.5 y[k-1] + 0.25 y[k-2] - 0.5 y[k-2]^2 + 0.1 y[k-1] u[k-1] + u[k-1] + 0.25 u[k-2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyNarxPlant {
    pub divergence_bound: f64,
}

impl Default for ToyNarxPlant {
    fn default() -> Self {
        Self {
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
        }
    }
}

impl ToyNarxPlant {
    /// Coefficients of `y[k-1], y[k-2], y[k-2]^2, y[k-1]u[k-1], u[k-1], u[k-2]`.
    pub const COEFFICIENTS: [f64; 6] = [0.5, 0.25, -0.5, 0.1, 1.0, 0.25];

    fn step(y1: f64, y2: f64, u1: f64, u2: f64) -> f64 {
        let [c1, c2, c3, c4, c5, c6] = Self::COEFFICIENTS;
        c1 * y1 + c2 * y2 + c3 * y2 * y2 + c4 * y1 * u1 + c5 * u1 + c6 * u2
    }

    /// Runs the recursion from `y_init = (y[0], y[1])`. The output has the
    /// same length as `u`.
    pub fn simulate_toy(&self, u: &[f64], y_init: [f64; 2]) -> Result<TimeSeries> {
        check_finite(u)?;
        check_finite(&y_init)?;
        let n = u.len();
        let mut y = Vec::with_capacity(n);
        for k in 0..n {
            let yk = if k < 2 {
                y_init[k]
            } else {
                Self::step(y[k - 1], y[k - 2], u[k - 1], u[k - 2])
            };
            if !yk.is_finite() || yk.abs() > self.divergence_bound {
                return Err(Error::Divergence { index: k, value: yk });
            }
            y.push(yk);
        }
        TimeSeries::new(u.to_vec(), y, 1.0)
    }
}

impl Plant for ToyNarxPlant {
    fn name(&self) -> &'static str {
        "toy"
    }

    fn dt(&self) -> f64 {
        1.0
    }

    /// `0.5 y² + (0.25 - 0.1 u) y - 1.25 u`, the fixed-point equation with
    /// `y` collected on one side.
    fn steady_state_residual(&self, u_s: f64, y: f64) -> f64 {
        0.5 * y * y + (0.25 - 0.1 * u_s) * y - 1.25 * u_s
    }

    /// From the parabola's vertex upward: contains the larger root only.
    fn steady_state_bracket(&self, u_s: f64) -> (f64, f64) {
        let vertex = -(0.25 - 0.1 * u_s);
        (vertex, vertex + 100.0)
    }

    fn simulate_from(&self, op: OperatingPoint, u: &[f64]) -> Result<TimeSeries> {
        self.simulate_toy(u, [op.y_s, op.y_s])
    }
}

/// Conical tank `dh/dt = α (q_i - C_d √h) / h²` with `α = 4H²/(πD²)`,
/// integrated by fixed-step RK4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicalTankPlant {
    /// Maximum diameter (cm).
    pub diameter: f64,
    /// Maximum height (cm).
    pub height: f64,
    /// Outlet valve constant.
    pub valve: f64,
    /// Integration and sampling step (s).
    pub dt: f64,
}

/// Lowest level the integrator allows, keeping `1/h²` finite.
pub const TANK_H_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct TankRun {
    pub series: TimeSeries,
    /// Whether the level had to be clamped to `[TANK_H_MIN, H]` at any step.
    pub clamped: bool,
}

impl Default for ConicalTankPlant {
    fn default() -> Self {
        Self {
            diameter: 30.0,
            height: 62.0,
            valve: 1.0,
            dt: 1.0,
        }
    }
}

impl ConicalTankPlant {
    pub fn new(diameter: f64, height: f64, valve: f64, dt: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !(ok(diameter) && ok(height) && ok(valve)) {
            return Err(Error::InvalidInput("tank D, H and C_d must be > 0".into()));
        }
        if !ok(dt) {
            return Err(Error::InvalidInput("tank dt must be > 0".into()));
        }
        Ok(Self {
            diameter,
            height,
            valve,
            dt,
        })
    }

    /// Geometry constant `4H²/(πD²)`.
    pub fn alpha(&self) -> f64 {
        4.0 * self.height * self.height / (core::f64::consts::PI * self.diameter * self.diameter)
    }

    pub fn dhdt(&self, h: f64, q: f64) -> f64 {
        self.alpha() * (q - self.valve * libm::sqrt(h)) / (h * h)
    }

    /// Steady inflow holding the level at `h_s`.
    pub fn operating_point_at_level(&self, h_s: f64) -> Result<OperatingPoint> {
        if !(h_s > 0.0 && h_s <= self.height) {
            return Err(Error::InvalidInput("level outside (0, H]".into()));
        }
        OperatingPoint::new(self.valve * libm::sqrt(h_s), h_s)
    }

    fn rk4_step(&self, h: f64, q: f64, dt: f64) -> f64 {
        let f = |x: f64| self.dhdt(x.clamp(TANK_H_MIN, self.height), q);
        let k1 = f(h);
        let k2 = f(h + 0.5 * dt * k1);
        let k3 = f(h + 0.5 * dt * k2);
        let k4 = f(h + dt * k3);
        h + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }

    /// Integrates the inflow sequence from `h0`; `y[0] = h0` and `q[k]` acts
    /// over `[k dt, (k+1) dt)`.
    pub fn simulate_tank(&self, q: &[f64], h0: f64, dt: f64) -> Result<TankRun> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput("dt must be > 0".into()));
        }
        if !(h0 > 0.0 && h0 <= self.height) {
            return Err(Error::InvalidInput("h0 must lie in (0, H]".into()));
        }
        check_finite(q)?;
        if q.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidInput("inflow must be >= 0".into()));
        }
        let mut clamped = false;
        let mut h = Vec::with_capacity(q.len());
        let mut level = h0;
        for (k, &qk) in q.iter().enumerate() {
            h.push(level);
            if k + 1 == q.len() {
                break;
            }
            let next = self.rk4_step(level, qk, dt);
            if !next.is_finite() {
                return Err(Error::Divergence {
                    index: k + 1,
                    value: next,
                });
            }
            let c = next.clamp(TANK_H_MIN, self.height);
            clamped |= c != next;
            level = c;
        }
        Ok(TankRun {
            series: TimeSeries::new(q.to_vec(), h, dt)?,
            clamped,
        })
    }
}

impl Plant for ConicalTankPlant {
    fn name(&self) -> &'static str {
        "tank"
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn steady_state_residual(&self, q_s: f64, h: f64) -> f64 {
        q_s - self.valve * libm::sqrt(h)
    }

    fn steady_state_bracket(&self, _q_s: f64) -> (f64, f64) {
        (TANK_H_MIN, self.height)
    }

    fn simulate_from(&self, op: OperatingPoint, u: &[f64]) -> Result<TimeSeries> {
        self.simulate_tank(u, op.y_s, self.dt).map(|r| r.series)
    }
}

/// Static input map of the Hammerstein-Wiener plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputMap {
    /// `0.5 u - 0.18 u²`
    Quadratic,
    Identity,
}

impl InputMap {
    pub fn apply(self, u: f64) -> f64 {
        match self {
            InputMap::Quadratic => 0.5 * u - 0.18 * u * u,
            InputMap::Identity => u,
        }
    }
}

/// Static output map of the Hammerstein-Wiener plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputMap {
    /// `(-1 + √(1 + 0.6 s)) / 0.3`, defined for `1 + 0.6 s ≥ 0`.
    Sqrt,
    Identity,
}

impl OutputMap {
    pub fn apply(self, s: f64) -> Option<f64> {
        match self {
            OutputMap::Sqrt => {
                let arg = 1.0 + 0.6 * s;
                (arg >= 0.0).then(|| (libm::sqrt(arg) - 1.0) / 0.3)
            }
            OutputMap::Identity => Some(s),
        }
    }

    fn inverse(self, y: f64) -> f64 {
        match self {
            OutputMap::Sqrt => {
                let r = 1.0 + 0.3 * y;
                (r * r - 1.0) / 0.6
            }
            OutputMap::Identity => y,
        }
    }
}

/// Hammerstein-Wiener chain `x = f(u)`, `A(z) s = B(z) x`, `y = g(s + v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HammersteinWienerPlant {
    /// `A(z)` coefficients, leading 1 first.
    a: Vec<f64>,
    /// `B(z)` coefficients of `z^-1, z^-2, ...`.
    b: Vec<f64>,
    pub input_map: InputMap,
    pub output_map: OutputMap,
    pub noise_variance: f64,
    pub noise_seed: u64,
    pub divergence_bound: f64,
}

impl Default for HammersteinWienerPlant {
    fn default() -> Self {
        Self::new(
            alloc::vec![1.0, -0.45, -0.35],
            alloc::vec![0.5, -0.25],
            InputMap::Quadratic,
            OutputMap::Sqrt,
        )
        .expect("reference linear block is stable")
    }
}

/// Roots of `z^n + c1 z^(n-1) + ... + cn` as `(re, im)` pairs.
pub(crate) fn poly_roots(monic_tail: &[f64]) -> Vec<(f64, f64)> {
    let n = monic_tail.len();
    if n == 0 {
        return Vec::new();
    }
    let mut companion = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (j, c) in monic_tail.iter().enumerate() {
        companion[(0, j)] = -c;
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect()
}

impl HammersteinWienerPlant {
    pub fn new(a: Vec<f64>, b: Vec<f64>, input_map: InputMap, output_map: OutputMap) -> Result<Self> {
        if a.first() != Some(&1.0) || b.is_empty() {
            return Err(Error::InvalidInput("A(z) must be monic and B(z) non-empty".into()));
        }
        let unstable = poly_roots(&a[1..])
            .iter()
            .any(|&(re, im)| libm::hypot(re, im) >= 1.0);
        if unstable {
            return Err(Error::InvalidInput("A(z) has roots outside the unit circle".into()));
        }
        Ok(Self {
            a,
            b,
            input_map,
            output_map,
            noise_variance: 0.0,
            noise_seed: 0,
            divergence_bound: DEFAULT_DIVERGENCE_BOUND,
        })
    }

    /// Adds seeded Gaussian noise `v(t)` of the given variance to `s(t)`.
    pub fn with_noise(mut self, variance: f64, seed: u64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::InvalidInput("noise variance must be >= 0".into()));
        }
        self.noise_variance = variance;
        self.noise_seed = seed;
        Ok(self)
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `B(1) / A(1)`.
    pub fn linear_dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Zero initial conditions.
    pub fn simulate_hw(&self, u: &[f64]) -> Result<TimeSeries> {
        self.simulate_with_history(u, 0.0, 0.0)
    }

    /// Pre-sample history held constant at `x_pre` and `s_pre`.
    fn simulate_with_history(&self, u: &[f64], x_pre: f64, s_pre: f64) -> Result<TimeSeries> {
        check_finite(u)?;
        let n = u.len();
        let na = self.a.len() - 1;
        let nb = self.b.len();
        let x: Vec<f64> = u.iter().map(|&uk| self.input_map.apply(uk)).collect();
        let mut s: Vec<f64> = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut noise = if self.noise_variance > 0.0 {
            let normal = Normal::new(0.0, libm::sqrt(self.noise_variance))
                .map_err(|_| Error::InvalidInput("noise variance".into()))?;
            Some((ChaCha8Rng::seed_from_u64(self.noise_seed), normal))
        } else {
            None
        };
        for t in 0..n {
            let mut st = 0.0;
            for i in 1..=na {
                let past = if t >= i { s[t - i] } else { s_pre };
                st -= self.a[i] * past;
            }
            for j in 1..=nb {
                let past = if t >= j { x[t - j] } else { x_pre };
                st += self.b[j - 1] * past;
            }
            if !st.is_finite() || st.abs() > self.divergence_bound {
                return Err(Error::Divergence { index: t, value: st });
            }
            s.push(st);
            let v = noise
                .as_mut()
                .map_or(0.0, |(rng, normal)| normal.sample(rng));
            let yt = self.output_map.apply(st + v).ok_or(Error::Domain {
                index: t,
                reason: "1 + 0.6 s < 0 in output nonlinearity",
            })?;
            y.push(yt);
        }
        TimeSeries::new(u.to_vec(), y, 1.0)
    }
}

impl Plant for HammersteinWienerPlant {
    fn name(&self) -> &'static str {
        "hw"
    }

    fn dt(&self) -> f64 {
        1.0
    }

    fn steady_state_residual(&self, u_s: f64, y: f64) -> f64 {
        self.output_map.inverse(y) - self.linear_dc_gain() * self.input_map.apply(u_s)
    }

    fn steady_state_bracket(&self, _u_s: f64) -> (f64, f64) {
        match self.output_map {
            OutputMap::Sqrt => (-1.0 / 0.3, 1e3),
            OutputMap::Identity => (-1e6, 1e6),
        }
    }

    fn simulate_from(&self, op: OperatingPoint, u: &[f64]) -> Result<TimeSeries> {
        let x_pre = self.input_map.apply(op.u_s);
        self.simulate_with_history(u, x_pre, self.linear_dc_gain() * x_pre)
    }
}
