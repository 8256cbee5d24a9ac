//! Domain types shared across the pipeline.
//!
//! Every type validates its invariants on construction (including when
//! deserialized) and is immutable afterwards. Global model quantities are in
//! absolute plant units; only [`ArxModel`] works in deviation variables.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// Sampled scalar input/output trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TimeSeriesRepr")]
pub struct TimeSeries {
    u: Vec<f64>,
    y: Vec<f64>,
    dt: f64,
}

#[derive(Deserialize)]
struct TimeSeriesRepr {
    u: Vec<f64>,
    y: Vec<f64>,
    dt: f64,
}

impl TryFrom<TimeSeriesRepr> for TimeSeries {
    type Error = Error;
    fn try_from(r: TimeSeriesRepr) -> Result<Self> {
        TimeSeries::new(r.u, r.y, r.dt)
    }
}

impl TimeSeries {
    pub fn new(u: Vec<f64>, y: Vec<f64>, dt: f64) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::LengthMismatch {
                what: "time series u/y",
                left: u.len(),
                right: y.len(),
            });
        }
        if u.is_empty() {
            return Err(Error::TooShort { needed: 0, got: 0 });
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput(format!("sampling interval must be > 0, got {dt}")));
        }
        if !all_finite(&u) || !all_finite(&y) {
            return Err(Error::NonFinite("time series samples"));
        }
        Ok(Self { u, y, dt })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Samples `start..end` as a new series.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidInput(format!(
                "slice {start}..{end} out of range for length {}",
                self.len()
            )));
        }
        Self::new(self.u[start..end].to_vec(), self.y[start..end].to_vec(), self.dt)
    }
}

/// Steady-state input/output pair anchoring a local model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatingPointRepr")]
pub struct OperatingPoint {
    pub u_s: f64,
    pub y_s: f64,
}

#[derive(Deserialize)]
struct OperatingPointRepr {
    u_s: f64,
    y_s: f64,
}

impl TryFrom<OperatingPointRepr> for OperatingPoint {
    type Error = Error;
    fn try_from(r: OperatingPointRepr) -> Result<Self> {
        OperatingPoint::new(r.u_s, r.y_s)
    }
}

impl OperatingPoint {
    pub fn new(u_s: f64, y_s: f64) -> Result<Self> {
        if !(u_s.is_finite() && y_s.is_finite()) {
            return Err(Error::NonFinite("operating point"));
        }
        Ok(Self { u_s, y_s })
    }
}

impl fmt::Display for OperatingPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.u_s, self.y_s)
    }
}

/// Local linear difference-equation model in deviation variables:
///
/// ```text
/// ỹ[k] = Σ_{i=1..n_a} a_i ỹ[k-i] + Σ_{j=1..n_b} b_j ũ[k-delay-j]
/// ```
///
/// with `ỹ = y - y_s` and `ũ = u - u_s`. With `delay = 0` the first input
/// term is `ũ[k-1]`, so there is never direct feedthrough.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArxModelRepr")]
pub struct ArxModel {
    a: Vec<f64>,
    b: Vec<f64>,
    delay: usize,
    op: OperatingPoint,
}

#[derive(Deserialize)]
struct ArxModelRepr {
    a: Vec<f64>,
    b: Vec<f64>,
    delay: usize,
    op: OperatingPoint,
}

impl TryFrom<ArxModelRepr> for ArxModel {
    type Error = Error;
    fn try_from(r: ArxModelRepr) -> Result<Self> {
        ArxModel::new(r.a, r.b, r.delay, r.op)
    }
}

impl ArxModel {
    pub fn new(a: Vec<f64>, b: Vec<f64>, delay: usize, op: OperatingPoint) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidInput("ARX model needs n_a >= 1 and n_b >= 1".into()));
        }
        if !all_finite(&a) || !all_finite(&b) {
            return Err(Error::NonFinite("ARX coefficients"));
        }
        Ok(Self { a, b, delay, op })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn op(&self) -> OperatingPoint {
        self.op
    }

    /// Largest input lag referenced, `delay + n_b`.
    pub fn input_lag(&self) -> usize {
        self.delay + self.b.len()
    }

    /// Steady-state gain `Σb / (1 - Σa)`; infinite for an integrating model.
    pub fn dc_gain(&self) -> f64 {
        let sa: f64 = self.a.iter().sum();
        let sb: f64 = self.b.iter().sum();
        sb / (1.0 - sa)
    }
}

/// Signal a lag refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    Output,
    Input,
}

impl Variable {
    fn symbol(self) -> char {
        match self {
            Variable::Output => 'y',
            Variable::Input => 'u',
        }
    }
}

/// One factor `variable[k - lag]^exponent` of a monomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub variable: Variable,
    pub lag: usize,
    pub exponent: u32,
}

impl Term {
    pub fn new(variable: Variable, lag: usize, exponent: u32) -> Self {
        Self {
            variable,
            lag,
            exponent,
        }
    }

    fn key(&self) -> (Variable, usize) {
        (self.variable, self.lag)
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key()
            .cmp(&other.key())
            .then(self.exponent.cmp(&other.exponent))
    }
}

/// Symbolic identity of one regressor column.
///
/// Terms are kept sorted by `(variable, lag)` with outputs before inputs and
/// repeated factors merged, so structurally identical monomials compare equal
/// no matter how they were built. The intercept has no terms and
/// `constant = true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "FeatureDescriptorRepr")]
pub struct FeatureDescriptor {
    terms: Vec<Term>,
    constant: bool,
}

#[derive(Deserialize)]
struct FeatureDescriptorRepr {
    #[serde(default)]
    terms: Vec<Term>,
    #[serde(default)]
    constant: bool,
}

impl TryFrom<FeatureDescriptorRepr> for FeatureDescriptor {
    type Error = Error;
    fn try_from(r: FeatureDescriptorRepr) -> Result<Self> {
        if r.constant {
            if r.terms.is_empty() {
                Ok(FeatureDescriptor::intercept())
            } else {
                Err(Error::InvalidInput("constant descriptor cannot have terms".into()))
            }
        } else {
            FeatureDescriptor::monomial(r.terms)
        }
    }
}

impl FeatureDescriptor {
    pub fn intercept() -> Self {
        Self {
            terms: Vec::new(),
            constant: true,
        }
    }

    /// `variable[k - lag]` to the first power.
    pub fn linear(variable: Variable, lag: usize) -> Self {
        Self {
            terms: alloc::vec![Term::new(variable, lag, 1)],
            constant: false,
        }
    }

    /// Canonical monomial from factors given in any order.
    pub fn monomial(mut terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInput("monomial needs at least one term".into()));
        }
        if let Some(t) = terms.iter().find(|t| t.lag == 0 || t.exponent == 0) {
            return Err(Error::InvalidInput(format!(
                "term lag and exponent must be >= 1, got lag {} exponent {}",
                t.lag, t.exponent
            )));
        }
        terms.sort();
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.key() == t.key() => last.exponent += t.exponent,
                _ => merged.push(t),
            }
        }
        Ok(Self {
            terms: merged,
            constant: false,
        })
    }

    /// Product of two descriptors; the intercept is the multiplicative identity.
    pub fn product(&self, other: &Self) -> Self {
        match (self.constant, other.constant) {
            (true, _) => other.clone(),
            (_, true) => self.clone(),
            _ => {
                let mut terms = self.terms.clone();
                terms.extend_from_slice(&other.terms);
                Self::monomial(terms).expect("factors of valid descriptors are valid")
            }
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    /// Total polynomial degree (0 for the intercept).
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.exponent).sum()
    }

    /// Largest lag referenced for `variable` (0 if absent).
    pub fn max_lag(&self, variable: Variable) -> usize {
        self.terms
            .iter()
            .filter(|t| t.variable == variable)
            .map(|t| t.lag)
            .max()
            .unwrap_or(0)
    }

    /// True if the monomial contains the given variable at any lag.
    pub fn involves(&self, variable: Variable) -> bool {
        self.terms.iter().any(|t| t.variable == variable)
    }

    /// Evaluates the monomial, reading lagged values through `value(variable, lag)`.
    pub fn evaluate<F>(&self, mut value: F) -> f64
    where
        F: FnMut(Variable, usize) -> f64,
    {
        let mut acc = 1.0;
        for t in &self.terms {
            let x = value(t.variable, t.lag);
            for _ in 0..t.exponent {
                acc *= x;
            }
        }
        acc
    }

    /// Parses the format produced by `Display`, e.g. `1`, `y[k-2]^2`, `y[k-1]*u[k-1]`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" {
            return Ok(Self::intercept());
        }
        let bad = || Error::InvalidInput(format!("cannot parse feature '{s}'"));
        let mut terms = Vec::new();
        for factor in s.split('*') {
            let factor = factor.trim();
            let (base, exponent) = match factor.split_once('^') {
                Some((b, e)) => (b, e.trim().parse::<u32>().map_err(|_| bad())?),
                None => (factor, 1),
            };
            let variable = match base.chars().next() {
                Some('y') => Variable::Output,
                Some('u') => Variable::Input,
                _ => return Err(bad()),
            };
            let lag = base[1..]
                .strip_prefix("[k-")
                .and_then(|r| r.strip_suffix(']'))
                .ok_or_else(bad)?
                .parse::<usize>()
                .map_err(|_| bad())?;
            terms.push(Term::new(variable, lag, exponent));
        }
        Self::monomial(terms)
    }
}

impl fmt::Display for FeatureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.constant {
            return f.write_str("1");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "{}[k-{}]", t.variable.symbol(), t.lag)?;
            if t.exponent > 1 {
                write!(f, "^{}", t.exponent)?;
            }
        }
        Ok(())
    }
}

/// Sparse global polynomial NARX model in absolute units:
/// `y[k] = Σ coefficients[i] * features[i](history)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PNarxModelRepr")]
pub struct PNarxModel {
    features: Vec<FeatureDescriptor>,
    coefficients: Vec<f64>,
    lags: (usize, usize),
}

#[derive(Deserialize)]
struct PNarxModelRepr {
    features: Vec<FeatureDescriptor>,
    coefficients: Vec<f64>,
    lags: (usize, usize),
}

impl TryFrom<PNarxModelRepr> for PNarxModel {
    type Error = Error;
    fn try_from(r: PNarxModelRepr) -> Result<Self> {
        PNarxModel::new(r.features, r.coefficients, r.lags)
    }
}

impl PNarxModel {
    /// `lags` is `(n_y, n_u)`; every feature must stay within them.
    pub fn new(
        features: Vec<FeatureDescriptor>,
        coefficients: Vec<f64>,
        lags: (usize, usize),
    ) -> Result<Self> {
        if features.len() != coefficients.len() {
            return Err(Error::LengthMismatch {
                what: "features/coefficients",
                left: features.len(),
                right: coefficients.len(),
            });
        }
        if !all_finite(&coefficients) {
            return Err(Error::NonFinite("model coefficients"));
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].contains(f) {
                return Err(Error::InvalidInput(format!("duplicate feature {f}")));
            }
            if f.max_lag(Variable::Output) > lags.0 || f.max_lag(Variable::Input) > lags.1 {
                return Err(Error::InvalidInput(format!(
                    "feature {f} exceeds lags (n_y = {}, n_u = {})",
                    lags.0, lags.1
                )));
            }
        }
        Ok(Self {
            features,
            coefficients,
            lags,
        })
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn lags(&self) -> (usize, usize) {
        self.lags
    }

    /// Number of samples of history needed before free-run prediction.
    pub fn max_lag(&self) -> usize {
        self.lags.0.max(self.lags.1)
    }

    pub fn n_s(&self) -> usize {
        self.features.len()
    }

    /// Coefficient of `feature`, zero if it is not part of the model.
    pub fn coefficient_of(&self, feature: &FeatureDescriptor) -> f64 {
        self.features
            .iter()
            .position(|f| f == feature)
            .map_or(0.0, |i| self.coefficients[i])
    }
}

impl fmt::Display for PNarxModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("y[k] =")?;
        for (i, (feat, c)) in self.features.iter().zip(&self.coefficients).enumerate() {
            let sign = if *c < 0.0 { '-' } else { '+' };
            if i == 0 && sign == '+' {
                write!(f, " {:.6e}", c)?;
            } else {
                write!(f, " {} {:.6e}", sign, c.abs())?;
            }
            if !feat.is_constant() {
                write!(f, "*{feat}")?;
            }
        }
        Ok(())
    }
}

/// Regularization path: either `count` values spanning `decades` orders of
/// magnitude below the data-dependent maximum, or the default of 100 values
/// over four decades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaGrid {
    Explicit { count: usize, decades: f64 },
    Keyword(LambdaGridKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaGridKeyword {
    Auto,
}

impl LambdaGrid {
    pub const AUTO: LambdaGrid = LambdaGrid::Keyword(LambdaGridKeyword::Auto);

    /// `(count, decades)` after resolving `auto`.
    pub fn resolve(self) -> (usize, f64) {
        match self {
            LambdaGrid::Explicit { count, decades } => (count, decades),
            LambdaGrid::Keyword(LambdaGridKeyword::Auto) => (100, 4.0),
        }
    }
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self::AUTO
    }
}

/// Which prediction the validation metric compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    #[default]
    FreeRun,
    OneStep,
}

/// Full parameterization of one fusion run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FusionConfigRepr")]
pub struct FusionConfig {
    pub n_y: usize,
    pub n_u: usize,
    pub degree: u32,
    pub gamma: f64,
    pub lambda_grid: LambdaGrid,
    pub cv_folds: usize,
    pub epsilon_sel: f64,
    pub seed: u64,
    /// Simulated samples per operating point.
    pub n: usize,
    /// Validation samples.
    pub n_v: usize,
    /// Local ARX orders used when local models are identified from a plant.
    pub n_a: usize,
    pub n_b: usize,
    pub delay: usize,
    /// PRBS amplitude as a fraction of |u_s|, floored at `excitation_floor`.
    pub excitation_fraction: f64,
    pub excitation_floor: f64,
    pub switch_period: usize,
    pub tol: f64,
    pub max_sweeps: usize,
    pub validation_mode: ValidationMode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FusionConfigRepr {
    n_y: usize,
    n_u: usize,
    #[serde(default = "defaults::degree")]
    degree: u32,
    gamma: f64,
    #[serde(default)]
    lambda_grid: LambdaGrid,
    cv_folds: usize,
    #[serde(default = "defaults::epsilon_sel")]
    epsilon_sel: f64,
    #[serde(default)]
    seed: u64,
    n: usize,
    n_v: usize,
    #[serde(default = "defaults::order")]
    n_a: usize,
    #[serde(default = "defaults::order")]
    n_b: usize,
    #[serde(default)]
    delay: usize,
    #[serde(default = "defaults::excitation_fraction")]
    excitation_fraction: f64,
    #[serde(default = "defaults::excitation_floor")]
    excitation_floor: f64,
    #[serde(default = "defaults::switch_period")]
    switch_period: usize,
    #[serde(default = "defaults::tol")]
    tol: f64,
    #[serde(default = "defaults::max_sweeps")]
    max_sweeps: usize,
    #[serde(default)]
    validation_mode: ValidationMode,
}

mod defaults {
    pub fn degree() -> u32 {
        2
    }
    pub fn epsilon_sel() -> f64 {
        1e-6
    }
    pub fn order() -> usize {
        2
    }
    pub fn excitation_fraction() -> f64 {
        0.05
    }
    pub fn excitation_floor() -> f64 {
        0.01
    }
    pub fn switch_period() -> usize {
        10
    }
    pub fn tol() -> f64 {
        1e-8
    }
    pub fn max_sweeps() -> usize {
        100_000
    }
}

impl TryFrom<FusionConfigRepr> for FusionConfig {
    type Error = Error;
    fn try_from(r: FusionConfigRepr) -> Result<Self> {
        let cfg = FusionConfig {
            n_y: r.n_y,
            n_u: r.n_u,
            degree: r.degree,
            gamma: r.gamma,
            lambda_grid: r.lambda_grid,
            cv_folds: r.cv_folds,
            epsilon_sel: r.epsilon_sel,
            seed: r.seed,
            n: r.n,
            n_v: r.n_v,
            n_a: r.n_a,
            n_b: r.n_b,
            delay: r.delay,
            excitation_fraction: r.excitation_fraction,
            excitation_floor: r.excitation_floor,
            switch_period: r.switch_period,
            tol: r.tol,
            max_sweeps: r.max_sweeps,
            validation_mode: r.validation_mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FusionConfig {
    /// Configuration with the library defaults for everything but the
    /// experiment-specific sizes.
    pub fn new(n_y: usize, n_u: usize, gamma: f64, cv_folds: usize, n: usize, n_v: usize) -> Self {
        Self {
            n_y,
            n_u,
            degree: defaults::degree(),
            gamma,
            lambda_grid: LambdaGrid::AUTO,
            cv_folds,
            epsilon_sel: defaults::epsilon_sel(),
            seed: 0,
            n,
            n_v,
            n_a: defaults::order(),
            n_b: defaults::order(),
            delay: 0,
            excitation_fraction: defaults::excitation_fraction(),
            excitation_floor: defaults::excitation_floor(),
            switch_period: defaults::switch_period(),
            tol: defaults::tol(),
            max_sweeps: defaults::max_sweeps(),
            validation_mode: ValidationMode::FreeRun,
        }
    }

    pub fn max_lag(&self) -> usize {
        self.n_y.max(self.n_u)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return invalid(format!("gamma must lie strictly inside (0,1), got {}", self.gamma));
        }
        if self.n_y == 0 || self.n_u == 0 {
            return invalid("n_y and n_u must be >= 1".into());
        }
        if !(1..=3).contains(&self.degree) {
            return invalid(format!("degree must be 1, 2 or 3, got {}", self.degree));
        }
        if self.cv_folds < 2 {
            return invalid(format!("cv_folds must be >= 2, got {}", self.cv_folds));
        }
        let rows = self.n.saturating_sub(self.max_lag());
        if rows < self.cv_folds {
            return invalid(format!(
                "n = {} leaves {rows} usable rows per operating point, fewer than cv_folds = {}",
                self.n, self.cv_folds
            ));
        }
        if self.n_v <= self.max_lag() {
            return invalid(format!("n_v = {} must exceed the maximum lag", self.n_v));
        }
        if !(self.epsilon_sel >= 0.0 && self.epsilon_sel.is_finite()) {
            return invalid("epsilon_sel must be finite and >= 0".into());
        }
        if let LambdaGrid::Explicit { count, decades } = self.lambda_grid {
            if count < 2 || !(decades > 0.0 && decades.is_finite()) {
                return invalid("lambda_grid needs count >= 2 and decades > 0".into());
            }
        }
        if self.n_a == 0 || self.n_b == 0 {
            return invalid("n_a and n_b must be >= 1".into());
        }
        if !(self.excitation_fraction >= 0.0 && self.excitation_floor >= 0.0) {
            return invalid("excitation amplitudes must be >= 0".into());
        }
        if self.switch_period == 0 {
            return invalid("switch_period must be >= 1".into());
        }
        if !(self.tol > 0.0) || self.max_sweeps == 0 {
            return invalid("tol must be > 0 and max_sweeps >= 1".into());
        }
        Ok(())
    }
}
