//! Fusion of local linear models into one global polynomial NARX model,
//! free-run simulation of the result, and the benchmark harness.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::{self, LagHistory, RegressionProblem};
use crate::local_ident::{self, check_distinct, ArxOrders, ExcitationSpec};
use crate::plants::{
    solve_steady_state, ConicalTankPlant, HammersteinWienerPlant, Plant, ToyNarxPlant,
    DEFAULT_DIVERGENCE_BOUND,
};
use crate::sparse::{self, CdOptions, CvReport, ElasticNetFit};
use crate::types::{
    ArxModel, FeatureDescriptor, FusionConfig, OperatingPoint, PNarxModel, TimeSeries, ValidationMode,
    Variable,
};

/// Seed offsets separating the random streams of one run.
const LOCAL_STREAM: u64 = 0;
const FUSION_STREAM: u64 = 0x5EED_F05E;

/// Exact absolute-unit form of a local model:
/// `y[k] = y_s(1 - Σa) - u_s Σb + Σ a_i y[k-i] + Σ b_j u[k-d-j]`.
pub fn arx_to_pnarx(model: &ArxModel) -> Result<PNarxModel> {
    let op = model.op();
    let sum_a: f64 = model.a().iter().sum();
    let sum_b: f64 = model.b().iter().sum();
    let mut features = vec![FeatureDescriptor::intercept()];
    let mut coefficients = vec![op.y_s * (1.0 - sum_a) - op.u_s * sum_b];
    for (i, a) in model.a().iter().enumerate() {
        features.push(FeatureDescriptor::linear(Variable::Output, i + 1));
        coefficients.push(*a);
    }
    for (j, b) in model.b().iter().enumerate() {
        features.push(FeatureDescriptor::linear(Variable::Input, model.delay() + j + 1));
        coefficients.push(*b);
    }
    PNarxModel::new(features, coefficients, (model.a().len(), model.input_lag()))
}

/// Per-OP PRBS used to excite the local models, built from the config's
/// excitation settings on a stream separate from the local experiments.
pub fn fusion_excitation(ops: &[OperatingPoint], config: &FusionConfig) -> Result<Vec<Vec<f64>>> {
    let spec = excitation_spec(config, config.n, FUSION_STREAM);
    ops.iter()
        .enumerate()
        .map(|(i, &op)| spec.signal(op, i))
        .collect()
}

/// Excitation used on the true plant when local models are identified.
pub fn local_excitation(config: &FusionConfig) -> ExcitationSpec {
    excitation_spec(config, config.n, LOCAL_STREAM)
}

fn excitation_spec(config: &FusionConfig, length: usize, stream: u64) -> ExcitationSpec {
    ExcitationSpec {
        length,
        fraction: config.excitation_fraction,
        floor: config.excitation_floor,
        switch_period: config.switch_period,
        seed: config.seed ^ stream,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpMse {
    pub u_s: f64,
    pub y_s: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    /// Selected features including the intercept.
    pub n_s: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub cv_curve: CvReport,
    pub selected_features: Vec<String>,
    pub beta_f: Vec<f64>,
    /// Elastic-net coefficients at the chosen λ on standardized columns,
    /// one per dictionary column.
    pub beta_enet: Vec<f64>,
    pub dictionary: Vec<String>,
    /// One-step training MSE of the refitted model on each block.
    pub per_op_mse: Vec<OpMse>,
}

#[derive(Debug, Clone)]
pub struct Fusion {
    pub model: PNarxModel,
    pub report: FusionReport,
    /// Simulated local-model data, one series per OP.
    pub training: Vec<TimeSeries>,
}

/// Outcome of the sparse-selection stage on one regression problem.
#[derive(Debug, Clone)]
pub struct Selection {
    pub grid: Vec<f64>,
    pub cv: CvReport,
    /// Elastic-net fit at the chosen λ, on standardized columns.
    pub fit: ElasticNetFit,
    /// Column indices into the problem's dictionary, intercept included.
    pub selected: Vec<usize>,
}

/// Standardizes, cross-validates the λ path and keeps the columns that
/// survive at the chosen λ.
pub fn select_on_problem(problem: &RegressionProblem, config: &FusionConfig) -> Result<Selection> {
    config.validate()?;
    let opts = CdOptions {
        tol: config.tol,
        max_sweeps: config.max_sweeps,
        record_objective: false,
    };
    let full = sparse::standardize(&problem.z, problem.intercept_column());
    let (count, decades) = config.lambda_grid.resolve();
    let grid = sparse::lambda_path(&problem.y, &full.z, &full.roles, config.gamma, count, decades)?;
    let cv = sparse::cross_validate(problem, config.gamma, config.cv_folds, &grid, &opts)?;

    // walk the path down to the chosen λ for a warm start
    let sys = sparse::GramSystem::new(&full.z, &problem.y)?;
    let mut warm: Option<Vec<f64>> = None;
    let mut fit = None;
    for &lambda in &grid[..=cv.chosen_index] {
        let f = sparse::coordinate_descent_gram(&sys, &full.roles, lambda, config.gamma, &opts, warm.as_deref())?;
        warm = Some(f.beta.clone());
        fit = Some(f);
    }
    let fit = fit.expect("grid is non-empty");
    let selected = sparse::select_features(&fit, &full.roles, config.epsilon_sel)?;
    Ok(Selection { grid, cv, fit, selected })
}

/// Simulates every local model under its excitation, lifts and stacks the
/// data, selects features by cross-validated elastic net and refits them by
/// least squares.
pub fn fuse(models: &[ArxModel], config: &FusionConfig, excitation: &[Vec<f64>]) -> Result<Fusion> {
    config.validate()?;
    if models.len() < 2 {
        return Err(Error::DegenerateOperatingPoints(format!(
            "fusion needs at least 2 local models, got {}",
            models.len()
        )));
    }
    let ops: Vec<OperatingPoint> = models.iter().map(|m| m.op()).collect();
    check_distinct(&ops)?;
    if excitation.len() != models.len() {
        return Err(Error::LengthMismatch {
            what: "excitation signals/models",
            left: excitation.len(),
            right: models.len(),
        });
    }

    let mut training = Vec::with_capacity(models.len());
    let mut blocks = Vec::with_capacity(models.len());
    for (model, u) in models.iter().zip(excitation) {
        let data = local_ident::simulate_arx(model, u, 1.0)?;
        blocks.push(lifting::build_block(&data, config.n_y, config.n_u, config.degree)?);
        training.push(data);
    }
    let problem = lifting::stack(&blocks)?;

    let Selection { cv, fit, selected, .. } = select_on_problem(&problem, config)?;
    let refit = sparse::refit_ols(&problem.y, &problem.z, &selected)?;
    let features: Vec<FeatureDescriptor> = selected.iter().map(|&j| problem.descriptors[j].clone()).collect();
    let model = PNarxModel::new(features.clone(), refit.beta_f.clone(), (config.n_y, config.n_u))?;

    let zf = problem.z.select_columns(&selected);
    let resid = &problem.y - zf * DVector::from_row_slice(&refit.beta_f);
    let per_op_mse = problem
        .block_ranges()
        .iter()
        .zip(&ops)
        .map(|(r, op)| OpMse {
            u_s: op.u_s,
            y_s: op.y_s,
            mse: resid.rows(r.start, r.len()).norm_squared() / r.len() as f64,
        })
        .collect();

    let report = FusionReport {
        n_s: model.n_s(),
        lambda: cv.chosen_lambda,
        gamma: config.gamma,
        cv_curve: cv,
        selected_features: features.iter().map(|f| f.to_string()).collect(),
        beta_f: refit.beta_f,
        beta_enet: fit.beta,
        dictionary: problem.descriptors.iter().map(|f| f.to_string()).collect(),
        per_op_mse,
    };
    Ok(Fusion { model, report, training })
}

/// Free-run recursion of `model` under `u`, seeded with `y_init` as the
/// first `y_init.len()` outputs (at least the model's maximum lag).
pub fn simulate_pnarx(model: &PNarxModel, u: &[f64], y_init: &[f64], dt: f64) -> Result<TimeSeries> {
    let start = y_init.len();
    if start < model.max_lag() {
        return Err(Error::TooShort {
            needed: model.max_lag(),
            got: start,
        });
    }
    if u.len() < start {
        return Err(Error::LengthMismatch {
            what: "input/initial history",
            left: u.len(),
            right: start,
        });
    }
    if !u.iter().chain(y_init).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("simulation input or history"));
    }
    let (n_y, n_u) = model.lags();
    let mut y = Vec::with_capacity(u.len());
    y.extend_from_slice(y_init);
    let mut yh = vec![0.0; n_y];
    let mut uh = vec![0.0; n_u];
    let mut values = Vec::with_capacity(model.n_s());
    for k in start..u.len() {
        for (i, slot) in yh.iter_mut().enumerate() {
            *slot = y[k - 1 - i];
        }
        for (i, slot) in uh.iter_mut().enumerate() {
            *slot = u[k - 1 - i];
        }
        lifting::evaluate_features_into(model.features(), &LagHistory { y: &yh, u: &uh }, &mut values)?;
        let next: f64 = values.iter().zip(model.coefficients()).map(|(v, c)| v * c).sum();
        if !next.is_finite() || next.abs() > DEFAULT_DIVERGENCE_BOUND {
            return Err(Error::Divergence { index: k, value: next });
        }
        y.push(next);
    }
    TimeSeries::new(u.to_vec(), y, dt)
}

/// One-step-ahead predictions from the true lags of `truth` for `k >= start`.
pub fn predict_one_step(model: &PNarxModel, truth: &TimeSeries, start: usize) -> Result<Vec<f64>> {
    let (n_y, n_u) = model.lags();
    if start < model.max_lag() {
        return Err(Error::TooShort {
            needed: model.max_lag(),
            got: start,
        });
    }
    let (u, y) = (truth.u(), truth.y());
    let mut yh = vec![0.0; n_y];
    let mut uh = vec![0.0; n_u];
    let mut values = Vec::with_capacity(model.n_s());
    let mut out = Vec::with_capacity(truth.len().saturating_sub(start));
    for k in start..truth.len() {
        for (i, slot) in yh.iter_mut().enumerate() {
            *slot = y[k - 1 - i];
        }
        for (i, slot) in uh.iter_mut().enumerate() {
            *slot = u[k - 1 - i];
        }
        lifting::evaluate_features_into(model.features(), &LagHistory { y: &yh, u: &uh }, &mut values)?;
        out.push(values.iter().zip(model.coefficients()).map(|(v, c)| v * c).sum());
    }
    Ok(out)
}

/// Predictions for `k >= start`; free-run seeds with the first `start` true
/// outputs.
pub fn predict(model: &PNarxModel, truth: &TimeSeries, mode: ValidationMode, start: usize) -> Result<Vec<f64>> {
    if truth.len() <= start {
        return Err(Error::TooShort {
            needed: start + 1,
            got: truth.len(),
        });
    }
    match mode {
        ValidationMode::OneStep => predict_one_step(model, truth, start),
        ValidationMode::FreeRun => {
            let sim = simulate_pnarx(model, truth.u(), &truth.y()[..start], truth.dt())?;
            Ok(sim.y()[start..].to_vec())
        }
    }
}

/// Mean squared difference.
pub fn mse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what: "truth/prediction",
            left: truth.len(),
            right: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidInput("mse of empty sequences".into()));
    }
    Ok(truth.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / truth.len() as f64)
}

/// Validation MSE over the predicted samples, seeding with the model's own
/// maximum lag.
pub fn validate(model: &PNarxModel, truth: &TimeSeries, mode: ValidationMode) -> Result<f64> {
    validate_from(model, truth, mode, model.max_lag())
}

/// Like [`validate`] with an explicit warm-up; used to score models of
/// different lag depth on the same samples.
pub fn validate_from(model: &PNarxModel, truth: &TimeSeries, mode: ValidationMode, start: usize) -> Result<f64> {
    let pred = predict(model, truth, mode, start)?;
    mse(&truth.y()[start..], &pred)
}

/// Benchmark plant families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Toy,
    Tank,
    Hw,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::Toy, Case::Tank, Case::Hw];

    pub fn name(self) -> &'static str {
        match self {
            Case::Toy => "toy",
            Case::Tank => "tank",
            Case::Hw => "hw",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Case::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown case {s:?}; valid cases: toy, tank, hw")))
    }

    pub fn plant(self) -> CasePlant {
        match self {
            Case::Toy => CasePlant::Toy(ToyNarxPlant::default()),
            Case::Tank => CasePlant::Tank(ConicalTankPlant::default()),
            Case::Hw => CasePlant::Hw(HammersteinWienerPlant::default()),
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the reference plants.
#[derive(Debug, Clone, PartialEq)]
pub enum CasePlant {
    Toy(ToyNarxPlant),
    Tank(ConicalTankPlant),
    Hw(HammersteinWienerPlant),
}

impl CasePlant {
    fn inner(&self) -> &dyn Plant {
        match self {
            CasePlant::Toy(p) => p,
            CasePlant::Tank(p) => p,
            CasePlant::Hw(p) => p,
        }
    }

    /// Operating point for a grid coordinate: the tank grid is in level
    /// units, the others in input units.
    pub fn operating_point(&self, coordinate: f64) -> Result<OperatingPoint> {
        match self {
            CasePlant::Tank(p) => p.operating_point_at_level(coordinate),
            other => solve_steady_state(other.inner(), coordinate),
        }
    }
}

impl Plant for CasePlant {
    fn name(&self) -> &'static str {
        self.inner().name()
    }
    fn dt(&self) -> f64 {
        self.inner().dt()
    }
    fn steady_state_residual(&self, u_s: f64, y: f64) -> f64 {
        self.inner().steady_state_residual(u_s, y)
    }
    fn steady_state_bracket(&self, u_s: f64) -> (f64, f64) {
        self.inner().steady_state_bracket(u_s)
    }
    fn simulate_from(&self, op: OperatingPoint, u: &[f64]) -> Result<TimeSeries> {
        self.inner().simulate_from(op, u)
    }
}

/// Validation experiment at one grid point: the plant rests at the
/// operating point, then the input steps by `δ = max(fraction·|u_s|, floor)`
/// at sample `at`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepTest {
    pub fraction: f64,
    pub floor: f64,
    pub at: usize,
}

impl StepTest {
    pub fn size(&self, u_s: f64) -> f64 {
        (self.fraction * u_s.abs()).max(self.floor)
    }

    pub fn signal(&self, op: OperatingPoint, length: usize) -> Result<Vec<f64>> {
        crate::signal::gen_step(length, op.u_s, op.u_s + self.size(op.u_s), self.at)
    }
}

/// Everything that determines one benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub case: Case,
    /// Grid coordinates (input units, or level units for the tank).
    pub grid: Vec<f64>,
    /// Grid coordinates of the two operating points with local models.
    pub anchors: [f64; 2],
    pub config: FusionConfig,
    pub validation: StepTest,
}

impl BenchmarkSpec {
    pub fn reference(case: Case) -> Self {
        match case {
            Case::Toy => Self {
                case,
                grid: vec![0.05, 0.1, 0.2, 0.3, 0.35],
                anchors: [0.1, 0.3],
                config: FusionConfig::new(3, 3, 0.5, 3, 448, 155),
                validation: StepTest {
                    fraction: 0.1,
                    floor: 0.01,
                    at: 10,
                },
            },
            Case::Tank => Self {
                case,
                grid: vec![4.0, 5.0, 7.5, 8.5, 10.0, 11.0],
                anchors: [5.0, 10.0],
                config: FusionConfig {
                    excitation_fraction: 0.075,
                    ..FusionConfig::new(3, 3, 0.75, 5, 7109, 3048)
                },
                validation: StepTest {
                    fraction: 0.02,
                    floor: 0.01,
                    at: 100,
                },
            },
            Case::Hw => Self {
                case,
                grid: vec![0.0, 0.5, 1.0],
                anchors: [0.0, 1.0],
                config: FusionConfig::new(3, 3, 0.5, 3, 448, 155),
                validation: StepTest {
                    fraction: 0.1,
                    floor: 0.05,
                    at: 10,
                },
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    /// Grid coordinate as listed in the spec.
    pub op: f64,
    pub u_s: f64,
    pub y_s: f64,
    pub mse_mf: f64,
    pub mse_m1: f64,
    pub mse_m2: f64,
    /// `mse_m1 / mse_mf`
    pub ratio1: f64,
    /// `mse_m2 / mse_mf`
    pub ratio2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub case: Case,
    pub rows: Vec<BenchmarkRow>,
    pub local_models: Vec<ArxModel>,
    pub model: PNarxModel,
    pub fusion: FusionReport,
}

/// Free-run (or one-step) scores of several models against one plant
/// experiment. Index 0 of `predictions`/`mse` is the first model passed in.
#[derive(Debug, Clone, PartialEq)]
pub struct PointEvaluation {
    pub op: OperatingPoint,
    pub truth: TimeSeries,
    /// Samples before this index are true history.
    pub start: usize,
    /// `None` when that model's free run diverged.
    pub predictions: Vec<Option<Vec<f64>>>,
    /// Infinite for diverged runs.
    pub mse: Vec<f64>,
}

/// Identifies the two local models and fuses them.
pub fn benchmark_fit(spec: &BenchmarkSpec) -> Result<(Vec<ArxModel>, Fusion)> {
    let config = &spec.config;
    config.validate()?;
    let plant = spec.case.plant();
    let ops = spec
        .anchors
        .iter()
        .map(|&c| plant.operating_point(c))
        .collect::<Result<Vec<_>>>()?;
    let orders = ArxOrders {
        n_a: config.n_a,
        n_b: config.n_b,
        delay: config.delay,
    };
    let locals = local_ident::make_local_models(&plant, &ops, &local_excitation(config), orders)?;
    let excitation = fusion_excitation(&ops, config)?;
    let fusion = fuse(&locals, config, &excitation)?;
    Ok((locals, fusion))
}

/// A diverging free run is a result, scored as infinite MSE.
fn predict_or_diverged(
    model: &PNarxModel,
    truth: &TimeSeries,
    mode: ValidationMode,
    start: usize,
) -> Result<Option<Vec<f64>>> {
    match predict(model, truth, mode, start) {
        Ok(p) => Ok(Some(p)),
        Err(Error::Divergence { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs the step test at `coordinate` on the true plant and scores every
/// model on the same samples, after a warm-up covering the deepest lag.
pub fn evaluate_point(
    plant: &CasePlant,
    models: &[PNarxModel],
    coordinate: f64,
    test: &StepTest,
    n_v: usize,
    mode: ValidationMode,
) -> Result<PointEvaluation> {
    let op = plant.operating_point(coordinate)?;
    let u = test.signal(op, n_v)?;
    let truth = plant.simulate_from(op, &u)?;
    let start = models.iter().map(PNarxModel::max_lag).max().unwrap_or(0);
    if n_v <= start {
        return Err(Error::TooShort {
            needed: start + 1,
            got: n_v,
        });
    }
    let ys = &truth.y()[start..];
    let predictions = models
        .iter()
        .map(|m| predict_or_diverged(m, &truth, mode, start))
        .collect::<Result<Vec<_>>>()?;
    let mse = predictions
        .iter()
        .map(|p| p.as_ref().map_or(Ok(f64::INFINITY), |p| mse(ys, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PointEvaluation {
        op,
        truth,
        start,
        predictions,
        mse,
    })
}

/// Scores the fused model and both local models at one grid coordinate.
pub fn benchmark_point(
    spec: &BenchmarkSpec,
    model: &PNarxModel,
    locals: &[ArxModel],
    coordinate: f64,
) -> Result<(BenchmarkRow, PointEvaluation)> {
    if locals.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "benchmark rows compare exactly 2 local models, got {}",
            locals.len()
        )));
    }
    let mut models = vec![model.clone()];
    for m in locals {
        models.push(arx_to_pnarx(m)?);
    }
    let eval = evaluate_point(
        &spec.case.plant(),
        &models,
        coordinate,
        &spec.validation,
        spec.config.n_v,
        spec.config.validation_mode,
    )?;
    let (mse_mf, mse_m1, mse_m2) = (eval.mse[0], eval.mse[1], eval.mse[2]);
    let row = BenchmarkRow {
        op: coordinate,
        u_s: eval.op.u_s,
        y_s: eval.op.y_s,
        mse_mf,
        mse_m1,
        mse_m2,
        ratio1: mse_m1 / mse_mf,
        ratio2: mse_m2 / mse_mf,
    };
    Ok((row, eval))
}

/// One pass/fail line of [`acceptance_checks`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn row_at(report: &BenchmarkReport, op: f64) -> Option<&BenchmarkRow> {
    report.rows.iter().find(|r| (r.op - op).abs() < 1e-9)
}

/// Thresholds each reference benchmark is expected to meet.
pub fn acceptance_checks(report: &BenchmarkReport) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut ratio_check = |name: String, op: f64, min: f64| {
        let (passed, detail) = match row_at(report, op) {
            Some(r) => (
                r.ratio1 >= min && r.ratio2 >= min,
                format!("ratio1 = {:.4}, ratio2 = {:.4}", r.ratio1, r.ratio2),
            ),
            None => (false, format!("no row at {op}")),
        };
        checks.push(Check { name, passed, detail });
    };
    match report.case {
        Case::Toy => {
            ratio_check("toy u_s=0.2 ratios >= 20".into(), 0.2, 20.0);
            for r in &report.rows {
                let passed = r.mse_mf < r.mse_m1 && r.mse_mf < r.mse_m2;
                checks.push(Check {
                    name: format!("toy u_s={} fusion beats M1 and M2", r.op),
                    passed,
                    detail: format!("ratio1 = {:.4}, ratio2 = {:.4}", r.ratio1, r.ratio2),
                });
            }
        }
        Case::Tank => {
            ratio_check("tank h_s=7.5 ratios >= 5".into(), 7.5, 5.0);
            for anchor in [5.0, 10.0] {
                let (passed, detail) = match row_at(report, anchor) {
                    Some(r) => (r.mse_mf < 0.05, format!("mse_mf = {:.4e}", r.mse_mf)),
                    None => (false, format!("no row at {anchor}")),
                };
                checks.push(Check {
                    name: format!("tank h_s={anchor} fusion MSE < 0.05"),
                    passed,
                    detail,
                });
            }
        }
        Case::Hw => {
            let (passed, detail) = match row_at(report, 0.5) {
                Some(r) => (
                    r.mse_mf < r.mse_m1 && r.mse_mf < r.mse_m2,
                    format!("mse_mf = {:.4e}, mse_m1 = {:.4e}, mse_m2 = {:.4e}", r.mse_mf, r.mse_m1, r.mse_m2),
                ),
                None => (false, "no row at 0.5".into()),
            };
            checks.push(Check {
                name: "hw u_s=0.5 fusion beats M1 and M2".into(),
                passed,
                detail,
            });
        }
    }
    checks
}

/// Runs the whole grid sequentially.
pub fn benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    let (locals, fusion) = benchmark_fit(spec)?;
    let rows = spec
        .grid
        .iter()
        .map(|&c| benchmark_point(spec, &fusion.model, &locals, c).map(|(row, _)| row))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkReport {
        case: spec.case,
        rows,
        local_models: locals,
        model: fusion.model,
        fusion: fusion.report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_exact() -> PNarxModel {
        let y1 = FeatureDescriptor::linear(Variable::Output, 1);
        let y2 = FeatureDescriptor::linear(Variable::Output, 2);
        let u1 = FeatureDescriptor::linear(Variable::Input, 1);
        let u2 = FeatureDescriptor::linear(Variable::Input, 2);
        PNarxModel::new(
            vec![y1.clone(), y2.clone(), y2.product(&y2), y1.product(&u1), u1, u2],
            ToyNarxPlant::COEFFICIENTS.to_vec(),
            (2, 2),
        )
        .unwrap()
    }

    #[test]
    fn exact_toy_recursion_holds_fixed_point() {
        let op = solve_steady_state(&ToyNarxPlant::default(), 0.1).unwrap();
        let sim = simulate_pnarx(&toy_exact(), &vec![0.1; 300], &[op.y_s, op.y_s], 1.0).unwrap();
        assert!(sim.y().iter().all(|y| (y - 0.3146).abs() < 1e-3));
    }

    #[test]
    fn exact_toy_recursion_matches_plant() {
        let plant = ToyNarxPlant::default();
        let u = crate::signal::gen_prbs(200, 0.05, 0.2, 7, 3).unwrap();
        let truth = plant.simulate_toy(&u, [0.5, 0.5]).unwrap();
        for mode in [ValidationMode::FreeRun, ValidationMode::OneStep] {
            assert!(validate(&toy_exact(), &truth, mode).unwrap() < 1e-24);
        }
    }

    #[test]
    fn intercept_only_model_is_constant() {
        let m = PNarxModel::new(vec![FeatureDescriptor::intercept()], vec![1.7], (1, 1)).unwrap();
        let sim = simulate_pnarx(&m, &[0.0, 3.0, -1.0, 2.0], &[0.0], 1.0).unwrap();
        assert_eq!(&sim.y()[1..], &[1.7, 1.7, 1.7]);
    }

    #[test]
    fn linear_pnarx_equals_simulate_arx() {
        let op = OperatingPoint::new(0.4, 1.3).unwrap();
        let arx = ArxModel::new(vec![0.6, -0.2], vec![0.7, 0.25], 1, op).unwrap();
        let u = crate::signal::gen_prbs(120, 0.1, 0.4, 4, 9).unwrap();
        let reference = local_ident::simulate_arx(&arx, &u, 1.0).unwrap();
        let m = arx_to_pnarx(&arx).unwrap();
        let start = m.max_lag();
        // zero deviations before k = 0 equal steady-state history
        let mut u_full = vec![op.u_s; start];
        u_full.extend_from_slice(&u);
        let sim = simulate_pnarx(&m, &u_full, &vec![op.y_s; start], 1.0).unwrap();
        for (a, b) in sim.y()[start..].iter().zip(reference.y()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn mse_identities() {
        let y = [1.0, 2.0, -3.0];
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        let shifted: Vec<f64> = y.iter().map(|v| v + 0.25).collect();
        assert!((mse(&y, &shifted).unwrap() - 0.0625).abs() < 1e-15);
        assert!(mse(&y, &y[..2]).is_err());
    }

    #[test]
    fn short_history_rejected() {
        assert!(matches!(
            simulate_pnarx(&toy_exact(), &[0.1; 10], &[0.3], 1.0),
            Err(Error::TooShort { .. })
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let m = PNarxModel::new(vec![FeatureDescriptor::linear(Variable::Output, 1)], vec![2.0], (1, 1)).unwrap();
        assert!(matches!(
            simulate_pnarx(&m, &[0.0; 100], &[1.0], 1.0),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn fuse_needs_distinct_ops() {
        let op = OperatingPoint::new(0.1, 0.3146).unwrap();
        let m = ArxModel::new(vec![0.5], vec![1.0], 0, op).unwrap();
        let cfg = FusionConfig::new(3, 3, 0.5, 3, 100, 50);
        let exc = vec![vec![0.1; 100]; 2];
        assert!(matches!(
            fuse(&[m.clone(), m.clone()], &cfg, &exc),
            Err(Error::DegenerateOperatingPoints(_))
        ));
        assert!(fuse(&[m], &cfg, &exc[..1]).is_err());
    }

    #[test]
    fn case_names_round_trip() {
        for c in Case::ALL {
            assert_eq!(Case::parse(c.name()).unwrap(), c);
        }
        let err = Case::parse("bogus").unwrap_err().to_string();
        assert!(err.contains("toy") && err.contains("tank") && err.contains("hw"));
    }
}
