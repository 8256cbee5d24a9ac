use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use narx_fusion_core::fusion::{
    self, acceptance_checks, arx_to_pnarx, BenchmarkReport, BenchmarkSpec, Case, CasePlant, Check,
    PointEvaluation,
};
use narx_fusion_core::local_ident::{self, dominant_time_constant, ArxOrders, ExcitationSpec};
use narx_fusion_core::plants::{solve_steady_state, ConicalTankPlant, Plant};
use narx_fusion_core::signal::gen_step;
use narx_fusion_core::{ArxModel, OperatingPoint, PNarxModel, ValidationMode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{seed_override, RunConfig};
use crate::io::{csv_writer, fmt_num, read_json, read_series, write_json, write_series};
use crate::{Stage, StageResult};

/// `before:after@index`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSpec {
    pub before: f64,
    pub after: f64,
    pub at: usize,
}

impl FromStr for StepSpec {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("expected BEFORE:AFTER@INDEX, got {s:?}");
        let (levels, at) = s.split_once('@').ok_or_else(bad)?;
        let (before, after) = levels.split_once(':').ok_or_else(bad)?;
        Ok(StepSpec {
            before: before.trim().parse().map_err(|_| bad())?,
            after: after.trim().parse().map_err(|_| bad())?,
            at: at.trim().parse().map_err(|_| bad())?,
        })
    }
}

/// `u_s:y_s`
pub fn parse_op(s: &str) -> std::result::Result<OperatingPoint, String> {
    let bad = || format!("expected U_S:Y_S, got {s:?}");
    let (u, y) = s.split_once(':').ok_or_else(bad)?;
    let (u, y) = (u.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?);
    OperatingPoint::new(u, y).map_err(|e| e.to_string())
}

pub fn parse_case(s: &str) -> std::result::Result<Case, String> {
    Case::parse(s).map_err(|e| e.to_string())
}

pub struct SimulateOpts {
    pub plant: Case,
    pub step: Option<StepSpec>,
    pub constant: Option<f64>,
    pub n: usize,
    pub dt: Option<f64>,
    pub out: Option<PathBuf>,
}

fn plant_with_dt(case: Case, dt: Option<f64>) -> Result<CasePlant> {
    match (case, dt) {
        (Case::Tank, Some(dt)) => {
            let d = ConicalTankPlant::default();
            Ok(CasePlant::Tank(ConicalTankPlant::new(d.diameter, d.height, d.valve, dt)?))
        }
        (_, Some(dt)) if dt != 1.0 => bail!("--dt applies to the tank only; the {case} plant is discrete with dt = 1"),
        _ => Ok(case.plant()),
    }
}

pub fn simulate(o: SimulateOpts) -> StageResult<()> {
    let plant = plant_with_dt(o.plant, o.dt).stage("arguments")?;
    let u = match (o.step, o.constant) {
        (Some(s), None) => gen_step(o.n, s.before, s.after, s.at).stage("arguments")?,
        (None, Some(c)) => vec![c; o.n],
        _ => return Err(anyhow!("give exactly one of --step or --const")).stage("arguments"),
    };
    let start = solve_steady_state(&plant, u[0]).stage("steady state")?;
    let series = plant.simulate_from(start, &u).stage("simulate")?;
    write_series(o.out.as_deref(), &series).stage("io")?;
    let last_u = *u.last().unwrap_or(&u[0]);
    let end = solve_steady_state(&plant, last_u).stage("steady state")?;
    let summary = json!({
        "plant": o.plant.name(),
        "n": series.len(),
        "dt": series.dt(),
        "initial_steady_state": start,
        "final_u": last_u,
        "final_y": series.y().last(),
        "steady_state_y": end.y_s,
    });
    if o.out.is_some() {
        println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

pub struct IdentifyOpts {
    pub plant: Option<Case>,
    pub at: Vec<f64>,
    pub data: Option<PathBuf>,
    pub op: Option<OperatingPoint>,
    pub dt: f64,
    pub orders: ArxOrders,
    pub excitation: ExcitationSpec,
    pub out: Option<PathBuf>,
}

pub fn identify_local(o: IdentifyOpts) -> StageResult<()> {
    let models = match (o.plant, o.data) {
        (Some(case), None) => {
            if o.at.is_empty() {
                return Err(anyhow!("--plant needs --at with at least one grid coordinate")).stage("arguments");
            }
            let plant = case.plant();
            let ops = o
                .at
                .iter()
                .map(|&c| plant.operating_point(c))
                .collect::<narx_fusion_core::Result<Vec<_>>>()
                .stage("steady state")?;
            let mut excitation = o.excitation;
            if let Some(seed) = seed_override().stage("arguments")? {
                excitation.seed = seed;
            }
            local_ident::make_local_models(&plant, &ops, &excitation, o.orders).stage("identify")?
        }
        (None, Some(path)) => {
            let op = o
                .op
                .ok_or_else(|| anyhow!("--data needs --op U_S:Y_S"))
                .stage("arguments")?;
            let data = read_series(&path, o.dt).stage("io")?;
            let fit = local_ident::fit_arx(&data, op, o.orders.n_a, o.orders.n_b, o.orders.delay).stage("identify")?;
            eprintln!("residual norm {} over {} rows", fmt_num(fit.residual_norm), fit.rows);
            vec![fit.model]
        }
        _ => return Err(anyhow!("give exactly one of --plant or --data")).stage("arguments"),
    };
    for m in &models {
        eprintln!(
            "{}: a = {:?}, b = {:?}, dominant time constant {}",
            m.op(),
            m.a(),
            m.b(),
            fmt_num(dominant_time_constant(m, 1.0))
        );
    }
    write_json(o.out.as_deref(), &models).stage("io")
}

fn write_cv_csv(path: &Path, cv: &narx_fusion_core::sparse::CvReport) -> Result<()> {
    let mut w = csv_writer(Some(path))?;
    let mut header = vec!["lambda".to_string(), "mean_mse".into(), "std_mse".into()];
    header.extend((1..=cv.fold_mse.len()).map(|f| format!("fold_{f}")));
    w.write_record(&header)?;
    for i in 0..cv.lambdas.len() {
        let mut rec = vec![fmt_num(cv.lambdas[i]), fmt_num(cv.mean_mse[i]), fmt_num(cv.std_mse[i])];
        rec.extend(cv.fold_mse.iter().map(|f| fmt_num(f[i])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `k,u,y,<name>...`; predictions are blank during warm-up and after a
/// divergence.
fn write_trace(path: &Path, eval: &PointEvaluation, names: &[String]) -> Result<()> {
    let mut w = csv_writer(Some(path))?;
    let mut header = vec!["k".to_string(), "u".into(), "y".into()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for k in 0..eval.truth.len() {
        let mut rec = vec![k.to_string(), fmt_num(eval.truth.u()[k]), fmt_num(eval.truth.y()[k])];
        for p in &eval.predictions {
            rec.push(match (p, k.checked_sub(eval.start)) {
                (Some(p), Some(i)) => fmt_num(p[i]),
                _ => String::new(),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn fuse(config_path: &Path, out_dir: &Path) -> StageResult<()> {
    let cfg = RunConfig::load(config_path).stage("config")?;
    let plant = cfg.experiment.case.plant();
    let locals: Vec<ArxModel> = match &cfg.experiment.local_models {
        Some(p) => read_json(p).stage("io")?,
        None => {
            let ops = cfg
                .experiment
                .anchors
                .iter()
                .map(|&c| plant.operating_point(c))
                .collect::<narx_fusion_core::Result<Vec<_>>>()
                .stage("steady state")?;
            let orders = ArxOrders {
                n_a: cfg.fusion.n_a,
                n_b: cfg.fusion.n_b,
                delay: cfg.fusion.delay,
            };
            local_ident::make_local_models(&plant, &ops, &fusion::local_excitation(&cfg.fusion), orders)
                .stage("local models")?
        }
    };
    let ops: Vec<OperatingPoint> = locals.iter().map(|m| m.op()).collect();
    let excitation = fusion::fusion_excitation(&ops, &cfg.fusion).stage("excitation")?;
    let fused = fusion::fuse(&locals, &cfg.fusion, &excitation).stage("fusion")?;

    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))
        .stage("io")?;
    write_json(Some(&out_dir.join("model.json")), &fused.model).stage("io")?;
    write_json(Some(&out_dir.join("report.json")), &fused.report).stage("io")?;
    write_json(Some(&out_dir.join("local_models.json")), &locals).stage("io")?;
    write_cv_csv(&out_dir.join("cv.csv"), &fused.report.cv_curve).stage("io")?;

    let mut models = vec![fused.model.clone()];
    for m in &locals {
        models.push(arx_to_pnarx(m).stage("validation")?);
    }
    let mut names = vec!["fused".to_string()];
    names.extend((1..=locals.len()).map(|i| format!("local_{i}")));
    let test = cfg.validation();
    let evals = cfg
        .experiment
        .validate_at
        .par_iter()
        .map(|&c| fusion::evaluate_point(&plant, &models, c, &test, cfg.fusion.n_v, cfg.fusion.validation_mode))
        .collect::<narx_fusion_core::Result<Vec<_>>>()
        .stage("validation")?;

    let mut table = csv_writer(Some(&out_dir.join("validation.csv"))).stage("io")?;
    let mut header = vec!["op".to_string(), "u_s".into(), "y_s".into()];
    header.extend(names.iter().map(|n| format!("mse_{n}")));
    table.write_record(&header).stage("io")?;
    for (&c, eval) in cfg.experiment.validate_at.iter().zip(&evals) {
        let mut rec = vec![fmt_num(c), fmt_num(eval.op.u_s), fmt_num(eval.op.y_s)];
        rec.extend(eval.mse.iter().map(|m| fmt_num(*m)));
        table.write_record(&rec).stage("io")?;
        write_trace(&out_dir.join(format!("trace_{}.csv", fmt_num(c))), eval, &names).stage("io")?;
    }
    table.flush().stage("io")?;

    let r = &fused.report;
    println!("n_s = {}, lambda = {}, gamma = {}", r.n_s, fmt_num(r.lambda), r.gamma);
    println!("selected: {}", r.selected_features.join(", "));
    for (&c, eval) in cfg.experiment.validate_at.iter().zip(&evals) {
        let mses: Vec<String> = names.iter().zip(&eval.mse).map(|(n, m)| format!("{n} {}", fmt_num(*m))).collect();
        println!("op {}: {}", fmt_num(c), mses.join(", "));
    }
    println!("outputs in {}", out_dir.display());
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyModel {
    PNarx(PNarxModel),
    Arx(ArxModel),
    ArxList(Vec<ArxModel>),
}

pub struct ValidateOpts {
    pub model: PathBuf,
    pub data: PathBuf,
    pub mode: ValidationMode,
    pub dt: f64,
    pub start: Option<usize>,
    pub trace: Option<PathBuf>,
}

pub fn validate(o: ValidateOpts) -> StageResult<()> {
    let (models, list) = match read_json::<AnyModel>(&o.model).stage("io")? {
        AnyModel::PNarx(m) => (vec![m], false),
        AnyModel::Arx(m) => (vec![arx_to_pnarx(&m).stage("model")?], false),
        AnyModel::ArxList(ms) => (
            ms.iter().map(arx_to_pnarx).collect::<narx_fusion_core::Result<_>>().stage("model")?,
            true,
        ),
    };
    let truth = read_series(&o.data, o.dt).stage("io")?;
    let start = o
        .start
        .unwrap_or_else(|| models.iter().map(PNarxModel::max_lag).max().unwrap_or(0));
    let mut preds = Vec::with_capacity(models.len());
    let mut results = Vec::with_capacity(models.len());
    for model in &models {
        let pred = fusion::predict(model, &truth, o.mode, start).stage("validation")?;
        let mse = fusion::mse(&truth.y()[start..], &pred).stage("validation")?;
        results.push(json!({
            "mode": o.mode,
            "start": start,
            "samples": pred.len(),
            "mse": mse,
        }));
        preds.push(pred);
    }
    if let Some(path) = &o.trace {
        let mut w = csv_writer(Some(path)).stage("io")?;
        let mut header = vec!["k".to_string(), "u".into(), "y".into()];
        header.extend((1..=preds.len()).map(|i| format!("prediction_{i}")));
        w.write_record(&header).stage("io")?;
        for k in 0..truth.len() {
            let mut rec = vec![k.to_string(), fmt_num(truth.u()[k]), fmt_num(truth.y()[k])];
            rec.extend(preds.iter().map(|p| k.checked_sub(start).map(|i| fmt_num(p[i])).unwrap_or_default()));
            w.write_record(&rec).stage("io")?;
        }
        w.flush().stage("io")?;
    }
    let out = if list { serde_json::Value::Array(results) } else { results.remove(0) };
    println!("{}", serde_json::to_string_pretty(&out).unwrap());
    Ok(())
}

#[derive(Serialize)]
struct BenchmarkOutput<'a> {
    spec: &'a BenchmarkSpec,
    report: &'a BenchmarkReport,
    checks: &'a [Check],
}

pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    let (locals, fused) = fusion::benchmark_fit(spec)?;
    let rows = spec
        .grid
        .par_iter()
        .map(|&c| fusion::benchmark_point(spec, &fused.model, &locals, c).map(|(row, _)| row))
        .collect::<narx_fusion_core::Result<Vec<_>>>()?;
    Ok(BenchmarkReport {
        case: spec.case,
        rows,
        local_models: locals,
        model: fused.model,
        fusion: fused.report,
    })
}

pub fn benchmark(case: Case, out_dir: &Path) -> StageResult<()> {
    let mut spec = BenchmarkSpec::reference(case);
    if let Some(seed) = seed_override().stage("config")? {
        spec.config.seed = seed;
    }
    let report = run_benchmark(&spec).stage("benchmark")?;
    let checks = acceptance_checks(&report);

    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))
        .stage("io")?;
    let csv_path = out_dir.join(format!("benchmark_{case}.csv"));
    let mut w = csv_writer(Some(&csv_path)).stage("io")?;
    w.write_record(["op", "mse_mf", "mse_m1", "mse_m2", "ratio1", "ratio2"]).stage("io")?;
    for r in &report.rows {
        w.write_record([r.op, r.mse_mf, r.mse_m1, r.mse_m2, r.ratio1, r.ratio2].map(fmt_num))
            .stage("io")?;
    }
    w.flush().stage("io")?;
    let output = BenchmarkOutput {
        spec: &spec,
        report: &report,
        checks: &checks,
    };
    write_json(Some(&out_dir.join(format!("benchmark_{case}.json"))), &output).stage("io")?;

    println!("{case}: n_s = {}, lambda = {}", report.fusion.n_s, fmt_num(report.fusion.lambda));
    println!("{:>8} {:>12} {:>12} {:>12} {:>12} {:>12}", "op", "mse_mf", "mse_m1", "mse_m2", "ratio1", "ratio2");
    for r in &report.rows {
        println!(
            "{:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4} {:>12.4}",
            r.op, r.mse_mf, r.mse_m1, r.mse_m2, r.ratio1, r.ratio2
        );
    }
    for c in &checks {
        println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("table: {}", csv_path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_spec_parses() {
        let s: StepSpec = "2.236:3.162@100".parse().unwrap();
        assert_eq!(
            s,
            StepSpec {
                before: 2.236,
                after: 3.162,
                at: 100
            }
        );
        assert!("2.236-3.162@100".parse::<StepSpec>().is_err());
        assert!("1:2@x".parse::<StepSpec>().is_err());
    }

    #[test]
    fn op_parses() {
        assert_eq!(parse_op("0.1:0.3146").unwrap(), OperatingPoint::new(0.1, 0.3146).unwrap());
        assert!(parse_op("0.1").is_err());
    }
}
