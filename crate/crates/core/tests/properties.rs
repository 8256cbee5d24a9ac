mod common;

use std::sync::OnceLock;

use common::*;
use nalgebra::{DMatrix, DVector};
use narx_fusion_core::fusion::{self, BenchmarkSpec, Case};
use narx_fusion_core::lifting::{self, evaluate_features, LagHistory, RegressionProblem};
use narx_fusion_core::sparse::{self, CdOptions, ColumnRole};
use narx_fusion_core::{FeatureDescriptor, FusionConfig, PNarxModel, Term, TimeSeries, Variable};
use proptest::prelude::*;

fn with_intercept(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = z.clone().insert_column(0, 1.0);
    out.column_mut(0).fill(1.0);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn objective_never_increases_per_sweep(
        seed in 0u64..10_000,
        n in 12usize..50,
        p in 2usize..10,
        frac in 0.001f64..1.0,
        gamma in 0.05f64..0.95,
    ) {
        let (z, y) = random_problem(seed, n, p);
        let roles = vec![ColumnRole::Penalized; p];
        let lambda = frac * sparse::lambda_max(&y, &z, &roles, gamma).unwrap();
        let opts = CdOptions { tol: 1e-10, max_sweeps: 100_000, record_objective: true };
        let fit = sparse::coordinate_descent(&y, &z, &roles, lambda, gamma, &opts, None).unwrap();
        prop_assert!(fit.objective_trace.len() >= 2);
        for w in fit.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn kkt_conditions_at_convergence(
        seed in 0u64..10_000,
        n in 12usize..50,
        p in 2usize..10,
        frac in 0.001f64..1.2,
        gamma in 0.05f64..0.95,
    ) {
        let (z, y) = random_problem(seed, n, p);
        let roles = vec![ColumnRole::Penalized; p];
        let lambda = frac * sparse::lambda_max(&y, &z, &roles, gamma).unwrap();
        let opts = tight();
        let fit = enet(&z, &y, lambda, gamma, &opts);
        prop_assert!(kkt_residual(&z, &y, &fit.beta, lambda, gamma) <= 10.0 * opts.tol);
        if frac >= 1.0 {
            prop_assert!(fit.beta.iter().all(|b| *b == 0.0));
        }
    }

    #[test]
    fn refit_never_loses_to_shrunken_coefficients(
        seed in 0u64..10_000,
        n in 20usize..60,
        p in 2usize..10,
        frac in 0.01f64..0.9,
        gamma in 0.05f64..0.95,
    ) {
        let (z0, y) = random_problem(seed, n, p);
        let z = with_intercept(&z0);
        let std = sparse::standardize(&z, Some(0));
        let lambda = frac * sparse::lambda_max(&y, &std.z, &std.roles, gamma).unwrap();
        let fit = sparse::coordinate_descent(&y, &std.z, &std.roles, lambda, gamma, &tight(), None).unwrap();
        let selected = match sparse::select_features(&fit, &std.roles, 1e-9) {
            Ok(s) => s,
            Err(_) => return Ok(()),
        };
        let raw = std.to_raw(&fit.beta);
        let zf = z.select_columns(&selected);
        let shrunk = DVector::from_iterator(selected.len(), selected.iter().map(|&j| raw[j]));
        let rss_shrunk = (&y - &zf * shrunk).norm_squared();
        let refit = sparse::refit_ols(&y, &z, &selected).unwrap();
        let rss_refit = (&y - &zf * DVector::from_row_slice(&refit.beta_f)).norm_squared();
        prop_assert!((refit.rss - rss_refit).abs() <= 1e-9 * rss_refit.max(1.0));
        prop_assert!(rss_refit <= rss_shrunk * (1.0 + 1e-12) + 1e-12, "{rss_refit} > {rss_shrunk}");
    }

    #[test]
    fn lifted_rows_match_feature_evaluation(
        u in prop::collection::vec(-2.0f64..2.0, 12..30),
        n_y in 1usize..4,
        n_u in 1usize..4,
        degree in 1u32..4,
    ) {
        let y: Vec<f64> = u.iter().enumerate().map(|(k, v)| (k as f64 * 0.37).sin() + 0.5 * v).collect();
        let data = TimeSeries::new(u.clone(), y.clone(), 1.0).unwrap();
        let block = lifting::build_block(&data, n_y, n_u, degree).unwrap();
        let start = n_y.max(n_u);
        prop_assert_eq!(block.z.nrows(), u.len() - start);
        prop_assert_eq!(block.z.ncols(), 1 + lifting::feature_count(n_y + n_u, degree));
        for r in 0..block.z.nrows() {
            let k = start + r;
            let ys: Vec<f64> = (1..=n_y).map(|l| y[k - l]).collect();
            let us: Vec<f64> = (1..=n_u).map(|l| u[k - l]).collect();
            let vals = evaluate_features(&block.descriptors, &LagHistory { y: &ys, u: &us }).unwrap();
            prop_assert_eq!(block.y[r], y[k]);
            for (c, v) in vals.iter().enumerate() {
                prop_assert!((block.z[(r, c)] - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn descriptors_are_canonical(
        raw in prop::collection::vec((any::<bool>(), 1usize..5, 1u32..4), 1..5),
        seed in any::<u64>(),
    ) {
        let terms: Vec<Term> = raw
            .iter()
            .map(|&(out, lag, e)| Term::new(if out { Variable::Output } else { Variable::Input }, lag, e))
            .collect();
        let mut shuffled = terms.clone();
        let len = shuffled.len();
        shuffled.rotate_left((seed as usize) % len);
        shuffled.reverse();
        let a = FeatureDescriptor::monomial(terms.clone()).unwrap();
        let b = FeatureDescriptor::monomial(shuffled).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(FeatureDescriptor::parse(&a.to_string()).unwrap(), a.clone());
        let json = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<FeatureDescriptor>(&json).unwrap(), a.clone());
        let total: u32 = raw.iter().map(|t| t.2).sum();
        prop_assert_eq!(a.degree(), total);
        // products commute and the intercept is the identity
        let single = FeatureDescriptor::monomial(terms[..1].to_vec()).unwrap();
        prop_assert_eq!(a.product(&single), single.product(&a));
        prop_assert_eq!(a.product(&FeatureDescriptor::intercept()), a);
    }

    #[test]
    fn model_json_round_trip(coefs in prop::collection::vec(-10.0f64..10.0, 1..8)) {
        let dict = lifting::lifted_descriptors(&lifting::linear_descriptors(2, 2), 2);
        let features = dict[..coefs.len()].to_vec();
        let model = PNarxModel::new(features, coefs, (2, 2)).unwrap();
        let text = serde_json::to_string(&model).unwrap();
        prop_assert_eq!(serde_json::from_str::<PNarxModel>(&text).unwrap(), model);
    }
}

fn toy_reference() -> &'static (FusionConfig, RegressionProblem, Vec<FeatureDescriptor>) {
    static CELL: OnceLock<(FusionConfig, RegressionProblem, Vec<FeatureDescriptor>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let config = BenchmarkSpec::reference(Case::Toy).config;
        let problem = toy_problem(&config);
        let sel = fusion::select_on_problem(&problem, &config).unwrap();
        let chosen = sel.selected.iter().map(|&j| problem.descriptors[j].clone()).collect();
        (config, problem, chosen)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn selection_ignores_column_units(column in 1usize..28, log_scale in -3.0f64..3.0) {
        let (config, problem, reference) = toy_reference();
        let mut scaled = problem.clone();
        let c = 10f64.powf(log_scale);
        scaled.z.column_mut(column).scale_mut(c);
        let sel = fusion::select_on_problem(&scaled, config).unwrap();
        let chosen: Vec<FeatureDescriptor> = sel.selected.iter().map(|&j| scaled.descriptors[j].clone()).collect();
        prop_assert_eq!(&chosen, reference);
    }
}
