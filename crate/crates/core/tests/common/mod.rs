//! Independent oracles shared by the property, oracle and acceptance targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use narx_fusion_core::fusion::{self, Case, Fusion};
use narx_fusion_core::lifting::{self, RegressionProblem};
use narx_fusion_core::local_ident::{self, ArxOrders};
use narx_fusion_core::plants::{solve_steady_state, ToyNarxPlant};
use narx_fusion_core::sparse::{self, CdOptions, ColumnRole, ElasticNetFit};
use narx_fusion_core::{FeatureDescriptor, FusionConfig};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

/// Gaussian design with a sparse linear truth plus noise.
pub fn random_problem(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let z = DMatrix::from_fn(n, p, |_, _| draw());
    let w = DVector::from_fn(p, |j, _| if j % 3 == 0 { 1.0 + j as f64 } else { 0.0 });
    let noise = DVector::from_fn(n, |_, _| 0.1 * draw());
    let y = &z * w + noise;
    (z, y)
}

/// `(ZᵀZ + ridge·I)⁻¹ Zᵀy` by Cholesky on the normal equations.
pub fn normal_equations(z: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> DVector<f64> {
    let p = z.ncols();
    let a = z.transpose() * z + DMatrix::identity(p, p) * ridge;
    a.cholesky().expect("normal equations are positive definite").solve(&(z.transpose() * y))
}

/// Largest KKT residual for an all-penalized problem, recomputed from the
/// raw data.
pub fn kkt_residual(z: &DMatrix<f64>, y: &DVector<f64>, beta: &[f64], lambda: f64, gamma: f64) -> f64 {
    let b = DVector::from_row_slice(beta);
    let rho = z.transpose() * (y - z * &b);
    (0..beta.len())
        .map(|j| {
            let g = rho[j] - lambda * (1.0 - gamma) * beta[j];
            if beta[j] == 0.0 {
                (g.abs() - lambda * gamma).max(0.0)
            } else {
                (g - lambda * gamma * beta[j].signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

pub fn tight() -> CdOptions {
    CdOptions {
        tol: 1e-12,
        max_sweeps: 1_000_000,
        record_objective: false,
    }
}

pub fn enet(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, gamma: f64, opts: &CdOptions) -> ElasticNetFit {
    let roles = vec![ColumnRole::Penalized; z.ncols()];
    let fit = sparse::coordinate_descent(y, z, &roles, lambda, gamma, opts, None).unwrap();
    assert!(fit.converged, "CD did not converge in {} sweeps", fit.n_iter);
    fit
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Noise-free toy-plant data under a uniform random input on `[0, 0.4]`.
pub fn toy_data(seed: u64, n: usize) -> narx_fusion_core::TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new(0.0, 0.4).unwrap();
    let u: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let op = solve_steady_state(&ToyNarxPlant::default(), 0.2).unwrap();
    ToyNarxPlant::default().simulate_toy(&u, [op.y_s, op.y_s]).unwrap()
}

/// Monomials of the toy plant, in the order of `ToyNarxPlant::COEFFICIENTS`.
pub const TOY_SUPPORT: [&str; 6] = ["y[k-1]", "y[k-2]", "y[k-2]^2", "y[k-1]*u[k-1]", "u[k-1]", "u[k-2]"];

/// OLS on the true toy support from the full lifted dictionary.
pub fn toy_support_refit(seed: u64, n: usize) -> Vec<f64> {
    let data = toy_data(seed, n);
    let block = lifting::build_block(&data, 3, 3, 2).unwrap();
    let cols: Vec<usize> = TOY_SUPPORT
        .iter()
        .map(|s| {
            let f = FeatureDescriptor::parse(s).unwrap();
            block.descriptors.iter().position(|d| *d == f).unwrap()
        })
        .collect();
    sparse::refit_ols(&block.y, &block.z, &cols).unwrap().beta_f
}

/// Stacked regression of the toy reference case (local models, fusion
/// excitation, lifting), as seen by the selection stage.
pub fn toy_problem(config: &FusionConfig) -> RegressionProblem {
    let plant = Case::Toy.plant();
    let ops: Vec<_> = [0.1, 0.3].iter().map(|&u| plant.operating_point(u).unwrap()).collect();
    let orders = ArxOrders {
        n_a: config.n_a,
        n_b: config.n_b,
        delay: config.delay,
    };
    let locals = local_ident::make_local_models(&plant, &ops, &fusion::local_excitation(config), orders).unwrap();
    let excitation = fusion::fusion_excitation(&ops, config).unwrap();
    let blocks: Vec<_> = locals
        .iter()
        .zip(&excitation)
        .map(|(m, u)| {
            let data = local_ident::simulate_arx(m, u, 1.0).unwrap();
            lifting::build_block(&data, config.n_y, config.n_u, config.degree).unwrap()
        })
        .collect();
    lifting::stack(&blocks).unwrap()
}

/// Serialized model and report of one toy fusion run.
pub fn toy_fusion_bytes(seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut spec = fusion::BenchmarkSpec::reference(Case::Toy);
    spec.config.seed = seed;
    let (_, Fusion { model, report, .. }) = fusion::benchmark_fit(&spec).unwrap();
    (serde_json::to_vec(&model).unwrap(), serde_json::to_vec(&report).unwrap())
}
