mod common;

use common::*;
use narx_fusion_core::lifting::{self, feature_count};
use narx_fusion_core::plants::{solve_steady_state, ConicalTankPlant, Plant, ToyNarxPlant};
use narx_fusion_core::sparse::{self, ColumnRole};

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn feature_counts() {
    assert_eq!(feature_count(6, 2), 27);
    assert_eq!(feature_count(4, 2), 14);
    for n_l in 1..8 {
        for d in 1..4 {
            assert_eq!(feature_count(n_l, d), binomial(n_l + d as usize, d as usize) - 1);
        }
    }
    let block = lifting::build_block(&toy_data(1, 50), 3, 3, 2).unwrap();
    assert_eq!(block.z.ncols(), 28);
    assert_eq!(block.descriptors[0].to_string(), "1");
}

/// Positive root of `0.5 y² + (0.25 - 0.1 u) y - 1.25 u = 0`, the toy
/// recursion with `y[k] = y[k-1] = y[k-2] = y`.
fn toy_fixed_point(u: f64) -> f64 {
    let b = 0.25 - 0.1 * u;
    -b + (b * b + 2.5 * u).sqrt()
}

#[test]
fn toy_steady_states() {
    let plant = ToyNarxPlant::default();
    for (u, expected) in [(0.1, 0.3146), (0.3, 0.6735)] {
        let op = solve_steady_state(&plant, u).unwrap();
        assert!((op.y_s - expected).abs() < 5e-4, "u = {u}: {}", op.y_s);
        assert!((op.y_s - toy_fixed_point(u)).abs() < 1e-12);
    }
}

#[test]
fn tank_steady_state_inverts_valve_law() {
    let tank = ConicalTankPlant::default();
    for h in [4.0, 5.0, 7.5, 8.5, 10.0, 11.0] {
        let q = tank.operating_point_at_level(h).unwrap().u_s;
        assert!((q / tank.valve - h.sqrt()).abs() < 1e-12);
        let op = solve_steady_state(&tank, q).unwrap();
        let inverted = (q / tank.valve).powi(2);
        assert!((op.y_s - inverted).abs() < 1e-8, "h = {h}: {}", op.y_s);
        assert!((op.y_s - h).abs() < 1e-8);
    }
}

#[test]
fn cd_at_zero_lambda_is_ols() {
    for seed in 0..20 {
        let (z, y) = random_problem(seed, 50, 10);
        let fit = enet(&z, &y, 0.0, 0.5, &tight());
        let ols = normal_equations(&z, &y, 0.0);
        let d = max_abs_diff(&fit.beta, ols.as_slice());
        assert!(d < 1e-6, "seed {seed}: {d}");
    }
}

#[test]
fn cd_with_vanishing_l1_weight_is_ridge() {
    let gamma = 1e-6;
    for seed in 0..20 {
        let (z, y) = random_problem(100 + seed, 40, 8);
        let lambda = 5.0;
        let fit = enet(&z, &y, lambda, gamma, &tight());
        // ½‖y - Zβ‖² + λ(1-γ)/2 ‖β‖² ⇒ (ZᵀZ + λ(1-γ)I)β = Zᵀy, up to the
        // O(λγ) soft threshold
        let ridge = normal_equations(&z, &y, lambda);
        let d = max_abs_diff(&fit.beta, ridge.as_slice());
        assert!(d < 1e-4, "seed {seed}: {d}");
    }
}

#[test]
fn kkt_holds_at_convergence() {
    let opts = tight();
    for seed in 0..20 {
        let (z, y) = random_problem(200 + seed, 10 + 2 * seed as usize, 10);
        let roles = vec![ColumnRole::Penalized; 10];
        let lmax = sparse::lambda_max(&y, &z, &roles, 0.5).unwrap();
        for frac in [0.5, 0.1, 0.01] {
            let lambda = frac * lmax;
            let fit = enet(&z, &y, lambda, 0.5, &opts);
            let r = kkt_residual(&z, &y, &fit.beta, lambda, 0.5);
            assert!(r <= 10.0 * opts.tol, "seed {seed} frac {frac}: {r}");
        }
    }
}

#[test]
fn toy_true_support_is_recovered() {
    let beta = toy_support_refit(7, 600);
    let d = max_abs_diff(&beta, &ToyNarxPlant::COEFFICIENTS);
    assert!(d < 1e-6, "{beta:?}");
}

#[test]
fn toy_fusion_is_bit_reproducible() {
    let a = toy_fusion_bytes(0);
    let b = toy_fusion_bytes(0);
    assert!(a == b, "two runs with seed 0 differ");
    let c = toy_fusion_bytes(1);
    assert!(a.1 != c.1, "seed has no effect");
}

#[test]
fn toy_plant_matches_its_recursion() {
    let data = toy_data(3, 30);
    let (u, y) = (data.u(), data.y());
    let [c1, c2, c3, c4, c5, c6] = ToyNarxPlant::COEFFICIENTS;
    for k in 2..30 {
        let expected = c1 * y[k - 1] + c2 * y[k - 2] + c3 * y[k - 2] * y[k - 2] + c4 * y[k - 1] * u[k - 1] + c5 * u[k - 1] + c6 * u[k - 2];
        assert!((y[k] - expected).abs() < 1e-15);
    }
    assert_eq!(ToyNarxPlant::default().name(), "toy");
}
