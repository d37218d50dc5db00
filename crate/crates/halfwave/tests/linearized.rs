use std::sync::OnceLock;

use halfwave::ground_state::{solve_ground_state, GroundState};
use halfwave::linearized::{kernel_report, Kind, LinearizedOperator};
use halfwave::{HwError, RadialGrid, Sector, SectorField};
use num_complex::Complex64;
use proptest::prelude::*;

fn default_gs() -> &'static (RadialGrid, GroundState) {
    static CELL: OnceLock<(RadialGrid, GroundState)> = OnceLock::new();
    CELL.get_or_init(|| {
        let g = RadialGrid::new(4096, 200.0).unwrap();
        let q = solve_ground_state(&g, 1e-11, 4000).unwrap();
        (g, q)
    })
}

fn small_gs() -> &'static (RadialGrid, GroundState) {
    static CELL: OnceLock<(RadialGrid, GroundState)> = OnceLock::new();
    CELL.get_or_init(|| {
        let g = RadialGrid::new(512, 40.0).unwrap();
        let q = solve_ground_state(&g, 1e-11, 4000).unwrap();
        (g, q)
    })
}

fn bump(g: &RadialGrid, sector: Sector, c: f64, w: f64) -> Vec<f64> {
    g.r()
        .iter()
        .map(|&r| {
            let e = (-((r - c) / w).powi(2)).exp() + (-((r + c) / w).powi(2)).exp();
            match sector {
                Sector::L0 => e,
                Sector::L1 => r * e,
            }
        })
        .collect()
}

#[test]
fn ground_state_spans_the_kernel_of_l_minus() {
    let (g, q) = default_gs();
    let rep = kernel_report(g, q, false);
    assert!(rep.minus_q <= 1e-9, "{}", rep.minus_q);
}

#[test]
fn scaling_identity_and_translation_kernel() {
    // Both identities are resolution-limited on the default mesh; the ℓ = 1 kernel
    // reaches its target once h is halved.
    let (g, q) = default_gs();
    let rep = kernel_report(g, q, true);
    assert!(rep.plus_lambda_q <= 2e-5, "{}", rep.plus_lambda_q);
    assert!(rep.plus_grad_q <= 1e-6, "{}", rep.plus_grad_q);
    let fine = RadialGrid::new(8191, 200.0).unwrap();
    let qf = solve_ground_state(&fine, 1e-11, 4000).unwrap();
    let rep = kernel_report(&fine, &qf, true);
    assert!(rep.plus_grad_q <= 1e-7, "{}", rep.plus_grad_q);
}

#[test]
fn apply_rejects_sector_mismatch() {
    let (g, q) = small_gs();
    let l = LinearizedOperator::new(g, q, Kind::Plus, Sector::L0);
    let f = SectorField::zeros(Sector::L1, g.n());
    assert!(matches!(l.apply(&f), Err(HwError::Config(_))));
}

#[test]
fn complex_application_splits_into_real_parts() {
    let (g, q) = small_gs();
    let l = LinearizedOperator::new(g, q, Kind::Minus, Sector::L0);
    let a = bump(g, Sector::L0, 1.0, 1.5);
    let b = bump(g, Sector::L0, 3.0, 0.8);
    let z: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| Complex64::new(*x, *y)).collect();
    let lz = l.apply_complex(&z);
    let (la, lb) = (l.apply_real(&a), l.apply_real(&b));
    for j in 0..g.n() {
        assert!((lz[j].re - la[j]).abs() < 1e-13 && (lz[j].im - lb[j]).abs() < 1e-13);
    }
}

#[test]
fn minus_solve_reproduces_generator_image() {
    let (g, q) = default_gs();
    let l = LinearizedOperator::new(g, q, Kind::Minus, Sector::L0);
    let lq = g.lambda_op_real(Sector::L0, &q.q);
    let s = l.solve_constrained(&lq, &[]).unwrap();
    let f = &s.solution;
    let nf = g.norm_real(Sector::L0, f);
    assert!(g.inner_real(Sector::L0, f, &q.q).abs() <= 1e-9 * nf * g.norm_real(Sector::L0, &q.q));
    let mut r = l.apply_real(f);
    r.iter_mut().zip(&lq).for_each(|(r, g)| *r -= g);
    assert!(g.norm_real(Sector::L0, &r) <= 1e-8 * g.norm_real(Sector::L0, &lq));
}

#[test]
fn minus_solve_on_odd_sector() {
    let (g, q) = default_gs();
    let l = LinearizedOperator::new(g, q, Kind::Minus, Sector::L1);
    let rhs: Vec<f64> = g.radial_derivative_real(Sector::L0, &q.q).iter().map(|v| -v).collect();
    let s = l.solve(&rhs).unwrap();
    let mut r = l.apply_real(&s.solution);
    r.iter_mut().zip(&rhs).for_each(|(r, g)| *r -= g);
    assert!(g.norm_real(Sector::L1, &r) <= 1e-8 * g.norm_real(Sector::L1, &rhs));
}

#[test]
fn kernel_right_hand_side_is_rejected() {
    let (g, q) = small_gs();
    let l = LinearizedOperator::new(g, q, Kind::Minus, Sector::L0);
    match l.solve(&q.q) {
        Err(HwError::Solvability { inner, .. }) => assert!(inner > 0.99),
        other => panic!("expected solvability error, got {:?}", other.map(|s| s.residual)),
    }
}

#[test]
fn solution_is_stable_under_grid_doubling() {
    let solve = |n: usize| {
        let g = RadialGrid::new(n, 200.0).unwrap();
        let q = solve_ground_state(&g, 1e-11, 4000).unwrap();
        let l = LinearizedOperator::new(&g, &q, Kind::Minus, Sector::L0);
        let lq = g.lambda_op_real(Sector::L0, &q.q);
        let f = l.solve(&lq).unwrap().solution;
        let probe: Vec<f64> = (1..40).map(|j| 0.25 * j as f64).collect();
        let vals: Vec<f64> = g
            .eval_l0(&halfwave::grid::to_complex(&f), &probe)
            .iter()
            .map(|z| z.re)
            .collect();
        (vals, g.norm_real(Sector::L0, &f))
    };
    let (a, na) = solve(4095);
    let (b, _) = solve(8191);
    let d = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let peak = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
    assert!(d <= 1e-7 * peak, "doubling changed S by {d} (peak {peak}, norm {na})");
}

#[test]
fn minus_ground_eigenvalue_is_the_kernel() {
    let (g, q) = default_gs();
    let l = LinearizedOperator::new(g, q, Kind::Minus, Sector::L0);
    let e = l.min_eigenvalue_projected(&[]).unwrap();
    assert!(e.value.abs() <= 1e-6, "{}", e.value);
    let nq = g.norm_real(Sector::L0, &q.q);
    let overlap = g.inner_real(Sector::L0, &e.vector, &q.q).abs() / nq;
    assert!(overlap >= 1.0 - 1e-6, "{overlap}");
}

#[test]
fn constrained_spectra_are_positive_and_plus_has_one_negative_direction() {
    let (g, q) = default_gs();
    let lm = LinearizedOperator::new(g, q, Kind::Minus, Sector::L0);
    let c0 = lm.min_eigenvalue_projected(&[q.q.clone()]).unwrap().value;
    assert!(c0 > 0.5, "{c0}");
    let lp = LinearizedOperator::new(g, q, Kind::Plus, Sector::L0);
    let neg = lp.min_eigenvalue_projected(&[]).unwrap();
    assert!(neg.value < -1.0, "{}", neg.value);
    let next = lp.min_eigenvalue_projected(&[neg.vector.clone()]).unwrap().value;
    assert!(next > 0.0, "{next}");
}

#[test]
fn lanczos_agrees_with_dense_oracle() {
    let (g, q) = small_gs();
    for kind in [Kind::Plus, Kind::Minus] {
        let l = LinearizedOperator::new(g, q, kind, Sector::L0);
        for cons in [vec![], vec![q.q.clone()]] {
            let lz = l.min_eigenvalue_projected(&cons).unwrap().value;
            let dense = l.dense_min_eigenvalue(&cons).unwrap();
            assert!((lz - dense).abs() <= 1e-6, "{kind:?}: {lz} vs {dense}");
        }
    }
}

#[test]
fn dense_oracle_refuses_large_grids() {
    let (g, q) = default_gs();
    let l = LinearizedOperator::new(g, q, Kind::Minus, Sector::L0);
    assert!(l.dense_min_eigenvalue(&[]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_are_weighted_symmetric(
        c1 in 0.0f64..6.0, w1 in 0.5f64..3.0, c2 in 0.0f64..6.0, w2 in 0.5f64..3.0,
        plus in any::<bool>(), odd in any::<bool>(),
    ) {
        let (g, q) = small_gs();
        let sector = if odd { Sector::L1 } else { Sector::L0 };
        let kind = if plus { Kind::Plus } else { Kind::Minus };
        let l = LinearizedOperator::new(g, q, kind, sector);
        let f = bump(g, sector, c1, w1);
        let h = bump(g, sector, c2, w2);
        let lhs = g.inner_real(sector, &l.apply_real(&f), &h);
        let rhs = g.inner_real(sector, &f, &l.apply_real(&h));
        let scale = g.norm_real(sector, &f) * g.norm_real(sector, &h);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * scale, "{} vs {}", lhs, rhs);
    }
}
