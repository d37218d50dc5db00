use std::sync::OnceLock;

use halfwave::diagnostics::*;
use halfwave::ground_state::{solve_ground_state, GroundState};
use halfwave::linalg::Projector;
use halfwave::linearized::{Kind, LinearizedOperator};
use halfwave::profile::{build_profile, ProfileOptions, ProfileSet};
use halfwave::stats::linear_fit;
use halfwave::{HwError, RadialGrid, Sector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Fixture {
    grid: RadialGrid,
    gs: GroundState,
    set: ProfileSet,
}

fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = RadialGrid::new(2047, 200.0).unwrap();
        let gs = solve_ground_state(&grid, 1e-11, 4000).unwrap();
        let opts = ProfileOptions {
            beta_orders: false,
            ..Default::default()
        };
        let set = build_profile(&grid, &gs, &opts).unwrap();
        Fixture { grid, gs, set }
    })
}

fn rule() -> &'static SRule {
    static CELL: OnceLock<SRule> = OnceLock::new();
    CELL.get_or_init(SRule::default)
}

const AS: [f64; 4] = [8.0, 16.0, 32.0, 64.0];

#[test]
fn cutoff_matches_its_outer_pieces() {
    let c = Cutoff::new().unwrap();
    assert_eq!(c.dphi(1.0), 1.0);
    assert!((c.dphi(2.0) - (3.0 - (-2.0f64).exp())).abs() <= 1e-14);
    assert!((c.dphi(2.0) - 2.864665).abs() <= 1e-6);
    // value and first two derivatives continue across both joints
    for x in [1.0, 2.0] {
        let (lo, hi) = (c.derivs(x - 1e-9), c.derivs(x + 1e-9));
        for k in 0..3 {
            assert!((lo[k] - hi[k]).abs() <= 1e-7, "ψ^({k}) jumps at {x}");
        }
    }
    for i in 0..=10_000 {
        let x = 4.0 * i as f64 / 10_000.0;
        assert!(c.derivs(x)[1] >= 0.0);
    }
}

#[test]
fn cutoff_laplacian_is_three_on_the_core() {
    let c = Cutoff::new().unwrap();
    for x in [0.01, 0.3, 0.99, 1.0] {
        assert_eq!(c.laplacian(x), 3.0);
        assert_eq!(c.bilaplacian(x), 0.0);
    }
    // φ from quadrature: φ(1) = 1/2 and φ' recovered by differencing
    assert!((c.phi(1.0) - 0.5).abs() <= 1e-14);
    for x in [0.5, 1.5, 2.5, 6.0] {
        let fd = (c.phi(x + 1e-5) - c.phi(x - 1e-5)) / 2e-5;
        assert!((fd - c.dphi(x)).abs() <= 1e-8, "{x}");
    }
    // radial Laplacian ψ' + 2ψ/r against a direct difference of r²ψ
    for x in [1.3, 1.8, 3.0] {
        let h = 1e-5;
        let g = |t: f64| t * t * c.dphi(t);
        let fd = (g(x + h) - g(x - h)) / (2.0 * h) / (x * x);
        assert!((fd - c.laplacian(x)).abs() <= 1e-7);
    }
}

#[test]
fn cutoff_family_scales_with_a() {
    let g = RadialGrid::new(511, 100.0).unwrap();
    let fam = build_cutoff(&g, 8.0).unwrap();
    for (j, &r) in g.r().iter().enumerate() {
        if r <= 8.0 {
            assert!((fam.grad[j] - r).abs() <= 1e-12);
            assert_eq!(fam.laplacian[j], 3.0);
        }
    }
    assert!(matches!(build_cutoff(&g, 0.0), Err(HwError::Domain(_))));
}

#[test]
fn smoothing_identity_on_a_field_battery() {
    let g = RadialGrid::new(1023, 100.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let worst = (0..20)
        .map(|_| identity_a4(&g, &random_field(&g, &mut rng), rule()).relative_error)
        .fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
}

#[test]
fn minus_form_of_ground_state_tends_to_zero() {
    // (L₋Q, Q) = 0; the localized form only differs through Δφ_A/3 − 1, supported
    // where Q is already small.
    let Fixture { grid, gs, .. } = fixture();
    let q2 = grid.norm_real(Sector::L0, &gs.q).powi(2);
    let vals: Vec<f64> = AS
        .iter()
        .map(|&a| {
            quadratic_form(grid, gs, &gs.q, FormKind::Minus, CoefficientMode::Consistent, Some(a), rule()).unwrap()
        })
        .collect();
    assert!(vals[3].abs() <= 0.05 * q2);
    assert!(vals[3].abs() <= 1e-6 * q2, "{vals:?}");
    // Cauchy differences shrink monotonically
    let diffs: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(diffs.windows(2).all(|d| d[1] < d[0]), "{diffs:?}");
}

#[test]
fn zero_field_has_zero_form() {
    let Fixture { grid, gs, .. } = fixture();
    let z = vec![0.0; grid.n()];
    for kind in [FormKind::Plus, FormKind::Minus] {
        let v = quadratic_form(grid, gs, &z, kind, CoefficientMode::Printed, Some(16.0), rule()).unwrap();
        assert_eq!(v, 0.0);
    }
}

#[test]
fn form_value_agrees_with_operator() {
    let Fixture { grid, gs, .. } = fixture();
    let f: Vec<f64> = grid.r().iter().map(|r| (-(r - 1.0).powi(2) / 3.0).exp()).collect();
    for kind in [FormKind::Plus, FormKind::Minus] {
        let v = quadratic_form(grid, gs, &f, kind, CoefficientMode::Consistent, Some(8.0), rule()).unwrap();
        let op = LocalizedForm::new(grid, gs, kind, CoefficientMode::Consistent, Some(8.0), rule()).unwrap();
        let w = op.value(&f);
        assert!(((v - w) / v).abs() <= 1e-9, "{v} vs {w}");
    }
}

#[test]
fn localized_coercivity_under_constraints() {
    let Fixture { grid, gs, set } = fixture();
    let r = SRule::new(OPERATOR_S_NODES).unwrap();
    let rep = coercivity_check(grid, gs, set, Some(64.0), CoefficientMode::Consistent, &r, 300).unwrap();
    assert!(rep.combined_min > 0.0, "{}", rep.combined_min);
    assert!((rep.minus_min - 0.3212).abs() <= 0.1 * 0.3212);
    assert!(rep.negative_direction.is_none());
    // without constraints L₊ has its negative direction and L₋ its kernel
    assert!(rep.combined_unconstrained <= 0.0);
    assert!(rep.plus_unconstrained < -1.0);
    assert!(rep.minus_unconstrained.abs() <= 1e-6);
}

#[test]
fn flat_forms_match_linearized_spectra() {
    let Fixture { grid, gs, set } = fixture();
    let r = SRule::new(OPERATOR_S_NODES).unwrap();
    let cases = [
        (FormKind::Minus, Kind::Minus, vec![set.rho.rho1.clone()]),
        (FormKind::Plus, Kind::Plus, vec![gs.q.clone(), set.first.s10.clone()]),
    ];
    for (fk, k, cons) in cases {
        let form = LocalizedForm::new(grid, gs, fk, CoefficientMode::Consistent, None, &r).unwrap();
        let a = form.min_eigenvalue(&cons, 300).unwrap().value;
        let b = LinearizedOperator::new(grid, gs, k, Sector::L0).min_eigenvalue_projected(&cons).unwrap().value;
        assert!(a > 0.0 && (a - b).abs() <= 1e-4, "{fk:?}: {a} vs {b}");
    }
}

#[test]
fn biharmonic_operator_norm_decays_like_one_over_a() {
    let g = RadialGrid::new(1023, 1000.0).unwrap();
    let r = SRule::new(OPERATOR_S_NODES).unwrap();
    let pts: Vec<(f64, f64)> = AS
        .iter()
        .map(|&a| (a.ln(), biharmonic_operator_norm(&g, a, &r).unwrap().ln()))
        .collect();
    let (slope, _) = linear_fit(pts.iter().copied());
    assert!((slope + 1.0).abs() <= 0.2, "slope {slope}");
    // A·norm stays bounded across the sweep
    let consts: Vec<f64> = pts.iter().map(|(la, ln)| (la + ln).exp()).collect();
    let (lo, hi) = consts.iter().fold((f64::MAX, 0.0f64), |(l, h), c| (l.min(*c), h.max(*c)));
    assert!(hi / lo <= 1.5, "{consts:?}");
}

#[test]
fn biharmonic_term_of_ground_state() {
    let Fixture { grid, gs, .. } = fixture();
    let q = gs.q_complex();
    let reps: Vec<BiharmonicBound> = AS.iter().map(|&a| biharmonic_bound(grid, &q, a, rule()).unwrap()).collect();
    // a fixed localized field decays at least as fast as the uniform 1/A bound
    let (slope, _) = linear_fit(reps.iter().map(|b| (b.a.ln(), b.lhs.abs().ln())));
    assert!(slope <= -1.0, "slope {slope}");
    assert!(reps.iter().all(|b| b.ratio <= 1.0));
    let z = vec![Complex64::new(0.0, 0.0); grid.n()];
    assert_eq!(biharmonic_bound(grid, &z, 8.0, rule()).unwrap().lhs, 0.0);
}

#[test]
fn j_vanishes_at_zero_and_is_quadratic() {
    let Fixture { grid, gs, set } = fixture();
    let w = gs.q_complex();
    let rep = j_and_h(grid, &w, &w, 1.0, 0.05, 8.0).unwrap();
    assert_eq!((rep.j, rep.h), (0.0, 0.0));
    // ε₁ ⊥ {Q, S₁₀}, ε₂ ⊥ ρ₁
    let ws = grid.weights(Sector::L0);
    let bump = |c: f64, s: f64| -> Vec<f64> { grid.r().iter().map(|r| (-((r - c) / s).powi(2)).exp()).collect() };
    let mut e1 = bump(1.0, 1.5);
    Projector::new(&ws, &[gs.q.clone(), set.first.s10.clone()]).unwrap().apply(&mut e1);
    let mut e2 = bump(2.0, 1.0);
    Projector::new(&ws, &[set.rho.rho1.clone()]).unwrap().apply(&mut e2);
    let j_over = |d: f64| {
        let u: Vec<Complex64> = w
            .iter()
            .zip(e1.iter().zip(&e2))
            .map(|(w, (a, b))| w + Complex64::new(*a, *b) * d)
            .collect();
        j_and_h(grid, &u, &w, 1.0, 0.05, 8.0).unwrap().j / (d * d)
    };
    let (a, b) = (j_over(1e-3), j_over(5e-4));
    assert!(a > 0.0 && ((a - b) / a).abs() <= 1e-2, "{a} {b}");
    assert!(matches!(j_and_h(grid, &w, &w, 0.0, 0.0, 8.0), Err(HwError::Domain(_))));
}

#[test]
fn virial_term_is_controlled_by_h() {
    // The bound holds up to an unspecified constant; the fitted constant (≈ 1.5 on this
    // battery) must stay uniform in A.
    let g = RadialGrid::new(1023, 100.0).unwrap();
    let z = vec![Complex64::new(0.0, 0.0); g.n()];
    for a in [2.0, 8.0, 32.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fitted = (0..50)
            .map(|_| j_and_h(&g, &random_field(&g, &mut rng), &z, 1.0, 0.1, a).unwrap().virial_ratio)
            .fold(0.0, f64::max);
        assert!(fitted > 0.0 && fitted <= 2.0, "A = {a}: fitted constant {fitted}");
    }
}

#[test]
fn check_record_serializes_with_spec_keys() {
    let rec = CheckRecord {
        check_name: "x".into(),
        inputs: serde_json::json!({}),
        lhs: 1.0,
        rhs_or_bound: 2.0,
        fitted_constant: None,
        grid: (16, 10.0),
        a: Some(8.0),
        pass: true,
    };
    let v = serde_json::to_value(&rec).unwrap();
    for k in ["check_name", "inputs", "lhs", "rhs_or_bound", "fitted_constant", "grid", "A", "pass"] {
        assert!(v.get(k).is_some(), "{k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn biharmonic_term_is_phase_invariant(theta in 0.0f64..6.3, c in 0.0f64..5.0, s in 0.5f64..3.0) {
        let g = RadialGrid::new(255, 40.0).unwrap();
        let u: Vec<Complex64> = g.r().iter().map(|r| Complex64::new(1.0, 0.4) * (-((r - c) / s).powi(2)).exp()).collect();
        let ph = Complex64::from_polar(1.0, theta);
        let v: Vec<Complex64> = u.iter().map(|z| z * ph).collect();
        let a = biharmonic_bound(&g, &u, 8.0, rule()).unwrap().lhs;
        let b = biharmonic_bound(&g, &v, 8.0, rule()).unwrap().lhs;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{} vs {}", a, b);
    }

    #[test]
    fn localized_forms_are_symmetric(c1 in 0.0f64..6.0, c2 in 0.0f64..6.0) {
        let Fixture { grid, gs, .. } = fixture();
        let r = SRule::new(OPERATOR_S_NODES).unwrap();
        let op = LocalizedForm::new(grid, gs, FormKind::Plus, CoefficientMode::Printed, Some(8.0), &r).unwrap();
        let f: Vec<f64> = grid.r().iter().map(|r| (-(r - c1).powi(2)).exp()).collect();
        let h: Vec<f64> = grid.r().iter().map(|r| (-(r - c2).powi(2) / 2.0).exp()).collect();
        let lhs = grid.inner_real(Sector::L0, &op.apply_real(&f), &h);
        let rhs = grid.inner_real(Sector::L0, &f, &op.apply_real(&h));
        let scale = grid.norm_real(Sector::L0, &f) * grid.norm_real(Sector::L0, &h);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
    }
}
