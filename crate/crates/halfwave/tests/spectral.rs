use std::f64::consts::PI;

use halfwave::{MultiplierSpec, RadialGrid, Sector, SectorField};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

#[test]
fn sine_mode_is_a_transform_eigenvector() {
    let g = RadialGrid::new(128, 10.0).unwrap();
    let k3 = g.rho()[2];
    let f = SectorField::from_fn(&g, Sector::L0, |r| c((k3 * r).sin() / r));
    let big_f = f.forward_transform(&g).unwrap();
    let peak = big_f[2].norm();
    for (k, v) in big_f.iter().enumerate() {
        if k != 2 {
            assert!(v.norm() < 1e-12 * peak, "mode {k} leaked {v}");
        }
    }
}

#[test]
fn zero_field_has_zero_coefficients() {
    let g = RadialGrid::new(64, 5.0).unwrap();
    for sector in [Sector::L0, Sector::L1] {
        let z = SectorField::zeros(sector, 64);
        assert!(z.forward_transform(&g).unwrap().iter().all(|v| v.norm() == 0.0));
    }
}

#[test]
fn gaussian_transform_matches_closed_form() {
    let g = RadialGrid::new(512, 12.0).unwrap();
    let f = SectorField::from_fn(&g, Sector::L0, |r| c((-r * r).exp()));
    let big_f = f.forward_transform(&g).unwrap();
    for (k, v) in big_f.iter().enumerate() {
        let rho = g.rho()[k];
        let exact = PI.powf(1.5) * (-rho * rho / 4.0).exp();
        assert!((v.re - exact).abs() < 1e-8 && v.im.abs() < 1e-12, "k={k}");
    }
    let back = SectorField::inverse_transform(&g, Sector::L0, &big_f).unwrap();
    assert!(rel_err(&back.values, &f.values) < 1e-12);
}

#[test]
fn odd_gaussian_hankel_transform_matches_closed_form() {
    // x₃e^{−r²} has transform −i(ξ₃/ρ)·(ρ/2)π^{3/2}e^{−ρ²/4}.
    let g = RadialGrid::new(256, 12.0).unwrap();
    let f = SectorField::from_fn(&g, Sector::L1, |r| c(r * (-r * r).exp()));
    let big_f = f.forward_transform(&g).unwrap();
    for (k, v) in big_f.iter().enumerate() {
        let rho = g.rho()[k];
        let exact = 0.5 * rho * PI.powf(1.5) * (-rho * rho / 4.0).exp();
        assert!((v.re - exact).abs() < 1e-8, "k={k}: {} vs {exact}", v.re);
    }
    let back = SectorField::inverse_transform(&g, Sector::L1, &big_f).unwrap();
    assert!(rel_err(&back.values, &f.values) < 1e-8);
}

#[test]
fn l1_round_trip_with_algebraic_tail() {
    let g = RadialGrid::new(512, 50.0).unwrap();
    let f = SectorField::from_fn(&g, Sector::L1, |r| c(r / (1.0 + r * r).powi(3)));
    let back = SectorField::inverse_transform(&g, Sector::L1, &f.forward_transform(&g).unwrap()).unwrap();
    assert!(rel_err(&back.values, &f.values) < 1e-8);
}

#[test]
fn half_wave_multiplier_on_eigenfunction() {
    let g = RadialGrid::new(256, 20.0).unwrap();
    let k = g.rho()[4];
    let f = SectorField::from_fn(&g, Sector::L0, |r| c((k * r).sin() / r));
    let df = f.apply_multiplier(&g, &MultiplierSpec::HalfWave).unwrap();
    assert!(rel_err(&df.values, &f.scaled(c(k)).values) < 1e-12);
    let rf = f.apply_multiplier(&g, &MultiplierSpec::Helmholtz { s: 1.0 }).unwrap();
    assert!(rel_err(&rf.values, &f.scaled(c(1.0 / (k * k + 1.0))).values) < 1e-12);
    let id = f.apply_multiplier(&g, &MultiplierSpec::Propagator { tau: 0.0 }).unwrap();
    assert!(rel_err(&id.values, &f.values) < 1e-13);
    let smooth = f.s_smoothing(&g, 2.0).unwrap();
    let expect = f.scaled(c((2.0 / PI).sqrt() / (k * k + 2.0)));
    assert!(rel_err(&smooth.values, &expect.values) < 1e-12);
}

#[test]
fn non_finite_symbol_reports_mode() {
    let g = RadialGrid::new(32, 5.0).unwrap();
    let f = SectorField::from_fn(&g, Sector::L0, |r| c((-r).exp()));
    let bad = MultiplierSpec::Custom(std::sync::Arc::new(|k: f64| {
        if k > 1.0 {
            Complex64::new(f64::NAN, 0.0)
        } else {
            c(1.0)
        }
    }));
    match f.apply_multiplier(&g, &bad) {
        Err(halfwave::HwError::NonFiniteSymbol { mode }) => assert_eq!(mode, 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn gaussian_norm_closed_form() {
    let g = RadialGrid::new(512, 12.0).unwrap();
    let f = SectorField::from_fn(&g, Sector::L0, |r| c((-r * r).exp()));
    let ip = f.inner(&f, &g).unwrap().re;
    let exact = (PI / 2.0) * (PI / 2.0).sqrt();
    assert!((ip - exact).abs() < 1e-12);
    assert!((ip - 1.96870).abs() < 1e-5);
    let zero = SectorField::zeros(Sector::L0, 512);
    assert_eq!(f.inner(&zero, &g).unwrap(), c(0.0));
}

#[test]
fn sector_mismatch_is_a_configuration_error() {
    let g = RadialGrid::new(32, 5.0).unwrap();
    let a = SectorField::zeros(Sector::L0, 32);
    let b = SectorField::zeros(Sector::L1, 32);
    assert!(matches!(a.inner(&b, &g), Err(halfwave::HwError::Config(_))));
    let short = SectorField::zeros(Sector::L0, 31);
    assert!(short.forward_transform(&g).is_err());
}

#[test]
fn lambda_of_gaussian() {
    let g = RadialGrid::new(512, 12.0).unwrap();
    let f = SectorField::from_fn(&g, Sector::L0, |r| c((-r * r).exp()));
    let lf = f.lambda_op(&g).unwrap();
    for (j, &r) in g.r().iter().enumerate() {
        let exact = (1.5 - 2.0 * r * r) * (-r * r).exp();
        assert!((lf.values[j].re - exact).abs() < 1e-8);
    }
    assert!(SectorField::zeros(Sector::L0, 512).lambda_op(&g).unwrap().values.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn l1_lambda_of_odd_gaussian() {
    // f = r e^{−r²}: Λf = (3/2)f + r f' = (5/2 − 2r²) r e^{−r²}
    let g = RadialGrid::new(1024, 12.0).unwrap();
    let f = SectorField::from_fn(&g, Sector::L1, |r| c(r * (-r * r).exp()));
    let lf = f.lambda_op(&g).unwrap();
    for (j, &r) in g.r().iter().enumerate() {
        let exact = (2.5 - 2.0 * r * r) * r * (-r * r).exp();
        assert!((lf.values[j].re - exact).abs() < 1e-6);
    }
}

#[test]
fn dilation_preserves_mass() {
    let g = RadialGrid::new(1024, 20.0).unwrap();
    let prof = |r: f64| (-r * r).exp() * (1.0 + r * r);
    let f = SectorField::from_fn(&g, Sector::L0, |r| c(prof(r)));
    let lam: f64 = 2.0;
    let f2 = SectorField::from_fn(&g, Sector::L0, |r| c(lam.powf(1.5) * prof(lam * r)));
    let (n1, n2) = (f.norm(&g).unwrap(), f2.norm(&g).unwrap());
    assert!((n1 - n2).abs() < 1e-9 * n1);
}

fn random_field(g: &RadialGrid, sector: Sector, amps: &[f64], widths: &[f64]) -> SectorField {
    SectorField::from_fn(g, sector, |r| {
        let mut v = Complex64::new(0.0, 0.0);
        for (i, (&a, &w)) in amps.iter().zip(widths).enumerate() {
            let shape = (-(r / w).powi(2)).exp();
            let ang = if sector == Sector::L1 { r } else { 1.0 };
            v += Complex64::new(a, 0.3 * a * i as f64) * shape * ang;
        }
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn parseval_holds(amps in prop::collection::vec(-1.0f64..1.0, 3), widths in prop::collection::vec(0.5f64..3.0, 3), l1 in any::<bool>()) {
        let sector = if l1 { Sector::L1 } else { Sector::L0 };
        let g = RadialGrid::new(256, 25.0).unwrap();
        let f = random_field(&g, sector, &amps, &widths);
        let h = random_field(&g, sector, &widths, &amps);
        let real = f.inner(&h, &g).unwrap();
        let spec = f.inner_spectral(&h, &g).unwrap();
        let scale = f.norm(&g).unwrap() * h.norm(&g).unwrap();
        prop_assert!((real - spec).norm() <= 1e-10 * scale.max(1e-300));
        let back = h.inner(&f, &g).unwrap();
        prop_assert!((real - back.conj()).norm() <= 1e-14 * scale);
    }

    #[test]
    fn multipliers_compose(tau in 0.0f64..3.0, s in 0.1f64..10.0, amps in prop::collection::vec(-1.0f64..1.0, 3)) {
        let g = RadialGrid::new(128, 15.0).unwrap();
        let f = random_field(&g, Sector::L0, &amps, &[0.7, 1.3, 2.1]);
        let m1 = MultiplierSpec::Propagator { tau };
        let m2 = MultiplierSpec::Helmholtz { s };
        let seq = f.apply_multiplier(&g, &m1).unwrap().apply_multiplier(&g, &m2).unwrap();
        let swapped = f.apply_multiplier(&g, &m2).unwrap().apply_multiplier(&g, &m1).unwrap();
        let (a, b) = (m1.clone(), m2.clone());
        let prod = MultiplierSpec::Custom(std::sync::Arc::new(move |k| a.eval(k) * b.eval(k)));
        let once = f.apply_multiplier(&g, &prod).unwrap();
        prop_assert!(rel_err(&seq.values, &once.values) < 1e-12);
        prop_assert!(rel_err(&swapped.values, &once.values) < 1e-12);
    }

    #[test]
    fn d_is_symmetric(amps in prop::collection::vec(-1.0f64..1.0, 3), l1 in any::<bool>()) {
        let sector = if l1 { Sector::L1 } else { Sector::L0 };
        let g = RadialGrid::new(192, 20.0).unwrap();
        let f = random_field(&g, sector, &amps, &[0.6, 1.1, 2.5]);
        let h = random_field(&g, sector, &[0.2, -0.5, 0.9], &[1.7, 0.9, 0.5]);
        let df = f.apply_multiplier(&g, &MultiplierSpec::HalfWave).unwrap();
        let dh = h.apply_multiplier(&g, &MultiplierSpec::HalfWave).unwrap();
        let lhs = df.inner(&h, &g).unwrap();
        let rhs = f.inner(&dh, &g).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * f.norm(&g).unwrap() * h.norm(&g).unwrap());
    }

    #[test]
    fn lambda_is_skew(amps in prop::collection::vec(-1.0f64..1.0, 3)) {
        let g = RadialGrid::new(512, 25.0).unwrap();
        let f = random_field(&g, Sector::L0, &amps, &[0.6, 1.1, 2.5]);
        let h = random_field(&g, Sector::L0, &[0.2, -0.5, 0.9], &[1.7, 0.9, 0.5]);
        let lhs = f.lambda_op(&g).unwrap().inner(&h, &g).unwrap() + f.inner(&h.lambda_op(&g).unwrap(), &g).unwrap();
        prop_assert!(lhs.norm() <= 1e-9 * f.norm(&g).unwrap() * h.norm(&g).unwrap());
    }
}
