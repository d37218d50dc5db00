//! Localized-energy machinery: the cutoff φ, the resolvent-smoothing identity
//! ∫₀^∞ √s ‖∇u_s‖² ds = ‖D^{1/2}u‖², the localized quadratic forms L±,A, the
//! Δ²φ_A bound and the functionals J_A, H.
//!
//! Scaling conventions: φ_A(x) = A²φ(|x|/A), so ∇φ_A = Aφ'(r/A)x̂, Δφ_A = (Δφ)(r/A)
//! and Δ²φ_A = A⁻²(Δ²φ)(r/A). The kinetic weight of the forms is Δφ_A/3, which
//! equals 1 on the core |x| ≤ A.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{HwError, Result};
use crate::grid::{re, to_complex, RadialGrid, Sector};
use crate::ground_state::{potential_integral, GroundState};
use crate::linalg::{self, Projector};
use crate::profile::ProfileSet;

/// ψ = φ' with ψ(x) = x on [0, 1], 3 − e^{−x} on [2, ∞) and a quintic Hermite bridge.
#[derive(Clone, Debug, Serialize)]
pub struct Cutoff {
    /// ψ(x) = Σ c_k (x − 1)^k on [1, 2].
    pub bridge: [f64; 6],
}

impl Cutoff {
    pub fn new() -> Result<Self> {
        let e2 = (-2.0f64).exp();
        let (p0, d0, s0) = (1.0, 1.0, 0.0);
        let (p1, d1, s1) = (3.0 - e2, e2, -e2);
        let (c0, c1, c2) = (p0, d0, 0.5 * s0);
        let r0 = p1 - (c0 + c1 + c2);
        let r1 = d1 - (c1 + 2.0 * c2);
        let r2 = s1 - 2.0 * c2;
        let c3 = 10.0 * r0 - 4.0 * r1 + 0.5 * r2;
        let c4 = -15.0 * r0 + 7.0 * r1 - r2;
        let c5 = 6.0 * r0 - 3.0 * r1 + 0.5 * r2;
        let cut = Self {
            bridge: [c0, c1, c2, c3, c4, c5],
        };
        // convexity φ'' = ψ' ≥ 0 on a fine sample
        for i in 0..=10_000 {
            let x = 3.0 * i as f64 / 10_000.0;
            let d = cut.derivs(x)[1];
            if d < 0.0 {
                return Err(HwError::Construction(format!("bridge violates convexity: φ''({x}) = {d}")));
            }
        }
        Ok(cut)
    }

    /// (ψ, ψ', ψ'', ψ''') at x ≥ 0.
    pub fn derivs(&self, x: f64) -> [f64; 4] {
        if x <= 1.0 {
            [x, 1.0, 0.0, 0.0]
        } else if x >= 2.0 {
            let e = (-x).exp();
            [3.0 - e, e, -e, e]
        } else {
            let t = x - 1.0;
            let c = &self.bridge;
            let p = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
            let d1 = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
            let d2 = 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
            let d3 = 6.0 * c[3] + t * (24.0 * c[4] + t * 60.0 * c[5]);
            [p, d1, d2, d3]
        }
    }

    pub fn dphi(&self, x: f64) -> f64 {
        self.derivs(x)[0]
    }

    /// φ(x) with φ(0) = 0, integrating ψ piecewise by Gauss–Legendre quadrature.
    pub fn phi(&self, x: f64) -> f64 {
        let gl = GaussLegendre::new(8).expect("static rule");
        let piece = |a: f64, b: f64| gl.integrate(a, b, |t| self.dphi(t));
        let mut acc = 0.0;
        let mut left = 0.0;
        for right in [1.0, 2.0] {
            if x <= right {
                return acc + piece(left, x);
            }
            acc += piece(left, right);
            left = right;
        }
        // ∫₂ˣ (3 − e^{−t}) dt
        acc + 3.0 * (x - 2.0) + (-x).exp() - (-2.0f64).exp()
    }

    /// Δφ = ψ' + 2ψ/r.
    pub fn laplacian(&self, x: f64) -> f64 {
        if x <= 1.0 {
            return 3.0;
        }
        let d = self.derivs(x);
        d[1] + 2.0 * d[0] / x
    }

    /// Δ²φ = ψ''' + 4ψ''/r.
    pub fn bilaplacian(&self, x: f64) -> f64 {
        if x <= 1.0 {
            return 0.0;
        }
        let d = self.derivs(x);
        d[3] + 4.0 * d[2] / x
    }
}

/// Cutoff fields sampled on the grid at scale A (λ = 1, α = 0).
#[derive(Clone, Debug)]
pub struct CutoffFamily {
    pub a: f64,
    pub cutoff: Cutoff,
    /// radial component of ∇φ_A
    pub grad: Vec<f64>,
    pub laplacian: Vec<f64>,
    pub bilaplacian: Vec<f64>,
}

pub fn build_cutoff(grid: &RadialGrid, a: f64) -> Result<CutoffFamily> {
    if !(a > 0.0) {
        return Err(HwError::Domain(format!("cutoff scale must be positive, got {a}")));
    }
    let cutoff = Cutoff::new()?;
    let r = grid.r();
    Ok(CutoffFamily {
        a,
        grad: r.iter().map(|r| a * cutoff.dphi(r / a)).collect(),
        laplacian: r.iter().map(|r| cutoff.laplacian(r / a)).collect(),
        bilaplacian: r.iter().map(|r| cutoff.bilaplacian(r / a) / (a * a)).collect(),
        cutoff,
    })
}

/// Quadrature for ∫₀^∞ ⋯ ds through s = tan²(πξ/2), ξ ∈ (0, 1); the weights include √s ds.
#[derive(Clone, Debug)]
pub struct SRule {
    pub s: Vec<f64>,
    pub weights: Vec<f64>,
}

pub const DEFAULT_S_NODES: usize = 200;
/// Node count of the s-rule inside the localized operators (identity error ~3e-10).
pub const OPERATOR_S_NODES: usize = 64;
/// Residual target of the eigensolves.
pub const EIGEN_TOL: f64 = 1e-7;

impl SRule {
    pub fn new(nodes: usize) -> Result<Self> {
        let gl = GaussLegendre::new(nodes).map_err(|_| HwError::Config(format!("bad s-rule order {nodes}")))?;
        let (s, weights) = gl
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| {
                // x ∈ (−1, 1) → ξ = (x + 1)/2
                let th = 0.25 * PI * (x + 1.0);
                let t = th.tan();
                let ds_dth = 2.0 * t / (th.cos() * th.cos());
                (t * t, 0.25 * PI * w * ds_dth * t)
            })
            .unzip();
        Ok(Self { s, weights })
    }
}

impl Default for SRule {
    fn default() -> Self {
        Self::new(DEFAULT_S_NODES).expect("static rule")
    }
}

fn smooth(grid: &RadialGrid, f: &[Complex64], s: f64) -> Vec<Complex64> {
    let c = (2.0 / PI).sqrt();
    let m: Vec<f64> = grid.real_symbol(|k| c / (k * k + s));
    let mc: Vec<Complex64> = to_complex(&m);
    grid.apply_symbol_unchecked(Sector::L0, f, &mc)
}

/// ∫₀^∞ √s ∫ ω |∇u_s|² dx ds (ω ≡ 1 when `weight` is None).
pub fn localized_kinetic(grid: &RadialGrid, u: &[Complex64], weight: Option<&[f64]>, rule: &SRule) -> f64 {
    let w = grid.weights(Sector::L0);
    rule.s
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &c)| {
            let us = smooth(grid, u, s);
            let d = grid.radial_derivative(Sector::L0, &us);
            let inner: f64 = d
                .iter()
                .enumerate()
                .map(|(j, z)| w[j] * weight.map_or(1.0, |om| om[j]) * z.norm_sqr())
                .sum();
            c * inner
        })
        .sum()
}

/// ∫₀^∞ √s ∫ ω |u_s|² dx ds.
pub fn smoothed_weighted_mass(grid: &RadialGrid, u: &[Complex64], weight: &[f64], rule: &SRule) -> f64 {
    let w = grid.weights(Sector::L0);
    rule.s
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &c)| {
            let us = smooth(grid, u, s);
            c * us.iter().enumerate().map(|(j, z)| w[j] * weight[j] * z.norm_sqr()).sum::<f64>()
        })
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub quadrature: f64,
    pub spectral: f64,
    pub relative_error: f64,
}

/// Checks ∫√s‖∇u_s‖² = ‖D^{1/2}u‖² for one field.
pub fn identity_a4(grid: &RadialGrid, u: &[Complex64], rule: &SRule) -> IdentityCheck {
    let quadrature = localized_kinetic(grid, u, None, rule);
    let spectral = grid.half_derivative_norm_sq(Sector::L0, u);
    IdentityCheck {
        quadrature,
        spectral,
        relative_error: (quadrature - spectral).abs() / spectral.abs(),
    }
}

/// Smooth, even, localized random field built from symmetric Gaussian bumps.
pub fn random_field(grid: &RadialGrid, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let bumps: Vec<(f64, f64, Complex64)> = (0..4)
        .map(|_| {
            let center = rng.random_range(0.0..8.0);
            let width = rng.random_range(0.7..3.0);
            let amp = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (center, width, amp)
        })
        .collect();
    grid.r()
        .iter()
        .map(|&r| {
            bumps
                .iter()
                .map(|&(c, w, a)| a * ((-((r - c) / w).powi(2)).exp() + (-((r + c) / w).powi(2)).exp()))
                .sum()
        })
        .collect()
}

/// Which potential coefficient L₊,A carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CoefficientMode {
    /// 3/8, as printed in the definition of the localized form
    Printed,
    /// 5/3, matching L₊
    Consistent,
}

impl CoefficientMode {
    pub fn plus_coefficient(self) -> f64 {
        match self {
            CoefficientMode::Printed => 3.0 / 8.0,
            CoefficientMode::Consistent => 5.0 / 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FormKind {
    Plus,
    Minus,
}

/// The quadratic form K_A(f) + ‖f‖² − c∫Q^{2/3}f² as a weighted-symmetric operator.
pub struct LocalizedForm<'a> {
    grid: &'a RadialGrid,
    rule: &'a SRule,
    /// kinetic weight Δφ_A/3 (None: flat, i.e. D itself)
    weight: Option<Vec<f64>>,
    potential: Vec<f64>,
    smoothers: Vec<Vec<f64>>,
}

impl<'a> LocalizedForm<'a> {
    pub fn new(
        grid: &'a RadialGrid,
        gs: &GroundState,
        kind: FormKind,
        mode: CoefficientMode,
        a: Option<f64>,
        rule: &'a SRule,
    ) -> Result<Self> {
        let c = match kind {
            FormKind::Plus => mode.plus_coefficient(),
            FormKind::Minus => 1.0,
        };
        let weight = match a {
            Some(a) => Some(build_cutoff(grid, a)?.laplacian.iter().map(|v| v / 3.0).collect()),
            None => None,
        };
        let cs = (2.0 / PI).sqrt();
        let smoothers = if weight.is_some() {
            rule.s.iter().map(|&s| grid.real_symbol(|k| cs / (k * k + s))).collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            grid,
            rule,
            weight,
            potential: gs.potential_weight().into_iter().map(|v| c * v).collect(),
            smoothers,
        })
    }

    /// Σ_s c_s G^†(ω G u_s) smoothed once more, assembled in sine-coefficient space:
    /// with a = sine coefficients of f, G u_s = (C(ρ m a) − S(m a)/r)/r and the
    /// coefficients of G^†v are (2/N)(ρ C(r v) − S v).
    fn kinetic(&self, f: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let Some(om) = &self.weight else {
            return g.apply_d_real(Sector::L0, f);
        };
        let r = g.r();
        let rho = g.rho();
        let a = re(&g.sine_coeffs(&to_complex(f)));
        let scale = 2.0 / (g.n() + 1) as f64;
        let mut acc = vec![0.0; f.len()];
        let mut b = vec![0.0; f.len()];
        let mut rb = vec![0.0; f.len()];
        let mut v = vec![0.0; f.len()];
        let mut rv = vec![0.0; f.len()];
        for (m, &c) in self.smoothers.iter().zip(&self.rule.weights) {
            for k in 0..f.len() {
                b[k] = m[k] * a[k];
                rb[k] = rho[k] * b[k];
            }
            let (sb, crb) = g.sine_cosine_real(&b, &rb);
            for j in 0..f.len() {
                let d = (crb[j] - sb[j] / r[j]) / r[j];
                v[j] = om[j] * d;
                rv[j] = r[j] * v[j];
            }
            let (sv, crv) = g.sine_cosine_real(&v, &rv);
            for k in 0..f.len() {
                acc[k] += c * scale * m[k] * (rho[k] * crv[k] - sv[k]);
            }
        }
        re(&g.from_sine_coeffs(&to_complex(&acc)))
    }

    pub fn apply_real(&self, f: &[f64]) -> Vec<f64> {
        let k = self.kinetic(f);
        k.iter()
            .zip(f)
            .zip(&self.potential)
            .map(|((k, f), v)| k + f - v * f)
            .collect()
    }

    pub fn value(&self, f: &[f64]) -> f64 {
        self.grid.inner_real(Sector::L0, &self.apply_real(f), f)
    }

    /// Smallest Rayleigh quotient on the complement of the constraints, within a
    /// Lanczos budget of `max_iter` iterations.
    pub fn min_eigenvalue(&self, constraints: &[Vec<f64>], max_iter: usize) -> Result<linalg::EigenOutcome> {
        let w = self.grid.weights(Sector::L0);
        let proj = Projector::new(&w, constraints)?;
        let start: Vec<f64> = self
            .grid
            .r()
            .iter()
            .map(|r| (-r * r / 8.0).exp() + 0.1 / (1.0 + r * r))
            .collect();
        let op = |v: &[f64]| self.apply_real(v);
        linalg::lanczos_min_budget(&op, &w, &proj, &start, max_iter, EIGEN_TOL)
    }
}

/// Value of L±,A(f) for a radial real field (A = None gives the flat form).
pub fn quadratic_form(
    grid: &RadialGrid,
    gs: &GroundState,
    f: &[f64],
    kind: FormKind,
    mode: CoefficientMode,
    a: Option<f64>,
    rule: &SRule,
) -> Result<f64> {
    grid.check_len(f.len())?;
    if f.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let w = match a {
        Some(a) => Some(build_cutoff(grid, a)?.laplacian.iter().map(|v| v / 3.0).collect::<Vec<f64>>()),
        None => None,
    };
    let fc = to_complex(f);
    let kin = match &w {
        Some(w) => localized_kinetic(grid, &fc, Some(w), rule),
        None => grid.half_derivative_norm_sq(Sector::L0, &fc),
    };
    let c = match kind {
        FormKind::Plus => mode.plus_coefficient(),
        FormKind::Minus => 1.0,
    };
    let q23: Vec<f64> = gs.potential_weight();
    let pot: Vec<f64> = f.iter().zip(&q23).map(|(f, q)| c * q * f * f).collect();
    let ws = grid.weights(Sector::L0);
    let mass: f64 = f.iter().zip(&ws).map(|(f, w)| w * f * f).sum();
    let potv: f64 = pot.iter().zip(&ws).map(|(p, w)| p * w).sum();
    Ok(kin + mass - potv)
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadraticFormReport {
    pub a: Option<f64>,
    pub mode: CoefficientMode,
    /// Constraints on (ε₁; ε₂) in the radial sector: ε₁ ⊥ {Q, S₁₀}, ε₂ ⊥ ρ₁.
    pub constraints: Vec<String>,
    pub plus_min: f64,
    pub minus_min: f64,
    /// min over the combined form = min(plus_min, minus_min)
    pub combined_min: f64,
    pub plus_unconstrained: f64,
    pub minus_unconstrained: f64,
    pub combined_unconstrained: f64,
    /// Ritz residuals of the constrained L₊,A and L₋,A eigenpairs.
    pub plus_residual: f64,
    pub minus_residual: f64,
    /// Residual of the eigenpair attaining the combined minimum.
    pub eigensolver_residual: f64,
    /// Minimizer when the constrained minimum is not positive.
    #[serde(skip)]
    pub negative_direction: Option<Vec<f64>>,
}

/// Projected minimum of L₊,A(ε₁) + L₋,A(ε₂) on radial fields.
pub fn coercivity_check(
    grid: &RadialGrid,
    gs: &GroundState,
    set: &ProfileSet,
    a: Option<f64>,
    mode: CoefficientMode,
    rule: &SRule,
    max_iter: usize,
) -> Result<QuadraticFormReport> {
    let plus = LocalizedForm::new(grid, gs, FormKind::Plus, mode, a, rule)?;
    let minus = LocalizedForm::new(grid, gs, FormKind::Minus, mode, a, rule)?;
    let pc = plus.min_eigenvalue(&[gs.q.clone(), set.first.s10.clone()], max_iter)?;
    let mc = minus.min_eigenvalue(&[set.rho.rho1.clone()], max_iter)?;
    let pu = plus.min_eigenvalue(&[], max_iter)?;
    let mu = minus.min_eigenvalue(&[], max_iter)?;
    let combined_min = pc.value.min(mc.value);
    let negative_direction = if combined_min <= 0.0 {
        Some(if pc.value <= mc.value { pc.vector.clone() } else { mc.vector.clone() })
    } else {
        None
    };
    Ok(QuadraticFormReport {
        a,
        mode,
        constraints: vec!["eps1 ⊥ Q".into(), "eps1 ⊥ S10".into(), "eps2 ⊥ rho1".into()],
        plus_min: pc.value,
        minus_min: mc.value,
        combined_min,
        plus_unconstrained: pu.value,
        minus_unconstrained: mu.value,
        combined_unconstrained: pu.value.min(mu.value),
        plus_residual: pc.residual,
        minus_residual: mc.residual,
        eigensolver_residual: if pc.value <= mc.value { pc.residual } else { mc.residual },
        negative_direction,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BiharmonicBound {
    pub a: f64,
    pub lhs: f64,
    /// ‖u‖²/A
    pub bound: f64,
    /// lhs·A/‖u‖²
    pub ratio: f64,
}

/// ∫√s∫Δ²φ_A|u_s|² against ‖u‖²/A.
pub fn biharmonic_bound(grid: &RadialGrid, u: &[Complex64], a: f64, rule: &SRule) -> Result<BiharmonicBound> {
    let fam = build_cutoff(grid, a)?;
    let lhs = smoothed_weighted_mass(grid, u, &fam.bilaplacian, rule);
    let m = grid.norm(Sector::L0, u).powi(2);
    Ok(BiharmonicBound {
        a,
        lhs,
        bound: m / a,
        ratio: if m > 0.0 { lhs.abs() * a / m } else { 0.0 },
    })
}

/// sup_u |∫√s∫Δ²φ_A|u_s|²| / ‖u‖² over radial u, by Lanczos at both spectral ends.
pub fn biharmonic_operator_norm(grid: &RadialGrid, a: f64, rule: &SRule) -> Result<f64> {
    let fam = build_cutoff(grid, a)?;
    let cs = (2.0 / PI).sqrt();
    let ms: Vec<Vec<Complex64>> = rule
        .s
        .iter()
        .map(|&s| to_complex(&grid.real_symbol(|k| cs / (k * k + s))))
        .collect();
    let apply = |sign: f64| {
        let ms = &ms;
        let fam = &fam;
        move |f: &[f64]| -> Vec<f64> {
            let fc = to_complex(f);
            let mut acc = vec![0.0; f.len()];
            for (m, &c) in ms.iter().zip(&rule.weights) {
                let mut us = grid.apply_symbol_unchecked(Sector::L0, &fc, m);
                us.iter_mut().zip(&fam.bilaplacian).for_each(|(z, w)| *z *= w);
                let back = grid.apply_symbol_unchecked(Sector::L0, &us, m);
                acc.iter_mut().zip(&back).for_each(|(a, b)| *a += sign * c * b.re);
            }
            acc
        }
    };
    let w = grid.weights(Sector::L0);
    let proj = Projector::empty(&w);
    let start: Vec<f64> = grid.r().iter().map(|r| (-(r / (2.0 * a)).powi(2)).exp()).collect();
    let lo = linalg::lanczos_min(&apply(1.0), &w, &proj, &start, 300, 1e-10 / a)?;
    let hi = linalg::lanczos_min(&apply(-1.0), &w, &proj, &start, 300, 1e-10 / a)?;
    Ok(lo.value.abs().max(hi.value.abs()))
}

#[derive(Clone, Debug, Serialize)]
pub struct JReport {
    pub j: f64,
    pub h: f64,
    /// Im ∫ A∇φ((x − α)/(Aλ))·∇ũ ū̃
    pub virial: f64,
    /// |virial| / H
    pub virial_ratio: f64,
}

/// J_A and H for ũ = u − w at modulation state (b, λ), α = 0.
pub fn j_and_h(
    grid: &RadialGrid,
    u: &[Complex64],
    w: &[Complex64],
    lambda: f64,
    b: f64,
    a: f64,
) -> Result<JReport> {
    if !(lambda > 0.0 && a > 0.0) {
        return Err(HwError::Domain(format!("need λ > 0 and A > 0 (got {lambda}, {a})")));
    }
    let cut = Cutoff::new()?;
    let ut: Vec<Complex64> = u.iter().zip(w).map(|(a, b)| a - b).collect();
    let half = grid.half_derivative_norm_sq(Sector::L0, &ut);
    let mass = grid.norm(Sector::L0, &ut).powi(2);
    let h = half + mass / lambda;
    let ws = grid.weights(Sector::L0);
    let big_f = |z: Complex64| 0.375 * z.norm().powf(8.0 / 3.0);
    let nonlinear: f64 = (0..u.len())
        .map(|j| {
            let fw = w[j] * w[j].norm().powf(2.0 / 3.0);
            ws[j] * (big_f(u[j]) - big_f(w[j]) - (fw * ut[j].conj()).re)
        })
        .sum();
    let d = grid.radial_derivative(Sector::L0, &ut);
    let virial: f64 = (0..u.len())
        .map(|j| {
            let r = grid.r()[j];
            ws[j] * a * cut.dphi(r / (a * lambda)) * (d[j] * ut[j].conj()).im
        })
        .sum();
    let j = 0.5 * half + 0.5 * mass / lambda - nonlinear + 0.5 * b * virial;
    Ok(JReport {
        j,
        h,
        virial,
        virial_ratio: if h > 0.0 { virial.abs() / h } else { 0.0 },
    })
}

/// ∫|u|^{8/3}, re-exported for reports.
pub fn potential(grid: &RadialGrid, u: &[Complex64]) -> f64 {
    potential_integral(grid, u)
}

/// Diagnostic report entry.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub check_name: String,
    pub inputs: serde_json::Value,
    pub lhs: f64,
    pub rhs_or_bound: f64,
    pub fitted_constant: Option<f64>,
    pub grid: (usize, f64),
    #[serde(rename = "A")]
    pub a: Option<f64>,
    pub pass: bool,
}
