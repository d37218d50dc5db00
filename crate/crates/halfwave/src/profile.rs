//! Approximate blowup profile
//! Q_P = Q + ibS₁₀ + iβS₀₁ + bβT₁₁ + b²T₂₀ + β²T₀₂ + ib³S₃₀ + ib²βS₂₁ + b⁴T₄₀
//! with β = (0, 0, β₃); fields with odd β-degree live on the ℓ = 1 sector.
//!
//! Each correction solves L₊ Re P_kl = Re F_kl or L₋ Im P_kl = Im F_kl, where F_kl
//! is the (k, l) Taylor coefficient of the profile-equation residual with all
//! lower orders inserted. The nonlinear part of F_kl is extracted exactly with
//! truncated jets evaluated on a Gauss–Legendre rule in μ = cos θ.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angular::AngularRule;
use crate::error::{HwError, Result};
use crate::grid::{re, to_complex, RadialGrid, Sector};
use crate::ground_state::GroundState;
use crate::jet::Jet;
use crate::linearized::{Kind, LinearizedOperator};
use crate::snapshot;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Build order of the expansion monomials b^k β^l.
pub const ORDERS: [(usize, usize); 8] = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (4, 0)];

/// Validity range of the expansion parameters.
pub const PARAM_RANGE: f64 = 0.3;

/// Relative size above which a solvability projection is an inconsistency.
pub const SOLVABILITY_LIMIT: f64 = 1e-4;

pub fn sector_of(l: usize) -> Sector {
    if l % 2 == 0 {
        Sector::L0
    } else {
        Sector::L1
    }
}

/// Odd total degree ⇒ purely imaginary coefficient.
pub fn is_imaginary(k: usize, l: usize) -> bool {
    (k + l) % 2 == 1
}

pub fn field_name(k: usize, l: usize) -> String {
    format!("{}{}{}", if is_imaginary(k, l) { 'S' } else { 'T' }, k, l)
}

#[derive(Clone, Debug)]
pub struct ProfileOptions {
    /// Build the β-dependent (ℓ = 1 and β²) orders as well.
    pub beta_orders: bool,
    pub angular_nodes: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            beta_orders: true,
            angular_nodes: 6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct OrderRecord {
    pub k: usize,
    pub l: usize,
    pub name: String,
    /// |(F, kernel)| / (‖F‖‖kernel‖) removed before the solve (0 when no kernel).
    pub solvability_projection: f64,
    /// Norm of the part of F_kl with the wrong parity, relative to the retained part.
    pub wrong_parity: f64,
    pub solve_residual: f64,
    pub iterations: usize,
}

/// The two first-order correctors and the constants they define.
#[derive(Clone, Debug)]
pub struct FirstOrder {
    pub s10: Vec<f64>,
    pub s01: Option<Vec<f64>>,
    /// (1/2)(L₋S₁₀, S₁₀)
    pub e1: f64,
    /// (1/2)(ΛQ, S₁₀)
    pub e1_alt: f64,
    /// 2(L₋S₀₁, S₀₁)
    pub p1: Option<f64>,
    /// −2(∂Q, S₀₁)
    pub p1_alt: Option<f64>,
    /// (S₁₀, Q)/(‖S₁₀‖‖Q‖)
    pub s10_q_overlap: f64,
    pub s10_residual: f64,
    pub s01_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ProfileSet {
    pub q: Vec<f64>,
    /// Real profiles S_kl / T_kl keyed by (k, l).
    pub fields: BTreeMap<(usize, usize), Vec<f64>>,
    pub first: FirstOrder,
    pub records: Vec<OrderRecord>,
    /// ‖ℓ=2 part‖/‖ℓ=0 part‖ of the T₀₂ right-hand side.
    pub t02_l2_ratio: Option<f64>,
    pub rho: RhoSet,
}

#[derive(Clone, Debug)]
pub struct RhoSet {
    pub rho1: Vec<f64>,
    /// ‖L₊ρ₁ − S₁₀‖
    pub rho1_residual: f64,
    /// ρ₂ per unit b (ℓ = 0).
    pub rho2_b: Vec<f64>,
    /// ρ₂ per unit β₃ (ℓ = 1).
    pub rho2_beta: Option<Vec<f64>>,
    /// (Q, RHS_b)/(‖Q‖‖RHS_b‖)
    pub rhs_b_q_overlap: f64,
    /// (Q, RHS_β) evaluated as a 3D integral (angular quadrature).
    pub rhs_beta_q_inner: Option<f64>,
}

/// Q_P and its parameter derivatives, split by sector.
#[derive(Clone, Debug)]
pub struct AssembledProfile {
    pub u0: Vec<Complex64>,
    pub u1: Vec<Complex64>,
    pub db0: Vec<Complex64>,
    pub db1: Vec<Complex64>,
    pub dbeta0: Vec<Complex64>,
    pub dbeta1: Vec<Complex64>,
    pub dbb0: Vec<Complex64>,
    pub dbb1: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct PhiReport {
    pub l0: Vec<Complex64>,
    pub l1: Vec<Complex64>,
    /// Coefficient of P₂(μ); its norm uses the 4π/5 angular factor.
    pub l2: Vec<Complex64>,
    pub l2_norm: f64,
    /// L² norm of the ℓ = 0 and ℓ = 1 parts, i.e. the sectors the ansatz carries.
    pub retained_norm: f64,
    pub h0_norm: f64,
    pub h1_norm: f64,
    pub h2_norm: f64,
}

pub fn check_params(b: f64, beta: f64) -> Result<()> {
    if !(b.abs() <= PARAM_RANGE && beta.abs() <= PARAM_RANGE) {
        return Err(HwError::Domain(format!(
            "expansion parameters (b, β₃) = ({b}, {beta}) outside |·| ≤ {PARAM_RANGE}"
        )));
    }
    Ok(())
}

/// Solves L₋S₁₀ = ΛQ and L₋S₀₁ = −∂Q (both ⊥ Q) and evaluates e₁, p₁.
pub fn build_first_order(grid: &RadialGrid, gs: &GroundState, with_beta: bool) -> Result<FirstOrder> {
    let lm = LinearizedOperator::new(grid, gs, Kind::Minus, Sector::L0);
    let lq = grid.lambda_op_real(Sector::L0, &gs.q);
    let s = lm.solve(&lq)?;
    let s10 = s.solution;
    let e1 = 0.5 * grid.inner_real(Sector::L0, &lm.apply_real(&s10), &s10);
    let e1_alt = 0.5 * grid.inner_real(Sector::L0, &lq, &s10);
    let s10_q_overlap = grid.inner_real(Sector::L0, &s10, &gs.q)
        / (grid.norm_real(Sector::L0, &s10) * grid.norm_real(Sector::L0, &gs.q));
    let (s01, p1, p1_alt, s01_residual) = if with_beta {
        let lm1 = LinearizedOperator::new(grid, gs, Kind::Minus, Sector::L1);
        let dq = grid.radial_derivative_real(Sector::L0, &gs.q);
        let rhs: Vec<f64> = dq.iter().map(|v| -v).collect();
        let s = lm1.solve(&rhs)?;
        let p1 = 2.0 * grid.inner_real(Sector::L1, &lm1.apply_real(&s.solution), &s.solution);
        let p1_alt = -2.0 * grid.inner_real(Sector::L1, &dq, &s.solution);
        (Some(s.solution), Some(p1), Some(p1_alt), Some(s.residual))
    } else {
        (None, None, None, None)
    };
    Ok(FirstOrder {
        s10,
        s01,
        e1,
        e1_alt,
        p1,
        p1_alt,
        s10_q_overlap,
        s10_residual: s.residual,
        s01_residual,
    })
}

struct Builder<'a> {
    grid: &'a RadialGrid,
    gs: &'a GroundState,
    rule: AngularRule,
    /// complex coefficient fields P_kl (sector implied by l)
    known: BTreeMap<(usize, usize), Vec<Complex64>>,
}

impl<'a> Builder<'a> {
    fn derivative(&self, sector: Sector, f: &[Complex64]) -> Vec<Complex64> {
        self.grid.radial_derivative(sector, f)
    }

    /// ∂₃ applied to an ℓ = 1 field f(r)μ: (ℓ=0 part, P₂ coefficient).
    fn d3_of_l1(&self, f: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let fp = self.derivative(Sector::L1, f);
        let r = self.grid.r();
        let l0 = fp.iter().zip(f).zip(r).map(|((d, f), r)| (d + f * (2.0 / r)) / 3.0).collect();
        let l2 = fp.iter().zip(f).zip(r).map(|((d, f), r)| (d - f / *r) * (2.0 / 3.0)).collect();
        (l0, l2)
    }

    /// Nonlinear (k, l) coefficient with every known order inserted, projected on
    /// the sector of l (and the P₂ part for even l).
    fn nonlinear_coefficient(&self, k: usize, l: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.grid.n();
        let mut main = vec![ZERO; n];
        let mut quad = vec![ZERO; n];
        let mut samples = vec![ZERO; self.rule.nodes.len()];
        for j in 0..n {
            for (qi, &mu) in self.rule.nodes.iter().enumerate() {
                let mut u = Jet::constant(Complex64::new(self.gs.q[j], 0.0));
                for (&(kk, ll), f) in &self.known {
                    let ang = if ll % 2 == 1 { mu } else { 1.0 };
                    u.set(kk, ll, f[j] * ang);
                }
                samples[qi] = Jet::focusing_nonlinearity(&u).get(k, l);
            }
            let parts = self.rule.project(&samples);
            main[j] = if l % 2 == 0 { parts.l0 } else { parts.l1 };
            quad[j] = parts.l2;
        }
        (main, quad)
    }

    /// F_kl split into the sector part and the discarded P₂ part.
    fn rhs(&self, k: usize, l: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.grid.n();
        let sector = sector_of(l);
        let (mut f, mut quad) = self.nonlinear_coefficient(k, l);
        if k >= 1 {
            if let Some(p) = self.known.get(&(k - 1, l)) {
                let c = -I * ((k - 1) as f64 / 2.0 + l as f64);
                let lam = self.grid.lambda_op(sector, p);
                for j in 0..n {
                    f[j] += c * p[j] + I * lam[j];
                }
            }
        }
        if l >= 1 {
            if let Some(p) = self.known.get(&(k, l - 1)) {
                match sector_of(l - 1) {
                    Sector::L0 => {
                        let d = self.derivative(Sector::L0, p);
                        for j in 0..n {
                            f[j] -= I * d[j];
                        }
                    }
                    Sector::L1 => {
                        let (d0, d2) = self.d3_of_l1(p);
                        for j in 0..n {
                            f[j] -= I * d0[j];
                            quad[j] -= I * d2[j];
                        }
                    }
                }
            }
        }
        (f, quad)
    }
}

/// Builds every order of the expansion, the constants e₁, p₁ and the ρ-system.
pub fn build_profile(grid: &RadialGrid, gs: &GroundState, opts: &ProfileOptions) -> Result<ProfileSet> {
    let first = build_first_order(grid, gs, opts.beta_orders)?;
    build_higher_orders(grid, gs, first, opts)
}

pub fn build_higher_orders(
    grid: &RadialGrid,
    gs: &GroundState,
    first: FirstOrder,
    opts: &ProfileOptions,
) -> Result<ProfileSet> {
    let mut builder = Builder {
        grid,
        gs,
        rule: AngularRule::new(opts.angular_nodes)?,
        known: BTreeMap::new(),
    };
    let mut fields = BTreeMap::new();
    let mut records = Vec::new();
    let mut t02_l2_ratio = None;

    builder.known.insert((1, 0), first.s10.iter().map(|v| I * v).collect());
    fields.insert((1, 0), first.s10.clone());
    records.push(OrderRecord {
        k: 1,
        l: 0,
        name: field_name(1, 0),
        solvability_projection: 0.0,
        wrong_parity: 0.0,
        solve_residual: first.s10_residual,
        iterations: 0,
    });
    if let Some(s01) = &first.s01 {
        builder.known.insert((0, 1), s01.iter().map(|v| I * v).collect());
        fields.insert((0, 1), s01.clone());
        records.push(OrderRecord {
            k: 0,
            l: 1,
            name: field_name(0, 1),
            solvability_projection: 0.0,
            wrong_parity: 0.0,
            solve_residual: first.s01_residual.unwrap_or(0.0),
            iterations: 0,
        });
    }

    for &(k, l) in ORDERS.iter().skip(2) {
        if l > 0 && !opts.beta_orders {
            continue;
        }
        let sector = sector_of(l);
        let imag = is_imaginary(k, l);
        let (f, quad) = builder.rhs(k, l);
        let (mut target, wrong): (Vec<f64>, Vec<f64>) = if imag {
            (f.iter().map(|z| z.im).collect(), re(&f))
        } else {
            (re(&f), f.iter().map(|z| z.im).collect())
        };
        let tnorm = grid.norm_real(sector, &target);
        let wrong_parity = grid.norm_real(sector, &wrong) / tnorm;
        if sector == Sector::L0 && l == 2 {
            let quad_norm = (4.0 * PI / 5.0 * grid.h()
                * quad
                    .iter()
                    .zip(grid.r())
                    .map(|(z, r)| r * r * z.norm_sqr())
                    .sum::<f64>())
            .sqrt();
            t02_l2_ratio = Some(quad_norm / tnorm);
        }
        let kind = if imag { Kind::Minus } else { Kind::Plus };
        let op = LinearizedOperator::new(grid, gs, kind, sector);
        let mut solvability_projection = 0.0;
        if let Some(kern) = op.kernel() {
            let kk = grid.inner_real(sector, &kern, &kern);
            let c = grid.inner_real(sector, &kern, &target);
            solvability_projection = c.abs() / (kk.sqrt() * tnorm);
            if solvability_projection > SOLVABILITY_LIMIT {
                return Err(HwError::ExpansionInconsistency {
                    k,
                    l,
                    projection: solvability_projection,
                });
            }
            target.iter_mut().zip(&kern).for_each(|(t, q)| *t -= c / kk * q);
        }
        let sol = op.solve(&target)?;
        let coeff: Vec<Complex64> = if imag {
            sol.solution.iter().map(|v| I * v).collect()
        } else {
            to_complex(&sol.solution)
        };
        builder.known.insert((k, l), coeff);
        fields.insert((k, l), sol.solution.clone());
        records.push(OrderRecord {
            k,
            l,
            name: field_name(k, l),
            solvability_projection,
            wrong_parity,
            solve_residual: sol.residual,
            iterations: sol.iterations,
        });
    }

    let rho = build_rho(grid, gs, &first, &fields)?;
    Ok(ProfileSet {
        q: gs.q.clone(),
        fields,
        first,
        records,
        t02_l2_ratio,
        rho,
    })
}

/// L₊ρ₁ = S₁₀ and the two linear pieces of ρ₂.
pub fn build_rho(
    grid: &RadialGrid,
    gs: &GroundState,
    first: &FirstOrder,
    fields: &BTreeMap<(usize, usize), Vec<f64>>,
) -> Result<RhoSet> {
    let lp = LinearizedOperator::new(grid, gs, Kind::Plus, Sector::L0);
    let s10 = &first.s10;
    let rho1 = lp.solve(s10)?.solution;
    let mut r = lp.apply_real(&rho1);
    r.iter_mut().zip(s10).for_each(|(r, s)| *r -= s);
    let rho1_residual = grid.norm_real(Sector::L0, &r);

    let t20 = fields
        .get(&(2, 0))
        .ok_or_else(|| HwError::Config("ρ₂ needs T20".into()))?;
    let q13: Vec<f64> = gs.q.iter().map(|q| q.powf(-1.0 / 3.0)).collect();
    let lrho1 = grid.lambda_op_real(Sector::L0, &rho1);
    let mut rhs_b: Vec<f64> = (0..grid.n())
        .map(|j| 2.0 / 3.0 * q13[j] * s10[j] * rho1[j] + lrho1[j] - 2.0 * t20[j])
        .collect();
    let qq = grid.inner_real(Sector::L0, &gs.q, &gs.q);
    let c = grid.inner_real(Sector::L0, &gs.q, &rhs_b);
    let rhs_b_q_overlap = c / (qq.sqrt() * grid.norm_real(Sector::L0, &rhs_b));
    if rhs_b_q_overlap.abs() > SOLVABILITY_LIMIT {
        return Err(HwError::ExpansionInconsistency {
            k: 1,
            l: 0,
            projection: rhs_b_q_overlap,
        });
    }
    rhs_b.iter_mut().zip(&gs.q).for_each(|(v, q)| *v -= c / qq * q);
    let lm = LinearizedOperator::new(grid, gs, Kind::Minus, Sector::L0);
    let rho2_b = lm.solve(&rhs_b)?.solution;

    let (rho2_beta, rhs_beta_q_inner) = match (&first.s01, fields.get(&(1, 1))) {
        (Some(s01), Some(t11)) => {
            let d = grid.radial_derivative_real(Sector::L0, &rho1);
            let rhs: Vec<f64> = (0..grid.n())
                .map(|j| 2.0 / 3.0 * q13[j] * s01[j] * rho1[j] - d[j] - t11[j])
                .collect();
            // 3D pairing with the radial Q through the angular rule: ∫ μ dμ = 0.
            let rule = AngularRule::new(6)?;
            let ang: f64 = rule.average(&rule.nodes.clone());
            let inner = 4.0 * PI * ang * grid.h()
                * (0..grid.n()).map(|j| grid.r()[j].powi(2) * gs.q[j] * rhs[j]).sum::<f64>();
            let lm1 = LinearizedOperator::new(grid, gs, Kind::Minus, Sector::L1);
            (Some(lm1.solve(&rhs)?.solution), Some(inner))
        }
        _ => (None, None),
    };
    Ok(RhoSet {
        rho1,
        rho1_residual,
        rho2_b,
        rho2_beta,
        rhs_b_q_overlap,
        rhs_beta_q_inner,
    })
}

impl ProfileSet {
    pub fn field(&self, k: usize, l: usize) -> Option<&[f64]> {
        self.fields.get(&(k, l)).map(|v| v.as_slice())
    }

    pub fn e1(&self) -> f64 {
        self.first.e1
    }

    pub fn p1(&self) -> Option<f64> {
        self.first.p1
    }

    /// ((S₁₀,S₁₀) + 2(T₂₀,Q)) / (S₁₀,S₁₀)
    pub fn remark_identity(&self, grid: &RadialGrid) -> f64 {
        let s = &self.first.s10;
        let ss = grid.inner_real(Sector::L0, s, s);
        let tq = grid.inner_real(Sector::L0, &self.fields[&(2, 0)], &self.q);
        (ss + 2.0 * tq) / ss
    }

    fn coeff(&self, k: usize, l: usize) -> Option<Vec<Complex64>> {
        self.fields.get(&(k, l)).map(|f| {
            if is_imaginary(k, l) {
                f.iter().map(|v| I * v).collect()
            } else {
                to_complex(f)
            }
        })
    }

    pub fn assemble(&self, b: f64, beta: f64) -> Result<AssembledProfile> {
        check_params(b, beta)?;
        let n = self.q.len();
        let mut out = AssembledProfile {
            u0: to_complex(&self.q),
            u1: vec![ZERO; n],
            db0: vec![ZERO; n],
            db1: vec![ZERO; n],
            dbeta0: vec![ZERO; n],
            dbeta1: vec![ZERO; n],
            dbb0: vec![ZERO; n],
            dbb1: vec![ZERO; n],
        };
        let pw = |x: f64, e: usize| if e == 0 { 1.0 } else { x.powi(e as i32) };
        for &(k, l) in &ORDERS {
            let Some(p) = self.coeff(k, l) else { continue };
            let c = pw(b, k) * pw(beta, l);
            let cb = if k > 0 { k as f64 * pw(b, k - 1) * pw(beta, l) } else { 0.0 };
            let cbeta = if l > 0 { l as f64 * pw(b, k) * pw(beta, l - 1) } else { 0.0 };
            let cbb = if k > 1 { (k * (k - 1)) as f64 * pw(b, k - 2) * pw(beta, l) } else { 0.0 };
            let (u, db, dbeta, dbb) = if l % 2 == 0 {
                (&mut out.u0, &mut out.db0, &mut out.dbeta0, &mut out.dbb0)
            } else {
                (&mut out.u1, &mut out.db1, &mut out.dbeta1, &mut out.dbb1)
            };
            for j in 0..n {
                u[j] += p[j] * c;
                db[j] += p[j] * cb;
                dbeta[j] += p[j] * cbeta;
                dbb[j] += p[j] * cbb;
            }
        }
        Ok(out)
    }

    /// Φ_P = −[−i(b²/2)∂_bQ_P − ibβ∂_βQ_P − DQ_P − Q_P + ibΛQ_P − iβ∂₃Q_P + |Q_P|^{2/3}Q_P].
    pub fn residual_phi(&self, grid: &RadialGrid, b: f64, beta: f64) -> Result<PhiReport> {
        let p = self.assemble(b, beta)?;
        let n = grid.n();
        let rule = AngularRule::new(16)?;
        let (n0, n1, n2) = nonlinearity_parts(&rule, &p.u0, &p.u1, beta != 0.0);
        let ib = I * b;
        let lam0 = grid.lambda_op(Sector::L0, &p.u0);
        let lam1 = grid.lambda_op(Sector::L1, &p.u1);
        let d0 = grid.apply_d(Sector::L0, &p.u0);
        let d1 = grid.apply_d(Sector::L1, &p.u1);
        let grad0 = grid.radial_derivative(Sector::L0, &p.u0);
        let fp1 = grid.radial_derivative(Sector::L1, &p.u1);
        let r = grid.r();
        let mut l0 = vec![ZERO; n];
        let mut l1 = vec![ZERO; n];
        let mut l2 = vec![ZERO; n];
        for j in 0..n {
            let d3_l0 = (fp1[j] + p.u1[j] * (2.0 / r[j])) / 3.0;
            let d3_l2 = (fp1[j] - p.u1[j] / r[j]) * (2.0 / 3.0);
            let e0 = -I * (b * b / 2.0) * p.db0[j] - ib * beta * p.dbeta0[j] - d0[j] - p.u0[j]
                + ib * lam0[j]
                - I * beta * d3_l0
                + n0[j];
            let e1 = -I * (b * b / 2.0) * p.db1[j] - ib * beta * p.dbeta1[j] - d1[j] - p.u1[j]
                + ib * lam1[j]
                - I * beta * grad0[j]
                + n1[j];
            let e2 = -I * beta * d3_l2 + n2[j];
            l0[j] = -e0;
            l1[j] = -e1;
            l2[j] = -e2;
        }
        let l2_norm = (4.0 * PI / 5.0 * grid.h()
            * l2.iter().zip(r).map(|(z, r)| r * r * z.norm_sqr()).sum::<f64>())
        .sqrt();
        let hm = |m: i32| {
            let sym = grid.symbol(|k| Complex64::new((1.0 + k * k).powf(m as f64 / 2.0), 0.0));
            let a = grid.apply_symbol_unchecked(Sector::L0, &l0, &sym);
            let c = grid.apply_symbol_unchecked(Sector::L1, &l1, &sym);
            (grid.norm(Sector::L0, &a).powi(2) + grid.norm(Sector::L1, &c).powi(2)).sqrt()
        };
        let retained_norm = (grid.norm(Sector::L0, &l0).powi(2) + grid.norm(Sector::L1, &l1).powi(2)).sqrt();
        let h0_norm = (retained_norm * retained_norm + l2_norm * l2_norm).sqrt();
        Ok(PhiReport {
            h1_norm: hm(1),
            h2_norm: hm(2),
            l0,
            l1,
            l2,
            l2_norm,
            retained_norm,
            h0_norm,
        })
    }

    pub fn mass(&self, grid: &RadialGrid, b: f64, beta: f64) -> Result<f64> {
        let p = self.assemble(b, beta)?;
        Ok(sector_mass(grid, &p.u0, &p.u1))
    }

    pub fn energy(&self, grid: &RadialGrid, b: f64, beta: f64) -> Result<f64> {
        let p = self.assemble(b, beta)?;
        Ok(energy(grid, &p.u0, &p.u1))
    }

    pub fn momentum(&self, grid: &RadialGrid, b: f64, beta: f64) -> Result<f64> {
        let p = self.assemble(b, beta)?;
        Ok(momentum3(grid, &p.u0, &p.u1))
    }

    /// ρ = ρ₁ + iρ₂ at parameters (b, β₃): (ℓ = 0 part, ℓ = 1 part).
    pub fn rho_at(&self, b: f64, beta: f64) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.q.len();
        let r0 = (0..n)
            .map(|j| Complex64::new(self.rho.rho1[j], b * self.rho.rho2_b[j]))
            .collect();
        let r1 = match &self.rho.rho2_beta {
            Some(v) => v.iter().map(|x| Complex64::new(0.0, beta * x)).collect(),
            None => vec![ZERO; n],
        };
        (r0, r1)
    }

    pub fn save(&self, dir: &Path, grid: &RadialGrid, extra: serde_json::Value) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for (&(k, l), f) in &self.fields {
            let name = field_name(k, l);
            snapshot::write(&dir.join(format!("{name}.hwbl")), grid, sector_of(l), &to_complex(f))?;
            files.push(name);
        }
        snapshot::write(&dir.join("rho1.hwbl"), grid, Sector::L0, &to_complex(&self.rho.rho1))?;
        snapshot::write(&dir.join("rho2_b.hwbl"), grid, Sector::L0, &to_complex(&self.rho.rho2_b))?;
        if let Some(v) = &self.rho.rho2_beta {
            snapshot::write(&dir.join("rho2_beta.hwbl"), grid, Sector::L1, &to_complex(v))?;
        }
        let manifest = serde_json::json!({
            "e1": self.first.e1,
            "e1_alt": self.first.e1_alt,
            "p1": self.first.p1,
            "p1_alt": self.first.p1_alt,
            "fields": files,
            "orders": self.records,
            "t02_l2_ratio": self.t02_l2_ratio,
            "rho1_residual": self.rho.rho1_residual,
            "rho2_rhs_b_q_overlap": self.rho.rhs_b_q_overlap,
            "rho2_rhs_beta_q_inner": self.rho.rhs_beta_q_inner,
            "remark_identity": self.remark_identity(grid),
            "grid": {"n": grid.n(), "r_max": grid.r_max()},
            "report": extra,
        });
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    /// Reloads a saved profile set against its ground state.
    pub fn load(dir: &Path, grid: &RadialGrid, gs: &GroundState) -> Result<ProfileSet> {
        let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let read = |name: &str| -> Result<Vec<f64>> {
            let s = snapshot::read(&dir.join(format!("{name}.hwbl")))?;
            if s.n != grid.n() || s.r_max != grid.r_max() {
                return Err(HwError::Format(format!("{name} was saved on a different grid")));
            }
            Ok(re(&s.values))
        };
        let mut fields = BTreeMap::new();
        for &(k, l) in &ORDERS {
            let name = field_name(k, l);
            if dir.join(format!("{name}.hwbl")).exists() {
                fields.insert((k, l), read(&name)?);
            }
        }
        let s10 = fields
            .get(&(1, 0))
            .cloned()
            .ok_or_else(|| HwError::Format("profile directory lacks S10".into()))?;
        let s01 = fields.get(&(0, 1)).cloned();
        let getf = |key: &str| manifest.get(key).and_then(|v| v.as_f64());
        let first = FirstOrder {
            s10,
            s01,
            e1: getf("e1").unwrap_or(f64::NAN),
            e1_alt: getf("e1_alt").unwrap_or(f64::NAN),
            p1: getf("p1"),
            p1_alt: getf("p1_alt"),
            s10_q_overlap: 0.0,
            s10_residual: 0.0,
            s01_residual: None,
        };
        let records: Vec<OrderRecord> = serde_json::from_value(manifest["orders"].clone())?;
        let rho2_beta = if dir.join("rho2_beta.hwbl").exists() { Some(read("rho2_beta")?) } else { None };
        Ok(ProfileSet {
            q: gs.q.clone(),
            fields,
            first,
            records,
            t02_l2_ratio: getf("t02_l2_ratio"),
            rho: RhoSet {
                rho1: read("rho1")?,
                rho1_residual: getf("rho1_residual").unwrap_or(f64::NAN),
                rho2_b: read("rho2_b")?,
                rho2_beta,
                rhs_b_q_overlap: getf("rho2_rhs_b_q_overlap").unwrap_or(f64::NAN),
                rhs_beta_q_inner: getf("rho2_rhs_beta_q_inner"),
            },
        })
    }
}

/// |u|^{2/3}u for u = u₀(r) + u₁(r)μ projected onto P₀, P₁, P₂.
pub fn nonlinearity_parts(
    rule: &AngularRule,
    u0: &[Complex64],
    u1: &[Complex64],
    angular: bool,
) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
    let n = u0.len();
    if !angular {
        let n0 = u0.iter().map(|u| u * u.norm().powf(2.0 / 3.0)).collect();
        return (n0, vec![ZERO; n], vec![ZERO; n]);
    }
    let mut a = vec![ZERO; n];
    let mut b = vec![ZERO; n];
    let mut c = vec![ZERO; n];
    let mut s = vec![ZERO; rule.nodes.len()];
    for j in 0..n {
        for (q, &mu) in rule.nodes.iter().enumerate() {
            let u = u0[j] + u1[j] * mu;
            s[q] = u * u.norm().powf(2.0 / 3.0);
        }
        let p = rule.project(&s);
        a[j] = p.l0;
        b[j] = p.l1;
        c[j] = p.l2;
    }
    (a, b, c)
}

pub fn sector_mass(grid: &RadialGrid, u0: &[Complex64], u1: &[Complex64]) -> f64 {
    grid.inner(Sector::L0, u0, u0).re + grid.inner(Sector::L1, u1, u1).re
}

/// ∫|u₀ + u₁μ|^{8/3} d³x.
pub fn potential_mixed(grid: &RadialGrid, u0: &[Complex64], u1: &[Complex64]) -> f64 {
    let rule = AngularRule::new(24).expect("static rule");
    let w = grid.weights(Sector::L0);
    (0..u0.len())
        .map(|j| {
            let vals: Vec<f64> = rule
                .nodes
                .iter()
                .map(|mu| (u0[j] + u1[j] * mu).norm().powf(8.0 / 3.0))
                .collect();
            w[j] * rule.average(&vals)
        })
        .sum()
}

/// E = (1/2)(u, Du) − (3/8)∫|u|^{8/3}.
pub fn energy(grid: &RadialGrid, u0: &[Complex64], u1: &[Complex64]) -> f64 {
    let kin = grid.half_derivative_norm_sq(Sector::L0, u0) + grid.half_derivative_norm_sq(Sector::L1, u1);
    let pot = if u1.iter().all(|z| z.norm() == 0.0) {
        crate::ground_state::potential_integral(grid, u0)
    } else {
        potential_mixed(grid, u0, u1)
    };
    0.5 * kin - 0.375 * pot
}

/// P₃ = ∫ −i ∂₃u ū for u = u₀(r) + u₁(r)μ.
pub fn momentum3(grid: &RadialGrid, u0: &[Complex64], u1: &[Complex64]) -> f64 {
    let d0 = grid.radial_derivative(Sector::L0, u0);
    let d1 = grid.radial_derivative(Sector::L1, u1);
    let h = grid.h();
    let mut acc = ZERO;
    for (j, &r) in grid.r().iter().enumerate() {
        let a0 = (d1[j] + u1[j] * (2.0 / r)) / 3.0;
        acc += (d0[j] * u1[j].conj() * (4.0 * PI / 3.0) + a0 * u0[j].conj() * (4.0 * PI)) * (r * r * h);
    }
    (-I * acc).re
}
