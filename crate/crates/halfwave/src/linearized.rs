//! Linearized operators L₊ = D + 1 − (5/3)Q^{2/3} and L₋ = D + 1 − Q^{2/3}.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{HwError, Result};
use crate::field::SectorField;
use crate::grid::{RadialGrid, Sector};
use crate::ground_state::GroundState;
use crate::linalg::{self, EigenOutcome, Projector, SolveOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Plus,
    Minus,
}

impl Kind {
    pub fn coefficient(self) -> f64 {
        match self {
            Kind::Plus => 5.0 / 3.0,
            Kind::Minus => 1.0,
        }
    }
}

/// Default relative tolerance for constrained inversions.
pub const SOLVE_TOL: f64 = 1e-12;
const MAX_ITER: usize = 4000;

pub struct LinearizedOperator<'a> {
    pub kind: Kind,
    pub sector: Sector,
    grid: &'a RadialGrid,
    gs: &'a GroundState,
    /// c·Q^{2/3}
    potential: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ConstrainedSolve {
    pub solution: Vec<f64>,
    /// ‖Lf − g‖ (absolute, on the projected problem).
    pub residual: f64,
    /// Largest normalized overlap of the solution with a constraint.
    pub constraint_violation: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

impl<'a> LinearizedOperator<'a> {
    pub fn new(grid: &'a RadialGrid, gs: &'a GroundState, kind: Kind, sector: Sector) -> Self {
        let c = kind.coefficient();
        let potential = gs.potential_weight().into_iter().map(|v| c * v).collect();
        Self {
            kind,
            sector,
            grid,
            gs,
            potential,
            weights: grid.weights(sector),
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply_real(&self, f: &[f64]) -> Vec<f64> {
        let df = self.grid.apply_d_real(self.sector, f);
        df.iter()
            .zip(f)
            .zip(&self.potential)
            .map(|((d, f), v)| d + f - v * f)
            .collect()
    }

    pub fn apply(&self, f: &SectorField) -> Result<SectorField> {
        if f.sector != self.sector {
            return Err(HwError::Config(format!(
                "operator acts on {:?}, field is {:?}",
                self.sector, f.sector
            )));
        }
        self.grid.check_len(f.len())?;
        let df = self.grid.apply_d(self.sector, &f.values);
        let values = df
            .iter()
            .zip(&f.values)
            .zip(&self.potential)
            .map(|((d, f), v)| d + f - f * *v)
            .collect();
        Ok(SectorField::new(self.sector, values))
    }

    pub fn apply_complex(&self, f: &[Complex64]) -> Vec<Complex64> {
        let df = self.grid.apply_d(self.sector, f);
        df.iter()
            .zip(f)
            .zip(&self.potential)
            .map(|((d, f), v)| d + f - f * *v)
            .collect()
    }

    /// Kernel direction on this sector, if any: Q for L₋ on ℓ = 0, ∂_rQ for L₊ on ℓ = 1.
    pub fn kernel(&self) -> Option<Vec<f64>> {
        match (self.kind, self.sector) {
            (Kind::Minus, Sector::L0) => Some(self.gs.q.clone()),
            (Kind::Plus, Sector::L1) => Some(self.grid.radial_derivative_real(Sector::L0, &self.gs.q)),
            _ => None,
        }
    }

    fn preconditioner(&self) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        let symbol = self.grid.real_symbol(|k| 1.0 / (k + 1.0));
        move |v: &[f64]| self.grid.apply_real_symbol(self.sector, v, &symbol)
    }

    /// Solves Lf = g on the orthogonal complement of the kernel and the given constraints.
    pub fn solve_constrained(&self, g: &[f64], constraints: &[Vec<f64>]) -> Result<ConstrainedSolve> {
        self.solve_constrained_tol(g, constraints, SOLVE_TOL)
    }

    pub fn solve_constrained_tol(&self, g: &[f64], constraints: &[Vec<f64>], tol: f64) -> Result<ConstrainedSolve> {
        self.grid.check_len(g.len())?;
        let ip = linalg::Weighted { w: &self.weights };
        let mut all: Vec<Vec<f64>> = Vec::new();
        if let Some(k) = self.kernel() {
            let rel = ip.dot(&k, g).abs() / (ip.norm(&k) * ip.norm(g)).max(f64::MIN_POSITIVE);
            if rel > 1e-8 {
                return Err(HwError::Solvability { inner: rel, tol: 1e-8 });
            }
            all.push(k);
        }
        all.extend(constraints.iter().cloned());
        let proj = Projector::new(&self.weights, &all)?;
        let op = |v: &[f64]| self.apply_real(v);
        let pre = self.preconditioner();
        let SolveOutcome { x, iterations, residual, history } = match self.kind {
            Kind::Minus => linalg::pcg(&op, &pre, g, &self.weights, &proj, tol, MAX_ITER)?,
            Kind::Plus => linalg::pminres(&op, &pre, g, &self.weights, &proj, tol, MAX_ITER)?,
        };
        let mut rhs = g.to_vec();
        proj.apply(&mut rhs);
        Ok(ConstrainedSolve {
            constraint_violation: proj.max_overlap(&x),
            residual: residual * ip.norm(&rhs),
            solution: x,
            iterations,
            history,
        })
    }

    /// Solves Lf = g on the full sector (no kernel there), or errors.
    pub fn solve(&self, g: &[f64]) -> Result<ConstrainedSolve> {
        self.solve_constrained(g, &[])
    }

    /// Smallest Rayleigh quotient on the complement of the constraints.
    pub fn min_eigenvalue_projected(&self, constraints: &[Vec<f64>]) -> Result<EigenOutcome> {
        let proj = Projector::new(&self.weights, constraints)?;
        let op = |v: &[f64]| self.apply_real(v);
        // Smooth, localized start vector with components on every low mode.
        let start: Vec<f64> = self
            .grid
            .r()
            .iter()
            .map(|r| {
                let base = (-r * r / 8.0).exp() + 0.1 / (1.0 + r * r);
                match self.sector {
                    Sector::L0 => base,
                    Sector::L1 => r * base,
                }
            })
            .collect();
        linalg::lanczos_min(&op, &self.weights, &proj, &start, self.grid.n().min(3000), 1e-8)
    }

    /// Dense matrix in isometric coordinates u_j = √w_j f_j (symmetric).
    pub fn dense_isometric(&self) -> DMatrix<f64> {
        let n = self.grid.n();
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0 / sw[j];
            let col = self.apply_real(&e);
            for i in 0..n {
                m[(i, j)] = sw[i] * col[i];
            }
        }
        (&m + m.transpose()) * 0.5
    }

    /// Dense oracle for the projected minimum eigenvalue (small grids only).
    pub fn dense_min_eigenvalue(&self, constraints: &[Vec<f64>]) -> Result<f64> {
        let n = self.grid.n();
        if n > 1024 {
            return Err(HwError::Config(format!("dense eigen-oracle limited to n <= 1024, got {n}")));
        }
        let m = self.dense_isometric();
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        // Orthonormal constraint basis in isometric coordinates.
        let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
        for c in constraints {
            let mut v = nalgebra::DVector::from_iterator(n, c.iter().zip(&sw).map(|(c, s)| c * s));
            for _ in 0..2 {
                for b in &basis {
                    let d = b.dot(&v);
                    v -= b * d;
                }
            }
            let nv = v.norm();
            basis.push(v / nv);
        }
        let mut p = DMatrix::identity(n, n);
        for b in &basis {
            p -= b * b.transpose();
        }
        let big = 10.0 * m.norm();
        let restricted = &p * &m * &p + (DMatrix::identity(n, n) - &p) * big;
        let eig = SymmetricEigen::new(restricted);
        Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// Residual battery of the kernel identities.
#[derive(Clone, Debug, serde::Serialize)]
pub struct KernelReport {
    /// ‖L₋Q‖/‖Q‖
    pub minus_q: f64,
    /// ‖L₊ΛQ + Q‖/‖Q‖
    pub plus_lambda_q: f64,
    /// ‖L₊∂Q‖/‖∂Q‖ on the ℓ = 1 sector
    pub plus_grad_q: f64,
}

pub fn kernel_report(grid: &RadialGrid, gs: &GroundState, with_gradient: bool) -> KernelReport {
    let lm = LinearizedOperator::new(grid, gs, Kind::Minus, Sector::L0);
    let lp = LinearizedOperator::new(grid, gs, Kind::Plus, Sector::L0);
    let nq = grid.norm_real(Sector::L0, &gs.q);
    let minus_q = grid.norm_real(Sector::L0, &lm.apply_real(&gs.q)) / nq;
    let lq = grid.lambda_op_real(Sector::L0, &gs.q);
    let mut r = lp.apply_real(&lq);
    r.iter_mut().zip(&gs.q).for_each(|(r, q)| *r += q);
    let plus_lambda_q = grid.norm_real(Sector::L0, &r) / nq;
    let plus_grad_q = if with_gradient {
        let lp1 = LinearizedOperator::new(grid, gs, Kind::Plus, Sector::L1);
        let dq = grid.radial_derivative_real(Sector::L0, &gs.q);
        grid.norm_real(Sector::L1, &lp1.apply_real(&dq)) / grid.norm_real(Sector::L1, &dq)
    } else {
        f64::NAN
    };
    KernelReport {
        minus_q,
        plus_lambda_q,
        plus_grad_q,
    }
}
