//! Krylov solvers for operators that are self-adjoint in a diagonal-weighted inner
//! product ⟨a, b⟩ = Σ w_j a_j b_j, with optional projection onto the
//! orthogonal complement of a few constraint vectors.

use crate::error::{HwError, Result};

pub type Op<'a> = dyn Fn(&[f64]) -> Vec<f64> + 'a;

/// Diagonal inner product.
#[derive(Clone, Debug)]
pub struct Weighted<'a> {
    pub w: &'a [f64],
}

impl Weighted<'_> {
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).max(0.0).sqrt()
    }
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

/// Orthogonal projector onto the complement of span{c_i}.
#[derive(Clone, Debug)]
pub struct Projector {
    basis: Vec<Vec<f64>>,
    w: Vec<f64>,
}

impl Projector {
    /// Orthonormalizes the constraint vectors (modified Gram–Schmidt, twice).
    pub fn new(w: &[f64], constraints: &[Vec<f64>]) -> Result<Self> {
        let ip = Weighted { w };
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for c in constraints {
            let scale = ip.norm(c);
            if scale == 0.0 {
                return Err(HwError::Domain("zero constraint vector".into()));
            }
            let mut v = c.clone();
            for _ in 0..2 {
                for b in &basis {
                    let d = ip.dot(b, &v);
                    axpy(&mut v, -d, b);
                }
            }
            let nv = ip.norm(&v);
            if nv < 1e-10 * scale {
                return Err(HwError::Domain("constraint vectors are linearly dependent".into()));
            }
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
        Ok(Self { basis, w: w.to_vec() })
    }

    pub fn empty(w: &[f64]) -> Self {
        Self {
            basis: Vec::new(),
            w: w.to_vec(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn apply(&self, v: &mut [f64]) {
        let ip = Weighted { w: &self.w };
        for _ in 0..2 {
            for b in &self.basis {
                let d = ip.dot(b, v);
                axpy(v, -d, b);
            }
        }
    }

    /// Largest |⟨c_i, v⟩| / ‖v‖ over the orthonormal constraint basis.
    pub fn max_overlap(&self, v: &[f64]) -> f64 {
        let ip = Weighted { w: &self.w };
        let nv = ip.norm(v);
        self.basis
            .iter()
            .map(|b| ip.dot(b, v).abs() / nv)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual ‖b − Ax‖/‖b‖ (on the projected problem).
    pub residual: f64,
    pub history: Vec<f64>,
}

fn true_residual(apply: &Op, proj: &Projector, b: &[f64], x: &[f64], ip: &Weighted) -> f64 {
    let mut r: Vec<f64> = apply(x);
    proj.apply(&mut r);
    r.iter_mut().zip(b).for_each(|(r, b)| *r = b - *r);
    ip.norm(&r) / ip.norm(b)
}

/// Preconditioned conjugate gradients for a positive (on the projected range) operator.
pub fn pcg(
    apply: &Op,
    precond: &Op,
    b: &[f64],
    w: &[f64],
    proj: &Projector,
    tol: f64,
    max_iter: usize,
) -> Result<SolveOutcome> {
    let ip = Weighted { w };
    let mut rhs = b.to_vec();
    proj.apply(&mut rhs);
    let bnorm = ip.norm(&rhs);
    let n = b.len();
    if bnorm == 0.0 {
        return Ok(SolveOutcome { x: vec![0.0; n], iterations: 0, residual: 0.0, history: vec![0.0] });
    }
    let pm = |v: &[f64]| {
        let mut z = precond(v);
        proj.apply(&mut z);
        z
    };
    let mut x = vec![0.0; n];
    let mut r = rhs.clone();
    let mut z = pm(&r);
    let mut p = z.clone();
    let mut rz = ip.dot(&r, &z);
    let mut history = vec![1.0];
    for it in 1..=max_iter {
        let mut ap = apply(&p);
        proj.apply(&mut ap);
        let pap = ip.dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(HwError::IterationDiverged {
                what: "conjugate gradients (operator not positive on the projected range)",
                iterations: it,
                last: *history.last().unwrap(),
                history,
            });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        let rel = ip.norm(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            proj.apply(&mut x);
            let residual = true_residual(apply, proj, &rhs, &x, &ip);
            if residual <= 10.0 * tol {
                return Ok(SolveOutcome { x, iterations: it, residual, history });
            }
            // recurrence drifted: restart from the true residual
            r = rhs.clone();
            let mut ax = apply(&x);
            proj.apply(&mut ax);
            axpy(&mut r, -1.0, &ax);
        }
        z = pm(&r);
        let rz_new = ip.dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(HwError::IterationDiverged {
        what: "conjugate gradients",
        iterations: max_iter,
        last: *history.last().unwrap(),
        history,
    })
}

/// Preconditioned MINRES for a self-adjoint, possibly indefinite operator
/// (Paige–Saunders recurrences in the weighted inner product).
pub fn pminres(
    apply: &Op,
    precond: &Op,
    b: &[f64],
    w: &[f64],
    proj: &Projector,
    tol: f64,
    max_iter: usize,
) -> Result<SolveOutcome> {
    let ip = Weighted { w };
    let n = b.len();
    let mut rhs = b.to_vec();
    proj.apply(&mut rhs);
    if ip.norm(&rhs) == 0.0 {
        return Ok(SolveOutcome { x: vec![0.0; n], iterations: 0, residual: 0.0, history: vec![0.0] });
    }
    let pm = |v: &[f64]| {
        let mut z = precond(v);
        proj.apply(&mut z);
        z
    };
    let pa = |v: &[f64]| {
        let mut z = apply(v);
        proj.apply(&mut z);
        z
    };

    let mut x = vec![0.0; n];
    let mut history = vec![1.0];
    let mut total = 0;
    // Outer restarts guard against loss of accuracy in the recurrences.
    for _restart in 0..4 {
        let mut r0 = rhs.clone();
        if total > 0 {
            axpy(&mut r0, -1.0, &pa(&x));
        }
        let mut r1 = r0.clone();
        let mut y = pm(&r1);
        let beta1 = ip.dot(&r1, &y);
        if !(beta1 >= 0.0) {
            return Err(HwError::Domain("preconditioner is not positive definite".into()));
        }
        let beta1 = beta1.sqrt();
        if beta1 == 0.0 {
            break;
        }
        let mut r2 = r1.clone();
        let (mut oldb, mut beta, mut dbar, mut epsln, mut phibar) = (0.0, beta1, 0.0, 0.0, beta1);
        let (mut cs, mut sn) = (-1.0_f64, 0.0_f64);
        let mut wv = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        let mut w1;
        let phibar0 = beta1;
        let mut inner_its = 0;
        while total < max_iter {
            inner_its += 1;
            total += 1;
            let s = 1.0 / beta;
            let v: Vec<f64> = y.iter().map(|y| y * s).collect();
            y = pa(&v);
            if inner_its >= 2 {
                axpy(&mut y, -beta / oldb, &r1);
            }
            let alfa = ip.dot(&v, &y);
            axpy(&mut y, -alfa / beta, &r2);
            r1 = std::mem::replace(&mut r2, y.clone());
            y = pm(&r2);
            oldb = beta;
            beta = ip.dot(&r2, &y).max(0.0).sqrt();
            let oldeps = epsln;
            let delta = cs * dbar + sn * alfa;
            let gbar = sn * dbar - cs * alfa;
            epsln = sn * beta;
            dbar = -cs * beta;
            let gamma = gbar.hypot(beta).max(f64::EPSILON);
            cs = gbar / gamma;
            sn = beta / gamma;
            let phi = cs * phibar;
            phibar *= sn;
            w1 = std::mem::take(&mut w2);
            w2 = std::mem::take(&mut wv);
            wv = v
                .iter()
                .zip(&w1)
                .zip(&w2)
                .map(|((v, a), b)| (v - oldeps * a - delta * b) / gamma)
                .collect();
            axpy(&mut x, phi, &wv);
            let est = phibar / phibar0;
            history.push(est);
            if est <= 0.1 * tol || beta == 0.0 {
                break;
            }
        }
        let res = true_residual(apply, proj, &rhs, &x, &ip);
        if res <= tol {
            proj.apply(&mut x);
            return Ok(SolveOutcome { x, iterations: total, residual: res, history });
        }
        if total >= max_iter {
            break;
        }
    }
    let res = true_residual(apply, proj, &rhs, &x, &ip);
    if res <= tol {
        proj.apply(&mut x);
        return Ok(SolveOutcome { x, iterations: total, residual: res, history });
    }
    Err(HwError::IterationDiverged {
        what: "MINRES",
        iterations: total,
        last: res,
        history,
    })
}

#[derive(Clone, Debug)]
pub struct EigenOutcome {
    pub value: f64,
    pub vector: Vec<f64>,
    /// ‖Ly − θy‖ for the normalized Ritz vector y.
    pub residual: f64,
    pub iterations: usize,
}

/// Number of eigenvalues of the symmetric tridiagonal (a, b) below x.
fn sturm_count(a: &[f64], b: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..a.len() {
        let off = if i == 0 { 0.0 } else { b[i - 1] * b[i - 1] };
        q = a[i] - x - if i == 0 { 0.0 } else { off / q };
        if q == 0.0 {
            q = -f64::EPSILON * (a[i].abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiag_min(a: &[f64], b: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..a.len() {
        let rad = if i > 0 { b[i - 1].abs() } else { 0.0 } + if i < b.len() { b[i].abs() } else { 0.0 };
        lo = lo.min(a[i] - rad);
        hi = hi.max(a[i] + rad);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(a, b, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * (lo.abs() + hi.abs()).max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvector of the tridiagonal for an accurately known eigenvalue, by inverse iteration.
fn tridiag_vector(a: &[f64], b: &[f64], theta: f64) -> Vec<f64> {
    let m = a.len();
    let shift = theta - 1e-13 * (1.0 + theta.abs());
    let mut y = vec![1.0; m];
    for _ in 0..3 {
        // Thomas algorithm on (T − shift) z = y
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut denom = a[0] - shift;
        c[0] = if m > 1 { b[0] / denom } else { 0.0 };
        d[0] = y[0] / denom;
        for i in 1..m {
            denom = a[i] - shift - b[i - 1] * c[i - 1];
            if denom == 0.0 {
                denom = 1e-300;
            }
            c[i] = if i + 1 < m { b[i] / denom } else { 0.0 };
            d[i] = (y[i] - b[i - 1] * d[i - 1]) / denom;
        }
        let mut z = vec![0.0; m];
        z[m - 1] = d[m - 1];
        for i in (0..m - 1).rev() {
            z[i] = d[i] - c[i] * z[i + 1];
        }
        let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        y = z.iter().map(|v| v / nz).collect();
    }
    y
}

/// Smallest eigenvalue of a weighted-self-adjoint operator on the projected range,
/// by Lanczos with full reorthogonalization.
pub fn lanczos_min(
    apply: &Op,
    w: &[f64],
    proj: &Projector,
    start: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<EigenOutcome> {
    lanczos_impl(apply, w, proj, start, max_iter, tol, false)
}

/// Like [`lanczos_min`], but returns the best Ritz pair when the iteration budget is
/// exhausted; the reported residual then tells how far from converged it is.
pub fn lanczos_min_budget(
    apply: &Op,
    w: &[f64],
    proj: &Projector,
    start: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<EigenOutcome> {
    lanczos_impl(apply, w, proj, start, max_iter, tol, true)
}

fn lanczos_impl(
    apply: &Op,
    w: &[f64],
    proj: &Projector,
    start: &[f64],
    max_iter: usize,
    tol: f64,
    keep_best: bool,
) -> Result<EigenOutcome> {
    let ip = Weighted { w };
    let n = start.len();
    let mut q = start.to_vec();
    proj.apply(&mut q);
    let nq = ip.norm(&q);
    if nq == 0.0 {
        return Err(HwError::Domain("Lanczos start vector lies in the constraint span".into()));
    }
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::INFINITY;
    let check_every = 10;
    for it in 0..max_iter.min(n) {
        let qk = &basis[it];
        let mut z = apply(qk);
        proj.apply(&mut z);
        let a = ip.dot(qk, &z);
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let d = ip.dot(v, &z);
                axpy(&mut z, -d, v);
            }
        }
        proj.apply(&mut z);
        let bnext = ip.norm(&z);
        let done = bnext < 1e-14 * a.abs().max(1.0);
        if (it + 1) % check_every == 0 || done || it + 1 == max_iter.min(n) {
            let theta = tridiag_min(&alpha, &beta);
            let y = tridiag_vector(&alpha, &beta, theta);
            // Ritz residual bound |β_m · y_m|
            let bound = (bnext * y[y.len() - 1]).abs();
            last = bound;
            if bound <= tol || done || (keep_best && it + 1 == max_iter.min(n)) {
                let mut vec = vec![0.0; n];
                for (c, v) in y.iter().zip(&basis) {
                    axpy(&mut vec, *c, v);
                }
                let nv = ip.norm(&vec);
                vec.iter_mut().for_each(|v| *v /= nv);
                let mut lv = apply(&vec);
                proj.apply(&mut lv);
                axpy(&mut lv, -theta, &vec);
                return Ok(EigenOutcome {
                    value: theta,
                    vector: vec,
                    residual: ip.norm(&lv),
                    iterations: it + 1,
                });
            }
        }
        beta.push(bnext);
        basis.push(z.iter().map(|v| v / bnext).collect());
    }
    Err(HwError::IterationDiverged {
        what: "Lanczos eigensolver",
        iterations: max_iter,
        last,
        history: vec![last],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap(v: &[f64]) -> Vec<f64> {
        // 1D Dirichlet Laplacian + shift: symmetric positive definite
        let n = v.len();
        (0..n)
            .map(|i| {
                let l = if i > 0 { v[i - 1] } else { 0.0 };
                let r = if i + 1 < n { v[i + 1] } else { 0.0 };
                2.0 * v[i] - l - r + 0.01 * v[i]
            })
            .collect()
    }

    #[test]
    fn cg_and_minres_solve_spd_system() {
        let n = 200;
        let w = vec![1.0; n];
        let b: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.1).sin()).collect();
        let proj = Projector::empty(&w);
        let id = |v: &[f64]| v.to_vec();
        let a = pcg(&lap, &id, &b, &w, &proj, 1e-12, 5000).unwrap();
        let m = pminres(&lap, &id, &b, &w, &proj, 1e-12, 5000).unwrap();
        let diff: f64 = a.x.iter().zip(&m.x).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let scale = a.x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9 * scale);
    }

    #[test]
    fn minres_handles_indefinite_diagonal() {
        let n = 50;
        let w = vec![1.0; n];
        let diag: Vec<f64> = (0..n).map(|i| i as f64 - 10.5).collect();
        let op = |v: &[f64]| v.iter().zip(&diag).map(|(a, d)| a * d).collect::<Vec<_>>();
        let b = vec![1.0; n];
        let proj = Projector::empty(&w);
        let id = |v: &[f64]| v.to_vec();
        let s = pminres(&op, &id, &b, &w, &proj, 1e-12, 500).unwrap();
        for (x, d) in s.x.iter().zip(&diag) {
            assert!((x - 1.0 / d).abs() < 1e-9);
        }
    }

    #[test]
    fn lanczos_finds_smallest_eigenvalue_with_projection() {
        let n = 120;
        let w = vec![1.0; n];
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let op = |v: &[f64]| v.iter().zip(&diag).map(|(a, d)| a * d).collect::<Vec<_>>();
        let start = vec![1.0; n];
        let none = Projector::empty(&w);
        let e = lanczos_min(&op, &w, &none, &start, n, 1e-10).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9);
        let mut e0 = vec![0.0; n];
        e0[0] = 1.0;
        let proj = Projector::new(&w, &[e0]).unwrap();
        let e = lanczos_min(&op, &w, &proj, &start, n, 1e-10).unwrap();
        assert!((e.value - 2.0).abs() < 1e-9);
    }
}
