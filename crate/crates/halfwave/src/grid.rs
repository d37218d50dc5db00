//! Radial grids and the exact spectral calculus on the ℓ = 0 and ℓ = 1 sectors.
//!
//! On the ℓ = 0 sector a field f(r) is stored through g = r·f, which vanishes at
//! both ends of [0, r_max]; the discrete sine transform of g diagonalizes D.
//! The ℓ = 1 sector (fields f(r)·x₃/r) uses a dense trapezoid quadrature of the
//! order-one spherical Hankel transform.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{HwError, Result};

/// Angular sector of a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    /// Radially symmetric functions.
    L0,
    /// Functions of the form f(r)·x₃/r.
    L1,
}

impl Sector {
    pub fn tag(self) -> u8 {
        match self {
            Sector::L0 => 0,
            Sector::L1 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Sector::L0),
            1 => Ok(Sector::L1),
            t => Err(HwError::Format(format!("unknown sector tag {t}"))),
        }
    }

    /// Angular factor of the L² norm: 4π for ℓ = 0 and 4π/3 for ℓ = 1.
    pub fn solid_angle(self) -> f64 {
        match self {
            Sector::L0 => 4.0 * PI,
            Sector::L1 => 4.0 * PI / 3.0,
        }
    }
}

/// Spherical Bessel function j₁.
pub fn sph_j1(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 0.5 {
        // x Σ (−x²/2)^m / (m! (2m+3)!!)
        let y = -0.5 * x * x;
        let mut term = 1.0 / 3.0;
        let mut sum = term;
        for m in 1..10 {
            term *= y / (m as f64 * (2 * m + 3) as f64);
            sum += term;
        }
        x * sum
    } else {
        let (s, c) = x.sin_cos();
        s / (x * x) - c / x
    }
}

/// Uniform radial mesh r_j = j·h, h = r_max/(n+1), with its spectral nodes ρ_k = kπ/r_max.
pub struct RadialGrid {
    n: usize,
    r_max: f64,
    h: f64,
    r: Vec<f64>,
    rho: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    j1_table: OnceLock<Vec<f64>>,
}

impl fmt::Debug for RadialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialGrid")
            .field("n", &self.n)
            .field("r_max", &self.r_max)
            .finish()
    }
}

impl RadialGrid {
    pub fn new(n: usize, r_max: f64) -> Result<Self> {
        if n < 16 {
            return Err(HwError::Config(format!("grid needs n >= 16, got {n}")));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(HwError::Config(format!("r_max must be positive, got {r_max}")));
        }
        let big_n = n + 1;
        let h = r_max / big_n as f64;
        let r = (1..=n).map(|j| j as f64 * h).collect();
        let rho = (1..=n).map(|k| k as f64 * PI / r_max).collect();
        let fft = FftPlanner::new().plan_fft_forward(2 * big_n);
        Ok(Self {
            n,
            r_max,
            h,
            r,
            rho,
            fft,
            j1_table: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn r(&self) -> &[f64] {
        &self.r
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    pub fn d_rho(&self) -> f64 {
        PI / self.r_max
    }

    /// Same mesh geometry at a different resolution or radius.
    pub fn same_spec(&self, other: &RadialGrid) -> bool {
        self.n == other.n && self.r_max == other.r_max
    }

    /// Quadrature weights of the real-space inner product on a sector.
    pub fn weights(&self, sector: Sector) -> Vec<f64> {
        let c = sector.solid_angle() * self.h;
        self.r.iter().map(|r| c * r * r).collect()
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(HwError::Config(format!(
                "field of length {len} does not live on a grid with n = {}",
                self.n
            )));
        }
        Ok(())
    }

    // ---- fast trigonometric sums -------------------------------------------------

    /// y_k = Σ_j x_j sin(πjk/N), j, k = 1..n.
    pub(crate) fn sine_sum(&self, x: &[Complex64]) -> Vec<Complex64> {
        let big_n = self.n + 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * big_n];
        for (j, &v) in x.iter().enumerate() {
            buf[j + 1] = v;
            buf[2 * big_n - j - 1] = -v;
        }
        self.fft.process(&mut buf);
        let half_i = Complex64::new(0.0, 0.5);
        buf[1..=self.n].iter().map(|z| z * half_i).collect()
    }

    /// y_j = Σ_k c_k cos(πjk/N), j, k = 1..n.
    pub(crate) fn cosine_sum(&self, c: &[Complex64]) -> Vec<Complex64> {
        let big_n = self.n + 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * big_n];
        for (k, &v) in c.iter().enumerate() {
            buf[k + 1] = v;
            buf[2 * big_n - k - 1] = v;
        }
        self.fft.process(&mut buf);
        buf[1..=self.n].iter().map(|z| z * 0.5).collect()
    }

    /// (Σ_j s_j sin(πjk/N), Σ_j c_j cos(πjk/N)) for real inputs with a single FFT:
    /// the odd extension of s transforms to an imaginary sequence and the even
    /// extension of c to a real one.
    pub(crate) fn sine_cosine_real(&self, s: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let big_n = self.n + 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * big_n];
        for j in 0..self.n {
            buf[j + 1] = Complex64::new(s[j] + c[j], 0.0);
            buf[2 * big_n - j - 1] = Complex64::new(c[j] - s[j], 0.0);
        }
        self.fft.process(&mut buf);
        buf[1..=self.n].iter().map(|z| (-0.5 * z.im, 0.5 * z.re)).unzip()
    }

    // ---- ℓ = 0 sine representation ---------------------------------------------------

    /// Sine coefficients a_k of g = r·f, so that r_j f_j = Σ_k a_k sin(ρ_k r_j).
    pub fn sine_coeffs(&self, f: &[Complex64]) -> Vec<Complex64> {
        let g: Vec<Complex64> = f.iter().zip(&self.r).map(|(v, r)| v * r).collect();
        let scale = 2.0 / (self.n + 1) as f64;
        self.sine_sum(&g).into_iter().map(|z| z * scale).collect()
    }

    pub fn from_sine_coeffs(&self, a: &[Complex64]) -> Vec<Complex64> {
        self.sine_sum(a)
            .into_iter()
            .zip(&self.r)
            .map(|(g, r)| g / r)
            .collect()
    }

    /// Derivative g' of g = r·f, evaluated from the sine coefficients.
    fn g_prime(&self, a: &[Complex64]) -> Vec<Complex64> {
        let da: Vec<Complex64> = a.iter().zip(&self.rho).map(|(c, k)| c * k).collect();
        self.cosine_sum(&da)
    }

    /// Evaluates an ℓ = 0 field at arbitrary radii through its sine series
    /// (zero outside the domain).
    pub fn eval_l0(&self, f: &[Complex64], radii: &[f64]) -> Vec<Complex64> {
        let a = self.sine_coeffs(f);
        let theta_scale = PI / self.r_max;
        radii
            .par_iter()
            .map(|&x| {
                if x <= 0.0 {
                    return self.eval_l0_origin(&a);
                }
                if x >= self.r_max {
                    return Complex64::new(0.0, 0.0);
                }
                // sin((k+1)θ) = 2cosθ sin(kθ) − sin((k−1)θ)
                let theta = theta_scale * x;
                let two_c = 2.0 * theta.cos();
                let (mut s_prev, mut s_cur) = (0.0, theta.sin());
                let mut acc = Complex64::new(0.0, 0.0);
                for ak in &a {
                    acc += ak * s_cur;
                    let s_next = two_c * s_cur - s_prev;
                    s_prev = s_cur;
                    s_cur = s_next;
                }
                acc / x
            })
            .collect()
    }

    fn eval_l0_origin(&self, a: &[Complex64]) -> Complex64 {
        a.iter().zip(&self.rho).map(|(c, k)| c * k).sum()
    }

    // ---- ℓ = 1 dense quadrature ------------------------------------------------------

    /// Table j₁(ρ_k r_j), row-major in k. Built on first use (n² doubles).
    fn j1(&self) -> &[f64] {
        self.j1_table.get_or_init(|| {
            let n = self.n;
            let mut t = vec![0.0; n * n];
            t.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
                let rho = self.rho[k];
                for (j, v) in row.iter_mut().enumerate() {
                    *v = sph_j1(rho * self.r[j]);
                }
            });
            t
        })
    }

    /// F_k = 4πh Σ_j r_j² f_j j₁(ρ_k r_j).
    fn hankel1_forward(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let table = self.j1();
        let c = 4.0 * PI * self.h;
        let wf: Vec<Complex64> = f.iter().zip(&self.r).map(|(v, r)| v * (c * r * r)).collect();
        table
            .par_chunks(n)
            .map(|row| row.iter().zip(&wf).map(|(t, v)| v * t).sum())
            .collect()
    }

    /// f_j = (Δρ/2π²) Σ_k ρ_k² F_k j₁(ρ_k r_j).
    fn hankel1_inverse(&self, big_f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let table = self.j1();
        let c = self.d_rho() / (2.0 * PI * PI);
        let wf: Vec<Complex64> = big_f
            .iter()
            .zip(&self.rho)
            .map(|(v, k)| v * (c * k * k))
            .collect();
        const BLOCK: usize = 64;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        out.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
            let j0 = b * BLOCK;
            for (k, w) in wf.iter().enumerate() {
                let row = &table[k * n + j0..k * n + j0 + chunk.len()];
                for (o, t) in chunk.iter_mut().zip(row) {
                    *o += w * t;
                }
            }
        });
        out
    }

    // ---- sector-generic API ----------------------------------------------------------

    /// Samples of the 3D Fourier transform at the spectral nodes
    /// (for ℓ = 1: the order-one Hankel profile of the x₃ component).
    pub fn forward_transform(&self, sector: Sector, f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(f.len())?;
        Ok(match sector {
            Sector::L0 => {
                let a = self.sine_coeffs(f);
                let c = 2.0 * PI * self.r_max;
                a.iter().zip(&self.rho).map(|(v, k)| v * (c / k)).collect()
            }
            Sector::L1 => self.hankel1_forward(f),
        })
    }

    pub fn inverse_transform(&self, sector: Sector, big_f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(big_f.len())?;
        Ok(match sector {
            Sector::L0 => {
                let c = 1.0 / (2.0 * PI * self.r_max);
                let a: Vec<Complex64> =
                    big_f.iter().zip(&self.rho).map(|(v, k)| v * (c * k)).collect();
                self.from_sine_coeffs(&a)
            }
            Sector::L1 => self.hankel1_inverse(big_f),
        })
    }

    /// Applies a precomputed symbol m(ρ_k).
    pub fn apply_symbol(&self, sector: Sector, f: &[Complex64], m: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(f.len())?;
        self.check_len(m.len())?;
        if let Some(mode) = m.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(HwError::NonFiniteSymbol { mode: mode + 1 });
        }
        Ok(self.apply_symbol_unchecked(sector, f, m))
    }

    pub(crate) fn apply_symbol_unchecked(&self, sector: Sector, f: &[Complex64], m: &[Complex64]) -> Vec<Complex64> {
        match sector {
            Sector::L0 => {
                let mut a = self.sine_coeffs(f);
                a.iter_mut().zip(m).for_each(|(c, s)| *c *= s);
                self.from_sine_coeffs(&a)
            }
            Sector::L1 => {
                let mut big_f = self.hankel1_forward(f);
                big_f.iter_mut().zip(m).for_each(|(c, s)| *c *= s);
                self.hankel1_inverse(&big_f)
            }
        }
    }

    /// Real symbol applied to a real field.
    pub fn apply_real_symbol(&self, sector: Sector, f: &[f64], m: &[f64]) -> Vec<f64> {
        let fc = to_complex(f);
        let mc = to_complex(m);
        self.apply_symbol_unchecked(sector, &fc, &mc)
            .into_iter()
            .map(|z| z.re)
            .collect()
    }

    /// Evaluates a symbol on the spectral nodes.
    pub fn symbol(&self, m: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        self.rho.iter().map(|&k| m(k)).collect()
    }

    pub fn real_symbol(&self, m: impl Fn(f64) -> f64) -> Vec<f64> {
        self.rho.iter().map(|&k| m(k)).collect()
    }

    /// D = |∇|.
    pub fn apply_d(&self, sector: Sector, f: &[Complex64]) -> Vec<Complex64> {
        let m = to_complex(&self.rho);
        self.apply_symbol_unchecked(sector, f, &m)
    }

    pub fn apply_d_real(&self, sector: Sector, f: &[f64]) -> Vec<f64> {
        self.apply_real_symbol(sector, f, &self.rho)
    }

    /// Radial derivative ∂_r f.
    pub fn radial_derivative(&self, sector: Sector, f: &[Complex64]) -> Vec<Complex64> {
        match sector {
            Sector::L0 => {
                let a = self.sine_coeffs(f);
                let gp = self.g_prime(&a);
                gp.iter()
                    .zip(f)
                    .zip(&self.r)
                    .map(|((gp, f), r)| (gp - f) / r)
                    .collect()
            }
            Sector::L1 => self.fd4_derivative(f),
        }
    }

    /// Adjoint of the ℓ = 0 spectral ∂_r in the weighted inner product
    /// (discrete −v' − 2v/r).
    pub fn radial_derivative_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let rv: Vec<Complex64> = v.iter().zip(&self.r).map(|(v, r)| v * r).collect();
        let c: Vec<Complex64> = self.cosine_sum(&rv).into_iter().zip(&self.rho).map(|(c, k)| c * k).collect();
        let scale = 2.0 / (self.n + 1) as f64;
        self.sine_sum(&c)
            .into_iter()
            .zip(v)
            .zip(&self.r)
            .map(|((s, v), r)| (s * scale - v) / r)
            .collect()
    }

    pub fn radial_derivative_real(&self, sector: Sector, f: &[f64]) -> Vec<f64> {
        re(&self.radial_derivative(sector, &to_complex(f)))
    }

    /// Fourth-order centered differences with odd reflection at the origin and
    /// zero data beyond r_max.
    fn fd4_derivative(&self, f: &[Complex64]) -> Vec<Complex64> {
        let n = self.n as isize;
        let at = |j: isize| -> Complex64 {
            if j == 0 || j > n {
                Complex64::new(0.0, 0.0)
            } else if j < 0 {
                -f[(-j - 1) as usize]
            } else {
                f[(j - 1) as usize]
            }
        };
        let c = 1.0 / (12.0 * self.h);
        (1..=n)
            .map(|j| (at(j - 2) - at(j - 1) * 8.0 + at(j + 1) * 8.0 - at(j + 2)) * c)
            .collect()
    }

    /// Λf = (3/2)f + r∂_r f.
    pub fn lambda_op(&self, sector: Sector, f: &[Complex64]) -> Vec<Complex64> {
        match sector {
            Sector::L0 => {
                // (3/2)f + r f' = f/2 + g'
                let a = self.sine_coeffs(f);
                let gp = self.g_prime(&a);
                gp.iter().zip(f).map(|(gp, f)| gp + f * 0.5).collect()
            }
            Sector::L1 => {
                let d = self.fd4_derivative(f);
                d.iter()
                    .zip(f)
                    .zip(&self.r)
                    .map(|((d, f), r)| f * 1.5 + d * r)
                    .collect()
            }
        }
    }

    pub fn lambda_op_real(&self, sector: Sector, f: &[f64]) -> Vec<f64> {
        re(&self.lambda_op(sector, &to_complex(f)))
    }

    /// √(2/π)(−Δ + s)^{-1} f.
    pub fn s_smoothing(&self, sector: Sector, f: &[Complex64], s: f64) -> Result<Vec<Complex64>> {
        if !(s > 0.0) {
            return Err(HwError::Domain(format!("smoothing parameter must be positive, got {s}")));
        }
        let c = (2.0 / PI).sqrt();
        let m = self.symbol(|k| Complex64::new(c / (k * k + s), 0.0));
        self.apply_symbol(sector, f, &m)
    }

    // ---- inner products ----------------------------------------------------------

    pub fn inner(&self, sector: Sector, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        let c = sector.solid_angle() * self.h;
        f.iter()
            .zip(g)
            .zip(&self.r)
            .map(|((a, b), r)| a.conj() * b * (r * r))
            .sum::<Complex64>()
            * c
    }

    pub fn inner_real(&self, sector: Sector, f: &[f64], g: &[f64]) -> f64 {
        let c = sector.solid_angle() * self.h;
        f.iter()
            .zip(g)
            .zip(&self.r)
            .map(|((a, b), r)| a * b * r * r)
            .sum::<f64>()
            * c
    }

    pub fn norm(&self, sector: Sector, f: &[Complex64]) -> f64 {
        self.inner(sector, f, f).re.max(0.0).sqrt()
    }

    pub fn norm_real(&self, sector: Sector, f: &[f64]) -> f64 {
        self.inner_real(sector, f, f).max(0.0).sqrt()
    }

    /// Parseval form of the inner product, evaluated on the spectral side.
    pub fn inner_spectral(&self, sector: Sector, f: &[Complex64], g: &[Complex64]) -> Result<Complex64> {
        let ff = self.forward_transform(sector, f)?;
        let gg = self.forward_transform(sector, g)?;
        let c = match sector {
            Sector::L0 => 1.0 / (2.0 * PI * PI),
            Sector::L1 => 1.0 / (6.0 * PI * PI),
        } * self.d_rho();
        Ok(ff
            .iter()
            .zip(&gg)
            .zip(&self.rho)
            .map(|((a, b), k)| a.conj() * b * (k * k))
            .sum::<Complex64>()
            * c)
    }

    /// ‖D^{1/2} f‖² computed spectrally.
    pub fn half_derivative_norm_sq(&self, sector: Sector, f: &[Complex64]) -> f64 {
        let df = self.apply_d(sector, f);
        self.inner(sector, f, &df).re
    }
}

pub fn to_complex(f: &[f64]) -> Vec<Complex64> {
    f.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

pub fn re(f: &[Complex64]) -> Vec<f64> {
    f.iter().map(|z| z.re).collect()
}

pub fn im(f: &[Complex64]) -> Vec<f64> {
    f.iter().map(|z| z.im).collect()
}
