//! Truncated bivariate Taylor jets in (b, β) of total degree ≤ 4, used to extract
//! exact expansion coefficients of the nonlinearity |u|^{2/3}u.

use num_complex::Complex64;

pub const DEGREE: usize = 4;
pub const LEN: usize = (DEGREE + 1) * (DEGREE + 2) / 2;

/// Position of the monomial b^k β^l.
pub const fn idx(k: usize, l: usize) -> usize {
    let d = k + l;
    d * (d + 1) / 2 + l
}

/// All (k, l) with k + l ≤ DEGREE in storage order.
pub fn monomials() -> impl Iterator<Item = (usize, usize)> {
    (0..=DEGREE).flat_map(|d| (0..=d).map(move |l| (d - l, l)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet(pub [Complex64; LEN]);

impl Default for Jet {
    fn default() -> Self {
        Jet([Complex64::new(0.0, 0.0); LEN])
    }
}

impl Jet {
    pub fn constant(c: Complex64) -> Self {
        let mut j = Jet::default();
        j.0[0] = c;
        j
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.0[idx(k, l)]
    }

    pub fn set(&mut self, k: usize, l: usize, v: Complex64) {
        self.0[idx(k, l)] = v;
    }

    pub fn conj(&self) -> Self {
        let mut out = *self;
        out.0.iter_mut().for_each(|c| *c = c.conj());
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = *self;
        out.0.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add(&self, other: &Jet) -> Self {
        let mut out = *self;
        out.0.iter_mut().zip(&other.0).for_each(|(a, b)| *a += b);
        out
    }

    pub fn mul(&self, other: &Jet) -> Self {
        let mut out = Jet::default();
        for (k1, l1) in monomials() {
            let a = self.get(k1, l1);
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (k2, l2) in monomials() {
                if k1 + k2 + l1 + l2 > DEGREE {
                    continue;
                }
                out.0[idx(k1 + k2, l1 + l2)] += a * other.get(k2, l2);
            }
        }
        out
    }

    /// (1 + X)^p for a jet X without constant term.
    pub fn one_plus_pow(x: &Jet, p: f64) -> Jet {
        debug_assert!(x.0[0].norm() == 0.0);
        let mut out = Jet::constant(Complex64::new(1.0, 0.0));
        let mut power = Jet::constant(Complex64::new(1.0, 0.0));
        let mut binom = 1.0;
        for m in 1..=DEGREE {
            binom *= (p - (m - 1) as f64) / m as f64;
            power = power.mul(x);
            out = out.add(&power.scale(Complex64::new(binom, 0.0)));
        }
        out
    }

    /// |u|^{2/3}u for a jet whose constant term is real and positive.
    pub fn focusing_nonlinearity(u: &Jet) -> Jet {
        let q = u.0[0].re;
        let mod2 = u.mul(&u.conj());
        let mut x = mod2.scale(Complex64::new(1.0 / (q * q), 0.0));
        x.0[0] = Complex64::new(0.0, 0.0);
        let factor = Jet::one_plus_pow(&x, 1.0 / 3.0).scale(Complex64::new(q.powf(2.0 / 3.0), 0.0));
        factor.mul(u)
    }
}
