//! Gauss–Legendre rule in μ = cos θ for projecting pointwise products onto the
//! Legendre sectors P₀, P₁, P₂.

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::error::{HwError, Result};

#[derive(Clone, Debug)]
pub struct AngularRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Coefficients of c₀ + c₁μ + c₂P₂(μ).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LegendreParts {
    pub l0: Complex64,
    pub l1: Complex64,
    pub l2: Complex64,
}

pub fn p2(mu: f64) -> f64 {
    1.5 * mu * mu - 0.5
}

impl AngularRule {
    pub fn new(order: usize) -> Result<Self> {
        let rule = GaussLegendre::new(order)
            .map_err(|_| HwError::Config(format!("angular rule needs at least 2 nodes, got {order}")))?;
        let (nodes, weights) = rule.as_node_weight_pairs().iter().cloned().unzip();
        Ok(Self { nodes, weights })
    }

    /// Projects samples f(μ_q) onto the first three Legendre polynomials.
    pub fn project(&self, samples: &[Complex64]) -> LegendreParts {
        let mut out = LegendreParts::default();
        for ((mu, w), f) in self.nodes.iter().zip(&self.weights).zip(samples) {
            out.l0 += f * (0.5 * w);
            out.l1 += f * (1.5 * w * mu);
            out.l2 += f * (2.5 * w * p2(*mu));
        }
        out
    }

    /// (1/2)∫₋₁¹ f(μ) dμ, the angular average.
    pub fn average(&self, samples: &[f64]) -> f64 {
        self.weights.iter().zip(samples).map(|(w, f)| 0.5 * w * f).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projects_legendre_polynomials_exactly() {
        let rule = AngularRule::new(6).unwrap();
        let s: Vec<Complex64> = rule
            .nodes
            .iter()
            .map(|&m| Complex64::new(2.0 - 3.0 * m + 0.5 * p2(m), 0.0))
            .collect();
        let p = rule.project(&s);
        assert!((p.l0.re - 2.0).abs() < 1e-14);
        assert!((p.l1.re + 3.0).abs() < 1e-14);
        assert!((p.l2.re - 0.5).abs() < 1e-14);
    }
}
