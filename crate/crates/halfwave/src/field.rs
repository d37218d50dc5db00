//! Sector-tagged complex fields and Fourier multipliers.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{HwError, Result};
use crate::grid::{RadialGrid, Sector};

/// A scalar symbol ρ ↦ m(ρ) applied on the spectral nodes.
#[derive(Clone)]
pub enum MultiplierSpec {
    /// m = ρ, the operator D.
    HalfWave,
    /// m = e^{−iτρ}, the free half-wave propagator.
    Propagator { tau: f64 },
    /// m = 1/(ρ + 1).
    Resolvent,
    /// m = 1/(ρ² + s).
    Helmholtz { s: f64 },
    Custom(Arc<dyn Fn(f64) -> Complex64 + Send + Sync>),
}

impl fmt::Debug for MultiplierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::HalfWave => write!(f, "HalfWave"),
            Self::Propagator { tau } => write!(f, "Propagator {{ tau: {tau} }}"),
            Self::Resolvent => write!(f, "Resolvent"),
            Self::Helmholtz { s } => write!(f, "Helmholtz {{ s: {s} }}"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl MultiplierSpec {
    pub fn eval(&self, rho: f64) -> Complex64 {
        match self {
            Self::HalfWave => Complex64::new(rho, 0.0),
            Self::Propagator { tau } => Complex64::from_polar(1.0, -tau * rho),
            Self::Resolvent => Complex64::new(1.0 / (rho + 1.0), 0.0),
            Self::Helmholtz { s } => Complex64::new(1.0 / (rho * rho + s), 0.0),
            Self::Custom(m) => m(rho),
        }
    }

    pub fn on_grid(&self, grid: &RadialGrid) -> Vec<Complex64> {
        grid.symbol(|k| self.eval(k))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectorField {
    pub sector: Sector,
    pub values: Vec<Complex64>,
}

impl SectorField {
    pub fn new(sector: Sector, values: Vec<Complex64>) -> Self {
        Self { sector, values }
    }

    pub fn zeros(sector: Sector, n: usize) -> Self {
        Self::new(sector, vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn from_real(sector: Sector, values: &[f64]) -> Self {
        Self::new(sector, crate::grid::to_complex(values))
    }

    /// Samples a radial profile at the grid nodes.
    pub fn from_fn(grid: &RadialGrid, sector: Sector, f: impl Fn(f64) -> Complex64) -> Self {
        Self::new(sector, grid.r().iter().map(|&r| f(r)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn re(&self) -> Vec<f64> {
        crate::grid::re(&self.values)
    }

    pub fn im(&self) -> Vec<f64> {
        crate::grid::im(&self.values)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self::new(self.sector, self.values.iter().map(|v| v * c).collect())
    }

    fn check(&self, grid: &RadialGrid) -> Result<()> {
        grid.check_len(self.values.len())
    }

    fn check_pair(&self, other: &SectorField, grid: &RadialGrid) -> Result<()> {
        if self.sector != other.sector {
            return Err(HwError::Config(format!(
                "sector mismatch: {:?} vs {:?}",
                self.sector, other.sector
            )));
        }
        self.check(grid)?;
        other.check(grid)
    }

    pub fn forward_transform(&self, grid: &RadialGrid) -> Result<Vec<Complex64>> {
        grid.forward_transform(self.sector, &self.values)
    }

    pub fn inverse_transform(grid: &RadialGrid, sector: Sector, coeffs: &[Complex64]) -> Result<Self> {
        Ok(Self::new(sector, grid.inverse_transform(sector, coeffs)?))
    }

    pub fn apply_multiplier(&self, grid: &RadialGrid, m: &MultiplierSpec) -> Result<Self> {
        self.check(grid)?;
        let symbol = m.on_grid(grid);
        Ok(Self::new(self.sector, grid.apply_symbol(self.sector, &self.values, &symbol)?))
    }

    pub fn inner(&self, other: &SectorField, grid: &RadialGrid) -> Result<Complex64> {
        self.check_pair(other, grid)?;
        Ok(grid.inner(self.sector, &self.values, &other.values))
    }

    pub fn norm(&self, grid: &RadialGrid) -> Result<f64> {
        self.check(grid)?;
        Ok(grid.norm(self.sector, &self.values))
    }

    pub fn inner_spectral(&self, other: &SectorField, grid: &RadialGrid) -> Result<Complex64> {
        self.check_pair(other, grid)?;
        grid.inner_spectral(self.sector, &self.values, &other.values)
    }

    pub fn lambda_op(&self, grid: &RadialGrid) -> Result<Self> {
        self.check(grid)?;
        Ok(Self::new(self.sector, grid.lambda_op(self.sector, &self.values)))
    }

    pub fn s_smoothing(&self, grid: &RadialGrid, s: f64) -> Result<Self> {
        self.check(grid)?;
        Ok(Self::new(self.sector, grid.s_smoothing(self.sector, &self.values, s)?))
    }
}
