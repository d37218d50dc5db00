//! Radial pseudo-spectral laboratory for the 3D mass-critical half-wave equation
//! i∂ₜu = Du − |u|^{2/3}u, D = |∇|.

pub mod angular;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod field;
pub mod grid;
pub mod jet;
pub mod linalg;
pub mod linearized;
pub mod modulation;
pub mod profile;
pub mod ground_state;
pub mod snapshot;
pub mod stats;

pub use error::{HwError, Result};
pub use field::{MultiplierSpec, SectorField};
pub use grid::{RadialGrid, Sector};
