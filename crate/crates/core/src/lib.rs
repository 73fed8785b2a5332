//! Solvers for rotating dilute Bose gases.
//!
//! Gross-Pitaevskii and density-matrix energy minimization on periodic
//! spectral grids, vortex and symmetry-breaking diagnostics, exact
//! diagonalization of truncated second-quantized Hamiltonians, coherent
//! state identities and zero-energy scattering lengths.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the double precision used by the command line tools.

pub mod diagnostics;
pub mod dm;
pub mod eigen;
pub mod error;
pub mod gp;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod manybody;
pub mod model;
pub mod real;
pub mod scatter;

pub use error::{Error, LatticeError, Result};
pub use lattice::{Field, Grid};
pub use model::{ModelSpec, RotationSpec, Stability, Trap};
pub use real::Real;

pub type C64 = num_complex::Complex<f64>;
pub type Grid64 = Grid<f64>;
pub type Field64 = Field<f64>;
pub type ModelSpec64 = ModelSpec<f64>;
pub type Trap64 = Trap<f64>;
pub type GpResult64 = gp::GpResult<f64>;
pub type DmState64 = dm::DmState<f64>;
pub type FockProblem64 = manybody::FockProblem<f64>;
pub type RadialPotential64 = scatter::RadialPotential<f64>;
