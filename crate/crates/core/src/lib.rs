//! Matrix-free FFT-based Galerkin solver for the scalar periodic cell problem
//! of homogenization.
//!
//! The cell problem is discretized by trigonometric polynomials on an odd
//! regular grid with grid-point (numerical) integration of the coefficients.
//! The resulting system `G_N A_N e~ = -G_N A_N E` is solved with conjugate
//! gradients on the subspace `E_N` of zero-mean curl-free fields, or with the
//! Neumann series of the discrete Lippmann-Schwinger equation.

pub mod analysis;
pub mod error;
pub mod families;
pub mod green;
pub mod homogenize;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod material;
pub mod solver;
pub mod transforms;
pub mod voxel;

pub use error::{Error, Result};
pub use green::{GreenOperator, ReferenceTensor};
pub use families::{Family, Regularity};
pub use grid::{FreqIndex, GridSpec};
pub use material::CoefficientField;
pub use transforms::{GridField, SpectralField};
