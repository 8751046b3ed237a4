//! Numerical toolkit for quantitative unique continuation of planar
//! Schrödinger-type equations Δu + W·∇u − Vu = 0 with V ≥ 0.

pub mod cauchy;
pub mod error;
pub mod exterior;
pub mod field;
pub mod grid;
pub mod io;
pub mod multiplier;
pub mod ops;
pub mod order;
pub mod potential;
pub mod reduction;
pub mod scaling;

pub use error::{LandisError, Result};
pub use field::{ComplexField, Field, ScalarField};
pub use grid::{Grid, GridSpec};
pub use num_complex::Complex64 as C64;
