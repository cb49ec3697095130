//! Free-boundary chemotaxis–Navier–Stokes on a flattened periodic slab.
//!
//! The moving fluid domain is mapped onto `Ω = T² × (−b, 0)` through the
//! harmonic extension of the surface height. The oxygen concentration is
//! carried as `h = −ln c + ln ĉ`. The transformed nonlinear system is solved
//! by Picard iteration over a linear parabolic pair `(w, h)` and a linear
//! free-surface Stokes problem `(v, q, η)`.

pub mod error;
pub mod grid;
pub mod ops;
pub(crate) mod spectral;

pub use error::{CnsError, Result};
pub use grid::{ScalarField, SlabGrid, SurfaceField, VectorField};
pub mod harmonic;
pub mod transform;
pub mod nonlinear;
pub mod solvers;
pub mod energy;
pub mod io;
pub mod picard;
pub mod verify;
pub(crate) mod banded;
