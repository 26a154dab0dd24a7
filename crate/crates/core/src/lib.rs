//! Helmholtz Galerkin systems with variable complex coefficients, their
//! weighted norms and discrete inf-sup constants, and checks of the
//! preconditioner-quality bounds for nearby and absorptive coefficients.

pub mod assemble;
pub mod bounds;
pub mod coeffs;
pub mod error;
pub mod io;
pub mod mesh;
pub mod numerics;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
