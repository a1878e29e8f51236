//! Numerical laboratory for the Sierpinski carpet: approximation graphs,
//! discrete energies, effective resistances, harmonic minimizers and the
//! resistance scaling factor.

pub mod energy;
pub mod error;
pub mod geometry;
pub mod numeric;
pub mod resistance;
pub mod solver;
pub mod special;
pub mod verification;

pub use error::{Error, Result};
