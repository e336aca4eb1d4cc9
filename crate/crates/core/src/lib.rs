//! Finite-dimensional operator systems: cone calculus, completely positive
//! maps, minimal and maximal tensor cones, factorization through matrix
//! algebras, and a truncated model of the unitized compacts with the
//! `(1,1)` matrix unit removed.

pub mod certificate;
pub mod compacts;
pub mod conic;
pub mod error;
pub mod factorization;
pub mod maps;
pub mod system;
pub mod tensor;

pub use certificate::Certificate;
pub use error::{Error, Result};
