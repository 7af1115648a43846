//! Finite element de Rham and elasticity complexes on Alfeld splits of a
//! tetrahedron, constructed and checked in exact arithmetic.

pub mod calculus;
pub mod dofs;
pub mod error;
pub mod field;
pub mod geometry;
pub mod identities;
pub mod mesh;
pub mod poly;
pub mod report;
pub mod spaces;
pub mod verify;

pub use alfeld_linalg as linalg;
pub use error::{CoreError, Result};
