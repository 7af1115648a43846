//! Exact dense linear algebra.
//!
//! Matrices are generic over a [`Scalar`] field. Two fields are provided:
//! arbitrary-precision rationals (fraction-free reduction) and the
//! Montgomery prime fields [`Fp`] used as a fast modular path.

mod elim;
mod error;
mod fp;
mod matrix;
mod ops;
pub mod par;
mod scalar;

pub use elim::{bareiss_rank, fraction_free_rref, gauss_jordan};
pub use error::LinalgError;
pub use fp::{Fp, Fp0, Fp1, Fp2, Fp3, PRIMES};
pub use matrix::{ExactMatrix, Matrix};
pub use ops::{
    independent_columns, independent_rows, is_probable_prime, modular_rank, nullspace_basis,
    rank, rank_exact, solve_any, solve_exact, Lu,
};
pub use scalar::{
    parse_rational, q, rational_sign, rational_to_f64, rational_to_string, Rational, Scalar,
};
