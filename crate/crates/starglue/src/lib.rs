//! An exact-arithmetic workbench for deformation quantization with constant
//! Poisson tensors: Moyal star products, a Koszul-signed graded term
//! calculus for boundary fields and kernels, master-equation verifiers, and
//! the state-gluing pipeline that reproduces the star product through
//! Wick contraction.
//!
//! Everything is computed over Gaussian rationals with a formal `hbar`
//! parameter; there is no floating point anywhere.

pub mod bvbfv;
pub mod glue;
pub mod graded;
pub mod parse;
pub mod poly;
pub mod report;
pub mod sample;
pub mod scalar;
pub mod star;

pub use poly::{AlgebraError, Poly, PoissonTensor, VarClass};
pub use scalar::{GaussRat, Scalar};
