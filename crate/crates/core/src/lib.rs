//! Graph quantum magic squares.
//!
//! A quantum magic square of size `n` is an `n x n` grid of positive
//! semidefinite `s x s` blocks whose rows and columns each sum to the
//! identity. A graph quantum magic square additionally commutes with
//! `A_G ⊗ I_s` for the adjacency matrix `A_G` of a graph `G`.
//!
//! The crate covers verification and classification of such squares,
//! commutants of adjacency matrices, affine parametrizations and monic
//! linear pencils, a dense SDP engine, and the separation operators and
//! dual certificates used to test membership in the matrix convex hull of
//! quantum permutation matrices.

pub mod dilation;
pub mod error;
pub mod graph;
pub mod json;
pub mod linalg;
pub mod magic;
pub mod pencil;
pub mod rational;
pub mod sdp;
pub mod separation;

pub use error::{Error, Result};
pub use graph::Graph;
pub use linalg::{ComplexMatrix, HermitianMatrix, RealSymmetricMatrix, Spectrum};
pub use magic::BlockMatrix;

/// Default tolerance for membership decisions.
pub const DEFAULT_TOL: f64 = 1e-9;
