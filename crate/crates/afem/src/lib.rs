//! Adaptive P1 finite elements for second-order elliptic problems whose
//! diffusion matrix is discontinuous along curves that the mesh never
//! resolves.
//!
//! The solver interleaves adaptive Lq approximation of the data (right-hand
//! side and diffusion matrix) with a standard solve/estimate/mark/refine
//! loop, all on a single newest-vertex-bisection forest so that every
//! intermediate partition nests. The `bench` module ships the two reference
//! problems (an L-shaped domain with a circular coefficient jump and a
//! checkerboard transmission problem) together with an order-of-convergence
//! harness and the `afem` command line front end.

pub mod approx;
pub mod bench;
pub mod driver;
mod error;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod pde;
pub mod poly;
pub mod quadrature;

pub use error::{Error, Result};
