//! Weak Galerkin finite element solver for the 2D biharmonic equation.
//!
//! Discretizes `laplacian^2 u = f` with Dirichlet data `u = xi` and Neumann
//! data `du/dn = nu` on polygonal meshes, using elements that carry a degree-k
//! polynomial inside each element and degree-(k-2) polynomials for the trace
//! and gradient trace on each edge. The scheme assembles a symmetric positive
//! definite system with no tunable stabilization parameter, supports static
//! condensation of the element-interior unknowns, and ships a batch CLI for
//! manufactured-solution convergence studies.

pub mod basis;
pub mod cases;
pub mod error;
pub mod mesh;
pub mod norms;
pub mod projection;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod study;
pub mod weak_deriv;

pub use error::{Error, Result};
