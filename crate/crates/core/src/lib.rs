//! Stochastic Galerkin solvers for the diffusion equation with a lognormal
//! random coefficient.
//!
//! The crate is organised bottom-up:
//!
//! - [`chaos`]: multi-index sets, orthonormal Hermite polynomials, Galerkin
//!   triple products and the grouping rule used by the grouped field split.
//! - [`meshfem`]: nested Q2 meshes on the unit square, stiffness/load
//!   assembly and grid transfers.
//! - [`randomfield`]: exponential covariance, Karhunen–Loève eigenpairs and the
//!   polynomial-chaos projection of the lognormal coefficient.
//! - [`operator`]: the coupled block system `K = Σ_q G_q ⊗ A_q`.
//! - [`solvers`]: ILU(0), Richardson, field split, multigrid V-cycles, GMRES
//!   and the five preconditioned solver stacks.

pub mod chaos;
pub mod error;
pub mod meshfem;
pub mod operator;
pub mod randomfield;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
