//! Recursive multilevel trust-region (RMTR) minimization for bound-constrained
//! phase-field brittle fracture.
//!
//! The crate is organized bottom-up:
//!
//! * [`sparse`] – compressed sparse row matrices and a banded Cholesky used
//!   by the coarse-level solver.
//! * [`mesh`] – nested structured meshes (1D segments, 2D bilinear quads)
//!   and DOF numbering.
//! * [`transfer`] – prolongation, restriction and pseudo-L2 projection
//!   between adjacent levels.
//! * [`fracture`] – phase-field energy, gradient and Hessian with the
//!   spectral tension/compression split.
//! * [`tr`] – single-level bound-constrained trust-region solver.
//! * [`rmtr`] – the multilevel V-cycle with four coarse-level models.
//! * [`sim`] – load-stepping driver, configuration and output writers.

// NaN-rejecting comparisons and index loops over small fixed-size arrays are
// deliberate.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod error;
pub mod fracture;
pub mod mesh;
pub mod rmtr;
pub mod sim;
pub mod sparse;
pub mod tr;
pub mod transfer;

pub use error::{Error, Result};
