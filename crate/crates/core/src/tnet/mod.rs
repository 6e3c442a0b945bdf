//! Matrix product state machinery: states, operators, ground-state search
//! (DMRG), and real-time evolution (TDVP) with Krylov local integrators.
//!
//! Conventions used throughout:
//!
//! - MPS site tensors carry indices (left bond, physical, right bond); the
//!   boundary bonds have dimension 1.
//! - MPO site tensors carry indices (left bond, bra physical, ket physical,
//!   right bond).
//! - A state holds an orthogonality center: tensors strictly left of it are
//!   left-orthonormal, tensors strictly right of it right-orthonormal.
//!   Gauge moves use QR factorizations and never truncate; truncation
//!   happens only in two-site updates, controlled by a relative discarded
//!   weight threshold and a hard bond cap.
//! - Environments carry indices (bra bond, operator bond, ket bond).

mod contract;
#[cfg(test)]
mod testutil;
mod dmrg;
mod krylov;
mod mpo;
mod mps;
mod tdvp;

pub use dmrg::{dmrg_ground_state, DmrgOptions, DmrgReport};
pub use krylov::{lanczos_expv, lanczos_ground, KrylovOptions};
pub use mpo::MpoOperator;
pub use mps::MpsState;
pub use tdvp::{tdvp_step, TdvpOptions, TdvpReport, TdvpScheme};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TnetError {
    #[error("tensor shape: {0}")]
    Shape(String),
    #[error("linear algebra backend: {0}")]
    Linalg(String),
    #[error("local integrator: {0}")]
    Integrator(String),
    #[error("local eigensolver: {0}")]
    Eigensolver(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Corrupt(String),
}

pub type TnetResult<T> = Result<T, TnetError>;
