//! Minimax state estimation and infinite-horizon LQ control for linear
//! differential-algebraic equations `d(Ex)/dt = Âx + B̂u` with arbitrary
//! (possibly singular, possibly with a non-regular pencil) `E`.
//!
//! The pipeline reduces a DAE to an ordinary linear system whose outputs are
//! exactly the DAE's solutions ([`associated`]), solves LQ problems on that
//! system ([`lq`]), and turns the dual LQ problem into an observer
//! ([`observer`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod associated;
pub mod dae;
pub mod equivalence;
pub mod error;
pub mod exec;
pub mod geometric;
pub mod linalg;
pub mod lq;
pub mod observer;
pub mod random;
pub mod simulate;

pub use error::{Error, Result};
