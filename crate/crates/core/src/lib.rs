//! Structured solver for all-at-once block lower triangular Toeplitz (BLTT)
//! systems arising from time-space discretizations of evolutionary equations.
//!
//! The library represents a BLTT operator by the spectral table of its blocks
//! in a shared sine-transform eigenbasis, symmetrizes the system by a
//! time-reversing permutation, and solves it with MINRES preconditioned by an
//! absolute-value block alpha-circulant preconditioner applied in
//! `O(MN log MN)` per iteration. A dense small-scale oracle verifies the
//! spectral-clustering properties the solver relies on.

pub mod error;
pub mod transforms;
pub mod spectral;
pub mod operator;
pub mod abac;
pub mod minres;
pub mod problems;
pub mod oracle;
pub mod driver;

pub use error::{Error, Result};
