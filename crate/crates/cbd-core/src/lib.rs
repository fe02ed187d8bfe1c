//! Composite binary bit-plane compression for neural-network weights.
//!
//! The pipeline turns a full-precision weight tensor into a stack of binary
//! planes weighted by powers of two, searches a scaling factor α that pins
//! the rank of the near-max support, factorizes the compressible planes
//! losslessly over GF(2), and reports the storage and compute implications.
//! A small reference-inference module exists to prove, bit for bit, that the
//! factorized representation computes the same thing as the dense one.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`store`]: tensor container, manifests, flattening convention
//! - [`quant`]: normalization and the power-of-two bit-plane expansion
//! - [`gf2`]: bit-packed binary matrices, rank, lossless factorization
//! - [`alpha`]: indicator matrices and the α search
//! - [`compress`]: the per-layer pipeline, gating, and bit accounting
//! - [`refnet`]: reference convolutions and the two-stage execution path
//! - [`cli`]: command orchestration for the `cbd` binary
//! - [`selftest`]: independent oracles bundled as a runtime self-check

pub mod alpha;
mod bytes;
pub mod compress;
pub mod error;
pub mod gf2;
pub mod quant;
pub mod refnet;
pub mod selftest;
pub mod store;

pub mod cli;

pub use error::{CbdError, Result};
