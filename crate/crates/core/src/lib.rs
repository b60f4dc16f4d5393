//! Identification codes over discrete memoryless and broadcast channels.
//!
//! The crate builds pool-and-bin identification codes, evaluates their
//! missed- and wrong-identification probabilities exactly or by Monte Carlo,
//! computes the single-letter capacity regions they are measured against, and
//! checks the concentration statements their analysis relies on.

pub mod channel;
pub mod container;
pub mod error;
pub mod harness;
pub mod eval;
pub mod id_bc;
pub mod id_dmc;
pub mod id_ext;
pub mod info;
pub mod lemmas;
pub mod pool;
pub mod seed;
pub mod typeskit;
pub mod tuples;
pub mod validate;

pub use error::{Error, Result};
