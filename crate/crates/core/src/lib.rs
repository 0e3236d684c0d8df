//! Constructive factorization of operators with the bounded approximation
//! property through a sequence space with a monotone basis, carried out in
//! finite dimensions with every asserted bound certified numerically.
//!
//! The pipeline runs bottom-up:
//!
//! * [`space`] and [`operator`]: ℓ¹/ℓ²/ℓ^∞ spaces, the support oracle and exact
//!   induced operator norms;
//! * [`auerbach`]: Auerbach systems by determinant coordinate ascent;
//! * [`telescope`]: approximant sequences, block increments and approximation
//!   certificates over finite test sets;
//! * [`splitting`]: rank-one splitting of each block and the global atom
//!   sequence with its partial-sum bounds;
//! * [`yspace`]: the sequence space, the maps into and out of it, and the
//!   converse certificate;
//! * [`scenario`], [`report`] and [`pipeline`]: file formats and the
//!   orchestration behind the `bapfactor` binary.

pub mod auerbach;
pub mod error;
pub mod linalg;
pub mod lp;
pub mod operator;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod space;
pub mod splitting;
pub mod telescope;
pub mod yspace;

pub use error::{Error, Result};
