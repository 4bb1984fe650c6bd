//! Simultaneous confidence envelopes for the false discovery proportion.
//!
//! Three kinds of paths are covered: top-k sets of sorted p-values
//! ([`topk`]), pre-ordered sequences ([`preordered`]) and online streams
//! ([`online`]). [`models`] generates synthetic data with known truth and
//! [`harness`] runs replicated experiments over parameter grids.

// NaN-rejecting `!(x > 0.0)` checks are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelope;
pub mod error;
pub mod harness;
pub mod models;
pub mod numerics;
pub mod online;
pub mod preordered;
pub mod topk;

pub use envelope::{interpolate, Envelope, Method};
pub use error::{FdpError, Result};
