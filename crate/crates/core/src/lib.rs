//! Attribute-based access control with quantified requester anonymity and
//! entropy-weighted policy path trees.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: attribute space, registries, requests, the append-only ledger
//!   and its file formats.
//! - [`crypto`]: Ed25519 keys and deterministic credential signatures.
//! - [`anonymity`]: credential subject spaces, request entropy,
//!   (r,t)-anonymity and per-subject anonymity scores.
//! - [`optimizer`]: the recent-decision pool and attribute weighting.
//! - [`ewpt`]: the path tree, its matchers, and the linear rule scan.
//! - [`engine`]: the authorization pipeline with periodic tree rebuilds.
//! - [`workload`] and [`bench`]: seeded workloads for the fifteen test cases
//!   and the measurement harness.

pub mod anonymity;
pub mod bench;
pub mod codec;
pub mod crypto;
pub mod engine;
pub mod entropy;
pub mod error;
pub mod ewpt;
pub mod model;
pub mod optimizer;
pub mod workload;
pub mod par;

pub use error::{Error, Result};
