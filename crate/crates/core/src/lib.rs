//! Keyword-based, publicly verifiable proofs of storage over BLS12-381.
//!
//! A data owner erasure-codes and tags files, builds a signed keyword index,
//! and uploads both. Anyone holding the public key and the file metadata can
//! then audit the server, either by file identifier or by keyword, with
//! challenges sampled interactively or derived from a public randomness
//! beacon.

pub mod algebra;
pub mod beacon;
pub mod encoding;
pub mod erasure;
pub mod harness;
pub mod keyword_index;
pub mod roles;
pub mod scheme;
pub mod transport;
pub mod wire;
