//! Vulnerable node detection in coupled electricity/road networks.
//!
//! The crate models an electricity transmission forest and a road network
//! coupled through traffic lights fed by 10kV stations, simulates cascading
//! failures, learns node embeddings with a message-passing network, and
//! trains a deep Q-learning agent that picks the nodes whose removal hurts
//! the coupled system most. Degree, collective-influence, supervised and
//! random attacks are provided for comparison.

// Config checks use `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod baselines;
pub mod cascade;
pub mod embed;
pub mod error;
pub mod graph;
pub mod harness;
pub mod netgen;
pub mod report;
pub mod tensor_io;
pub mod transfer;

pub use error::{Error, Result};
