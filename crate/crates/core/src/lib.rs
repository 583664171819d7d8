//! Semantic equalization game over interference-limited multi-user MIMO links.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod game;
pub mod linalg;
pub mod link;
pub mod matrix_io;
pub mod report;
pub mod scenario;
pub mod semantics;
pub mod transceiver;

pub use error::{Error, Result};
