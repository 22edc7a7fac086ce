//! Engine for building, comparing and exploring hypergraphs over image
//! collections.

pub mod construct;
pub mod edits;
pub mod error;
pub mod explore;
pub mod hypercore;
pub mod layout;
pub mod progress;
pub mod rng;
pub mod simeval;
pub mod synthbench;

pub use error::{Error, Result};
