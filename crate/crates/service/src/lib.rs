//! Session persistence, the HTTP API and the `hyperlens` command line.

pub mod api;
pub mod build;
pub mod cli;
pub mod error;
pub mod history;
pub mod jobs;
pub mod session;
pub mod thumbs;
