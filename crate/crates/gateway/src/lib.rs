//! Command-line and HTTP entry points for the timebuffer engine.

pub mod cli;
pub mod http;
pub mod store;
