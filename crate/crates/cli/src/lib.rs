//! Operator entry points for the crowdml platform: the HTTP API server and
//! the challenge authoring / local evaluation commands.

pub mod commands;
pub mod config;
pub mod http;

pub use config::CliConfig;
