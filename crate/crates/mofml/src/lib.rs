//! Command-line entry points and the HTTP prediction service.

pub mod commands;
pub mod service;
