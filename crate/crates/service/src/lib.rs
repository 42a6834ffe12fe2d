//! HTTP service and command-line front end for the case-brief tutor.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod store;
