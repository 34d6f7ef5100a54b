//! Config-driven runs over the core library, and verification of their reports.

pub mod config;
pub mod run;
pub mod verify;
