//! Process, provider and command-line layer around `relog-core`.

pub mod profile;
pub mod syntax;
pub mod toolchain;
pub mod gateway;
pub mod summary;
pub mod pipeline;
pub mod fixtures;
pub mod config;
pub mod eval;
pub mod miner;
pub mod report;
