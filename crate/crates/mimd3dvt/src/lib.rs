//! File formats, dataset loading and the command-line interface around
//! `mimd_core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
