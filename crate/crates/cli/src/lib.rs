//! Experiment harness around `gsgd-core`: dataset CSV IO, experiment
//! configuration, seeded run repetition over the simulated or real-thread
//! backend, benchmark/sweep commands, and report writers.

pub mod commands;
pub mod concurrent;
pub mod config;
pub mod csvio;
pub mod report;
pub mod runner;
pub mod synth;
