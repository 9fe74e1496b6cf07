//! Configuration, file formats and the command-line front end for `dnp-core`.
//!
//! A run is described by a JSON file with `schema: 1`; see the bundled files
//! under `configs/`. Every command writes `config.json` (the resolved echo),
//! `report.json` and its tables as CSV with a gnuplot `.dat` mirror.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;
pub mod pool;
