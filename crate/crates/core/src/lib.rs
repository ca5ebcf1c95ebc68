//! Power delivery network models for TSV-based 3D-stacked DRAM: IR-drop,
//! activation parallelism, electromigration aging and lifetime performance.

pub mod aging;
pub mod config;
pub mod em;
pub mod error;
pub mod geometry;
pub mod irdrop;
pub mod netlist;
pub mod perf;
pub mod solver;

pub use error::{Error, Result};
