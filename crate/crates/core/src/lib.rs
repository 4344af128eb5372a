//! Threshold-implementation toolkit: Boolean functions over GF(2), three-share
//! masking, a shared PRESENT-80 with a removable correction term, gate-level
//! timing simulation, power-trace synthesis and side-channel statistics.

pub mod boolfunc;
pub mod error;
pub mod exec;
pub mod leakage;
pub mod netlist;
pub mod present_ti;
pub mod scaeval;
pub mod sharing;

pub use error::{Error, Result};
pub use exec::Exec;
