//! Trace-driven SSD/HDD placement laboratory.

pub mod cost;
pub mod experiment;
pub mod gbt;
pub mod harness;
pub mod importance;
pub mod labeling;
pub mod model;
pub mod oracle;
pub mod policy;
pub mod report;
pub mod sim;
pub mod trace;
pub mod workload;
