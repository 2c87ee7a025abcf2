//! Heterogeneous test orchestration.

pub mod blockmodel;
pub mod coverage;
pub mod report;
pub mod results;
pub mod slrunner;
pub mod testdsl;
pub mod rungen;
pub mod ci;
pub mod cli;
