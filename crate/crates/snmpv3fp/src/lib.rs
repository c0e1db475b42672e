//! SNMPv3 discovery fingerprinting: scanning, file formats, the agent
//! simulator and the command-line pipeline. Protocol and analysis logic
//! lives in `snmpv3fp-core`, re-exported as [`core`].

pub use snmpv3fp_core as core;

pub mod cli;
pub mod figdata;
pub mod records;
pub mod scanner;
pub mod simulator;
pub mod tables;
