//! SNMPv3 discovery fingerprinting core: wire codec, engine ID parsing,
//! two-scan validation, alias resolution and aggregate analytics.
//!
//! `no_std` with `alloc`; all IO lives in the `snmpv3fp` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod alias;
pub mod analytics;
pub mod ber;
pub mod codec;
pub mod engineid;
pub mod pipeline;
pub mod prefix;
