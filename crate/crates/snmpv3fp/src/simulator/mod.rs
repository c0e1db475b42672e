//! Ground-truth SNMPv3 agent populations.
//!
//! A [`PopulationSpec`] seeds a [`Population`] of devices with interfaces,
//! engine IDs, clocks and injected faults. Agents answer discovery requests
//! over an in-process [`SimNetwork`] or real UDP sockets via [`serve`];
//! both paths share [`agent_reply`] and emit identical bytes for identical
//! clocks.

mod agent;
mod population;
mod spec;
mod truth;

use std::time::Duration;

pub use agent::{
    agent_reply, interface_skew, latency_ms, pass_index, serve, AgentServer, PassClock, SimNetwork, AGENT_MAX_SIZE,
};
pub use population::{
    apportion, round_count, AutonomousSystem, Device, LaterPasses, Population, ASN_BASE, CONSTANT_ID_SPACING_S,
    REGIONS, TUPLE_SPACING_S,
};
pub use spec::{vendor_index, Anomaly, IdFormat, PopulationSpec, SpecError, Vendor, VENDORS};
pub use truth::{AliasAccuracy, Fate};

use crate::scanner::{two_scan_campaign, Campaign, RequestLog, ScanError, ScanPlan, VirtualBackend};

#[derive(Debug, Clone)]
pub struct VirtualCampaign {
    pub campaign: Campaign,
    /// Requests per address, one map per pass.
    pub request_logs: Vec<RequestLog>,
    /// Virtual clock after the second pass.
    pub end_ms: i64,
}

/// Both passes against the in-process network, starting at the
/// population's `start_time`.
pub fn run_virtual_campaign(pop: &Population, plan: &ScanPlan, gap: Duration) -> Result<VirtualCampaign, ScanError> {
    let mut backend = VirtualBackend::new(SimNetwork::new(pop), pop.spec.start_time * 1000);
    let campaign = two_scan_campaign(plan, gap, &mut backend)?;
    Ok(VirtualCampaign { campaign, request_logs: backend.net.logs, end_ms: backend.now_ms })
}
