//! Two-pass reconciliation and the ten-step validation filter chain.
//!
//! Flow: raw [`ScanRecord`]s of each pass go through [`decode_scan`], the two
//! per-IP maps are joined by [`merge_scans`], and [`apply_filters`] removes
//! records that cannot serve as stable device identifiers. Every removal is
//! attributed to the first filter in [`FilterKind::ALL`] order that triggers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::net::{IpAddr, Ipv4Addr};

use crate::codec::decode_discovery_report;
use crate::engineid::{parse_engine_id, EngineIdFormat, EngineIdInfo, OuiTable};

/// One captured datagram, exactly as the scanner stored it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanRecord {
    pub ip: IpAddr,
    pub scan_label: String,
    pub recv_time_ms: i64,
    /// 1-based ordinal among responses from `ip` within the pass.
    pub response_index: u32,
    pub payload: Vec<u8>,
}

/// Decoded discovery fields of one IP in one pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub ip: IpAddr,
    pub engine_id: Vec<u8>,
    pub boots: i64,
    pub time: i64,
    pub recv_time_ms: i64,
    /// Whole seconds: `floor(recv_time_ms / 1000) - time`.
    pub last_reboot: i64,
}

impl Observation {
    pub fn new(ip: IpAddr, engine_id: Vec<u8>, boots: i64, time: i64, recv_time_ms: i64) -> Self {
        let last_reboot = recv_time_ms.div_euclid(1000) - time;
        Self { ip, engine_id, boots, time, recv_time_ms, last_reboot }
    }

    /// Reported uptime points past the moment of reception.
    pub fn is_future(&self) -> bool {
        self.last_reboot.saturating_mul(1000) > self.recv_time_ms
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub records: usize,
    pub responsive_ips: usize,
    /// IPs whose first response failed to decode.
    pub undecodable_ips: usize,
    /// Responses beyond the first per IP.
    pub duplicate_responses: usize,
    /// IPs that sent more than one response.
    pub duplicate_responders: usize,
    /// IPs whose duplicate responses carried a different engine ID than the
    /// first one. The first response is still the one kept.
    pub conflicting_ips: BTreeSet<IpAddr>,
}

/// Collapses one pass to a single observation per IP: the response with the
/// lowest `response_index` (ties broken by arrival order).
pub fn decode_scan(records: &[ScanRecord]) -> (BTreeMap<IpAddr, Observation>, DecodeStats) {
    let mut by_ip: BTreeMap<IpAddr, Vec<&ScanRecord>> = BTreeMap::new();
    for r in records {
        by_ip.entry(r.ip).or_default().push(r);
    }
    let mut stats = DecodeStats { records: records.len(), responsive_ips: by_ip.len(), ..Default::default() };
    let mut out = BTreeMap::new();
    for (ip, mut rs) in by_ip {
        rs.sort_by_key(|r| (r.response_index, r.recv_time_ms));
        if rs.len() > 1 {
            stats.duplicate_responders += 1;
            stats.duplicate_responses += rs.len() - 1;
        }
        let first = rs[0];
        let report = match decode_discovery_report(&first.payload) {
            Ok(rep) => rep,
            Err(_) => {
                stats.undecodable_ips += 1;
                continue;
            }
        };
        let conflicting = rs[1..].iter().any(|r| match decode_discovery_report(&r.payload) {
            Ok(other) => other.engine_id != report.engine_id,
            Err(_) => false,
        });
        if conflicting {
            stats.conflicting_ips.insert(ip);
        }
        out.insert(
            ip,
            Observation::new(ip, report.engine_id, report.engine_boots, report.engine_time, first.recv_time_ms),
        );
    }
    (out, stats)
}

/// One IP observed in both passes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedRecord {
    pub ip: IpAddr,
    pub obs1: Observation,
    pub obs2: Observation,
    /// Parsed first-pass engine ID; `None` when it was empty.
    pub engine_info: Option<EngineIdInfo>,
}

impl MergedRecord {
    pub fn new(obs1: Observation, obs2: Observation) -> Self {
        let engine_info = parse_engine_id(&obs1.engine_id).ok();
        Self { ip: obs1.ip, obs1, obs2, engine_info }
    }

    pub fn lrt_drift(&self) -> i64 {
        self.obs2.last_reboot - self.obs1.last_reboot
    }
}

/// Inner join on IP, ordered by IP.
pub fn merge_scans(scan1: &BTreeMap<IpAddr, Observation>, scan2: &BTreeMap<IpAddr, Observation>) -> Vec<MergedRecord> {
    scan1.iter().filter_map(|(ip, o1)| scan2.get(ip).map(|o2| MergedRecord::new(o1.clone(), o2.clone()))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FilterKind {
    MissingEngineId,
    InconsistentEngineId,
    ShortEngineId,
    PromiscuousEngineId,
    UnroutableIpv4,
    UnregisteredOui,
    ZeroTimeOrBoots,
    FutureTime,
    BootsChanged,
    LastRebootDrift,
}

impl FilterKind {
    pub const ALL: [FilterKind; 10] = [
        Self::MissingEngineId,
        Self::InconsistentEngineId,
        Self::ShortEngineId,
        Self::PromiscuousEngineId,
        Self::UnroutableIpv4,
        Self::UnregisteredOui,
        Self::ZeroTimeOrBoots,
        Self::FutureTime,
        Self::BootsChanged,
        Self::LastRebootDrift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MissingEngineId => "missing_engine_id",
            Self::InconsistentEngineId => "inconsistent_engine_id",
            Self::ShortEngineId => "short_engine_id",
            Self::PromiscuousEngineId => "promiscuous_engine_id",
            Self::UnroutableIpv4 => "unroutable_ipv4_engine_id",
            Self::UnregisteredOui => "unregistered_oui",
            Self::ZeroTimeOrBoots => "zero_time_or_boots",
            Self::FutureTime => "future_engine_time",
            Self::BootsChanged => "boots_changed",
            Self::LastRebootDrift => "last_reboot_drift",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FilterConfig<'a> {
    /// IDs shorter than this many bytes are dropped.
    pub min_engine_id_len: usize,
    /// Largest tolerated `|lrt1 - lrt2|` in seconds; equality survives.
    pub max_lrt_drift: i64,
    /// Distinct enterprise numbers under which one identity must appear to
    /// count as promiscuous.
    pub promiscuous_min_enterprises: usize,
    /// Without a table the OUI filter is a no-op.
    pub oui: Option<&'a OuiTable>,
}

impl Default for FilterConfig<'_> {
    fn default() -> Self {
        Self { min_engine_id_len: 4, max_lrt_drift: 10, promiscuous_min_enterprises: 2, oui: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterReport {
    /// Pre-filter bucket: IPs whose first reply did not decode (both passes).
    pub undecodable: usize,
    /// Pre-filter bucket: decodable IPs seen in only one pass.
    pub not_in_both: usize,
    pub input: usize,
    pub removed: [(FilterKind, usize); 10],
    pub surviving: usize,
}

impl Default for FilterReport {
    fn default() -> Self {
        Self { undecodable: 0, not_in_both: 0, input: 0, removed: FilterKind::ALL.map(|k| (k, 0)), surviving: 0 }
    }
}

impl FilterReport {
    pub fn removed_by(&self, kind: FilterKind) -> usize {
        self.removed[kind.index()].1
    }

    pub fn total_removed(&self) -> usize {
        self.removed.iter().map(|(_, n)| n).sum()
    }

    /// `(step, count)` rows: the two pre-filter buckets, the input, the ten
    /// filters in order, then the survivors.
    pub fn rows(&self) -> Vec<(&'static str, usize)> {
        let mut rows = Vec::with_capacity(14);
        rows.push(("undecodable", self.undecodable));
        rows.push(("not_in_both_scans", self.not_in_both));
        rows.push(("input", self.input));
        rows.extend(self.removed.iter().map(|(k, n)| (k.name(), *n)));
        rows.push(("surviving", self.surviving));
        rows
    }
}

/// A record that passed every filter, reduced to the alias-resolution inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidRecord {
    pub ip: IpAddr,
    pub engine_id: Vec<u8>,
    pub boots: i64,
    pub lrt1: i64,
    pub lrt2: i64,
    pub info: EngineIdInfo,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub kept: Vec<MergedRecord>,
    pub removed: Vec<(IpAddr, FilterKind)>,
    pub report: FilterReport,
}

impl FilterOutcome {
    pub fn valid(&self) -> Vec<ValidRecord> {
        self.kept.iter().filter_map(to_valid).collect()
    }
}

fn to_valid(r: &MergedRecord) -> Option<ValidRecord> {
    let info = r.engine_info.clone()?;
    Some(ValidRecord {
        ip: r.ip,
        engine_id: r.obs1.engine_id.clone(),
        boots: r.obs1.boots,
        lrt1: r.obs1.last_reboot,
        lrt2: r.obs2.last_reboot,
        info,
    })
}

/// Filters 1 to 3 are purely per-record; the promiscuity index is built
/// from what they let through.
fn early_filter(r: &MergedRecord, cfg: &FilterConfig<'_>) -> Option<FilterKind> {
    if r.obs1.engine_id.is_empty() || r.obs2.engine_id.is_empty() {
        return Some(FilterKind::MissingEngineId);
    }
    if r.obs1.engine_id != r.obs2.engine_id {
        return Some(FilterKind::InconsistentEngineId);
    }
    if r.obs1.engine_id.len() < cfg.min_engine_id_len {
        return Some(FilterKind::ShortEngineId);
    }
    None
}

fn late_filter(r: &MergedRecord, cfg: &FilterConfig<'_>) -> Option<FilterKind> {
    let info = r.engine_info.as_ref()?;
    if info.format == EngineIdFormat::Ipv4 {
        if let Some(addr) = info.ipv4 {
            if !routability_check(addr) {
                return Some(FilterKind::UnroutableIpv4);
            }
        }
    }
    if let (Some(table), Some(mac)) = (cfg.oui, info.mac) {
        if table.get(mac.oui()).is_none() {
            return Some(FilterKind::UnregisteredOui);
        }
    }
    let (a, b) = (&r.obs1, &r.obs2);
    if a.time == 0 || b.time == 0 || a.boots == 0 || b.boots == 0 {
        return Some(FilterKind::ZeroTimeOrBoots);
    }
    if a.is_future() || b.is_future() {
        return Some(FilterKind::FutureTime);
    }
    if a.boots != b.boots {
        return Some(FilterKind::BootsChanged);
    }
    if r.lrt_drift().abs() > cfg.max_lrt_drift {
        return Some(FilterKind::LastRebootDrift);
    }
    None
}

/// Identity tails claimed by at least `min` distinct enterprise numbers.
fn promiscuous_tails<'r>(records: impl Iterator<Item = &'r MergedRecord>, min: usize) -> BTreeSet<&'r [u8]> {
    let mut seen: BTreeMap<&[u8], BTreeSet<u32>> = BTreeMap::new();
    for r in records {
        if let Some(info) = &r.engine_info {
            if let (Some(tail), Some(ent)) = (info.identity_tail(), info.enterprise_number) {
                seen.entry(tail).or_default().insert(ent);
            }
        }
    }
    seen.into_iter().filter(|(_, ents)| ents.len() >= min.max(1)).map(|(t, _)| t).collect()
}

pub fn apply_filters(records: &[MergedRecord], cfg: &FilterConfig<'_>) -> FilterOutcome {
    let mut report = FilterReport { input: records.len(), ..Default::default() };
    let mut verdicts: Vec<Option<FilterKind>> = records.iter().map(|r| early_filter(r, cfg)).collect();

    let promiscuous = promiscuous_tails(
        records.iter().zip(&verdicts).filter(|(_, v)| v.is_none()).map(|(r, _)| r),
        cfg.promiscuous_min_enterprises,
    );
    for (r, v) in records.iter().zip(verdicts.iter_mut()) {
        if v.is_some() {
            continue;
        }
        let tail = r.engine_info.as_ref().and_then(|i| i.identity_tail());
        *v = match tail {
            Some(t) if promiscuous.contains(t) => Some(FilterKind::PromiscuousEngineId),
            _ => late_filter(r, cfg),
        };
    }

    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (r, v) in records.iter().zip(verdicts) {
        match v {
            Some(kind) => {
                report.removed[kind.index()].1 += 1;
                removed.push((r.ip, kind));
            }
            None => kept.push(r.clone()),
        }
    }
    report.surviving = kept.len();
    FilterOutcome { kept, removed, report }
}

/// Full chain from raw records of both passes.
pub fn process_scans(scan1: &[ScanRecord], scan2: &[ScanRecord], cfg: &FilterConfig<'_>) -> ProcessedScans {
    let (obs1, stats1) = decode_scan(scan1);
    let (obs2, stats2) = decode_scan(scan2);
    let merged = merge_scans(&obs1, &obs2);
    let mut outcome = apply_filters(&merged, cfg);
    let undecodable: BTreeSet<IpAddr> = undecodable_ips(scan1, &obs1).chain(undecodable_ips(scan2, &obs2)).collect();
    outcome.report.undecodable = undecodable.len();
    outcome.report.not_in_both = obs1.keys().chain(obs2.keys()).collect::<BTreeSet<_>>().len() - merged.len();
    ProcessedScans { stats1, stats2, merged, outcome }
}

fn undecodable_ips<'a>(
    records: &'a [ScanRecord],
    decoded: &'a BTreeMap<IpAddr, Observation>,
) -> impl Iterator<Item = IpAddr> + 'a {
    records.iter().map(|r| r.ip).filter(move |ip| !decoded.contains_key(ip))
}

#[derive(Debug, Clone)]
pub struct ProcessedScans {
    pub stats1: DecodeStats,
    pub stats2: DecodeStats,
    pub merged: Vec<MergedRecord>,
    pub outcome: FilterOutcome,
}

const UNROUTABLE_V4: [(u32, u8); 15] = [
    (0x0000_0000, 8),  // this network
    (0x0a00_0000, 8),  // private
    (0x6440_0000, 10), // shared address space
    (0x7f00_0000, 8),  // loopback
    (0xa9fe_0000, 16), // link local
    (0xac10_0000, 12), // private
    (0xc000_0000, 24), // IETF protocol assignments
    (0xc000_0200, 24), // TEST-NET-1
    (0xc058_6300, 24), // 6to4 relay anycast
    (0xc0a8_0000, 16), // private
    (0xc612_0000, 15), // benchmarking
    (0xc633_6400, 24), // TEST-NET-2
    (0xcb00_7100, 24), // TEST-NET-3
    (0xe000_0000, 4),  // multicast
    (0xf000_0000, 4),  // class E and limited broadcast
];

/// Whether `addr` is globally routable unicast space.
pub fn routability_check(addr: Ipv4Addr) -> bool {
    let v = u32::from(addr);
    !UNROUTABLE_V4.iter().any(|&(net, len)| v >> (32 - len) == net >> (32 - len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode_report, ReportSpec, OID_USM_UNKNOWN_ENGINE_IDS};
    use crate::engineid::from_hex;
    use alloc::vec;

    fn ip(s: &str) -> IpAddr {
        s.parse().unwrap()
    }

    fn obs(s: &str, id: &[u8], boots: i64, time: i64, recv_s: i64) -> Observation {
        Observation::new(ip(s), id.to_vec(), boots, time, recv_s * 1000 + 250)
    }

    fn brocade_id() -> Vec<u8> {
        from_hex("800007c703748ef831db80").unwrap()
    }

    fn pair(id: &[u8], b1: i64, b2: i64, lrt1: i64, lrt2: i64) -> MergedRecord {
        let (t1, t2) = (1_000_000, 1_086_400);
        MergedRecord::new(obs("193.0.14.129", id, b1, t1 - lrt1, t1), obs("193.0.14.129", id, b2, t2 - lrt2, t2))
    }

    fn verdict(r: MergedRecord) -> Option<FilterKind> {
        apply_filters(&[r], &FilterConfig::default()).removed.first().map(|(_, k)| *k)
    }

    #[test]
    fn last_reboot_is_receive_second_minus_time() {
        let o = Observation::new(ip("10.0.0.1"), vec![1], 148, 10043812, 1_617_990_019_999);
        assert_eq!(o.last_reboot, 1_617_990_019 - 10043812);
        assert!(!o.is_future());
        assert!(Observation::new(ip("10.0.0.1"), vec![1], 1, -1, 5_000).is_future());
    }

    #[test]
    fn boots_change_and_drift_boundaries() {
        let id = brocade_id();
        assert_eq!(verdict(pair(&id, 148, 149, 500, 500)), Some(FilterKind::BootsChanged));
        assert_eq!(verdict(pair(&id, 148, 148, 500, 511)), Some(FilterKind::LastRebootDrift));
        assert_eq!(verdict(pair(&id, 148, 148, 511, 500)), Some(FilterKind::LastRebootDrift));
        assert_eq!(verdict(pair(&id, 148, 148, 500, 510)), None);
        assert_eq!(verdict(pair(&id, 148, 148, 500, 509)), None);
    }

    #[test]
    fn first_triggering_filter_wins() {
        // Empty in pass 2 and also a changed ID: attributed to filter 1.
        let r = MergedRecord::new(obs("1.1.1.1", &brocade_id(), 0, 0, 10), obs("1.1.1.1", &[], 0, 0, 20));
        assert_eq!(verdict(r), Some(FilterKind::MissingEngineId));
        let r =
            MergedRecord::new(obs("1.1.1.1", &brocade_id(), 1, 5, 10), obs("1.1.1.1", &[0x80, 1, 2, 3, 4], 1, 15, 20));
        assert_eq!(verdict(r), Some(FilterKind::InconsistentEngineId));
        assert_eq!(verdict(pair(&[0x80, 0, 1], 1, 1, 5, 5)), Some(FilterKind::ShortEngineId));
        assert_eq!(verdict(pair(&[0x80, 0, 1, 2], 1, 1, 5, 5)), None);
        // Zero boots and future time: zero is listed first.
        let r = MergedRecord::new(obs("1.1.1.1", &brocade_id(), 0, -5, 10), obs("1.1.1.1", &brocade_id(), 0, -5, 20));
        assert_eq!(verdict(r), Some(FilterKind::ZeroTimeOrBoots));
        let r = MergedRecord::new(obs("1.1.1.1", &brocade_id(), 3, -5, 10), obs("1.1.1.1", &brocade_id(), 3, 5, 20));
        assert_eq!(verdict(r), Some(FilterKind::FutureTime));
    }

    #[test]
    fn ipv4_and_oui_filters() {
        let private = from_hex("80001f88010a000001").unwrap();
        assert_eq!(verdict(pair(&private, 1, 1, 5, 5)), Some(FilterKind::UnroutableIpv4));
        let public = from_hex("80001f8801c1000e81").unwrap();
        assert_eq!(verdict(pair(&public, 1, 1, 5, 5)), None);

        let mut table = OuiTable::new();
        table.insert([0x74, 0x8e, 0xf8], "Brocade Communications Systems, Inc.");
        let cfg = FilterConfig { oui: Some(&table), ..Default::default() };
        let known = pair(&brocade_id(), 1, 1, 5, 5);
        let unknown = pair(&from_hex("800007c703000000000001").unwrap(), 1, 1, 5, 5);
        let out = apply_filters(&[known, unknown], &cfg);
        assert_eq!(out.report.removed_by(FilterKind::UnregisteredOui), 1);
        assert_eq!(out.report.surviving, 1);
    }

    #[test]
    fn promiscuous_identity_across_enterprises() {
        let a = from_hex("800000090300000c123456").unwrap();
        let b = from_hex("800007c70300000c123456").unwrap();
        let c = from_hex("800007c70300000c999999").unwrap();
        let mut r1 = pair(&a, 1, 1, 5, 5);
        let mut r2 = pair(&b, 1, 1, 5, 5);
        let mut r3 = pair(&c, 1, 1, 5, 5);
        r1.ip = ip("1.0.0.1");
        r2.ip = ip("1.0.0.2");
        r3.ip = ip("1.0.0.3");
        let out = apply_filters(&[r1, r2, r3], &FilterConfig::default());
        assert_eq!(out.report.removed_by(FilterKind::PromiscuousEngineId), 2);
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].ip, ip("1.0.0.3"));
    }

    #[test]
    fn report_accounting() {
        let id = brocade_id();
        let recs = [pair(&id, 148, 149, 5, 5), pair(&id, 148, 148, 5, 5), pair(&[], 0, 0, 0, 0)];
        let out = apply_filters(&recs, &FilterConfig::default());
        let r = &out.report;
        assert_eq!(r.input, 3);
        assert_eq!(r.input - r.total_removed(), r.surviving);
        let rows = r.rows();
        assert_eq!(rows.len(), 14);
        assert_eq!(rows[3], ("missing_engine_id", 1));
        assert_eq!(rows[13], ("surviving", 1));
        assert_eq!(FilterKind::from_name("boots_changed"), Some(FilterKind::BootsChanged));
    }

    fn report_bytes(id: &[u8], boots: i64, time: i64) -> Vec<u8> {
        encode_report(&ReportSpec {
            msg_id: 200,
            request_id: 200,
            engine_id: id,
            engine_boots: boots,
            engine_time: time,
            max_size: 1500,
            counter_oid: &OID_USM_UNKNOWN_ENGINE_IDS,
            counter: 1,
        })
    }

    fn rec(s: &str, idx: u32, t: i64, payload: Vec<u8>) -> ScanRecord {
        ScanRecord { ip: ip(s), scan_label: "scan1".into(), recv_time_ms: t, response_index: idx, payload }
    }

    #[test]
    fn decode_keeps_first_response_and_flags_conflicts() {
        let id = brocade_id();
        let records = vec![
            rec("1.0.0.1", 2, 2000, report_bytes(&[0x80, 9, 9, 9, 9], 1, 1)),
            rec("1.0.0.1", 1, 1000, report_bytes(&id, 148, 10043812)),
            rec("1.0.0.2", 1, 1000, vec![0xde, 0xad]),
            rec("1.0.0.3", 1, 1000, report_bytes(&id, 2, 7)),
            rec("1.0.0.3", 2, 1001, report_bytes(&id, 2, 7)),
        ];
        let (obs, stats) = decode_scan(&records);
        assert_eq!(obs.len(), 2);
        assert_eq!(obs[&ip("1.0.0.1")].boots, 148);
        assert_eq!(stats.undecodable_ips, 1);
        assert_eq!(stats.duplicate_responders, 2);
        assert_eq!(stats.duplicate_responses, 2);
        assert_eq!(stats.conflicting_ips.iter().copied().collect::<Vec<_>>(), vec![ip("1.0.0.1")]);
    }

    #[test]
    fn merge_is_inner_join_by_ip() {
        let id = brocade_id();
        let s1 =
            vec![rec("1.0.0.1", 1, 1000, report_bytes(&id, 148, 10)), rec("1.0.0.9", 1, 1000, report_bytes(&id, 1, 1))];
        let s2 = vec![rec("1.0.0.1", 1, 90_000, report_bytes(&id, 148, 99)), rec("1.0.0.7", 1, 1000, vec![1])];
        let p = process_scans(&s1, &s2, &FilterConfig::default());
        assert_eq!(p.merged.len(), 1);
        assert_eq!((p.merged[0].obs1.boots, p.merged[0].obs2.boots), (148, 148));
        assert_eq!(p.outcome.report.not_in_both, 1);
        assert_eq!(p.outcome.report.undecodable, 1);
    }

    #[test]
    fn routability() {
        for s in [
            "10.0.0.1",
            "224.0.0.1",
            "127.0.0.1",
            "169.254.1.1",
            "172.31.0.1",
            "192.168.1.1",
            "255.255.255.255",
            "100.64.0.1",
            "0.1.2.3",
            "240.0.0.1",
            "198.19.0.1",
        ] {
            assert!(!routability_check(s.parse().unwrap()), "{s}");
        }
        for s in ["193.0.14.129", "8.8.8.8", "172.32.0.1", "100.128.0.1", "198.20.0.1", "20.0.0.1"] {
            assert!(routability_check(s.parse().unwrap()), "{s}");
        }
    }
}
