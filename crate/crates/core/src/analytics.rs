//! Vendor fingerprinting and aggregate studies over alias sets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::net::IpAddr;

use crate::alias::{AliasSet, AliasSets, Family};
use crate::engineid::{
    hamming_fraction, EngineIdInfo, EnterpriseTable, FormatCategory, OuiTable, TableParseError, VendorLabel,
    VendorSource,
};
use crate::pipeline::{MergedRecord, ValidRecord};
use crate::prefix::{IpPrefix, PrefixTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("no record for alias set member {0}")]
    MissingRecord(IpAddr),
}

/// MAC OUI first, then enterprise number, else unknown.
pub fn vendor_of(info: &EngineIdInfo, oui_db: &OuiTable, ent_db: &EnterpriseTable) -> VendorLabel {
    if let Some(name) = info.mac.and_then(|m| oui_db.get(m.oui())) {
        return VendorLabel { source: VendorSource::Oui, name: name.into() };
    }
    if let Some(name) = info.enterprise_number.and_then(|n| ent_db.get(n)) {
        return VendorLabel { source: VendorSource::EnterpriseId, name: name.into() };
    }
    VendorLabel::unknown()
}

/// Router-interface annotations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouterTagSet {
    pub ips: BTreeSet<IpAddr>,
}

impl RouterTagSet {
    /// One address per line; blank lines and `#` comments skipped.
    pub fn parse(text: &str) -> Result<Self, TableParseError> {
        let mut ips = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let ip = line.parse().map_err(|_| TableParseError { line: i + 1, reason: "invalid IP address" })?;
            ips.insert(ip);
        }
        Ok(Self { ips })
    }

    pub fn contains(&self, ip: &IpAddr) -> bool {
        self.ips.contains(ip)
    }

    pub fn len(&self) -> usize {
        self.ips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ips.is_empty()
    }
}

/// Unmapped addresses belong to this AS.
pub const UNMAPPED_AS: u32 = 0;

#[derive(Debug, Clone, Default)]
pub struct AsMapping {
    pub prefixes: PrefixTable<u32>,
    pub as_meta: BTreeMap<u32, String>,
}

impl AsMapping {
    /// `CIDR<TAB>ASN` lines.
    pub fn parse_pfx2as(&mut self, text: &str) -> Result<(), TableParseError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason| TableParseError { line: i + 1, reason };
            let (cidr, asn) = line.split_once('\t').ok_or(err("expected CIDR<TAB>ASN"))?;
            let prefix: IpPrefix = cidr.trim().parse().map_err(|_| err("invalid CIDR"))?;
            let asn = asn.trim().parse().map_err(|_| err("ASN is not decimal"))?;
            self.prefixes.insert(prefix, asn);
        }
        Ok(())
    }

    /// `ASN<TAB>region` lines.
    pub fn parse_regions(&mut self, text: &str) -> Result<(), TableParseError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason| TableParseError { line: i + 1, reason };
            let (asn, region) = line.split_once('\t').ok_or(err("expected ASN<TAB>region"))?;
            let asn = asn.trim().parse().map_err(|_| err("ASN is not decimal"))?;
            self.as_meta.insert(asn, region.trim().into());
        }
        Ok(())
    }

    pub fn asn_of(&self, ip: IpAddr) -> u32 {
        self.prefixes.lookup(ip).map(|(_, asn)| *asn).unwrap_or(UNMAPPED_AS)
    }

    pub fn region_of(&self, asn: u32) -> &str {
        self.as_meta.get(&asn).map(String::as_str).unwrap_or("unknown")
    }
}

fn record_index(records: &[ValidRecord]) -> BTreeMap<IpAddr, &ValidRecord> {
    records.iter().map(|r| (r.ip, r)).collect()
}

/// Fills in vendor (from the representative record) and router tag.
pub fn annotate_sets(
    sets: &mut AliasSets,
    records: &[ValidRecord],
    oui_db: &OuiTable,
    ent_db: &EnterpriseTable,
    tags: Option<&RouterTagSet>,
) -> Result<(), AnalyticsError> {
    let index = record_index(records);
    for set in &mut sets.sets {
        let rep = set.first_ip();
        let rec = index.get(&rep).ok_or(AnalyticsError::MissingRecord(rep))?;
        set.vendor = vendor_of(&rec.info, oui_db, ent_db);
        set.router_tagged = tags.is_some_and(|t| set.members.iter().any(|ip| t.contains(ip)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FamilyCounts {
    pub v4_only: usize,
    pub v6_only: usize,
    pub dual_stack: usize,
}

impl FamilyCounts {
    pub fn add(&mut self, family: Family) {
        match family {
            Family::V4Only => self.v4_only += 1,
            Family::V6Only => self.v6_only += 1,
            Family::DualStack => self.dual_stack += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.v4_only + self.v6_only + self.dual_stack
    }
}

/// Sets per vendor name, split by family.
pub fn vendor_popularity<'a>(sets: impl IntoIterator<Item = &'a AliasSet>) -> BTreeMap<String, FamilyCounts> {
    let mut out: BTreeMap<String, FamilyCounts> = BTreeMap::new();
    for s in sets {
        out.entry(s.vendor.name.clone()).or_default().add(s.family);
    }
    out
}

/// Normalizes counts to shares summing to 1.
pub fn shares<K: Ord + Clone>(counts: &BTreeMap<K, usize>) -> BTreeMap<K, f64> {
    let total: usize = counts.values().sum();
    counts.iter().map(|(k, &n)| (k.clone(), if total == 0 { 0.0 } else { n as f64 / total as f64 })).collect()
}

/// Empirical CDF over sorted samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    samples: Vec<f64>,
}

impl Ecdf {
    /// NaN samples are rejected.
    pub fn new(mut samples: Vec<f64>) -> Result<Self, AnalyticsError> {
        if samples.iter().any(|x| x.is_nan()) {
            return Err(AnalyticsError::InvalidArgument("NaN sample"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.partition_point(|s| *s <= x) as f64 / self.samples.len() as f64
    }

    /// Distinct sample values with the CDF just after each.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.samples.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in self.samples.iter().enumerate() {
            let y = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = y,
                _ => out.push((x, y)),
            }
        }
        out
    }

    /// Kolmogorov-Smirnov distance to a continuous reference CDF.
    pub fn ks_statistic(&self, reference: impl Fn(f64) -> f64) -> f64 {
        let n = self.samples.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in self.samples.iter().enumerate() {
            let f = reference(x);
            d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
        }
        d
    }
}

/// Uptime at `asof` of each set's representative, from its first-scan last
/// reboot time.
pub fn uptime_distribution(sets: &AliasSets, records: &[ValidRecord], asof: i64) -> Result<Ecdf, AnalyticsError> {
    let index = record_index(records);
    let mut samples = Vec::with_capacity(sets.len());
    for set in sets.iter() {
        let rep = set.first_ip();
        let rec = index.get(&rep).ok_or(AnalyticsError::MissingRecord(rep))?;
        if rec.lrt1 > asof {
            return Err(AnalyticsError::InvalidArgument("asof precedes a last reboot time"));
        }
        samples.push((asof - rec.lrt1) as f64);
    }
    Ecdf::new(samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub tagged: usize,
    pub responsive: usize,
    pub ratio: f64,
}

/// Per AS: tagged router addresses that answered, over all tagged addresses.
/// Only ASes with at least `min_ips` tagged addresses are reported.
pub fn per_as_coverage(
    responsive: &BTreeSet<IpAddr>,
    tags: &RouterTagSet,
    mapping: &AsMapping,
    min_ips: usize,
) -> BTreeMap<u32, Coverage> {
    let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for ip in &tags.ips {
        let c = counts.entry(mapping.asn_of(*ip)).or_default();
        c.0 += 1;
        if responsive.contains(ip) {
            c.1 += 1;
        }
    }
    counts
        .into_iter()
        .filter(|(_, (tagged, _))| *tagged >= min_ips.max(1))
        .map(|(asn, (tagged, resp))| (asn, Coverage { tagged, responsive: resp, ratio: resp as f64 / tagged as f64 }))
        .collect()
}

/// Sets keyed by the AS of their representative address.
pub fn sets_by_as<'a>(
    sets: impl IntoIterator<Item = &'a AliasSet>,
    mapping: &AsMapping,
) -> BTreeMap<u32, Vec<&'a AliasSet>> {
    let mut out: BTreeMap<u32, Vec<&AliasSet>> = BTreeMap::new();
    for s in sets {
        out.entry(mapping.asn_of(s.first_ip())).or_default().push(s);
    }
    out
}

fn vendor_counts<'a>(sets: impl IntoIterator<Item = &'a &'a AliasSet>) -> BTreeMap<&'a str, usize> {
    let mut counts = BTreeMap::new();
    for s in sets {
        *counts.entry(s.vendor.name.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Share of the most common vendor per AS; unknown counts as a vendor.
pub fn vendor_dominance(by_as: &BTreeMap<u32, Vec<&AliasSet>>) -> BTreeMap<u32, f64> {
    by_as
        .iter()
        .filter(|(_, sets)| !sets.is_empty())
        .map(|(asn, sets)| {
            let max = vendor_counts(sets.iter()).values().copied().max().unwrap_or(0);
            (*asn, max as f64 / sets.len() as f64)
        })
        .collect()
}

/// Distinct vendor labels per AS, unknown included.
pub fn vendors_per_as(by_as: &BTreeMap<u32, Vec<&AliasSet>>) -> BTreeMap<u32, usize> {
    by_as.iter().map(|(asn, sets)| (*asn, vendor_counts(sets.iter()).len())).collect()
}

pub fn routers_per_as(by_as: &BTreeMap<u32, Vec<&AliasSet>>) -> BTreeMap<u32, usize> {
    by_as.iter().map(|(asn, sets)| (*asn, sets.len())).collect()
}

/// region -> vendor -> share of that region's sets.
pub fn regional_popularity<'a>(
    sets: impl IntoIterator<Item = &'a AliasSet>,
    mapping: &AsMapping,
) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for s in sets {
        let region = mapping.region_of(mapping.asn_of(s.first_ip()));
        *counts.entry(region.into()).or_default().entry(s.vendor.name.clone()).or_insert(0) += 1;
    }
    counts.into_iter().map(|(region, c)| (region, shares(&c))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TupleUniqueness {
    pub ips: usize,
    pub unique_ips: usize,
    pub fraction: f64,
    /// distinct engine IDs per tuple -> number of tuples.
    pub histogram: BTreeMap<usize, usize>,
}

/// Share of IPs whose exact `(lrt1, boots)` tuple is seen with a single
/// engine ID.
pub fn tuple_uniqueness(records: &[ValidRecord]) -> Result<TupleUniqueness, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::InvalidArgument("tuple uniqueness of no records"));
    }
    let mut ids: BTreeMap<(i64, i64), BTreeSet<&[u8]>> = BTreeMap::new();
    for r in records {
        ids.entry((r.lrt1, r.boots)).or_default().insert(&r.engine_id);
    }
    let unique_ips = records.iter().filter(|r| ids[&(r.lrt1, r.boots)].len() == 1).count();
    let mut histogram = BTreeMap::new();
    for set in ids.values() {
        *histogram.entry(set.len()).or_insert(0) += 1;
    }
    Ok(TupleUniqueness {
        ips: records.len(),
        unique_ips,
        fraction: unique_ips as f64 / records.len() as f64,
        histogram,
    })
}

/// Relative Hamming weight of the payload after the format octet, grouped by
/// format. IDs with no payload are skipped.
pub fn hamming_by_format<'a>(infos: impl IntoIterator<Item = &'a EngineIdInfo>) -> BTreeMap<FormatCategory, Vec<f64>> {
    let mut out: BTreeMap<FormatCategory, Vec<f64>> = BTreeMap::new();
    for info in infos {
        if let Ok(h) = hamming_fraction(&info.data) {
            out.entry(info.format.category()).or_default().push(h);
        }
    }
    out
}

/// IPs per distinct engine ID, as a histogram: IPs per ID -> IDs.
pub fn engine_id_occurrences(records: &[ValidRecord]) -> BTreeMap<usize, usize> {
    let mut per_id: BTreeMap<&[u8], usize> = BTreeMap::new();
    for r in records {
        *per_id.entry(&r.engine_id).or_insert(0) += 1;
    }
    let mut hist = BTreeMap::new();
    for n in per_id.into_values() {
        *hist.entry(n).or_insert(0) += 1;
    }
    hist
}

/// `lrt2 - lrt1` histogram over records with a consistent, non-empty engine
/// ID and unchanged boots.
pub fn lrt_drift_distribution(merged: &[MergedRecord]) -> BTreeMap<i64, usize> {
    let mut hist = BTreeMap::new();
    for r in merged {
        let consistent = !r.obs1.engine_id.is_empty() && r.obs1.engine_id == r.obs2.engine_id;
        if consistent && r.obs1.boots == r.obs2.boots {
            *hist.entry(r.lrt_drift()).or_insert(0) += 1;
        }
    }
    hist
}
