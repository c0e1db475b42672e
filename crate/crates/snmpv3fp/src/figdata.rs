//! Aggregate analyses as CSV tables: report tables for `analyze` and tidy
//! per-figure tables (`figdata_<name>.csv`) for external plotting.
//!
//! Tidy tables have either `series,x,y` or `series,category,value` columns.
//! ECDF tables list each distinct x once with the CDF just after it.

use std::collections::BTreeMap;
use std::path::Path;

use snmpv3fp_core::alias::{set_statistics, AliasSets, Family};
use snmpv3fp_core::analytics::{
    engine_id_occurrences, hamming_by_format, lrt_drift_distribution, per_as_coverage, regional_popularity,
    routers_per_as, sets_by_as, tuple_uniqueness, uptime_distribution, vendor_dominance, vendor_popularity,
    vendors_per_as, AnalyticsError, AsMapping, Ecdf, RouterTagSet,
};
use snmpv3fp_core::engineid::{format_census, FormatCategory};
use snmpv3fp_core::pipeline::{MergedRecord, ValidRecord};

use crate::records::{self, FormatError};

/// `min_ips` thresholds of the coverage series.
pub const COVERAGE_THRESHOLDS: [usize; 5] = [2, 5, 10, 50, 100];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_to(&self, path: &Path) -> Result<(), FormatError> {
        let header: Vec<&str> = self.header.iter().map(String::as_str).collect();
        records::write_table(records::create(path)?, &header, self.rows.iter().cloned())
    }
}

pub struct AnalysisInput<'a> {
    pub valid: &'a [ValidRecord],
    /// Both passes, when available; enables the drift tables.
    pub merged: Option<&'a [MergedRecord]>,
    /// Annotated with vendor and router tags.
    pub sets: &'a AliasSets,
    pub mapping: &'a AsMapping,
    pub tags: Option<&'a RouterTagSet>,
    /// Reference time for uptime, Unix seconds.
    pub asof: i64,
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn ecdf_rows(t: &mut Table, series: &str, ecdf: &Ecdf) {
    for (x, y) in ecdf.steps() {
        t.push(vec![series.into(), f(x), f(y)]);
    }
}

fn ecdf_of(values: impl IntoIterator<Item = f64>) -> Result<Ecdf, AnalyticsError> {
    Ecdf::new(values.into_iter().collect())
}

fn ip_family(v4: bool) -> &'static str {
    if v4 {
        Family::V4Only.name()
    } else {
        Family::V6Only.name()
    }
}

fn responsive(input: &AnalysisInput<'_>) -> std::collections::BTreeSet<std::net::IpAddr> {
    input.valid.iter().map(|r| r.ip).collect()
}

/// Tables written by `analyze`.
pub fn report_tables(input: &AnalysisInput<'_>) -> Result<Vec<Table>, AnalyticsError> {
    let mut out = Vec::new();

    let mut t = Table::new("format_census", &["family", "format", "count", "share"]);
    for v4 in [true, false] {
        let census = format_census(input.valid.iter().filter(|r| r.ip.is_ipv4() == v4).map(|r| &r.info));
        for cat in FormatCategory::ALL {
            t.push(vec![ip_family(v4).into(), cat.name().into(), census.count(cat).to_string(), f(census.share(cat))]);
        }
        t.push(vec![
            ip_family(v4).into(),
            "NetSnmp".into(),
            census.net_snmp.to_string(),
            f(if census.total == 0 { 0.0 } else { census.net_snmp as f64 / census.total as f64 }),
        ]);
    }
    out.push(t);

    let stats = set_statistics(input.sets.iter());
    let mut t = Table::new(
        "set_statistics",
        &["variant", "sets", "non_singleton_sets", "ips_in_non_singleton", "mean_ips_per_non_singleton"],
    );
    t.push(vec![
        input.sets.variant.name().into(),
        stats.total.to_string(),
        stats.non_singleton.to_string(),
        stats.ips_in_non_singleton.to_string(),
        f(stats.mean_non_singleton),
    ]);
    out.push(t);

    let mut t = Table::new("set_sizes", &["members", "sets"]);
    for (size, n) in &stats.histogram {
        t.push(vec![size.to_string(), n.to_string()]);
    }
    out.push(t);

    let popularity = vendor_popularity(input.sets.iter());
    let total: usize = popularity.values().map(|c| c.total()).sum();
    let mut t = Table::new("vendor_popularity", &["vendor", "ipv4", "ipv6", "dual_stack", "total", "share"]);
    for (vendor, c) in &popularity {
        t.push(vec![
            vendor.clone(),
            c.v4_only.to_string(),
            c.v6_only.to_string(),
            c.dual_stack.to_string(),
            c.total().to_string(),
            f(c.total() as f64 / total.max(1) as f64),
        ]);
    }
    out.push(t);

    let index: BTreeMap<_, _> = input.valid.iter().map(|r| (r.ip, r)).collect();
    let mut t = Table::new("uptime", &["set_id", "vendor", "last_reboot_unix_s", "uptime_s"]);
    for (i, s) in input.sets.iter().enumerate() {
        let rec = index.get(&s.first_ip()).ok_or(AnalyticsError::MissingRecord(s.first_ip()))?;
        t.push(vec![i.to_string(), s.vendor.name.clone(), rec.lrt1.to_string(), (input.asof - rec.lrt1).to_string()]);
    }
    out.push(t);

    let by_as = sets_by_as(input.sets.iter(), input.mapping);
    let dominance = vendor_dominance(&by_as);
    let vendors = vendors_per_as(&by_as);
    let mut t = Table::new("as_summary", &["asn", "region", "routers", "vendors", "dominance"]);
    for (asn, n) in routers_per_as(&by_as) {
        t.push(vec![
            asn.to_string(),
            input.mapping.region_of(asn).into(),
            n.to_string(),
            vendors[&asn].to_string(),
            f(dominance[&asn]),
        ]);
    }
    out.push(t);

    let mut t = Table::new("regional_popularity", &["region", "vendor", "share"]);
    for (region, shares) in regional_popularity(input.sets.iter(), input.mapping) {
        for (vendor, s) in shares {
            t.push(vec![region.clone(), vendor, f(s)]);
        }
    }
    out.push(t);

    if let Some(tags) = input.tags {
        let mut t = Table::new("coverage", &["asn", "tagged", "responsive", "ratio"]);
        for (asn, c) in per_as_coverage(&responsive(input), tags, input.mapping, 1) {
            t.push(vec![asn.to_string(), c.tagged.to_string(), c.responsive.to_string(), f(c.ratio)]);
        }
        out.push(t);
    }

    if !input.valid.is_empty() {
        let u = tuple_uniqueness(input.valid)?;
        let mut t = Table::new("tuple_uniqueness", &["ips", "unique_ips", "fraction"]);
        t.push(vec![u.ips.to_string(), u.unique_ips.to_string(), f(u.fraction)]);
        out.push(t);
        let mut t = Table::new("tuple_engine_ids", &["engine_ids_per_tuple", "tuples"]);
        for (k, n) in u.histogram {
            t.push(vec![k.to_string(), n.to_string()]);
        }
        out.push(t);
    }

    let mut t = Table::new("engine_id_occurrences", &["ips_per_engine_id", "engine_ids"]);
    for (k, n) in engine_id_occurrences(input.valid) {
        t.push(vec![k.to_string(), n.to_string()]);
    }
    out.push(t);

    let mut t = Table::new("hamming_weight", &["format", "engine_ids", "mean_relative_weight"]);
    for (cat, ws) in hamming_by_format(input.valid.iter().map(|r| &r.info)) {
        t.push(vec![cat.name().into(), ws.len().to_string(), f(ws.iter().sum::<f64>() / ws.len() as f64)]);
    }
    out.push(t);

    if let Some(merged) = input.merged {
        let mut t = Table::new("lrt_drift", &["drift_s", "ips"]);
        for (d, n) in lrt_drift_distribution(merged) {
            t.push(vec![d.to_string(), n.to_string()]);
        }
        out.push(t);
    }
    Ok(out)
}

/// Tidy per-figure tables; names omit the `figdata_` prefix.
pub fn figdata_tables(input: &AnalysisInput<'_>) -> Result<Vec<Table>, AnalyticsError> {
    let xy = ["series", "x", "y"];
    let cat = ["series", "category", "value"];
    let mut out = Vec::new();

    let mut t = Table::new("engine_id_formats", &cat);
    for v4 in [true, false] {
        let census = format_census(input.valid.iter().filter(|r| r.ip.is_ipv4() == v4).map(|r| &r.info));
        if census.total > 0 {
            for c in FormatCategory::ALL {
                t.push(vec![ip_family(v4).into(), c.name().into(), f(census.share(c))]);
            }
        }
    }
    out.push(t);

    let mut t = Table::new("hamming_weight", &xy);
    for (c, ws) in hamming_by_format(input.valid.iter().map(|r| &r.info)) {
        ecdf_rows(&mut t, c.name(), &ecdf_of(ws)?);
    }
    out.push(t);

    if let Some(merged) = input.merged {
        let mut t = Table::new("last_reboot_drift", &xy);
        let samples = lrt_drift_distribution(merged).into_iter().flat_map(|(d, n)| std::iter::repeat_n(d as f64, n));
        ecdf_rows(&mut t, "all", &ecdf_of(samples)?);
        out.push(t);
    }

    let mut t = Table::new("alias_set_sizes", &xy);
    for fam in [Family::V4Only, Family::V6Only, Family::DualStack] {
        let sizes = input.sets.iter().filter(|s| s.family == fam).map(|s| s.len() as f64);
        ecdf_rows(&mut t, fam.name(), &ecdf_of(sizes)?);
    }
    out.push(t);

    if let Some(tags) = input.tags {
        let mut t = Table::new("coverage", &xy);
        let resp = responsive(input);
        for min in COVERAGE_THRESHOLDS {
            let ratios = per_as_coverage(&resp, tags, input.mapping, min).into_values().map(|c| c.ratio);
            ecdf_rows(&mut t, &format!("min_ips_{min}"), &ecdf_of(ratios)?);
        }
        out.push(t);
    }

    let mut t = Table::new("vendor_popularity", &cat);
    for (vendor, c) in vendor_popularity(input.sets.iter()) {
        for (fam, n) in [(Family::V4Only, c.v4_only), (Family::V6Only, c.v6_only), (Family::DualStack, c.dual_stack)] {
            t.push(vec![fam.name().into(), vendor.clone(), n.to_string()]);
        }
    }
    out.push(t);

    let mut t = Table::new("uptime", &xy);
    let all = uptime_distribution(input.sets, input.valid, input.asof)?;
    ecdf_rows(&mut t, "all", &ecdf_of(all.samples().iter().map(|s| s / 86_400.0))?);
    out.push(t);

    let by_as = sets_by_as(input.sets.iter(), input.mapping);
    let mut t = Table::new("vendors_per_as", &xy);
    ecdf_rows(&mut t, "all", &ecdf_of(vendors_per_as(&by_as).into_values().map(|n| n as f64))?);
    out.push(t);

    let mut t = Table::new("routers_per_as", &xy);
    ecdf_rows(&mut t, "all", &ecdf_of(routers_per_as(&by_as).into_values().map(|n| n as f64))?);
    out.push(t);

    let mut t = Table::new("vendor_dominance", &xy);
    ecdf_rows(&mut t, "all", &ecdf_of(vendor_dominance(&by_as).into_values())?);
    out.push(t);

    let mut t = Table::new("regional_popularity", &cat);
    for (region, shares) in regional_popularity(input.sets.iter(), input.mapping) {
        for (vendor, s) in shares {
            t.push(vec![region.clone(), vendor, f(s)]);
        }
    }
    out.push(t);

    if !input.valid.is_empty() {
        let mut t = Table::new("tuple_uniqueness", &xy);
        for (k, n) in tuple_uniqueness(input.valid)?.histogram {
            t.push(vec!["all".into(), k.to_string(), n.to_string()]);
        }
        out.push(t);
    }
    Ok(out)
}

/// Writes each table to `dir/<prefix><name>.csv`; returns the paths.
pub fn write_tables(dir: &Path, prefix: &str, tables: &[Table]) -> Result<Vec<std::path::PathBuf>, FormatError> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(tables.len());
    for t in tables {
        let p = dir.join(format!("{prefix}{}.csv", t.name));
        t.write_to(&p)?;
        paths.push(p);
    }
    Ok(paths)
}
