//! CSV file formats exchanged between subcommands.
//!
//! Every writer emits a header row; every reader accepts input with or
//! without one.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::IpAddr;
use std::path::Path;

use snmpv3fp_core::alias::AliasSet;
use snmpv3fp_core::engineid::{from_hex, parse_engine_id, to_hex};
use snmpv3fp_core::pipeline::{FilterKind, FilterReport, ScanRecord, ValidRecord};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("record {record}: {reason}")]
    Parse { record: usize, reason: String },
}

fn parse_err(record: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Parse { record, reason: reason.into() }
}

pub const SCAN_HEADER: [&str; 5] = ["ip", "scan_label", "recv_time_unix_ms", "response_index", "payload_hex"];
pub const VALID_HEADER: [&str; 7] = [
    "ip",
    "engine_id_hex",
    "boots",
    "last_reboot_unix_s_scan1",
    "last_reboot_unix_s_scan2",
    "format",
    "enterprise_number",
];
pub const ALIAS_HEADER: [&str; 5] = ["set_id", "family", "vendor", "member_count", "ips"];
pub const GROUND_TRUTH_HEADER: [&str; 5] = ["device_id", "engine_id_hex", "boots", "reboot_epoch", "ips"];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_reader(r)
}

/// Rows of `r`, with a leading row equal to `header` skipped.
fn rows<R: Read>(r: R, header: &[&str]) -> Result<Vec<csv::StringRecord>, FormatError> {
    let mut out = Vec::new();
    for (i, rec) in reader(r).records().enumerate() {
        let rec = rec?;
        if i == 0 && rec.get(0) == Some(header[0]) {
            continue;
        }
        if rec.len() == 1 && rec.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse_err(i + 1, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        out.push(rec);
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, n: usize, name: &str) -> Result<T, FormatError> {
    rec.get(idx)
        .unwrap_or("")
        .parse()
        .map_err(|_| parse_err(n, format!("invalid {name} {:?}", rec.get(idx).unwrap_or(""))))
}

fn hex_field(rec: &csv::StringRecord, idx: usize, n: usize, name: &str) -> Result<Vec<u8>, FormatError> {
    from_hex(rec.get(idx).unwrap_or("")).ok_or_else(|| parse_err(n, format!("invalid hex in {name}")))
}

pub fn write_scan_records<W: Write>(w: W, records: &[ScanRecord]) -> Result<(), FormatError> {
    let mut w = writer(w);
    w.write_record(SCAN_HEADER)?;
    for r in records {
        w.write_record([
            r.ip.to_string(),
            r.scan_label.clone(),
            r.recv_time_ms.to_string(),
            r.response_index.to_string(),
            to_hex(&r.payload),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scan_records<R: Read>(r: R) -> Result<Vec<ScanRecord>, FormatError> {
    rows(r, &SCAN_HEADER)?
        .iter()
        .enumerate()
        .map(|(n, rec)| {
            Ok(ScanRecord {
                ip: field(rec, 0, n + 1, "ip")?,
                scan_label: rec[1].to_string(),
                recv_time_ms: field(rec, 2, n + 1, "recv_time_unix_ms")?,
                response_index: field(rec, 3, n + 1, "response_index")?,
                payload: hex_field(rec, 4, n + 1, "payload_hex")?,
            })
        })
        .collect()
}

/// Empty cell when the ID has no enterprise field.
fn enterprise_cell(r: &ValidRecord) -> String {
    r.info.enterprise_number.map(|n| n.to_string()).unwrap_or_default()
}

pub fn write_valid_records<W: Write>(w: W, records: &[ValidRecord]) -> Result<(), FormatError> {
    let mut w = writer(w);
    w.write_record(VALID_HEADER)?;
    for r in records {
        w.write_record([
            r.ip.to_string(),
            to_hex(&r.engine_id),
            r.boots.to_string(),
            r.lrt1.to_string(),
            r.lrt2.to_string(),
            r.info.format.to_string(),
            enterprise_cell(r),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Format and enterprise columns are informational; the engine ID is
/// re-parsed from its hex form.
pub fn read_valid_records<R: Read>(r: R) -> Result<Vec<ValidRecord>, FormatError> {
    rows(r, &VALID_HEADER)?
        .iter()
        .enumerate()
        .map(|(n, rec)| {
            let engine_id = hex_field(rec, 1, n + 1, "engine_id_hex")?;
            let info = parse_engine_id(&engine_id).map_err(|e| parse_err(n + 1, e.to_string()))?;
            Ok(ValidRecord {
                ip: field(rec, 0, n + 1, "ip")?,
                engine_id,
                boots: field(rec, 2, n + 1, "boots")?,
                lrt1: field(rec, 3, n + 1, "last_reboot_unix_s_scan1")?,
                lrt2: field(rec, 4, n + 1, "last_reboot_unix_s_scan2")?,
                info,
            })
        })
        .collect()
}

pub fn write_filter_report<W: Write>(w: W, report: &FilterReport) -> Result<(), FormatError> {
    let mut w = writer(w);
    w.write_record(["step", "count"])?;
    for (step, count) in report.rows() {
        w.write_record([step.to_string(), count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_filter_report<R: Read>(r: R) -> Result<FilterReport, FormatError> {
    let mut report = FilterReport::default();
    for (n, rec) in rows(r, &["step", "count"])?.iter().enumerate() {
        let count: usize = field(rec, 1, n + 1, "count")?;
        match &rec[0] {
            "undecodable" => report.undecodable = count,
            "not_in_both_scans" => report.not_in_both = count,
            "input" => report.input = count,
            "surviving" => report.surviving = count,
            name => {
                let kind =
                    FilterKind::from_name(name).ok_or_else(|| parse_err(n + 1, format!("unknown step {name:?}")))?;
                report.removed[kind as usize].1 = count;
            }
        }
    }
    Ok(report)
}

pub fn write_alias_sets<'a, W: Write>(w: W, sets: impl IntoIterator<Item = &'a AliasSet>) -> Result<(), FormatError> {
    let mut w = writer(w);
    w.write_record(ALIAS_HEADER)?;
    for (i, s) in sets.into_iter().enumerate() {
        let ips: Vec<String> = s.members.iter().map(IpAddr::to_string).collect();
        w.write_record([
            (i + 1).to_string(),
            s.family.name().to_string(),
            s.vendor.name.clone(),
            s.len().to_string(),
            ips.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The columns of one alias-set row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasRow {
    pub set_id: u64,
    pub family: String,
    pub vendor: String,
    pub members: Vec<IpAddr>,
}

pub fn read_alias_sets<R: Read>(r: R) -> Result<Vec<AliasRow>, FormatError> {
    rows(r, &ALIAS_HEADER)?
        .iter()
        .enumerate()
        .map(|(n, rec)| {
            let members = rec[4]
                .split(';')
                .map(|s| s.trim().parse().map_err(|_| parse_err(n + 1, format!("invalid member {s:?}"))))
                .collect::<Result<Vec<IpAddr>, _>>()?;
            let count: usize = field(rec, 3, n + 1, "member_count")?;
            if count != members.len() {
                return Err(parse_err(n + 1, "member_count disagrees with ips"));
            }
            Ok(AliasRow {
                set_id: field(rec, 0, n + 1, "set_id")?,
                family: rec[1].into(),
                vendor: rec[2].into(),
                members,
            })
        })
        .collect()
}

/// One ground-truth device row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthRow {
    pub device_id: u32,
    pub engine_id: Vec<u8>,
    pub boots: i64,
    pub reboot_epoch: i64,
    pub ips: Vec<IpAddr>,
}

pub fn write_ground_truth<W: Write>(w: W, rows: &[GroundTruthRow]) -> Result<(), FormatError> {
    let mut w = writer(w);
    w.write_record(GROUND_TRUTH_HEADER)?;
    for r in rows {
        let ips: Vec<String> = r.ips.iter().map(IpAddr::to_string).collect();
        w.write_record([
            r.device_id.to_string(),
            to_hex(&r.engine_id),
            r.boots.to_string(),
            r.reboot_epoch.to_string(),
            ips.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ground_truth<R: Read>(r: R) -> Result<Vec<GroundTruthRow>, FormatError> {
    rows(r, &GROUND_TRUTH_HEADER)?
        .iter()
        .enumerate()
        .map(|(n, rec)| {
            let ips = rec[4]
                .split(';')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| parse_err(n + 1, format!("invalid ip {s:?}"))))
                .collect::<Result<Vec<IpAddr>, _>>()?;
            Ok(GroundTruthRow {
                device_id: field(rec, 0, n + 1, "device_id")?,
                engine_id: hex_field(rec, 1, n + 1, "engine_id_hex")?,
                boots: field(rec, 2, n + 1, "boots")?,
                reboot_epoch: field(rec, 3, n + 1, "reboot_epoch")?,
                ips,
            })
        })
        .collect()
}

/// A CSV with a header row and arbitrary string cells.
pub fn write_table<W: Write>(
    w: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), FormatError> {
    let mut w = writer(w);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Header plus rows of a generic CSV.
pub fn read_table<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<String>>), FormatError> {
    let mut it = reader(r).into_records();
    let header = match it.next() {
        Some(h) => h?.iter().map(String::from).collect(),
        None => return Ok((Vec::new(), Vec::new())),
    };
    let mut rows = Vec::new();
    for rec in it {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// One address per line; blank lines and `#` comments skipped.
pub fn read_ip_list<R: Read>(r: R) -> Result<Vec<IpAddr>, FormatError> {
    let mut text = String::new();
    BufReader::new(r).read_to_string(&mut text)?;
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| l.parse().map_err(|_| parse_err(i + 1, format!("invalid IP address {l:?}"))))
        .collect()
}

pub fn write_ip_list<W: Write>(w: W, ips: &[IpAddr]) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    for ip in ips {
        writeln!(w, "{ip}")?;
    }
    w.flush()
}

fn with_path(path: &Path) -> impl Fn(io::Error) -> io::Error + '_ {
    move |e| io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}

/// Creates `path` and its parent directories. Errors name the path.
pub fn create(path: &Path) -> io::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(with_path(path))?;
    }
    File::create(path).map(BufWriter::new).map_err(with_path(path))
}

/// Errors name the path.
pub fn open(path: &Path) -> io::Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(with_path(path))
}
