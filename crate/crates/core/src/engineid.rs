//! Engine ID structure (RFC 3411 SnmpEngineID), vendor registries and
//! randomness statistics.
//!
//! Conformant IDs set the top bit of the first octet; octets 0..4 then hold
//! the IANA enterprise number and octet 4 a format selector:
//!
//! | format | meaning                 |
//! |-------:|-------------------------|
//! | 1      | IPv4 address (4 octets) |
//! | 2      | IPv6 address (16)       |
//! | 3      | MAC address (6)         |
//! | 4      | administrator text      |
//! | 5      | octets                  |
//! | 128..  | enterprise specific     |

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::net::{Ipv4Addr, Ipv6Addr};

/// IANA enterprise number of the Net-SNMP project.
pub const NET_SNMP_ENTERPRISE: u32 = 8072;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineIdError {
    #[error("missing engine ID")]
    MissingEngineId,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EngineIdFormat {
    Ipv4,
    Ipv6,
    Mac,
    Text,
    Octets,
    EnterpriseSpecific(u8),
    NonConforming,
}

/// Census buckets: the format with the enterprise-specific code dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FormatCategory {
    Ipv4,
    Ipv6,
    Mac,
    Text,
    Octets,
    EnterpriseSpecific,
    NonConforming,
}

impl FormatCategory {
    pub const ALL: [FormatCategory; 7] =
        [Self::Ipv4, Self::Ipv6, Self::Mac, Self::Text, Self::Octets, Self::EnterpriseSpecific, Self::NonConforming];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ipv4 => "IPv4",
            Self::Ipv6 => "IPv6",
            Self::Mac => "MAC",
            Self::Text => "Text",
            Self::Octets => "Octets",
            Self::EnterpriseSpecific => "EnterpriseSpecific",
            Self::NonConforming => "NonConforming",
        }
    }
}

impl EngineIdFormat {
    pub fn category(self) -> FormatCategory {
        match self {
            Self::Ipv4 => FormatCategory::Ipv4,
            Self::Ipv6 => FormatCategory::Ipv6,
            Self::Mac => FormatCategory::Mac,
            Self::Text => FormatCategory::Text,
            Self::Octets => FormatCategory::Octets,
            Self::EnterpriseSpecific(_) => FormatCategory::EnterpriseSpecific,
            Self::NonConforming => FormatCategory::NonConforming,
        }
    }
}

impl fmt::Display for EngineIdFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EnterpriseSpecific(code) => write!(f, "EnterpriseSpecific({code})"),
            other => f.write_str(other.category().name()),
        }
    }
}

/// A byte-exact MAC address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub fn oui(&self) -> [u8; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(f, "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", b[0], b[1], b[2], b[3], b[4], b[5])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineIdInfo {
    pub raw: Vec<u8>,
    pub conformant: bool,
    pub enterprise_number: Option<u32>,
    pub format: EngineIdFormat,
    /// The format octet exactly as received (conformant IDs only).
    pub format_byte: Option<u8>,
    pub data: Vec<u8>,
    pub mac: Option<MacAddr>,
    pub ipv4: Option<Ipv4Addr>,
    pub ipv6: Option<Ipv6Addr>,
}

impl EngineIdInfo {
    /// Reassembles the wire form from the parsed fields.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.raw.len());
        if let Some(ent) = self.enterprise_number {
            let prefix = if self.conformant { ent | 0x8000_0000 } else { ent };
            out.extend_from_slice(&prefix.to_be_bytes());
        }
        if let Some(b) = self.format_byte {
            out.push(b);
        }
        out.extend_from_slice(&self.data);
        out
    }

    /// Net-SNMP's default enterprise-specific layout.
    pub fn is_net_snmp(&self) -> bool {
        self.conformant
            && self.enterprise_number == Some(NET_SNMP_ENTERPRISE)
            && matches!(self.format, EngineIdFormat::EnterpriseSpecific(_))
    }

    /// The ID with its enterprise field removed. Two IDs that agree here but
    /// disagree on enterprise number claim the same identity for different
    /// vendors.
    pub fn identity_tail(&self) -> Option<&[u8]> {
        self.enterprise_number.map(|_| &self.raw[4..])
    }
}

/// Splits an engine ID into its RFC 3411 fields. Total on non-empty input:
/// layouts that do not fit fall back to `NonConforming` or `Octets` with the
/// bytes kept in `data`.
pub fn parse_engine_id(raw: &[u8]) -> Result<EngineIdInfo, EngineIdError> {
    if raw.is_empty() {
        return Err(EngineIdError::MissingEngineId);
    }
    let conformant = raw[0] & 0x80 != 0;
    let mut info = EngineIdInfo {
        raw: raw.to_vec(),
        conformant,
        enterprise_number: None,
        format: EngineIdFormat::NonConforming,
        format_byte: None,
        data: Vec::new(),
        mac: None,
        ipv4: None,
        ipv6: None,
    };
    if raw.len() < 5 {
        info.data = raw.to_vec();
        return Ok(info);
    }
    let ent = u32::from_be_bytes([raw[0], raw[1], raw[2], raw[3]]) & 0x7fff_ffff;
    info.enterprise_number = Some(ent);
    if !conformant {
        info.data = raw[4..].to_vec();
        return Ok(info);
    }

    let code = raw[4];
    let data = &raw[5..];
    info.format_byte = Some(code);
    info.data = data.to_vec();
    info.format = match code {
        1 => EngineIdFormat::Ipv4,
        2 => EngineIdFormat::Ipv6,
        3 => EngineIdFormat::Mac,
        4 => EngineIdFormat::Text,
        5 => EngineIdFormat::Octets,
        128..=255 => EngineIdFormat::EnterpriseSpecific(code),
        // 0 and 6..=127 are reserved; keep the bytes as opaque octets.
        _ => EngineIdFormat::Octets,
    };
    match (info.format, data.len()) {
        (EngineIdFormat::Ipv4, 4) => info.ipv4 = Some(Ipv4Addr::new(data[0], data[1], data[2], data[3])),
        (EngineIdFormat::Ipv6, 16) => {
            let mut b = [0u8; 16];
            b.copy_from_slice(data);
            info.ipv6 = Some(Ipv6Addr::from(b));
        }
        (EngineIdFormat::Mac, 6) => {
            let mut b = [0u8; 6];
            b.copy_from_slice(data);
            info.mac = Some(MacAddr(b));
        }
        _ => {}
    }
    Ok(info)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VendorSource {
    Oui,
    EnterpriseId,
    Unknown,
}

/// Vendor attribution and where it came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VendorLabel {
    pub source: VendorSource,
    pub name: String,
}

impl VendorLabel {
    pub const UNKNOWN_NAME: &'static str = "unknown";

    pub fn unknown() -> Self {
        Self { source: VendorSource::Unknown, name: String::from(Self::UNKNOWN_NAME) }
    }

    pub fn is_unknown(&self) -> bool {
        self.source == VendorSource::Unknown
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct TableParseError {
    pub line: usize,
    pub reason: &'static str,
}

/// IEEE OUI registry: upper three MAC octets to registrant.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OuiTable {
    entries: BTreeMap<[u8; 3], String>,
}

impl OuiTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, oui: [u8; 3], name: impl Into<String>) {
        self.entries.insert(oui, name.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8; 3], &str)> {
        self.entries.iter().map(|(k, v)| (k, v.as_str()))
    }

    pub fn get(&self, oui: [u8; 3]) -> Option<&str> {
        self.entries.get(&oui).map(String::as_str)
    }

    /// Parses `XX-XX-XX<TAB>Registrant` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, TableParseError> {
        let mut table = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |reason| TableParseError { line: i + 1, reason };
            let (key, name) = line.split_once('\t').ok_or(err("expected OUI<TAB>name"))?;
            let key = key.trim();
            let parts: Vec<&str> = key.split(['-', ':']).collect();
            if parts.len() != 3 {
                return Err(err("OUI must be XX-XX-XX"));
            }
            let mut oui = [0u8; 3];
            for (slot, part) in oui.iter_mut().zip(&parts) {
                if part.len() != 2 {
                    return Err(err("OUI must be XX-XX-XX"));
                }
                *slot = u8::from_str_radix(part, 16).map_err(|_| err("OUI octet is not hex"))?;
            }
            table.insert(oui, name.trim());
        }
        Ok(table)
    }
}

pub fn oui_lookup<'a>(mac: &MacAddr, db: &'a OuiTable) -> Option<&'a str> {
    db.get(mac.oui())
}

/// IANA private enterprise numbers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnterpriseTable {
    entries: BTreeMap<u32, String>,
}

impl EnterpriseTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, number: u32, name: impl Into<String>) {
        self.entries.insert(number, name.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, number: u32) -> Option<&str> {
        self.entries.get(&number).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.entries.iter().map(|(k, v)| (*k, v.as_str()))
    }

    /// Parses `<decimal><TAB>Organization` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, TableParseError> {
        let mut table = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let err = |reason| TableParseError { line: i + 1, reason };
            let (num, name) = line.split_once('\t').ok_or(err("expected number<TAB>name"))?;
            let num = num.trim().parse::<u32>().map_err(|_| err("enterprise number is not decimal"))?;
            table.insert(num, name.trim());
        }
        Ok(table)
    }
}

pub fn enterprise_lookup(n: u64, db: &EnterpriseTable) -> Option<&str> {
    u32::try_from(n).ok().and_then(|n| db.get(n))
}

/// Fraction of set bits.
pub fn hamming_fraction(data: &[u8]) -> Result<f64, EngineIdError> {
    if data.is_empty() {
        return Err(EngineIdError::InvalidArgument("hamming_fraction of empty data"));
    }
    let ones: u32 = data.iter().map(|b| b.count_ones()).sum();
    Ok(ones as f64 / (8 * data.len()) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormatCensus {
    pub total: usize,
    pub counts: BTreeMap<FormatCategory, usize>,
    /// Subset of `EnterpriseSpecific` using Net-SNMP's layout.
    pub net_snmp: usize,
}

impl FormatCensus {
    pub fn count(&self, cat: FormatCategory) -> usize {
        self.counts.get(&cat).copied().unwrap_or(0)
    }

    pub fn share(&self, cat: FormatCategory) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(cat) as f64 / self.total as f64
        }
    }
}

pub fn format_census<'a>(infos: impl IntoIterator<Item = &'a EngineIdInfo>) -> FormatCensus {
    let mut counts: BTreeMap<FormatCategory, usize> = FormatCategory::ALL.iter().map(|c| (*c, 0)).collect();
    let mut total = 0;
    let mut net_snmp = 0;
    for info in infos {
        *counts.entry(info.format.category()).or_default() += 1;
        total += 1;
        if info.is_net_snmp() {
            net_snmp += 1;
        }
    }
    FormatCensus { total, counts, net_snmp }
}

/// Lower-case hex without separators.
pub fn to_hex(bytes: &[u8]) -> String {
    const DIGITS: &[u8; 16] = b"0123456789abcdef";
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push(DIGITS[(b >> 4) as usize] as char);
        s.push(DIGITS[(b & 0xf) as usize] as char);
    }
    s
}

pub fn from_hex(s: &str) -> Option<Vec<u8>> {
    let s = s.trim();
    let s = s.strip_prefix("0x").unwrap_or(s);
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok()).collect()
}

impl fmt::Display for EngineIdInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_hex(&self.raw))
    }
}
