//! Population parameters and their `key=value` file form.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use snmpv3fp_core::alias::Family;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn invalid(reason: impl Into<String>) -> SpecError {
    SpecError::InvalidArgument(reason.into())
}

/// Engine ID layout a device is built with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IdFormat {
    Mac,
    Octets,
    NetSnmp,
    NonConforming,
    Ipv4,
    Text,
    Ipv6,
}

impl IdFormat {
    pub const ALL: [IdFormat; 7] =
        [Self::Mac, Self::Octets, Self::NetSnmp, Self::NonConforming, Self::Ipv4, Self::Text, Self::Ipv6];

    pub fn key(self) -> &'static str {
        match self {
            Self::Mac => "mac",
            Self::Octets => "octets",
            Self::NetSnmp => "net_snmp",
            Self::NonConforming => "nonconforming",
            Self::Ipv4 => "ipv4",
            Self::Text => "text",
            Self::Ipv6 => "ipv6",
        }
    }

    fn from_key(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.key() == s)
    }
}

/// A vendor's registry identity. The first OUI is the default one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vendor {
    pub key: &'static str,
    pub enterprise: u32,
    pub ouis: &'static [[u8; 3]],
}

/// Every OUI and enterprise number here is present in the bundled tables.
pub const VENDORS: [Vendor; 6] = [
    Vendor { key: "cisco", enterprise: 9, ouis: &[[0x00, 0x00, 0x0c], [0x00, 0x1b, 0x54]] },
    Vendor { key: "huawei", enterprise: 2011, ouis: &[[0x00, 0xe0, 0xfc]] },
    Vendor { key: "juniper", enterprise: 2636, ouis: &[[0x00, 0x05, 0x85]] },
    Vendor { key: "mikrotik", enterprise: 14988, ouis: &[[0x4c, 0x5e, 0x0c]] },
    Vendor { key: "h3c", enterprise: 25506, ouis: &[[0x00, 0x0f, 0xe2]] },
    Vendor { key: "brocade", enterprise: 1991, ouis: &[[0x74, 0x8e, 0xf8]] },
];

pub fn vendor_index(key: &str) -> Option<usize> {
    VENDORS.iter().position(|v| v.key == key)
}

/// Device-level injected faults. A device carries at most one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Anomaly {
    /// Shares one vendor-bug engine ID with every other such device.
    ConstantEngineId,
    UnregisteredOui,
    /// Pairs: same identity bytes under two enterprise numbers.
    Promiscuous,
    UnroutableIpv4,
    ShortEngineId,
    MissingEngineId,
    /// Replies with noise that is not BER.
    Malformed,
    ZeroTime,
    FutureTime,
    /// Sends `amplifier_replies` copies of every reply.
    Amplifier,
    RebootBetween,
    LrtDrift,
}

impl Anomaly {
    pub const ALL: [Anomaly; 12] = [
        Self::ConstantEngineId,
        Self::UnregisteredOui,
        Self::Promiscuous,
        Self::UnroutableIpv4,
        Self::ShortEngineId,
        Self::MissingEngineId,
        Self::Malformed,
        Self::ZeroTime,
        Self::FutureTime,
        Self::Amplifier,
        Self::RebootBetween,
        Self::LrtDrift,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Self::ConstantEngineId => "constant_engine_id",
            Self::UnregisteredOui => "unregistered_oui",
            Self::Promiscuous => "promiscuous",
            Self::UnroutableIpv4 => "unroutable_ipv4",
            Self::ShortEngineId => "short_engine_id",
            Self::MissingEngineId => "missing_engine_id",
            Self::Malformed => "malformed",
            Self::ZeroTime => "zero_time",
            Self::FutureTime => "future_time",
            Self::Amplifier => "amplifier",
            Self::RebootBetween => "reboot_between",
            Self::LrtDrift => "lrt_drift",
        }
    }

    fn from_key(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.key() == s)
    }

    /// Formats a device must have for the fault to be expressible.
    pub fn required_format(self) -> Option<IdFormat> {
        match self {
            Self::ConstantEngineId | Self::UnregisteredOui | Self::Promiscuous => Some(IdFormat::Mac),
            Self::UnroutableIpv4 => Some(IdFormat::Ipv4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub seed: u64,
    pub device_count: usize,
    /// Interface count -> share of devices.
    pub interfaces: Vec<(usize, f64)>,
    pub families: Vec<(Family, f64)>,
    pub formats: Vec<(IdFormat, f64)>,
    /// Index into [`VENDORS`] -> share.
    pub vendors: Vec<(usize, f64)>,
    /// Uptime at `start_time` is `min_uptime_s + Exp(mean)`.
    pub uptime_mean_s: f64,
    pub min_uptime_s: i64,
    /// Boots are uniform in `1..=boots_max`.
    pub boots_max: i64,
    /// Per-device constant clock offset, uniform in `±offset_max_s`.
    pub offset_max_s: i64,
    /// Per-device, per-pass jitter: normal, rounded, clamped to `±jitter_max_s`.
    pub jitter_sigma_s: f64,
    pub jitter_max_s: i64,
    /// Per-interface, per-pass skew, uniform in `±interface_jitter_s`.
    pub interface_jitter_s: i64,
    /// Virtual Unix time of the first pass.
    pub start_time: i64,
    pub as_count: u32,
    pub router_share: f64,
    /// Bit-set probability of non-conforming engine IDs.
    pub nonconforming_bit_p: f64,
    /// Interfaces in 127/8 only, so every one can be bound locally.
    pub loopback: bool,
    /// Share of devices per anomaly.
    pub anomalies: BTreeMap<Anomaly, f64>,
    pub amplifier_replies: u32,
    /// Share of interfaces whose address moves to another device in pass 2.
    pub ephemeral_ip: f64,
    /// Share of interfaces in forced identical-tuple pairs.
    pub tuple_collision: f64,
    pub port: u16,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            device_count: 1000,
            interfaces: vec![
                (1, 0.46),
                (2, 0.2),
                (3, 0.1),
                (4, 0.06),
                (5, 0.04),
                (6, 0.03),
                (8, 0.03),
                (10, 0.03),
                (16, 0.03),
                (20, 0.02),
            ],
            families: vec![(Family::V4Only, 0.85), (Family::V6Only, 0.05), (Family::DualStack, 0.10)],
            formats: vec![
                (IdFormat::Mac, 0.6),
                (IdFormat::Octets, 0.12),
                (IdFormat::NetSnmp, 0.12),
                (IdFormat::NonConforming, 0.12),
                (IdFormat::Ipv4, 0.02),
                (IdFormat::Text, 0.01),
                (IdFormat::Ipv6, 0.01),
            ],
            vendors: vec![(0, 0.45), (1, 0.2), (2, 0.12), (3, 0.1), (4, 0.08), (5, 0.05)],
            uptime_mean_s: 30.0 * 86400.0,
            min_uptime_s: 3600,
            boots_max: 50,
            offset_max_s: 300,
            jitter_sigma_s: 1.0,
            jitter_max_s: 4,
            interface_jitter_s: 0,
            start_time: 1_700_000_000,
            as_count: 50,
            router_share: 0.3,
            nonconforming_bit_p: 0.4,
            loopback: false,
            anomalies: Anomaly::ALL.into_iter().map(|a| (a, 0.0)).collect(),
            amplifier_replies: 5,
            ephemeral_ip: 0.0,
            tuple_collision: 0.0,
            port: 161,
        }
    }
}

fn check_shares<K>(name: &str, shares: &[(K, f64)]) -> Result<(), SpecError> {
    if shares.iter().any(|(_, s)| !s.is_finite() || *s < 0.0) {
        return Err(invalid(format!("{name}: shares must be finite and non-negative")));
    }
    let sum: f64 = shares.iter().map(|(_, s)| s).sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(invalid(format!("{name}: shares sum to {sum}, not 1")));
    }
    Ok(())
}

fn check_rate(name: &str, r: f64, max: f64) -> Result<(), SpecError> {
    if !(r.is_finite() && (0.0..=max).contains(&r)) {
        return Err(invalid(format!("{name} must be in [0, {max}]")));
    }
    Ok(())
}

impl PopulationSpec {
    pub fn anomaly_rate(&self, a: Anomaly) -> f64 {
        self.anomalies.get(&a).copied().unwrap_or(0.0)
    }

    pub fn set_anomaly(&mut self, a: Anomaly, rate: f64) -> &mut Self {
        self.anomalies.insert(a, rate);
        self
    }

    /// Shares are checked here; feasibility against the drawn population is
    /// checked during generation.
    pub fn validate(&self) -> Result<(), SpecError> {
        check_shares("interfaces", &self.interfaces)?;
        check_shares("families", &self.families)?;
        check_shares("formats", &self.formats)?;
        check_shares("vendors", &self.vendors)?;
        if self.interfaces.iter().any(|(n, _)| *n == 0) {
            return Err(invalid("interface counts must be at least 1"));
        }
        if self.vendors.iter().any(|(v, _)| *v >= VENDORS.len()) {
            return Err(invalid("unknown vendor"));
        }
        let mut total = 0.0;
        for (a, r) in &self.anomalies {
            check_rate(a.key(), *r, 1.0)?;
            total += r;
        }
        if total > 1.0 + 1e-9 {
            return Err(invalid("anomaly rates sum past 1"));
        }
        check_rate("ephemeral_ip", self.ephemeral_ip, 1.0)?;
        check_rate("tuple_collision", self.tuple_collision, 1.0)?;
        check_rate("router_share", self.router_share, 1.0)?;
        check_rate("nonconforming_bit_p", self.nonconforming_bit_p, 1.0)?;
        if !(self.uptime_mean_s.is_finite() && self.uptime_mean_s > 0.0) {
            return Err(invalid("uptime_mean_s must be positive"));
        }
        if self.boots_max < 1 || self.min_uptime_s < 1 || self.offset_max_s < 0 {
            return Err(invalid("boots_max and min_uptime_s must be positive, offset_max_s non-negative"));
        }
        if !(self.jitter_sigma_s.is_finite() && self.jitter_sigma_s >= 0.0) || self.jitter_max_s < 0 {
            return Err(invalid("jitter must be non-negative"));
        }
        if self.interface_jitter_s < 0 {
            return Err(invalid("interface_jitter_s must be non-negative"));
        }
        // Clean devices must never exceed the 10 s drift threshold.
        if self.jitter_max_s + self.interface_jitter_s > 5 {
            return Err(invalid("jitter_max_s + interface_jitter_s must be at most 5"));
        }
        if self.interface_jitter_s > 0 && self.tuple_collision > 0.0 {
            return Err(invalid("tuple_collision needs interface_jitter_s=0"));
        }
        if self.offset_max_s + self.jitter_max_s + self.interface_jitter_s >= self.min_uptime_s {
            return Err(invalid("offset and jitter must stay below min_uptime_s"));
        }
        if self.as_count == 0 || self.as_count > 254 {
            return Err(invalid("as_count must be in 1..=254"));
        }
        if self.amplifier_replies < 1 {
            return Err(invalid("amplifier_replies must be at least 1"));
        }
        if self.loopback && self.families.iter().any(|(f, s)| *f != Family::V4Only && *s > 0.0) {
            return Err(invalid("loopback populations are IPv4 only"));
        }
        Ok(())
    }
}

fn parse_list<K>(text: &str, key: impl Fn(&str) -> Option<K>) -> Result<Vec<(K, f64)>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (k, v) = item.split_once(':').ok_or_else(|| format!("expected key:share, found {item:?}"))?;
            let k = key(k.trim()).ok_or_else(|| format!("unknown key {k:?}"))?;
            let v = v.trim().parse().map_err(|_| format!("invalid share {v:?}"))?;
            Ok((k, v))
        })
        .collect()
}

fn family_key(f: Family) -> &'static str {
    match f {
        Family::V4Only => "v4",
        Family::V6Only => "v6",
        Family::DualStack => "dual",
    }
}

fn family_from_key(s: &str) -> Option<Family> {
    match s {
        "v4" => Some(Family::V4Only),
        "v6" => Some(Family::V6Only),
        "dual" => Some(Family::DualStack),
        _ => None,
    }
}

fn join_list<K>(items: &[(K, f64)], key: impl Fn(&K) -> String) -> String {
    items.iter().map(|(k, v)| format!("{}:{v}", key(k))).collect::<Vec<_>>().join(",")
}

impl fmt::Display for PopulationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "device_count={}", self.device_count)?;
        writeln!(f, "interfaces={}", join_list(&self.interfaces, |n| n.to_string()))?;
        writeln!(f, "families={}", join_list(&self.families, |k| family_key(*k).into()))?;
        writeln!(f, "formats={}", join_list(&self.formats, |k| k.key().into()))?;
        writeln!(f, "vendors={}", join_list(&self.vendors, |k| VENDORS[*k].key.into()))?;
        writeln!(f, "uptime_mean_s={}", self.uptime_mean_s)?;
        writeln!(f, "min_uptime_s={}", self.min_uptime_s)?;
        writeln!(f, "boots_max={}", self.boots_max)?;
        writeln!(f, "offset_max_s={}", self.offset_max_s)?;
        writeln!(f, "jitter_sigma_s={}", self.jitter_sigma_s)?;
        writeln!(f, "jitter_max_s={}", self.jitter_max_s)?;
        writeln!(f, "interface_jitter_s={}", self.interface_jitter_s)?;
        writeln!(f, "start_time={}", self.start_time)?;
        writeln!(f, "as_count={}", self.as_count)?;
        writeln!(f, "router_share={}", self.router_share)?;
        writeln!(f, "nonconforming_bit_p={}", self.nonconforming_bit_p)?;
        writeln!(f, "loopback={}", self.loopback)?;
        for a in Anomaly::ALL {
            writeln!(f, "{}={}", a.key(), self.anomaly_rate(a))?;
        }
        writeln!(f, "amplifier_replies={}", self.amplifier_replies)?;
        writeln!(f, "ephemeral_ip={}", self.ephemeral_ip)?;
        writeln!(f, "tuple_collision={}", self.tuple_collision)?;
        writeln!(f, "port={}", self.port)
    }
}

/// Unset keys keep their defaults; the result is validated.
impl FromStr for PopulationSpec {
    type Err = SpecError;

    fn from_str(text: &str) -> Result<Self, SpecError> {
        let mut spec = PopulationSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |reason: String| SpecError::Syntax { line: i + 1, reason };
            let (key, value) = line.split_once('=').ok_or_else(|| syntax("expected key=value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            fn num<T: FromStr>(v: &str) -> Result<T, String> {
                v.parse().map_err(|_| format!("invalid value {v:?}"))
            }
            let r: Result<(), String> = (|| {
                match key {
                    "seed" => spec.seed = num(value)?,
                    "device_count" => spec.device_count = num(value)?,
                    "interfaces" => spec.interfaces = parse_list(value, |k| k.parse().ok())?,
                    "families" => spec.families = parse_list(value, family_from_key)?,
                    "formats" => spec.formats = parse_list(value, IdFormat::from_key)?,
                    "vendors" => spec.vendors = parse_list(value, vendor_index)?,
                    "uptime_mean_s" => spec.uptime_mean_s = num(value)?,
                    "min_uptime_s" => spec.min_uptime_s = num(value)?,
                    "boots_max" => spec.boots_max = num(value)?,
                    "offset_max_s" => spec.offset_max_s = num(value)?,
                    "jitter_sigma_s" => spec.jitter_sigma_s = num(value)?,
                    "jitter_max_s" => spec.jitter_max_s = num(value)?,
                    "interface_jitter_s" => spec.interface_jitter_s = num(value)?,
                    "start_time" => spec.start_time = num(value)?,
                    "as_count" => spec.as_count = num(value)?,
                    "router_share" => spec.router_share = num(value)?,
                    "nonconforming_bit_p" => spec.nonconforming_bit_p = num(value)?,
                    "loopback" => spec.loopback = num(value)?,
                    "amplifier_replies" => spec.amplifier_replies = num(value)?,
                    "ephemeral_ip" => spec.ephemeral_ip = num(value)?,
                    "tuple_collision" => spec.tuple_collision = num(value)?,
                    "port" => spec.port = num(value)?,
                    other => match Anomaly::from_key(other) {
                        Some(a) => {
                            spec.anomalies.insert(a, num(value)?);
                        }
                        None => return Err(format!("unknown key {other:?}")),
                    },
                }
                Ok(())
            })();
            r.map_err(syntax)?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_text() {
        let spec = PopulationSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.to_string().parse::<PopulationSpec>().unwrap(), spec);
    }

    #[test]
    fn parse_overrides_and_rejects() {
        let s: PopulationSpec = "seed=9\n# comment\nformats=mac:1\nzero_time=0.02 # trailing\n".parse().unwrap();
        assert_eq!((s.seed, s.formats.len()), (9, 1));
        assert_eq!(s.anomaly_rate(Anomaly::ZeroTime), 0.02);
        assert!(matches!("formats=mac:0.5".parse::<PopulationSpec>(), Err(SpecError::InvalidArgument(_))));
        assert!(matches!("bogus=1".parse::<PopulationSpec>(), Err(SpecError::Syntax { line: 1, .. })));
        assert!(matches!("seed".parse::<PopulationSpec>(), Err(SpecError::Syntax { .. })));
        assert!("loopback=true".parse::<PopulationSpec>().is_err());
        assert!("loopback=true\nfamilies=v4:1".parse::<PopulationSpec>().is_ok());
    }
}
