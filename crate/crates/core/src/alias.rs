//! Alias resolution: IPs that report the same engine ID, boots and (binned)
//! last reboot time belong to one device.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;
use core::net::IpAddr;
use core::str::FromStr;

use crate::engineid::VendorLabel;
use crate::pipeline::ValidRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Binning {
    Exact,
    /// Nearest multiple of 10, halves rounded up.
    Round,
    /// `floor(lrt / 20)`, bins anchored at the Unix epoch.
    Div20,
    /// `round(lrt / 20)`, halves rounded up.
    Div20Round,
}

/// Default width of the division bins, in seconds.
pub const DEFAULT_BIN_WIDTH: i64 = 20;

impl Binning {
    pub fn apply(self, lrt: i64) -> i64 {
        self.apply_width(lrt, DEFAULT_BIN_WIDTH)
    }

    /// As [`Binning::apply`] with `width` in place of 20 for the division
    /// bins. `width` must be positive.
    pub fn apply_width(self, lrt: i64, width: i64) -> i64 {
        debug_assert!(width > 0);
        match self {
            Self::Exact => lrt,
            Self::Round => (lrt + 5).div_euclid(10) * 10,
            Self::Div20 => lrt.div_euclid(width),
            Self::Div20Round => (lrt + width / 2).div_euclid(width),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    ExactFirst,
    ExactBoth,
    RoundFirst,
    RoundBoth,
    Div20First,
    #[default]
    Div20Both,
    Div20RoundFirst,
    Div20RoundBoth,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Self::ExactFirst,
        Self::ExactBoth,
        Self::RoundFirst,
        Self::RoundBoth,
        Self::Div20First,
        Self::Div20Both,
        Self::Div20RoundFirst,
        Self::Div20RoundBoth,
    ];

    pub fn binning(self) -> Binning {
        match self {
            Self::ExactFirst | Self::ExactBoth => Binning::Exact,
            Self::RoundFirst | Self::RoundBoth => Binning::Round,
            Self::Div20First | Self::Div20Both => Binning::Div20,
            Self::Div20RoundFirst | Self::Div20RoundBoth => Binning::Div20Round,
        }
    }

    /// Whether the key includes the second scan's fields.
    pub fn uses_both(self) -> bool {
        matches!(self, Self::ExactBoth | Self::RoundBoth | Self::Div20Both | Self::Div20RoundBoth)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ExactFirst => "exact-first",
            Self::ExactBoth => "exact-both",
            Self::RoundFirst => "round-first",
            Self::RoundBoth => "round-both",
            Self::Div20First => "div20-first",
            Self::Div20Both => "div20-both",
            Self::Div20RoundFirst => "div20round-first",
            Self::Div20RoundBoth => "div20round-both",
        }
    }

    pub fn key(self, r: &ValidRecord) -> AliasKey {
        self.key_with_width(r, DEFAULT_BIN_WIDTH)
    }

    pub fn key_with_width(self, r: &ValidRecord, width: i64) -> AliasKey {
        let bin = self.binning();
        let both = self.uses_both();
        AliasKey {
            engine_id: r.engine_id.clone(),
            boots1: r.boots,
            boots2: both.then_some(r.boots),
            lrt1_binned: bin.apply_width(r.lrt1, width),
            lrt2_binned: both.then(|| bin.apply_width(r.lrt2, width)),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AliasError {
    #[error("unknown alias variant {0:?}")]
    UnknownVariant(alloc::string::String),
    #[error("invalid argument: cannot merge {0} sets with {1} sets")]
    VariantMismatch(Variant, Variant),
}

impl FromStr for Variant {
    type Err = AliasError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL.into_iter().find(|v| v.name() == norm).ok_or_else(|| AliasError::UnknownVariant(s.into()))
    }
}

pub fn bin_lrt(lrt: i64, variant: Variant) -> i64 {
    variant.binning().apply(lrt)
}

/// Grouping key. "First" variants leave the second-scan fields `None`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AliasKey {
    pub engine_id: Vec<u8>,
    pub boots1: i64,
    pub boots2: Option<i64>,
    pub lrt1_binned: i64,
    pub lrt2_binned: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    V4Only,
    V6Only,
    DualStack,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Self::V4Only => "ipv4",
            Self::V6Only => "ipv6",
            Self::DualStack => "dual-stack",
        }
    }

    pub fn of<'a>(members: impl IntoIterator<Item = &'a IpAddr>) -> Option<Self> {
        let (mut v4, mut v6) = (false, false);
        for ip in members {
            if ip.is_ipv4() {
                v4 = true;
            } else {
                v6 = true;
            }
        }
        match (v4, v6) {
            (true, true) => Some(Self::DualStack),
            (true, false) => Some(Self::V4Only),
            (false, true) => Some(Self::V6Only),
            (false, false) => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasSet {
    pub key: AliasKey,
    /// Never empty.
    pub members: BTreeSet<IpAddr>,
    pub family: Family,
    pub vendor: VendorLabel,
    pub router_tagged: bool,
}

impl AliasSet {
    fn from_members(key: AliasKey, members: BTreeSet<IpAddr>) -> Self {
        let family = Family::of(&members).expect("alias set has members");
        Self { key, members, family, vendor: VendorLabel::unknown(), router_tagged: false }
    }

    /// Smallest member; used as the set's representative.
    pub fn first_ip(&self) -> IpAddr {
        *self.members.first().expect("alias set has members")
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Sets produced under one variant, ordered by smallest member IP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasSets {
    pub variant: Variant,
    pub sets: Vec<AliasSet>,
}

impl AliasSets {
    fn from_groups(variant: Variant, groups: BTreeMap<AliasKey, BTreeSet<IpAddr>>) -> Self {
        let mut sets: Vec<AliasSet> = groups.into_iter().map(|(k, m)| AliasSet::from_members(k, m)).collect();
        sets.sort_by_key(|s| s.first_ip());
        Self { variant, sets }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, AliasSet> {
        self.sets.iter()
    }
}

/// Partitions `records` by key; input IPs are expected to be unique.
pub fn group_aliases(records: &[ValidRecord], variant: Variant) -> AliasSets {
    group_aliases_with_width(records, variant, DEFAULT_BIN_WIDTH)
}

/// [`group_aliases`] with a custom division-bin width.
pub fn group_aliases_with_width(records: &[ValidRecord], variant: Variant, width: i64) -> AliasSets {
    let mut groups: BTreeMap<AliasKey, BTreeSet<IpAddr>> = BTreeMap::new();
    for r in records {
        groups.entry(variant.key_with_width(r, width)).or_default().insert(r.ip);
    }
    AliasSets::from_groups(variant, groups)
}

/// Unions sets from two groupings whose keys are equal. Vendor and router
/// annotations are reset.
pub fn merge_dual_stack(v4_sets: &AliasSets, v6_sets: &AliasSets) -> Result<AliasSets, AliasError> {
    if v4_sets.variant != v6_sets.variant {
        return Err(AliasError::VariantMismatch(v4_sets.variant, v6_sets.variant));
    }
    let mut groups: BTreeMap<AliasKey, BTreeSet<IpAddr>> = BTreeMap::new();
    for set in v4_sets.iter().chain(v6_sets.iter()) {
        groups.entry(set.key.clone()).or_default().extend(set.members.iter().copied());
    }
    Ok(AliasSets::from_groups(v4_sets.variant, groups))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetStatistics {
    pub total: usize,
    pub non_singleton: usize,
    pub ips_in_non_singleton: usize,
    /// member count -> number of sets.
    pub histogram: BTreeMap<usize, usize>,
    /// 0.0 when there are no non-singleton sets.
    pub mean_non_singleton: f64,
}

pub fn set_statistics<'a>(sets: impl IntoIterator<Item = &'a AliasSet>) -> SetStatistics {
    let mut histogram = BTreeMap::new();
    let (mut total, mut non_singleton, mut ips) = (0, 0, 0);
    for s in sets {
        total += 1;
        *histogram.entry(s.len()).or_insert(0) += 1;
        if s.len() > 1 {
            non_singleton += 1;
            ips += s.len();
        }
    }
    let mean_non_singleton = if non_singleton == 0 { 0.0 } else { ips as f64 / non_singleton as f64 };
    SetStatistics { total, non_singleton, ips_in_non_singleton: ips, histogram, mean_non_singleton }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantRow {
    pub variant: Variant,
    pub stats: SetStatistics,
}

/// One row per variant, in [`Variant::ALL`] order.
pub fn variant_comparison(records: &[ValidRecord]) -> Vec<VariantRow> {
    Variant::ALL
        .into_iter()
        .map(|variant| VariantRow { variant, stats: set_statistics(group_aliases(records, variant).iter()) })
        .collect()
}
