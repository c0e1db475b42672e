//! CIDR prefixes and a longest-prefix-match table.

use alloc::collections::{BTreeMap, BTreeSet};
use core::fmt;
use core::net::IpAddr;
use core::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrefixError {
    #[error("invalid address in prefix {0:?}")]
    BadAddress(alloc::string::String),
    #[error("invalid prefix length in {0:?}")]
    BadLength(alloc::string::String),
}

/// An address family plus a masked network address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IpPrefix {
    addr: IpAddr,
    len: u8,
}

fn to_bits(addr: IpAddr) -> (bool, u128) {
    match addr {
        IpAddr::V4(a) => (false, u32::from(a) as u128),
        IpAddr::V6(a) => (true, u128::from(a)),
    }
}

fn width(v6: bool) -> u8 {
    if v6 {
        128
    } else {
        32
    }
}

fn mask(bits: u128, len: u8, v6: bool) -> u128 {
    let w = width(v6);
    if len == 0 {
        0
    } else {
        let host = w - len;
        let full = if v6 { u128::MAX } else { u32::MAX as u128 };
        bits & (full << host) & full
    }
}

fn from_bits(v6: bool, bits: u128) -> IpAddr {
    if v6 {
        IpAddr::V6(bits.into())
    } else {
        IpAddr::V4((bits as u32).into())
    }
}

impl IpPrefix {
    /// Host bits beyond `len` are cleared.
    pub fn new(addr: IpAddr, len: u8) -> Option<Self> {
        let (v6, bits) = to_bits(addr);
        if len > width(v6) {
            return None;
        }
        Some(Self { addr: from_bits(v6, mask(bits, len, v6)), len })
    }

    pub fn host(addr: IpAddr) -> Self {
        let len = width(addr.is_ipv6());
        Self { addr, len }
    }

    pub fn addr(&self) -> IpAddr {
        self.addr
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, ip: IpAddr) -> bool {
        let (v6, bits) = to_bits(ip);
        let (pv6, pbits) = to_bits(self.addr);
        v6 == pv6 && mask(bits, self.len, v6) == pbits
    }
}

impl fmt::Display for IpPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.len)
    }
}

impl FromStr for IpPrefix {
    type Err = PrefixError;

    /// `addr/len`, or a bare address meaning a host prefix.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (addr, len) = match s.split_once('/') {
            Some((a, l)) => (a, Some(l)),
            None => (s, None),
        };
        let addr = IpAddr::from_str(addr).map_err(|_| PrefixError::BadAddress(s.into()))?;
        match len {
            None => Ok(Self::host(addr)),
            Some(l) => {
                let len = l.parse::<u8>().map_err(|_| PrefixError::BadLength(s.into()))?;
                Self::new(addr, len).ok_or_else(|| PrefixError::BadLength(s.into()))
            }
        }
    }
}

/// Longest-prefix-match map. Lookups probe each populated prefix length from
/// longest to shortest, so cost is bounded by the number of distinct lengths.
#[derive(Debug, Clone)]
pub struct PrefixTable<V> {
    entries: BTreeMap<(bool, u8, u128), V>,
    lengths: [BTreeSet<u8>; 2],
}

impl<V> Default for PrefixTable<V> {
    fn default() -> Self {
        Self { entries: BTreeMap::new(), lengths: [BTreeSet::new(), BTreeSet::new()] }
    }
}

impl<V> PrefixTable<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prefix: IpPrefix, value: V) -> Option<V> {
        let (v6, bits) = to_bits(prefix.addr);
        self.lengths[v6 as usize].insert(prefix.len);
        self.entries.insert((v6, prefix.len, bits), value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, ip: IpAddr) -> Option<(IpPrefix, &V)> {
        let (v6, bits) = to_bits(ip);
        for &len in self.lengths[v6 as usize].iter().rev() {
            let key = (v6, len, mask(bits, len, v6));
            if let Some(v) = self.entries.get(&key) {
                return Some((IpPrefix { addr: from_bits(v6, key.2), len }, v));
            }
        }
        None
    }

    pub fn contains(&self, ip: IpAddr) -> bool {
        self.lookup(ip).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (IpPrefix, &V)> {
        self.entries.iter().map(|(&(v6, len, bits), v)| (IpPrefix { addr: from_bits(v6, bits), len }, v))
    }
}
