//! Loading registries and annotation files from disk.

use std::io::Read;
use std::path::Path;

use snmpv3fp_core::analytics::{AsMapping, RouterTagSet};
use snmpv3fp_core::engineid::{EnterpriseTable, OuiTable};
use snmpv3fp_core::prefix::IpPrefix;

/// Registry subsets shipped with the crate.
pub const BUNDLED_OUI: &str = include_str!("../fixtures/oui.tsv");
pub const BUNDLED_ENTERPRISES: &str = include_str!("../fixtures/enterprises.tsv");

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

fn read_text(path: &Path) -> Result<String, TableError> {
    let mut s = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|source| TableError::Io { path: path.display().to_string(), source })?;
    Ok(s)
}

fn parse_error(path: &Path, e: impl std::fmt::Display) -> TableError {
    TableError::Parse { path: path.display().to_string(), message: e.to_string() }
}

pub fn bundled_oui() -> OuiTable {
    OuiTable::parse(BUNDLED_OUI).expect("bundled OUI table parses")
}

pub fn bundled_enterprises() -> EnterpriseTable {
    EnterpriseTable::parse(BUNDLED_ENTERPRISES).expect("bundled enterprise table parses")
}

/// `None` selects the bundled table.
pub fn load_oui(path: Option<&Path>) -> Result<OuiTable, TableError> {
    match path {
        None => Ok(bundled_oui()),
        Some(p) => OuiTable::parse(&read_text(p)?).map_err(|e| parse_error(p, e)),
    }
}

pub fn load_enterprises(path: Option<&Path>) -> Result<EnterpriseTable, TableError> {
    match path {
        None => Ok(bundled_enterprises()),
        Some(p) => EnterpriseTable::parse(&read_text(p)?).map_err(|e| parse_error(p, e)),
    }
}

/// Missing files give an empty mapping, under which every address is AS 0.
pub fn load_as_mapping(pfx2as: Option<&Path>, regions: Option<&Path>) -> Result<AsMapping, TableError> {
    let mut m = AsMapping::default();
    if let Some(p) = pfx2as {
        m.parse_pfx2as(&read_text(p)?).map_err(|e| parse_error(p, e))?;
    }
    if let Some(p) = regions {
        m.parse_regions(&read_text(p)?).map_err(|e| parse_error(p, e))?;
    }
    Ok(m)
}

pub fn load_router_tags(path: &Path) -> Result<RouterTagSet, TableError> {
    RouterTagSet::parse(&read_text(path)?).map_err(|e| parse_error(path, e))
}

/// One CIDR (or bare address) per line; `#` comments allowed.
pub fn parse_cidr_list(text: &str) -> Result<Vec<IpPrefix>, String> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| l.parse().map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

pub fn load_cidr_list(path: &Path) -> Result<Vec<IpPrefix>, TableError> {
    parse_cidr_list(&read_text(path)?).map_err(|e| parse_error(path, e))
}
