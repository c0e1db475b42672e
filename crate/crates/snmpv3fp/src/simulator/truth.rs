//! What the pipeline should conclude about a population, derived from the
//! injected faults alone.

use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;

use snmpv3fp_core::analytics::Coverage;
use snmpv3fp_core::pipeline::{FilterKind, FilterReport};

use super::population::Population;
use super::spec::Anomaly;
use crate::records::GroundTruthRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    Undecodable,
    Removed(FilterKind),
    Valid,
}

fn anomaly_fate(a: Option<Anomaly>, oui_filter: bool) -> Fate {
    use FilterKind as F;
    match a {
        Some(Anomaly::Malformed) => Fate::Undecodable,
        Some(Anomaly::MissingEngineId) => Fate::Removed(F::MissingEngineId),
        Some(Anomaly::ShortEngineId) => Fate::Removed(F::ShortEngineId),
        Some(Anomaly::Promiscuous) => Fate::Removed(F::PromiscuousEngineId),
        Some(Anomaly::UnroutableIpv4) => Fate::Removed(F::UnroutableIpv4),
        Some(Anomaly::UnregisteredOui) if oui_filter => Fate::Removed(F::UnregisteredOui),
        Some(Anomaly::ZeroTime) => Fate::Removed(F::ZeroTimeOrBoots),
        Some(Anomaly::FutureTime) => Fate::Removed(F::FutureTime),
        Some(Anomaly::RebootBetween) => Fate::Removed(F::BootsChanged),
        Some(Anomaly::LrtDrift) => Fate::Removed(F::LastRebootDrift),
        Some(Anomaly::UnregisteredOui | Anomaly::ConstantEngineId | Anomaly::Amplifier) | None => Fate::Valid,
    }
}

impl Population {
    /// Expected outcome per interface of a two-pass scan. `oui_filter`
    /// states whether an OUI registry is configured.
    pub fn expected_fates(&self, oui_filter: bool) -> BTreeMap<IpAddr, Fate> {
        self.ip_index
            .iter()
            .map(|(ip, id)| {
                let fate = if self.ephemeral.contains_key(ip) {
                    Fate::Removed(FilterKind::InconsistentEngineId)
                } else {
                    anomaly_fate(self.device(*id).anomaly, oui_filter)
                };
                (*ip, fate)
            })
            .collect()
    }

    pub fn expected_report(&self, oui_filter: bool) -> FilterReport {
        let mut r = FilterReport::default();
        for fate in self.expected_fates(oui_filter).into_values() {
            match fate {
                Fate::Undecodable => r.undecodable += 1,
                Fate::Removed(k) => {
                    r.input += 1;
                    r.removed[k as usize].1 += 1;
                }
                Fate::Valid => {
                    r.input += 1;
                    r.surviving += 1;
                }
            }
        }
        r
    }

    pub fn expected_valid_ips(&self, oui_filter: bool) -> BTreeSet<IpAddr> {
        self.expected_fates(oui_filter).into_iter().filter(|(_, f)| *f == Fate::Valid).map(|(ip, _)| ip).collect()
    }

    /// Coverage when the responsive set is the expected valid addresses.
    pub fn expected_coverage(&self, oui_filter: bool, min_ips: usize) -> BTreeMap<u32, Coverage> {
        let valid = self.expected_valid_ips(oui_filter);
        let mut out = BTreeMap::new();
        for a in &self.ases {
            let owned: Vec<IpAddr> = self
                .devices
                .iter()
                .filter(|d| d.router && d.asn == a.asn)
                .flat_map(|d| d.interfaces.iter().copied())
                .collect();
            let tagged = owned.len() + a.silent.len();
            if tagged == 0 || tagged < min_ips.max(1) {
                continue;
            }
            let responsive = owned.iter().filter(|ip| valid.contains(ip)).count();
            out.insert(a.asn, Coverage { tagged, responsive, ratio: responsive as f64 / tagged as f64 });
        }
        out
    }

    pub fn ground_truth_rows(&self) -> Vec<GroundTruthRow> {
        self.devices
            .iter()
            .map(|d| GroundTruthRow {
                device_id: d.id,
                engine_id: d.engine_id.clone(),
                boots: d.boots,
                reboot_epoch: d.reboot_epoch,
                ips: d.interfaces.clone(),
            })
            .collect()
    }

    /// Pairwise alias accuracy of `sets` against the first-pass owners.
    /// Recall counts pairs of stable interfaces of fault-free devices.
    pub fn alias_accuracy<'a>(&self, sets: impl IntoIterator<Item = &'a BTreeSet<IpAddr>>) -> AliasAccuracy {
        let mut acc = AliasAccuracy::default();
        let mut found_by_device: BTreeMap<u32, u64> = BTreeMap::new();
        for set in sets {
            let mut per_dev: BTreeMap<u32, u64> = BTreeMap::new();
            let mut n = 0u64;
            for ip in set {
                n += 1;
                if let Some(id) = self.ip_index.get(ip) {
                    *per_dev.entry(*id).or_default() += 1;
                }
            }
            acc.predicted_pairs += n * n.saturating_sub(1) / 2;
            for (id, k) in per_dev {
                acc.correct_pairs += k * (k - 1) / 2;
                if self.is_reference_device(id) {
                    let stable =
                        set.iter().filter(|ip| self.ip_index.get(ip) == Some(&id) && !self.ephemeral.contains_key(ip));
                    let s = stable.count() as u64;
                    *found_by_device.entry(id).or_default() += s * s.saturating_sub(1) / 2;
                }
            }
        }
        for d in self.devices.iter().filter(|d| self.is_reference_device(d.id)) {
            let s = d.interfaces.iter().filter(|ip| !self.ephemeral.contains_key(ip)).count() as u64;
            acc.reference_pairs += s * s.saturating_sub(1) / 2;
        }
        acc.recovered_pairs = found_by_device.values().sum();
        acc
    }

    fn is_reference_device(&self, id: u32) -> bool {
        self.device(id).anomaly.is_none()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AliasAccuracy {
    pub predicted_pairs: u64,
    /// Predicted pairs whose members share a device.
    pub correct_pairs: u64,
    pub reference_pairs: u64,
    pub recovered_pairs: u64,
}

impl AliasAccuracy {
    /// 1.0 when no pairs are predicted.
    pub fn precision(&self) -> f64 {
        if self.predicted_pairs == 0 {
            1.0
        } else {
            self.correct_pairs as f64 / self.predicted_pairs as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.reference_pairs == 0 {
            1.0
        } else {
            self.recovered_pairs as f64 / self.reference_pairs as f64
        }
    }
}
