//! Seeded ground-truth device populations.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use snmpv3fp_core::alias::Family;
use snmpv3fp_core::engineid::NET_SNMP_ENTERPRISE;
use snmpv3fp_core::prefix::IpPrefix;

use super::spec::{Anomaly, IdFormat, PopulationSpec, SpecError, VENDORS};

pub const REGIONS: [&str; 6] = ["Europe", "North America", "Asia", "South America", "Africa", "Oceania"];
/// AS `k` (1-based) has number `ASN_BASE + k`.
pub const ASN_BASE: u32 = 64512;
/// Minimum spacing of `reboot - offset` between devices that share boots.
pub const TUPLE_SPACING_S: i64 = 10;
/// Minimum spacing of `reboot - offset` between constant-ID devices.
pub const CONSTANT_ID_SPACING_S: i64 = 60;

fn invalid(reason: impl Into<String>) -> SpecError {
    SpecError::InvalidArgument(reason.into())
}

/// `round(x)` with halves rounded up.
pub fn round_count(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// Largest-remainder apportionment of `n` items; ties go to the earlier entry.
pub fn apportion(shares: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = shares.iter().sum();
    if total <= 0.0 {
        return vec![0; shares.len()];
    }
    let quotas: Vec<f64> = shares.iter().map(|s| s / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - counts[a] as f64, quotas[b] - counts[b] as f64);
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Labels in apportioned quantities, shuffled.
fn labels<K: Copy>(shares: &[(K, f64)], n: usize, rng: &mut ChaCha8Rng) -> Vec<K> {
    let counts = apportion(&shares.iter().map(|(_, s)| *s).collect::<Vec<_>>(), n);
    let mut out: Vec<K> = shares.iter().zip(counts).flat_map(|((k, _), c)| std::iter::repeat_n(*k, c)).collect();
    out.shuffle(rng);
    out
}

/// Clock changes applied from the second pass on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaterPasses {
    pub boots: i64,
    /// Reboot this many seconds before the pass starts.
    pub reboot_lead_s: Option<i64>,
    pub offset: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Device {
    pub id: u32,
    pub vendor: usize,
    pub format: IdFormat,
    pub family: Family,
    pub asn: u32,
    /// Owned in the first pass, in allocation order.
    pub interfaces: Vec<IpAddr>,
    pub engine_id: Vec<u8>,
    pub boots: i64,
    /// Unix seconds of the last reboot before the first pass.
    pub reboot_epoch: i64,
    pub offset: i64,
    pub jitter: [i64; 2],
    pub later: LaterPasses,
    pub anomaly: Option<Anomaly>,
    /// Reported engine time under `FutureTime`.
    pub future_time: i64,
    pub router: bool,
    /// Partner forced onto the same clock tuple.
    pub collides_with: Option<u32>,
}

impl Device {
    pub fn engine_boots(&self, pass: usize) -> i64 {
        if pass == 0 {
            self.boots
        } else {
            self.later.boots
        }
    }

    pub fn reboot_at(&self, pass: usize, pass_start_s: i64) -> i64 {
        match (pass, self.later.reboot_lead_s) {
            (0, _) | (_, None) => self.reboot_epoch,
            (_, Some(lead)) => pass_start_s - lead,
        }
    }

    fn clock_offset(&self, pass: usize) -> i64 {
        if pass == 0 {
            self.offset
        } else {
            self.later.offset
        }
    }

    /// `skew` is the per-interface term; zero and future times ignore it.
    pub fn engine_time(&self, pass: usize, pass_start_s: i64, now_ms: i64, skew: i64) -> i64 {
        match self.anomaly {
            Some(Anomaly::ZeroTime) => 0,
            Some(Anomaly::FutureTime) => self.future_time,
            _ => {
                now_ms.div_euclid(1000) - self.reboot_at(pass, pass_start_s)
                    + self.clock_offset(pass)
                    + self.jitter[pass.min(1)]
                    + skew
            }
        }
    }

    /// Last reboot time a scanner derives, before per-interface skew, when
    /// the reply is stamped in the same second the agent read its clock.
    pub fn observed_last_reboot(&self, pass: usize, pass_start_s: i64) -> i64 {
        self.reboot_at(pass, pass_start_s) - self.clock_offset(pass) - self.jitter[pass.min(1)]
    }

    pub fn replies_per_request(&self, amplifier_replies: u32) -> u32 {
        if self.anomaly == Some(Anomaly::Amplifier) {
            amplifier_replies
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutonomousSystem {
    pub asn: u32,
    pub region: &'static str,
    pub v4: IpPrefix,
    pub v6: Option<IpPrefix>,
    /// Target share of tagged router addresses that belong to devices.
    pub responsiveness: f64,
    /// Tagged router addresses nobody answers on.
    pub silent: Vec<IpAddr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub spec: PopulationSpec,
    pub devices: Vec<Device>,
    pub ases: Vec<AutonomousSystem>,
    /// First-pass owner of every interface.
    pub ip_index: BTreeMap<IpAddr, u32>,
    /// Owners of ephemeral interfaces from the second pass on.
    pub ephemeral: BTreeMap<IpAddr, u32>,
    pub constant_engine_id: Option<Vec<u8>>,
}

struct AddressPlan {
    loopback: bool,
    next_v4: Vec<u32>,
    next_v6: Vec<u32>,
}

impl AddressPlan {
    fn v4(&mut self, k: usize) -> Result<IpAddr, SpecError> {
        let n = self.next_v4[k];
        if n > 0xfffe {
            return Err(invalid("address space of an AS exhausted"));
        }
        self.next_v4[k] += 1;
        let first = if self.loopback { 127 } else { 20 };
        Ok(IpAddr::V4(Ipv4Addr::new(first, k as u8 + 1, (n >> 8) as u8, n as u8)))
    }

    fn v6(&mut self, k: usize) -> IpAddr {
        let n = self.next_v6[k];
        self.next_v6[k] += 1;
        IpAddr::V6(Ipv6Addr::new(0x2001, 0xdb8, k as u16 + 1, 0, 0, 0, (n >> 16) as u16, n as u16))
    }

    fn v4_prefix(&self, k: usize) -> IpPrefix {
        let first = if self.loopback { 127 } else { 20 };
        IpPrefix::new(IpAddr::V4(Ipv4Addr::new(first, k as u8 + 1, 0, 0)), 16).expect("valid length")
    }

    fn v6_prefix(&self, k: usize) -> Option<IpPrefix> {
        (!self.loopback).then(|| {
            IpPrefix::new(IpAddr::V6(Ipv6Addr::new(0x2001, 0xdb8, k as u16 + 1, 0, 0, 0, 0, 0)), 48)
                .expect("valid length")
        })
    }
}

struct IdFactory<'a> {
    rng: &'a mut ChaCha8Rng,
    macs: HashSet<[u8; 6]>,
    tails: HashSet<Vec<u8>>,
    bit_p: f64,
}

fn with_enterprise(ent: u32, conformant: bool, rest: &[u8]) -> Vec<u8> {
    let prefix = if conformant { ent | 0x8000_0000 } else { ent & 0x7fff_ffff };
    let mut v = prefix.to_be_bytes().to_vec();
    v.extend_from_slice(rest);
    v
}

impl IdFactory<'_> {
    fn fresh_mac(&mut self, oui: [u8; 3]) -> [u8; 6] {
        loop {
            let nic: [u8; 3] = self.rng.random();
            let mac = [oui[0], oui[1], oui[2], nic[0], nic[1], nic[2]];
            if self.macs.insert(mac) {
                return mac;
            }
        }
    }

    fn mac_id(&mut self, ent: u32, oui: [u8; 3]) -> Vec<u8> {
        let mac = self.fresh_mac(oui);
        let mut rest = vec![3];
        rest.extend_from_slice(&mac);
        with_enterprise(ent, true, &rest)
    }

    fn random_bytes(&mut self, n: usize) -> Vec<u8> {
        (0..n).map(|_| self.rng.random()).collect()
    }

    fn biased_bytes(&mut self, n: usize) -> Vec<u8> {
        (0..n)
            .map(|_| (0..8).fold(0u8, |b, i| if self.rng.random_bool(self.bit_p) { b | (1 << i) } else { b }))
            .collect()
    }

    /// Registers the tail; `false` if another ID already uses it.
    fn claim(&mut self, id: &[u8]) -> bool {
        id.len() < 5 || self.tails.insert(id[4..].to_vec())
    }

    fn build(&mut self, dev: &Device, v4_pool: Ipv4Addr, v6_pool: Ipv6Addr, loopback: bool) -> Vec<u8> {
        let vendor = VENDORS[dev.vendor];
        let ent = vendor.enterprise;
        for _ in 0..1000 {
            let id = match dev.format {
                IdFormat::Mac => {
                    let oui = vendor.ouis[self.rng.random_range(0..vendor.ouis.len())];
                    self.mac_id(ent, oui)
                }
                IdFormat::Octets => {
                    let mut rest = vec![5];
                    rest.extend(self.random_bytes(8));
                    with_enterprise(ent, true, &rest)
                }
                IdFormat::NetSnmp => {
                    let mut rest = vec![0x80];
                    rest.extend(self.random_bytes(8));
                    with_enterprise(NET_SNMP_ENTERPRISE, true, &rest)
                }
                IdFormat::NonConforming => {
                    let mut id = self.biased_bytes(12);
                    id[0] &= 0x7f;
                    id
                }
                IdFormat::Ipv4 => {
                    let own = dev.interfaces.iter().find_map(|ip| match ip {
                        IpAddr::V4(a) if !loopback => Some(*a),
                        _ => None,
                    });
                    let mut rest = vec![1];
                    rest.extend(own.unwrap_or(v4_pool).octets());
                    with_enterprise(ent, true, &rest)
                }
                IdFormat::Ipv6 => {
                    let own = dev.interfaces.iter().find_map(|ip| match ip {
                        IpAddr::V6(a) => Some(*a),
                        _ => None,
                    });
                    let mut rest = vec![2];
                    rest.extend(own.unwrap_or(v6_pool).octets());
                    with_enterprise(ent, true, &rest)
                }
                IdFormat::Text => {
                    let mut rest = vec![4];
                    rest.extend(format!("rtr-{}", dev.id).into_bytes());
                    with_enterprise(ent, true, &rest)
                }
            };
            if self.claim(&id) {
                return id;
            }
        }
        panic!("engine ID space exhausted");
    }
}

/// Keys `reboot - offset` per boots value, enforcing the spacing rules.
#[derive(Default)]
struct ClockRegistry {
    by_boots: BTreeMap<i64, BTreeSet<i64>>,
    constant: BTreeSet<i64>,
}

impl ClockRegistry {
    fn free(&self, boots: i64, key: i64, constant: bool) -> bool {
        let near = |set: &BTreeSet<i64>, gap: i64| set.range(key - gap + 1..=key + gap - 1).next().is_some();
        if self.by_boots.get(&boots).is_some_and(|s| near(s, TUPLE_SPACING_S)) {
            return false;
        }
        !(constant && near(&self.constant, CONSTANT_ID_SPACING_S))
    }

    fn insert(&mut self, boots: i64, key: i64, constant: bool) {
        self.by_boots.entry(boots).or_default().insert(key);
        if constant {
            self.constant.insert(key);
        }
    }
}

impl Population {
    pub fn generate(spec: &PopulationSpec) -> Result<Self, SpecError> {
        spec.validate()?;
        let n = spec.device_count;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

        let iface_counts: Vec<usize> = labels(&spec.interfaces, n, &mut rng);
        let families = assign_families(spec, &iface_counts, &mut rng)?;
        let vendors: Vec<usize> = labels(&spec.vendors, n, &mut rng);
        let formats: Vec<IdFormat> = labels(&spec.formats, n, &mut rng);

        let mut plan = AddressPlan {
            loopback: spec.loopback,
            next_v4: vec![1; spec.as_count as usize],
            next_v6: vec![1; spec.as_count as usize],
        };
        let mut devices = Vec::with_capacity(n);
        for i in 0..n {
            let k = rng.random_range(0..spec.as_count as usize);
            let count = iface_counts[i];
            let v4_count = match families[i] {
                Family::V4Only => count,
                Family::V6Only => 0,
                Family::DualStack => rng.random_range(1..count),
            };
            let mut interfaces = Vec::with_capacity(count);
            for _ in 0..v4_count {
                interfaces.push(plan.v4(k)?);
            }
            for _ in v4_count..count {
                interfaces.push(plan.v6(k));
            }
            devices.push(Device {
                id: i as u32,
                vendor: vendors[i],
                format: formats[i],
                family: families[i],
                asn: ASN_BASE + k as u32 + 1,
                interfaces,
                engine_id: Vec::new(),
                boots: 0,
                reboot_epoch: 0,
                offset: 0,
                jitter: [0; 2],
                later: LaterPasses { boots: 0, reboot_lead_s: None, offset: 0 },
                anomaly: None,
                future_time: 0,
                router: false,
                collides_with: None,
            });
        }
        let total_ifaces: usize = devices.iter().map(|d| d.interfaces.len()).sum();

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        assign_anomalies(spec, &mut devices, &perm)?;
        let pairs = assign_collisions(spec, &mut devices, &perm, total_ifaces)?;
        let ephemeral = assign_ephemeral(spec, &devices, &perm, total_ifaces, &pairs, &mut rng)?;

        let constant_engine_id = assign_engine_ids(spec, &mut devices, &mut rng);
        assign_clocks(spec, &mut devices, &pairs, &mut rng)?;

        let mut router_perm: Vec<usize> = (0..n).collect();
        router_perm.shuffle(&mut rng);
        for &i in router_perm.iter().take(round_count(spec.router_share * n as f64)) {
            devices[i].router = true;
        }
        let ases = build_ases(spec, &devices, &mut plan, &mut rng)?;

        let ip_index = devices.iter().flat_map(|d| d.interfaces.iter().map(move |ip| (*ip, d.id))).collect();
        Ok(Self { spec: spec.clone(), devices, ases, ip_index, ephemeral, constant_engine_id })
    }

    pub fn device(&self, id: u32) -> &Device {
        &self.devices[id as usize]
    }

    pub fn interface_count(&self) -> usize {
        self.ip_index.len()
    }

    /// Owner of every address answered on in `pass`.
    pub fn reassign_ephemeral(&self, pass: usize) -> BTreeMap<IpAddr, u32> {
        let mut owners = self.ip_index.clone();
        if pass > 0 {
            owners.extend(self.ephemeral.iter().map(|(ip, d)| (*ip, *d)));
        }
        owners
    }

    /// Every interface plus the silent tagged addresses, sorted.
    pub fn targets(&self) -> Vec<IpAddr> {
        let mut t: Vec<IpAddr> = self.ip_index.keys().copied().collect();
        t.extend(self.ases.iter().flat_map(|a| a.silent.iter().copied()));
        t.sort();
        t
    }

    pub fn router_tags(&self) -> Vec<IpAddr> {
        let mut t: Vec<IpAddr> =
            self.devices.iter().filter(|d| d.router).flat_map(|d| d.interfaces.iter().copied()).collect();
        t.extend(self.ases.iter().flat_map(|a| a.silent.iter().copied()));
        t.sort();
        t
    }

    pub fn pfx2as_text(&self) -> String {
        let mut out = String::new();
        for a in &self.ases {
            out.push_str(&format!("{}\t{}\n", a.v4, a.asn));
            if let Some(p) = a.v6 {
                out.push_str(&format!("{p}\t{}\n", a.asn));
            }
        }
        out
    }

    pub fn regions_text(&self) -> String {
        self.ases.iter().map(|a| format!("{}\t{}\n", a.asn, a.region)).collect()
    }
}

fn assign_families(spec: &PopulationSpec, counts: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<Family>, SpecError> {
    let n = counts.len();
    let shares: Vec<f64> = spec.families.iter().map(|(_, s)| *s).collect();
    let per = apportion(&shares, n);
    let want = |f: Family| spec.families.iter().zip(&per).filter(|((k, _), _)| *k == f).map(|(_, c)| *c).sum::<usize>();
    let (dual, v6) = (want(Family::DualStack), want(Family::V6Only));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out = vec![Family::V4Only; n];
    let multi: Vec<usize> = order.iter().copied().filter(|&i| counts[i] >= 2).collect();
    if multi.len() < dual {
        return Err(invalid("not enough multi-interface devices for the dual-stack share"));
    }
    for &i in &multi[..dual] {
        out[i] = Family::DualStack;
    }
    let rest: Vec<usize> = order.iter().copied().filter(|&i| out[i] != Family::DualStack).take(v6).collect();
    for i in rest {
        out[i] = Family::V6Only;
    }
    Ok(out)
}

fn assign_anomalies(spec: &PopulationSpec, devices: &mut [Device], perm: &[usize]) -> Result<(), SpecError> {
    let n = devices.len();
    for a in Anomaly::ALL {
        let want = round_count(spec.anomaly_rate(a) * n as f64);
        if a == Anomaly::Promiscuous && want == 1 {
            return Err(invalid("promiscuous needs at least two devices"));
        }
        let chosen: Vec<usize> = perm
            .iter()
            .copied()
            .filter(|&i| devices[i].anomaly.is_none())
            .filter(|&i| a.required_format().is_none_or(|f| devices[i].format == f))
            .take(want)
            .collect();
        if chosen.len() < want {
            return Err(invalid(format!("not enough eligible devices for {}", a.key())));
        }
        for i in chosen {
            devices[i].anomaly = Some(a);
        }
    }
    Ok(())
}

fn assign_collisions(
    spec: &PopulationSpec,
    devices: &mut [Device],
    perm: &[usize],
    total_ifaces: usize,
) -> Result<Vec<(usize, usize)>, SpecError> {
    let pairs = round_count(spec.tuple_collision * total_ifaces as f64 / 2.0);
    let pool: Vec<usize> = perm
        .iter()
        .copied()
        .filter(|&i| devices[i].anomaly.is_none() && devices[i].interfaces.len() == 1)
        .take(2 * pairs)
        .collect();
    if pool.len() < 2 * pairs {
        return Err(invalid("not enough clean single-interface devices for tuple collisions"));
    }
    let out: Vec<(usize, usize)> = pool.chunks(2).map(|c| (c[0], c[1])).collect();
    for &(a, b) in &out {
        devices[a].collides_with = Some(b as u32);
        devices[b].collides_with = Some(a as u32);
    }
    Ok(out)
}

fn assign_ephemeral(
    spec: &PopulationSpec,
    devices: &[Device],
    perm: &[usize],
    total_ifaces: usize,
    pairs: &[(usize, usize)],
    rng: &mut ChaCha8Rng,
) -> Result<BTreeMap<IpAddr, u32>, SpecError> {
    let want = round_count(spec.ephemeral_ip * total_ifaces as f64);
    if want == 0 {
        return Ok(BTreeMap::new());
    }
    if want == 1 {
        return Err(invalid("ephemeral addresses need at least two interfaces"));
    }
    let paired: HashSet<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let mut candidates = perm.iter().copied().filter(|&i| devices[i].anomaly.is_none() && !paired.contains(&i));
    let mut picked: Vec<(usize, IpAddr)> = Vec::with_capacity(want);
    for i in candidates.by_ref() {
        if picked.len() == want {
            break;
        }
        let ifs = &devices[i].interfaces;
        picked.push((i, ifs[rng.random_range(0..ifs.len())]));
    }
    // A family group of one cannot rotate; swap it for an address of the other family.
    loop {
        let v4 = picked.iter().filter(|(_, ip)| ip.is_ipv4()).count();
        let v6 = picked.len() - v4;
        let lonely_v4 = match (v4, v6) {
            (1, _) => true,
            (_, 1) => false,
            _ => break,
        };
        picked.retain(|(_, ip)| ip.is_ipv4() != lonely_v4);
        let next = candidates
            .by_ref()
            .find_map(|i| devices[i].interfaces.iter().find(|ip| ip.is_ipv4() != lonely_v4).map(|ip| (i, *ip)));
        picked.push(next.ok_or_else(|| invalid("not enough clean interfaces for the ephemeral share"))?);
    }
    if picked.len() < want {
        return Err(invalid("not enough clean interfaces for the ephemeral share"));
    }
    let mut out = BTreeMap::new();
    for family_v4 in [true, false] {
        let group: Vec<&(usize, IpAddr)> = picked.iter().filter(|(_, ip)| ip.is_ipv4() == family_v4).collect();
        for (j, (_, ip)) in group.iter().enumerate() {
            out.insert(*ip, group[(j + 1) % group.len()].0 as u32);
        }
    }
    Ok(out)
}

fn assign_engine_ids(spec: &PopulationSpec, devices: &mut [Device], rng: &mut ChaCha8Rng) -> Option<Vec<u8>> {
    let mut f = IdFactory { rng, macs: HashSet::new(), tails: HashSet::new(), bit_p: spec.nonconforming_bit_p };
    let any_constant = devices.iter().any(|d| d.anomaly == Some(Anomaly::ConstantEngineId));
    let constant = any_constant.then(|| {
        let id = f.mac_id(VENDORS[0].enterprise, VENDORS[0].ouis[0]);
        f.claim(&id);
        id
    });
    let promiscuous: Vec<usize> =
        devices.iter().filter(|d| d.anomaly == Some(Anomaly::Promiscuous)).map(|d| d.id as usize).collect();
    let mut groups: Vec<&[usize]> = promiscuous.chunks(2).collect();
    if promiscuous.len() % 2 == 1 && groups.len() >= 2 {
        let last = groups.pop().expect("odd tail");
        let len = groups.len();
        let start = (len - 1) * 2;
        groups[len - 1] = &promiscuous[start..start + 2 + last.len()];
    }
    let mut promiscuous_ids: BTreeMap<usize, Vec<u8>> = BTreeMap::new();
    for group in groups {
        let lead_vendor = devices[group[0]].vendor;
        let vendor = VENDORS[lead_vendor];
        let base = f.mac_id(vendor.enterprise, vendor.ouis[0]);
        f.claim(&base);
        for (j, &i) in group.iter().enumerate() {
            let v = (lead_vendor + j) % VENDORS.len();
            promiscuous_ids.insert(i, with_enterprise(VENDORS[v].enterprise, true, &base[4..]));
            devices[i].vendor = v;
        }
    }
    let v4_base = u32::from(Ipv4Addr::new(45, 0, 0, 0));
    for i in 0..devices.len() {
        let d = &devices[i];
        let pool4 = Ipv4Addr::from(v4_base + d.id);
        let pool6 = Ipv6Addr::new(0x2001, 0xdb8, 0xffff, 0, 0, 0, (d.id >> 16) as u16, d.id as u16);
        let id = match d.anomaly {
            Some(Anomaly::ConstantEngineId) => constant.clone().expect("constant ID drawn"),
            Some(Anomaly::Promiscuous) => promiscuous_ids[&i].clone(),
            Some(Anomaly::UnregisteredOui) => {
                let oui = [0x02, f.rng.random(), f.rng.random()];
                let id = f.mac_id(VENDORS[d.vendor].enterprise, oui);
                f.claim(&id);
                id
            }
            Some(Anomaly::UnroutableIpv4) => loop {
                let rest = [1, 10, f.rng.random(), f.rng.random(), f.rng.random::<u8>().max(1)];
                let id = with_enterprise(VENDORS[d.vendor].enterprise, true, &rest);
                if f.claim(&id) {
                    break id;
                }
            },
            Some(Anomaly::ShortEngineId) => {
                let len = f.rng.random_range(1..=3);
                f.random_bytes(len)
            }
            Some(Anomaly::MissingEngineId) => Vec::new(),
            _ => f.build(d, pool4, pool6, spec.loopback),
        };
        devices[i].engine_id = id;
    }
    constant
}

fn assign_clocks(
    spec: &PopulationSpec,
    devices: &mut [Device],
    pairs: &[(usize, usize)],
    rng: &mut ChaCha8Rng,
) -> Result<(), SpecError> {
    let uptime = Exp::new(1.0 / spec.uptime_mean_s).map_err(|e| invalid(e.to_string()))?;
    let jitter = Normal::new(0.0, spec.jitter_sigma_s).map_err(|e| invalid(e.to_string()))?;
    let followers: HashSet<usize> = pairs.iter().map(|&(_, b)| b).collect();
    let mut registry = ClockRegistry::default();
    let drift_lo = 2 * (spec.jitter_max_s + spec.interface_jitter_s) + 11;
    for (i, d) in devices.iter_mut().enumerate() {
        if followers.contains(&i) {
            continue;
        }
        let constant = d.anomaly == Some(Anomaly::ConstantEngineId);
        let mut drawn = None;
        for _ in 0..10_000 {
            let up = spec.min_uptime_s + uptime.sample(rng).round() as i64;
            let boots = rng.random_range(1..=spec.boots_max);
            let offset = rng.random_range(-spec.offset_max_s..=spec.offset_max_s);
            let reboot = spec.start_time - up;
            if registry.free(boots, reboot - offset, constant) {
                registry.insert(boots, reboot - offset, constant);
                drawn = Some((boots, reboot, offset));
                break;
            }
        }
        let (boots, reboot, offset) = drawn.ok_or_else(|| invalid("clock tuple space exhausted"))?;
        let mut j = [0i64; 2];
        for slot in &mut j {
            *slot = (jitter.sample(rng).round() as i64).clamp(-spec.jitter_max_s, spec.jitter_max_s);
        }
        d.boots = boots;
        d.reboot_epoch = reboot;
        d.offset = offset;
        d.jitter = j;
        d.later = LaterPasses { boots, reboot_lead_s: None, offset };
        match d.anomaly {
            Some(Anomaly::RebootBetween) => {
                d.later.boots = boots + 1;
                d.later.reboot_lead_s = Some(rng.random_range(600..=3000));
            }
            Some(Anomaly::LrtDrift) => {
                let mag = rng.random_range(drift_lo..=drift_lo + 20);
                d.later.offset = offset + if rng.random_bool(0.5) { mag } else { -mag };
            }
            Some(Anomaly::FutureTime) => d.future_time = -rng.random_range(1..=86_400),
            _ => {}
        }
    }
    for &(a, b) in pairs {
        let src = devices[a].clone();
        let d = &mut devices[b];
        d.boots = src.boots;
        d.reboot_epoch = src.reboot_epoch;
        d.offset = src.offset;
        d.jitter = src.jitter;
        d.later = src.later;
    }
    Ok(())
}

fn build_ases(
    spec: &PopulationSpec,
    devices: &[Device],
    plan: &mut AddressPlan,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<AutonomousSystem>, SpecError> {
    let k_count = spec.as_count as usize;
    let mut regions: Vec<&'static str> = (0..k_count).map(|k| REGIONS[k % REGIONS.len()]).collect();
    regions.shuffle(rng);
    let mut tagged = vec![0usize; k_count];
    for d in devices.iter().filter(|d| d.router) {
        tagged[(d.asn - ASN_BASE - 1) as usize] += d.interfaces.len();
    }
    let mut out = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let responsiveness = rng.random_range(0.2..=0.95);
        let silent_count = round_count(tagged[k] as f64 * (1.0 - responsiveness) / responsiveness);
        let silent = (0..silent_count).map(|_| plan.v4(k)).collect::<Result<Vec<_>, _>>()?;
        out.push(AutonomousSystem {
            asn: ASN_BASE + k as u32 + 1,
            region: regions[k],
            v4: plan.v4_prefix(k),
            v6: plan.v6_prefix(k),
            responsiveness,
            silent,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(&[0.5, 0.3, 0.2], 10), vec![5, 3, 2]);
        assert_eq!(apportion(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        assert_eq!(apportion(&[0.6, 0.4], 0), vec![0, 0]);
        assert_eq!(round_count(0.05 * 10_000.0), 500);
        assert_eq!(round_count(2.5), 3);
        assert_eq!(round_count(0.015 * 100.0), 2);
    }

    #[test]
    fn empty_population() {
        let spec = PopulationSpec { device_count: 0, ..Default::default() };
        let p = Population::generate(&spec).unwrap();
        assert!(p.devices.is_empty());
        assert!(p.targets().iter().all(|ip| !p.ip_index.contains_key(ip)));
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = PopulationSpec { device_count: 300, ephemeral_ip: 0.1, ..Default::default() };
        spec.set_anomaly(Anomaly::ConstantEngineId, 0.05).set_anomaly(Anomaly::Promiscuous, 0.01);
        let a = Population::generate(&spec).unwrap();
        assert_eq!(a, Population::generate(&spec).unwrap());
        let b = Population::generate(&PopulationSpec { seed: 2, ..spec }).unwrap();
        assert_ne!(a.devices, b.devices);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let mut spec =
            PopulationSpec { device_count: 100, formats: vec![(IdFormat::Octets, 1.0)], ..Default::default() };
        spec.set_anomaly(Anomaly::ConstantEngineId, 0.1);
        assert!(Population::generate(&spec).is_err());
        let spec = PopulationSpec { device_count: 10, interfaces: vec![(1, 1.0)], ..Default::default() };
        assert!(Population::generate(&spec).is_err(), "dual-stack needs two interfaces");
    }
}
