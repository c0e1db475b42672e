use std::collections::{BTreeMap, BTreeSet};
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use proptest::prelude::*;
use snmpv3fp_core::alias::{group_aliases, merge_dual_stack, set_statistics, Binning, Variant};
use snmpv3fp_core::analytics::{per_as_coverage, vendor_of, AsMapping, RouterTagSet};
use snmpv3fp_core::codec::{
    decode_message, encode_discovery_request, Pdu, PduType, ScopedPdu, SnmpV3Message, UsmParameters, VarBind,
};
use snmpv3fp_core::engineid::{hamming_fraction, parse_engine_id, EnterpriseTable, OuiTable};
use snmpv3fp_core::pipeline::{apply_filters, FilterConfig, MergedRecord, Observation, ValidRecord};

fn bytes(max: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(any::<u8>(), 0..=max)
}

fn pdu_type() -> impl Strategy<Value = PduType> {
    prop_oneof![
        Just(PduType::GetRequest),
        Just(PduType::GetNextRequest),
        Just(PduType::Response),
        Just(PduType::SetRequest),
        Just(PduType::GetBulkRequest),
        Just(PduType::InformRequest),
        Just(PduType::Trap),
        Just(PduType::Report),
    ]
}

fn varbind() -> impl Strategy<Value = VarBind> {
    (0u32..=2, 0u32..40, prop::collection::vec(any::<u32>(), 0..8), bytes(12)).prop_map(|(a, b, rest, v)| {
        let mut oid = vec![a, b];
        oid.extend(rest);
        let mut value = vec![0x04, v.len() as u8];
        value.extend(v);
        VarBind { oid, value }
    })
}

prop_compose! {
    fn message()(
        msg_id in 0..=i32::MAX,
        msg_max_size in 0..=i32::MAX,
        msg_flags in any::<u8>(),
        engine_id in bytes(40),
        engine_boots in any::<i64>(),
        engine_time in any::<i64>(),
        user_name in bytes(32),
        auth_params in bytes(12),
        priv_params in bytes(8),
        context_engine_id in bytes(32),
        context_name in bytes(16),
        pdu_type in pdu_type(),
        request_id in any::<i64>(),
        error_status in any::<i64>(),
        error_index in any::<i64>(),
        varbinds in prop::collection::vec(varbind(), 0..4),
    ) -> SnmpV3Message {
        let scoped = ScopedPdu {
            context_engine_id,
            context_name,
            pdu: Pdu { pdu_type, request_id, error_status, error_index, varbinds },
        };
        SnmpV3Message {
            msg_version: 3,
            msg_id,
            msg_max_size,
            msg_flags,
            msg_security_model: 3,
            usm: UsmParameters { engine_id, engine_boots, engine_time, user_name, auth_params, priv_params },
            scoped_pdu: scoped.encode(),
        }
    }
}

proptest! {
    #[test]
    fn message_round_trip(m in message()) {
        let wire = m.encode();
        let back = decode_message(&wire).unwrap();
        prop_assert_eq!(&back, &m);
        let scoped = back.scoped().unwrap();
        prop_assert_eq!(scoped.encode(), m.scoped_pdu);
    }

    #[test]
    fn request_round_trip(id in 0..=i32::MAX as i64) {
        let m = decode_message(&encode_discovery_request(id).unwrap()).unwrap();
        prop_assert_eq!(m.msg_id as i64, id);
        prop_assert!(m.is_discovery() && m.is_reportable());
    }

    #[test]
    fn decoder_is_total(noise in bytes(256)) {
        if let Err(e) = decode_message(&noise) {
            let _ = e.to_string();
        }
    }

    #[test]
    fn corrupted_messages_never_panic(m in message(), pos in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let mut wire = m.encode();
        let i = pos.index(wire.len());
        wire[i] = byte;
        let _ = decode_message(&wire);
        wire.truncate(i);
        prop_assert!(decode_message(&wire).is_err());
    }

    #[test]
    fn engine_id_fields_reassemble_raw(raw in prop::collection::vec(any::<u8>(), 1..40)) {
        let info = parse_engine_id(&raw).unwrap();
        prop_assert_eq!(info.to_bytes(), raw.clone());
        if let Some(n) = info.enterprise_number {
            prop_assert!(n < 1 << 31);
            prop_assert_eq!(n, u32::from_be_bytes([raw[0], raw[1], raw[2], raw[3]]) & 0x7fff_ffff);
        }
        prop_assert!(info.conformant || info.format == snmpv3fp_core::engineid::EngineIdFormat::NonConforming);
        prop_assert_eq!(info.mac.is_some(), info.format == snmpv3fp_core::engineid::EngineIdFormat::Mac && info.data.len() == 6);
        prop_assert_eq!(info.ipv4.is_some(), info.format == snmpv3fp_core::engineid::EngineIdFormat::Ipv4 && info.data.len() == 4);
    }

    #[test]
    fn hamming_permutation_invariant(mut data in prop::collection::vec(any::<u8>(), 1..64), seed in any::<u64>()) {
        let before = hamming_fraction(&data).unwrap();
        // Fisher-Yates with a tiny LCG keeps this independent of rand.
        let mut s = seed | 1;
        for i in (1..data.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            data.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(before, hamming_fraction(&data).unwrap());
        prop_assert!((0.0..=1.0).contains(&before));
    }
}

fn ip_from(i: u32, v6: bool) -> IpAddr {
    if v6 {
        IpAddr::V6(Ipv6Addr::new(0x2001, 0xdb8, 0, 0, 0, 0, (i >> 16) as u16, i as u16))
    } else {
        IpAddr::V4(Ipv4Addr::from(0x1400_0000 + i))
    }
}

prop_compose! {
    fn merged_record()(
        id_kind in 0u8..6,
        tail in 0u8..4,
        ent in prop::sample::select(vec![9u32, 1991, 2011]),
        boots1 in 0i64..3,
        boots_delta in prop::sample::select(vec![0i64, 0, 0, 1]),
        time1 in -2i64..3_000,
        lrt_delta in -14i64..15,
        id_changes in prop::bool::weighted(0.1),
    ) -> (Vec<u8>, Vec<u8>, i64, i64, i64, i64) {
        let e = ent.to_be_bytes();
        let id = match id_kind {
            0 => vec![],
            1 => vec![0x80, 1, 2],
            2 => vec![0x80 | e[0], e[1], e[2], e[3], 1, 10, 0, 0, tail],
            3 => vec![0x80 | e[0], e[1], e[2], e[3], 1, 193, 0, 14, tail],
            _ => vec![0x80 | e[0], e[1], e[2], e[3], 3, 0, 0, 12, 0, 0, tail],
        };
        let mut id2 = id.clone();
        if id_changes {
            id2.push(0xff);
        }
        (id, id2, boots1, boots1 + boots_delta, time1, lrt_delta)
    }
}

type RawPair = (Vec<u8>, Vec<u8>, i64, i64, i64, i64);

fn build_records(raw: Vec<RawPair>) -> Vec<MergedRecord> {
    let (t1, t2) = (1_000_000i64, 1_086_400i64);
    raw.into_iter()
        .enumerate()
        .map(|(i, (id1, id2, b1, b2, time1, drift))| {
            let ip = ip_from(i as u32, false);
            let o1 = Observation::new(ip, id1, b1, time1, t1 * 1000);
            let lrt1 = t1 - time1;
            let o2 = Observation::new(ip, id2, b2, t2 - (lrt1 + drift), t2 * 1000);
            MergedRecord::new(o1, o2)
        })
        .collect()
}

proptest! {
    #[test]
    fn filters_are_idempotent_and_sound(raw in prop::collection::vec(merged_record(), 0..80)) {
        let records = build_records(raw);
        let mut oui = OuiTable::new();
        oui.insert([0, 0, 12], "Cisco");
        let cfg = FilterConfig { oui: Some(&oui), ..Default::default() };
        let out = apply_filters(&records, &cfg);
        let r = &out.report;
        prop_assert_eq!(r.input, records.len());
        prop_assert_eq!(r.input - r.total_removed(), r.surviving);
        prop_assert_eq!(out.kept.len() + out.removed.len(), records.len());
        let ips: BTreeSet<_> = records.iter().map(|r| r.ip).collect();
        prop_assert!(out.kept.iter().all(|k| ips.contains(&k.ip)));
        for k in &out.kept {
            prop_assert_eq!(&k.obs1.engine_id, &k.obs2.engine_id);
            prop_assert!(k.obs1.engine_id.len() >= 4);
            prop_assert_eq!(k.obs1.boots, k.obs2.boots);
            prop_assert!(k.obs1.time > 0 && k.obs2.time > 0 && k.obs1.boots > 0);
            prop_assert!(k.lrt_drift().abs() <= 10);
        }
        let again = apply_filters(&out.kept, &cfg);
        prop_assert_eq!(again.report.total_removed(), 0);
        prop_assert_eq!(again.kept, out.kept);
    }
}

prop_compose! {
    fn valid_records(max: usize)(
        raw in prop::collection::vec((0u8..5, 1i64..3, 0i64..200, -12i64..13, any::<bool>()), 0..max)
    ) -> Vec<ValidRecord> {
        raw.into_iter().enumerate().map(|(i, (id, boots, lrt1, d, v6))| {
            let engine_id = vec![0x80, 0, 0, 9, 3, 0, 0, 12, 0, 0, id];
            ValidRecord {
                ip: ip_from(i as u32, v6),
                info: parse_engine_id(&engine_id).unwrap(),
                engine_id,
                boots,
                lrt1,
                lrt2: lrt1 + d,
            }
        }).collect()
    }
}

/// Pairwise relation plus union-find, written without the library's key type.
fn brute_force_partition(records: &[ValidRecord], bin: fn(i64) -> i64, both: bool) -> BTreeSet<BTreeSet<IpAddr>> {
    let n = records.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&records[i], &records[j]);
            let same = a.engine_id == b.engine_id
                && a.boots == b.boots
                && bin(a.lrt1) == bin(b.lrt1)
                && (!both || bin(a.lrt2) == bin(b.lrt2));
            if same {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<IpAddr>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate().take(n) {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(r.ip);
    }
    groups.into_values().collect()
}

fn oracle_bin(b: Binning) -> fn(i64) -> i64 {
    match b {
        Binning::Exact => |x| x,
        Binning::Round => |x| ((x as f64 / 10.0 + 0.5).floor() as i64) * 10,
        Binning::Div20 => |x| (x as f64 / 20.0).floor() as i64,
        Binning::Div20Round => |x| (x as f64 / 20.0 + 0.5).floor() as i64,
    }
}

proptest! {
    #[test]
    fn grouping_matches_brute_force(records in valid_records(60)) {
        for v in Variant::ALL {
            let sets = group_aliases(&records, v);
            let got: BTreeSet<BTreeSet<IpAddr>> = sets.iter().map(|s| s.members.clone()).collect();
            let total: usize = sets.iter().map(|s| s.len()).sum();
            prop_assert_eq!(total, records.len());
            prop_assert_eq!(got, brute_force_partition(&records, oracle_bin(v.binning()), v.uses_both()));
        }
    }

    #[test]
    fn binning_never_splits_groups(records in valid_records(80)) {
        let count = |v: Variant| group_aliases(&records, v).len();
        for coarse in [Variant::RoundBoth, Variant::Div20Both, Variant::Div20RoundBoth] {
            prop_assert!(count(Variant::ExactBoth) >= count(coarse));
        }
        for coarse in [Variant::RoundFirst, Variant::Div20First, Variant::Div20RoundFirst] {
            prop_assert!(count(Variant::ExactFirst) >= count(coarse));
        }
        prop_assert!(count(Variant::Div20Both) >= count(Variant::Div20First));
        let s = set_statistics(group_aliases(&records, Variant::Div20Both).iter());
        prop_assert_eq!(s.histogram.iter().map(|(k, v)| k * v).sum::<usize>(), records.len());
    }

    #[test]
    fn dual_stack_merge_laws(records in valid_records(60)) {
        let (v4, v6): (Vec<_>, Vec<_>) = records.iter().cloned().partition(|r| r.ip.is_ipv4());
        let a = group_aliases(&v4, Variant::Div20Both);
        let b = group_aliases(&v6, Variant::Div20Both);
        let ab = merge_dual_stack(&a, &b).unwrap();
        prop_assert_eq!(&ab, &merge_dual_stack(&b, &a).unwrap());
        prop_assert_eq!(&ab, &merge_dual_stack(&ab, &ab).unwrap());
        prop_assert_eq!(&ab, &group_aliases(&records, Variant::Div20Both));
        for s in ab.iter() {
            prop_assert_eq!(Some(s.family), snmpv3fp_core::alias::Family::of(&s.members));
        }
    }

    #[test]
    fn vendor_depends_only_on_identity_fields(raw in prop::collection::vec(any::<u8>(), 5..20), noise in bytes(4)) {
        let mut oui = OuiTable::new();
        let mut ent = EnterpriseTable::new();
        let info = parse_engine_id(&raw).unwrap();
        if let Some(m) = info.mac { oui.insert(m.oui(), "oui-vendor"); }
        if let Some(n) = info.enterprise_number { ent.insert(n, "ent-vendor"); }
        let mut perturbed = info.clone();
        perturbed.raw.extend(&noise);
        perturbed.ipv4 = None;
        perturbed.ipv6 = None;
        if perturbed.mac.is_none() { perturbed.data.extend(&noise); }
        prop_assert_eq!(vendor_of(&info, &oui, &ent), vendor_of(&perturbed, &oui, &ent));
    }

    #[test]
    fn coverage_is_bounded_and_order_free(tagged in prop::collection::vec((0u32..3, 0u32..50, any::<bool>()), 0..60)) {
        let mut mapping = AsMapping::default();
        mapping.parse_pfx2as("20.0.0.0/24\t10\n20.0.1.0/24\t11\n").unwrap();
        let mut tags = RouterTagSet::default();
        let mut responsive = BTreeSet::new();
        for (net, host, resp) in &tagged {
            let ip = IpAddr::V4(Ipv4Addr::new(20, 0, *net as u8, *host as u8));
            tags.ips.insert(ip);
            if *resp { responsive.insert(ip); }
        }
        let cov = per_as_coverage(&responsive, &tags, &mapping, 1);
        for c in cov.values() {
            prop_assert!((0.0..=1.0).contains(&c.ratio));
        }
        let mut shuffled = RouterTagSet::default();
        for ip in tags.ips.iter().rev() { shuffled.ips.insert(*ip); }
        prop_assert_eq!(cov, per_as_coverage(&responsive, &shuffled, &mapping, 1));
    }
}
