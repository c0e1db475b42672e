use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;
use std::time::Duration;

use snmpv3fp::core::alias::{group_aliases, Family, Variant};
use snmpv3fp::core::analytics::{
    annotate_sets, per_as_coverage, uptime_distribution, vendor_popularity, AsMapping, RouterTagSet,
};
use snmpv3fp::core::codec::encode_discovery_request;
use snmpv3fp::core::engineid::{format_census, from_hex, parse_engine_id, FormatCategory};
use snmpv3fp::core::pipeline::{process_scans, FilterConfig, ProcessedScans};
use snmpv3fp::records::{read_ground_truth, write_ground_truth};
use snmpv3fp::scanner::ScanPlan;
use snmpv3fp::simulator::{
    agent_reply, run_virtual_campaign, Anomaly, IdFormat, PassClock, Population, PopulationSpec, VENDORS,
};
use snmpv3fp::tables::{bundled_enterprises, bundled_oui};

fn pipeline(pop: &Population) -> ProcessedScans {
    let plan = ScanPlan { seed: pop.spec.seed, ..ScanPlan::new(pop.targets(), "scan1") };
    let run = run_virtual_campaign(pop, &plan, Duration::from_secs(86_400)).unwrap();
    let oui = bundled_oui();
    process_scans(&run.campaign.scan1, &run.campaign.scan2, &FilterConfig { oui: Some(&oui), ..Default::default() })
}

#[test]
fn agent_reproduces_reference_report_bytes() {
    let fixture = from_hex(include_str!("../fixtures/reference_report.hex").trim()).unwrap();
    let spec = PopulationSpec {
        device_count: 1,
        interfaces: vec![(1, 1.0)],
        families: vec![(Family::V4Only, 1.0)],
        ..Default::default()
    };
    let mut pop = Population::generate(&spec).unwrap();
    let start = spec.start_time;
    {
        let d = &mut pop.devices[0];
        d.engine_id = from_hex("800007c703748ef831db80").unwrap();
        d.boots = 148;
        d.reboot_epoch = start - 10_043_812;
        d.offset = 0;
        d.jitter = [0, 0];
        d.anomaly = None;
    }
    let dev = pop.devices[0].clone();
    let request = encode_discovery_request(0x4a69).unwrap();
    let replies =
        agent_reply(&pop, &dev, dev.interfaces[0], PassClock { index: 0, start_s: start }, &request, start * 1000, 1);
    assert_eq!(replies, vec![fixture]);
}

#[test]
fn reference_request_bytes() {
    let fixture = from_hex(include_str!("../fixtures/request_msgid7.hex").trim()).unwrap();
    assert_eq!(encode_discovery_request(7).unwrap(), fixture);
    // Two-byte msgIDs give a 60-byte UDP payload, 88 bytes at the IPv4 layer.
    assert_eq!(encode_discovery_request(0x4a69).unwrap().len() + 28, 88);
}

#[test]
fn format_and_anomaly_counts_are_exact() {
    let mut spec = PopulationSpec { seed: 4, device_count: 4_000, ephemeral_ip: 0.1, ..Default::default() };
    spec.set_anomaly(Anomaly::ConstantEngineId, 0.05).set_anomaly(Anomaly::ZeroTime, 0.02);
    let pop = Population::generate(&spec).unwrap();
    let n = pop.devices.len() as f64;
    for (format, share) in &spec.formats {
        let count = pop.devices.iter().filter(|d| d.format == *format).count() as f64;
        assert!((count - share * n).abs() < 1.0, "{format:?}: {count}");
    }
    let constant: Vec<_> = pop.devices.iter().filter(|d| d.anomaly == Some(Anomaly::ConstantEngineId)).collect();
    assert_eq!(constant.len(), 200);
    assert!(constant.iter().all(|d| d.engine_id == constant[0].engine_id));
    assert_eq!(pop.devices.iter().filter(|d| d.engine_id == constant[0].engine_id).count(), 200);
    let target = 0.1 * pop.interface_count() as f64;
    assert!((pop.ephemeral.len() as f64 - target).abs() <= 1.0, "{} of {}", pop.ephemeral.len(), target);
    // The census over engine IDs sees the configured mix.
    let infos: Vec<_> = pop.devices.iter().map(|d| parse_engine_id(&d.engine_id).unwrap()).collect();
    let census = format_census(&infos);
    let mac = spec.formats.iter().find(|(f, _)| *f == IdFormat::Mac).unwrap().1;
    assert!((census.share(FormatCategory::Mac) - mac).abs() < 1e-3);
}

#[test]
fn ground_truth_round_trips() {
    let pop = Population::generate(&PopulationSpec { device_count: 50, ..Default::default() }).unwrap();
    let rows = pop.ground_truth_rows();
    let mut buf = Vec::new();
    write_ground_truth(&mut buf, &rows).unwrap();
    assert_eq!(read_ground_truth(buf.as_slice()).unwrap(), rows);
    let ips: usize = rows.iter().map(|r| r.ips.len()).sum();
    assert_eq!(ips, pop.interface_count());
}

#[test]
fn vendor_split_is_exact_on_mac_ids() {
    let spec = PopulationSpec {
        seed: 12,
        device_count: 1_000,
        formats: vec![(IdFormat::Mac, 1.0)],
        vendors: vec![(0, 0.5), (1, 0.3), (2, 0.2)],
        ..Default::default()
    };
    let pop = Population::generate(&spec).unwrap();
    let valid = pipeline(&pop).outcome.valid();
    let mut sets = group_aliases(&valid, Variant::default());
    annotate_sets(&mut sets, &valid, &bundled_oui(), &bundled_enterprises(), None).unwrap();
    let pop_counts = vendor_popularity(sets.iter());
    let oui = bundled_oui();
    let mut want = BTreeMap::new();
    for (v, share) in [(0usize, 0.5), (1, 0.3), (2, 0.2)] {
        let name = oui.get(VENDORS[v].ouis[0]).unwrap().to_string();
        want.insert(name, share);
    }
    let got: BTreeMap<String, f64> =
        pop_counts.iter().map(|(k, c)| (k.clone(), c.total() as f64 / sets.len() as f64)).collect();
    assert_eq!(got, want);
    assert_eq!(sets.len(), 1_000);
}

#[test]
fn dual_stack_devices_merge() {
    let pop = Population::generate(&PopulationSpec { seed: 21, device_count: 2_000, ..Default::default() }).unwrap();
    let valid = pipeline(&pop).outcome.valid();
    let sets = group_aliases(&valid, Variant::default());
    let by_family = |f: Family| sets.iter().filter(|s| s.family == f).count();
    let devices = |f: Family| pop.devices.iter().filter(|d| d.family == f).count();
    for f in [Family::V4Only, Family::V6Only, Family::DualStack] {
        assert_eq!(by_family(f), devices(f), "{}", f.name());
    }
}

/// One-sample KS against the generator's shifted exponential.
#[test]
fn uptime_matches_generator_distribution() {
    let spec = PopulationSpec { seed: 9, device_count: 3_000, ..Default::default() };
    let pop = Population::generate(&spec).unwrap();
    let valid = pipeline(&pop).outcome.valid();
    let sets = group_aliases(&valid, Variant::default());
    let ecdf = uptime_distribution(&sets, &valid, spec.start_time).unwrap();
    let (min, mean) = (spec.min_uptime_s as f64, spec.uptime_mean_s);
    let ks = ecdf.ks_statistic(|x| if x < min { 0.0 } else { 1.0 - (-(x - min) / mean).exp() });
    assert!(ks < 0.05, "KS {ks}");
}

#[test]
fn coverage_matches_ground_truth() {
    let mut spec = PopulationSpec { seed: 17, device_count: 3_000, ephemeral_ip: 0.05, ..Default::default() };
    spec.set_anomaly(Anomaly::ZeroTime, 0.03);
    let pop = Population::generate(&spec).unwrap();
    let valid = pipeline(&pop).outcome.valid();
    let responsive: BTreeSet<IpAddr> = valid.iter().map(|r| r.ip).collect();
    let tags = RouterTagSet::parse(&pop.router_tags().iter().map(|ip| format!("{ip}\n")).collect::<String>()).unwrap();
    let mut mapping = AsMapping::default();
    mapping.parse_pfx2as(&pop.pfx2as_text()).unwrap();
    mapping.parse_regions(&pop.regions_text()).unwrap();
    for min in [1, 10, 50] {
        let got = per_as_coverage(&responsive, &tags, &mapping, min);
        assert_eq!(got, pop.expected_coverage(true, min), "min_ips {min}");
    }
    // Configured responsiveness is reproduced up to rounding of the silent count.
    for a in &pop.ases {
        let tagged =
            pop.devices.iter().filter(|d| d.router && d.asn == a.asn).map(|d| d.interfaces.len()).sum::<usize>();
        if tagged >= 20 {
            let ratio = tagged as f64 / (tagged + a.silent.len()) as f64;
            assert!((ratio - a.responsiveness).abs() < 0.05, "AS{} {ratio} vs {}", a.asn, a.responsiveness);
        }
    }
}

#[test]
fn every_anomaly_lands_in_its_filter() {
    let mut spec = PopulationSpec { seed: 5, device_count: 3_000, ephemeral_ip: 0.05, ..Default::default() };
    for a in Anomaly::ALL {
        spec.set_anomaly(a, 0.02);
    }
    let pop = Population::generate(&spec).unwrap();
    let processed = pipeline(&pop);
    let report = &processed.outcome.report;
    assert_eq!(*report, pop.expected_report(true));
    assert!(report.undecodable > 0);
    for (name, n) in report.rows() {
        if name != "not_in_both_scans" {
            assert!(n > 0, "{name} is empty");
        }
    }
    let valid: BTreeSet<IpAddr> = processed.outcome.valid().iter().map(|r| r.ip).collect();
    assert_eq!(valid, pop.expected_valid_ips(true));
}
