//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snmpv3fp::core::alias::{group_aliases, variant_comparison, Binning, Family, Variant};
use snmpv3fp::core::analytics::{hamming_by_format, tuple_uniqueness};
use snmpv3fp::core::codec::{
    decode_discovery_report, decode_message, Pdu, PduType, ScopedPdu, SnmpV3Message, UsmParameters, VarBind,
};
use snmpv3fp::core::engineid::{from_hex, parse_engine_id, EngineIdFormat, FormatCategory};
use snmpv3fp::core::pipeline::{process_scans, FilterConfig, FilterKind, ProcessedScans, ValidRecord};
use snmpv3fp::scanner::ScanPlan;
use snmpv3fp::simulator::{run_virtual_campaign, Anomaly, IdFormat, Population, PopulationSpec, VirtualCampaign};
use snmpv3fp::tables::bundled_oui;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = (&'static str, fn() -> Outcome);

const DAY: Duration = Duration::from_secs(86_400);

fn campaign(pop: &Population) -> (VirtualCampaign, ProcessedScans) {
    let plan = ScanPlan { seed: pop.spec.seed, ..ScanPlan::new(pop.targets(), "scan1") };
    let run = run_virtual_campaign(pop, &plan, DAY).expect("virtual campaign");
    let oui = bundled_oui();
    let cfg = FilterConfig { oui: Some(&oui), ..FilterConfig::default() };
    let processed = process_scans(&run.campaign.scan1, &run.campaign.scan2, &cfg);
    (run, processed)
}

fn member_sets(valid: &[ValidRecord], v: Variant) -> Vec<BTreeSet<IpAddr>> {
    group_aliases(valid, v).iter().map(|s| s.members.clone()).collect()
}

fn golden_decode() -> Outcome {
    let bytes = from_hex(include_str!("../fixtures/reference_report.hex").trim()).expect("fixture hex");
    let start = Instant::now();
    let report = decode_discovery_report(&bytes);
    let info = report.as_ref().ok().and_then(|r| parse_engine_id(&r.engine_id).ok());
    let elapsed = start.elapsed();
    let (Ok(report), Some(info)) = (report, info) else {
        return outcome(false, "decode failed");
    };
    let want_id = [0x80, 0x00, 0x07, 0xc7, 0x03, 0x74, 0x8e, 0xf8, 0x31, 0xdb, 0x80];
    let ok = report.engine_id == want_id
        && report.engine_boots == 148
        && report.engine_time == 10_043_812
        && info.format == EngineIdFormat::Mac
        && info.mac.map(|m| m.to_string()).as_deref() == Some("74:8e:f8:31:db:80")
        && info.enterprise_number == Some(1991)
        && elapsed < Duration::from_millis(1);
    outcome(
        ok,
        format!(
            "boots {} time {} mac {:?} enterprise {:?} in {:?}",
            report.engine_boots,
            report.engine_time,
            info.mac.map(|m| m.to_string()),
            info.enterprise_number,
            elapsed
        ),
    )
}

fn random_bytes(rng: &mut ChaCha8Rng, max: usize) -> Vec<u8> {
    let n = rng.random_range(0..=max);
    (0..n).map(|_| rng.random()).collect()
}

fn random_message(rng: &mut ChaCha8Rng) -> SnmpV3Message {
    const TYPES: [PduType; 8] = [
        PduType::GetRequest,
        PduType::GetNextRequest,
        PduType::Response,
        PduType::SetRequest,
        PduType::GetBulkRequest,
        PduType::InformRequest,
        PduType::Trap,
        PduType::Report,
    ];
    let varbinds = (0..rng.random_range(0..4))
        .map(|_| {
            let mut oid = vec![rng.random_range(0..3u32), rng.random_range(0..40u32)];
            oid.extend((0..rng.random_range(0..10)).map(|_| rng.random::<u32>() >> rng.random_range(0..32)));
            // NULL, INTEGER or OCTET STRING values.
            let value = match rng.random_range(0..3) {
                0 => vec![0x05, 0x00],
                1 => vec![0x02, 0x01, rng.random_range(0..0x80u8)],
                _ => {
                    let body = random_bytes(rng, 20);
                    let mut v = vec![0x04, body.len() as u8];
                    v.extend(body);
                    v
                }
            };
            VarBind { oid, value }
        })
        .collect();
    let scoped = ScopedPdu {
        context_engine_id: random_bytes(rng, 32),
        context_name: random_bytes(rng, 16),
        pdu: Pdu {
            pdu_type: TYPES[rng.random_range(0..TYPES.len())],
            request_id: rng.random::<i32>() as i64,
            error_status: rng.random_range(0..19),
            error_index: rng.random_range(0..8),
            varbinds,
        },
    };
    SnmpV3Message {
        msg_version: 3,
        msg_id: rng.random_range(0..=i32::MAX),
        msg_max_size: rng.random_range(484..=i32::MAX),
        msg_flags: rng.random_range(0..8),
        msg_security_model: 3,
        usm: UsmParameters {
            engine_id: random_bytes(rng, 32),
            engine_boots: rng.random_range(0..=i32::MAX as i64),
            engine_time: rng.random_range(0..=i32::MAX as i64),
            user_name: random_bytes(rng, 32),
            auth_params: random_bytes(rng, 12),
            priv_params: random_bytes(rng, 8),
        },
        scoped_pdu: scoped.encode(),
    }
}

fn codec_round_trip_and_fuzz() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut mismatches = 0;
    for _ in 0..100_000 {
        let m = random_message(&mut rng);
        let back = decode_message(&m.encode());
        let scoped_ok = back.as_ref().ok().and_then(|b| b.scoped().ok()) == ScopedPdu::decode(&m.scoped_pdu).ok();
        if back.as_ref() != Ok(&m) || !scoped_ok {
            mismatches += 1;
        }
    }
    let mut panics = 0;
    for i in 0..100_000 {
        // Half pure noise, half corrupted valid messages.
        let input = if i % 2 == 0 {
            random_bytes(&mut rng, 256)
        } else {
            let mut b = random_message(&mut rng).encode();
            let pos = rng.random_range(0..b.len());
            b[pos] = rng.random();
            b.truncate(rng.random_range(pos..=b.len()));
            b
        };
        let run = catch_unwind(AssertUnwindSafe(|| {
            if let Ok(m) = decode_message(&input) {
                let _ = m.scoped();
            }
        }));
        if run.is_err() {
            panics += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && panics == 0 && elapsed < Duration::from_secs(30),
        format!("{mismatches} round-trip mismatches, {panics} decoder panics, {elapsed:.2?}"),
    )
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let mut spec = PopulationSpec { seed: 2024, device_count: 10_000, ephemeral_ip: 0.10, ..Default::default() };
    spec.set_anomaly(Anomaly::ConstantEngineId, 0.05)
        .set_anomaly(Anomaly::Amplifier, 0.01)
        .set_anomaly(Anomaly::ZeroTime, 0.02);
    let pop = Population::generate(&spec).expect("population");
    let (run, processed) = campaign(&pop);
    let mut problems = Vec::new();

    let targets = pop.targets();
    for (pass, log) in run.request_logs.iter().enumerate() {
        let once = log.len() == targets.len() && targets.iter().all(|ip| log.get(ip) == Some(&1));
        if !once {
            problems.push(format!("pass {} probes not one per target", pass + 1));
        }
    }

    // Injected counts, read straight off the device labels.
    let ifaces_with =
        |a: Anomaly| -> usize { pop.devices.iter().filter(|d| d.anomaly == Some(a)).map(|d| d.interfaces.len()).sum() };
    let ephemeral = pop.ephemeral.len();
    let zero = ifaces_with(Anomaly::ZeroTime);
    let constant_devices = pop.devices.iter().filter(|d| d.anomaly == Some(Anomaly::ConstantEngineId)).count();
    let report = &processed.outcome.report;
    let interfaces = pop.interface_count();
    for k in FilterKind::ALL {
        let want = match k {
            FilterKind::InconsistentEngineId => ephemeral,
            FilterKind::ZeroTimeOrBoots => zero,
            _ => 0,
        };
        if report.removed_by(k) != want {
            problems.push(format!("{} removed {} want {want}", k.name(), report.removed_by(k)));
        }
    }
    if report.undecodable != 0 || report.not_in_both != 0 || report.input != interfaces {
        problems.push(format!("input {} of {interfaces} interfaces", report.input));
    }
    if report.surviving != interfaces - ephemeral - zero {
        problems.push(format!("surviving {}", report.surviving));
    }
    if *report != pop.expected_report(true) {
        problems.push("report differs from the ground-truth expectation".into());
    }
    if constant_devices != 500 {
        problems.push(format!("{constant_devices} constant-ID devices"));
    }
    let amp = ifaces_with(Anomaly::Amplifier);
    let responses = run.campaign.summary1.responses;
    let want_responses = (interfaces + amp * (spec.amplifier_replies as usize - 1)) as u64;
    if responses != want_responses {
        problems.push(format!("pass 1 responses {responses} want {want_responses}"));
    }

    let valid = processed.outcome.valid();
    let acc = pop.alias_accuracy(&member_sets(&valid, Variant::default()));
    let elapsed = start.elapsed();
    if acc.precision() != 1.0 || acc.recall() < 0.99 {
        problems.push("alias accuracy below target".into());
    }
    if elapsed >= Duration::from_secs(120) {
        problems.push("too slow".into());
    }
    outcome(
        problems.is_empty(),
        format!(
            "{} devices, {interfaces} interfaces, {} removed, precision {:.4}, recall {:.4}, {elapsed:.2?}{}",
            pop.devices.len(),
            report.total_removed(),
            acc.precision(),
            acc.recall(),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn constant_id_disambiguation() -> Outcome {
    let mut spec =
        PopulationSpec { seed: 77, device_count: 500, formats: vec![(IdFormat::Mac, 1.0)], ..Default::default() };
    spec.set_anomaly(Anomaly::ConstantEngineId, 1.0);
    let pop = Population::generate(&spec).expect("population");
    let (_, processed) = campaign(&pop);
    let valid = processed.outcome.valid();
    let ids: BTreeSet<&[u8]> = valid.iter().map(|r| r.engine_id.as_slice()).collect();
    let reporting: BTreeSet<u32> = valid.iter().map(|r| pop.ip_index[&r.ip]).collect();
    let mut false_pairs = 0;
    let mut missed = 0;
    for v in Variant::ALL {
        let acc = pop.alias_accuracy(&member_sets(&valid, v));
        false_pairs += acc.predicted_pairs - acc.correct_pairs;
        // Interfaces of one device still group together.
        let same_device: u64 =
            pop.devices.iter().map(|d| d.interfaces.len() as u64 * (d.interfaces.len() as u64 - 1) / 2).sum();
        missed += same_device - acc.correct_pairs;
    }
    let ok = ids.len() == 1 && reporting.len() == 500 && false_pairs == 0 && missed == 0;
    outcome(
        ok,
        format!(
            "{} devices on {} engine ID(s), {false_pairs} false-positive pairs, {missed} missed same-device pairs over 8 variants",
            reporting.len(),
            ids.len()
        ),
    )
}

/// Pairwise relation plus union-find; no shared key type with the library.
fn brute_force(records: &[ValidRecord], bin: fn(i64) -> i64, both: bool) -> BTreeSet<BTreeSet<IpAddr>> {
    let mut id_codes: BTreeMap<&[u8], i64> = BTreeMap::new();
    let keys: Vec<[i64; 4]> = records
        .iter()
        .map(|r| {
            let next = id_codes.len() as i64;
            let id = *id_codes.entry(r.engine_id.as_slice()).or_insert(next);
            [id, r.boots, bin(r.lrt1), if both { bin(r.lrt2) } else { 0 }]
        })
        .collect();
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
            if keys[i] == keys[j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<IpAddr>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(r.ip);
    }
    groups.into_values().collect()
}

fn oracle_bin(b: Binning) -> fn(i64) -> i64 {
    match b {
        Binning::Exact => |x| x,
        Binning::Round => |x| (x as f64 / 10.0 + 0.5).floor() as i64 * 10,
        Binning::Div20 => |x| (x as f64 / 20.0).floor() as i64,
        Binning::Div20Round => |x| (x as f64 / 20.0 + 0.5).floor() as i64,
    }
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> Vec<ValidRecord> {
    let id_count = n / 20 + 1;
    let ids: Vec<Vec<u8>> = (0..id_count)
        .map(|i| {
            let mut id = vec![0x80, 0x00, 0x00, 0x09, 0x05];
            id.extend((i as u64).to_be_bytes());
            id
        })
        .collect();
    let base = 1_600_000_000i64;
    (0..n)
        .map(|i| {
            let ip = if i % 7 == 0 {
                IpAddr::V6(Ipv6Addr::from(0x2001_0db8_u128 << 96 | i as u128))
            } else {
                IpAddr::V4(Ipv4Addr::from(0x0a00_0000 + i as u32))
            };
            let engine_id = ids[rng.random_range(0..id_count)].clone();
            let lrt1 = base + rng.random_range(0..200);
            ValidRecord {
                ip,
                info: parse_engine_id(&engine_id).expect("engine id"),
                engine_id,
                boots: rng.random_range(1..=3),
                lrt1,
                lrt2: lrt1 + rng.random_range(-3..=3),
            }
        })
        .collect()
}

fn brute_force_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    for i in 0..20usize {
        let n = 500 * (i + 1);
        let records = random_instance(&mut rng, n);
        let v = Variant::ALL[i % Variant::ALL.len()];
        let got: BTreeSet<BTreeSet<IpAddr>> = member_sets(&records, v).into_iter().collect();
        if got != brute_force(&records, oracle_bin(v.binning()), v.uses_both()) {
            failures.push(format!("n={n} {}", v.name()));
        }
    }
    outcome(failures.is_empty(), format!("20 instances of 500..=10000 records, mismatches: {failures:?}"))
}

fn variant_structure() -> Outcome {
    let spec = PopulationSpec { seed: 31, device_count: 5_000, interface_jitter_s: 1, ..Default::default() };
    let pop = Population::generate(&spec).expect("population");
    let (_, processed) = campaign(&pop);
    let rows = variant_comparison(&processed.outcome.valid());
    let stat = |v: Variant| rows.iter().find(|r| r.variant == v).expect("variant row").stats.clone();
    let mut problems = Vec::new();
    use Variant::*;
    for (exact, coarse) in
        [(ExactBoth, [RoundBoth, Div20Both, Div20RoundBoth]), (ExactFirst, [RoundFirst, Div20First, Div20RoundFirst])]
    {
        for c in coarse {
            if stat(exact).total < stat(c).total {
                problems.push(format!("{} < {}", exact.name(), c.name()));
            }
        }
    }
    if stat(ExactBoth).total <= stat(Div20Both).total {
        problems.push("exact-both does not split more than div20-both".into());
    }
    for a in &rows {
        for b in &rows {
            if a.stats.total > b.stats.total && a.stats.mean_non_singleton >= b.stats.mean_non_singleton {
                problems.push(format!("{} vs {} not inverse", a.variant.name(), b.variant.name()));
            }
        }
    }
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("{}={}/{:.2}", r.variant.name(), r.stats.total, r.stats.mean_non_singleton))
        .collect();
    let detail =
        if problems.is_empty() { table.join(" ") } else { format!("{}; {}", table.join(" "), problems.join("; ")) };
    outcome(problems.is_empty(), detail)
}

fn mean_weight(spec: &PopulationSpec, cat: FormatCategory) -> f64 {
    let pop = Population::generate(spec).expect("population");
    let infos: Vec<_> = pop.devices.iter().map(|d| parse_engine_id(&d.engine_id).expect("engine id")).collect();
    let w = hamming_by_format(&infos).remove(&cat).unwrap_or_default();
    assert_eq!(w.len(), infos.len());
    w.iter().sum::<f64>() / w.len() as f64
}

fn hamming_statistics() -> Outcome {
    let base = PopulationSpec {
        seed: 3,
        device_count: 100_000,
        interfaces: vec![(1, 1.0)],
        families: vec![(Family::V4Only, 1.0)],
        ..Default::default()
    };
    let octets =
        mean_weight(&PopulationSpec { formats: vec![(IdFormat::Octets, 1.0)], ..base.clone() }, FormatCategory::Octets);
    let skewed = mean_weight(
        &PopulationSpec { formats: vec![(IdFormat::NonConforming, 1.0)], nonconforming_bit_p: 0.4, ..base },
        FormatCategory::NonConforming,
    );
    let ok = (0.495..=0.505).contains(&octets) && (0.395..=0.405).contains(&skewed);
    outcome(ok, format!("octets {octets:.5}, skewed non-conforming {skewed:.5}"))
}

fn independent_uniqueness(valid: &[ValidRecord]) -> f64 {
    let mut ids: BTreeMap<(i64, i64), BTreeSet<&[u8]>> = BTreeMap::new();
    for r in valid {
        ids.entry((r.lrt1, r.boots)).or_default().insert(&r.engine_id);
    }
    valid.iter().filter(|r| ids[&(r.lrt1, r.boots)].len() == 1).count() as f64 / valid.len() as f64
}

fn tuple_uniqueness_check() -> Outcome {
    let measure = |share: f64| {
        let spec = PopulationSpec { seed: 8, device_count: 5_000, tuple_collision: share, ..Default::default() };
        let pop = Population::generate(&spec).expect("population");
        let (_, processed) = campaign(&pop);
        let valid = processed.outcome.valid();
        let lib = tuple_uniqueness(&valid).expect("records").fraction;
        (lib, independent_uniqueness(&valid))
    };
    let (clean, clean_oracle) = measure(0.0);
    let (forced, forced_oracle) = measure(0.02);
    let ok = clean == 1.0 && clean_oracle == 1.0 && (forced - 0.98).abs() <= 0.002 && forced == forced_oracle;
    outcome(ok, format!("no collisions {clean:.5}, 2% forced {forced:.5} (oracle {forced_oracle:.5})"))
}

fn run_cli(args: &[String]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_snmpv3fp")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

/// `flag value` pairs with values resolved under `dir`.
fn argv(dir: &Path, cmd: &str, pairs: &[(&str, &str)]) -> Vec<String> {
    let mut out = vec![cmd.to_string()];
    for (flag, file) in pairs {
        out.push(format!("--{flag}"));
        out.push(dir.join(file).to_string_lossy().into_owned());
    }
    out
}

fn cli_pipeline(dir: &Path) -> Result<(), String> {
    std::fs::write(
        dir.join("spec.cfg"),
        "seed=99\ndevice_count=1500\nephemeral_ip=0.1\nconstant_engine_id=0.05\namplifier=0.01\nzero_time=0.02\n\
         lrt_drift=0.01\nreboot_between=0.01\nmalformed=0.01\npromiscuous=0.01\n",
    )
    .map_err(|e| e.to_string())?;
    let scans = [("scan1", "sim/scan1.csv"), ("scan2", "sim/scan2.csv")];
    let annotated = [("valid", "valid.csv"), ("tags", "sim/router_tags.txt")];
    let mapping = [("pfx2as", "sim/pfx2as.tsv"), ("regions", "sim/as_regions.tsv")];
    run_cli(&argv(dir, "simulate", &[("spec", "spec.cfg"), ("out-dir", "sim")]))?;
    run_cli(&argv(dir, "filter", &[scans[0], scans[1], ("out", "valid.csv"), ("report", "filter_report.csv")]))?;
    run_cli(&argv(
        dir,
        "alias",
        &[annotated[0], annotated[1], ("out", "aliases.csv"), ("variants-out", "variants.csv")],
    ))?;
    for (cmd, out) in [("analyze", "report"), ("export-figdata", "figdata")] {
        let pairs = [annotated[0], annotated[1], scans[0], scans[1], mapping[0], mapping[1], ("out-dir", out)];
        run_cli(&argv(dir, cmd, &pairs))?;
    }
    let pairs = [
        ("filter-report", "filter_report.csv"),
        ("valid", "valid.csv"),
        ("aliases", "aliases.csv"),
        ("out", "summary.csv"),
    ];
    run_cli(&argv(dir, "report", &pairs))
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for entry in std::fs::read_dir(&p).expect("read dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("prefix").to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).expect("read file"));
            }
        }
    }
    out
}

fn cli_determinism() -> Outcome {
    let runs: Vec<_> = (0..2).map(|_| tempfile::tempdir().expect("tempdir")).collect();
    for r in &runs {
        if let Err(e) = cli_pipeline(r.path()) {
            return outcome(false, e);
        }
    }
    let (a, b) = (tree(runs[0].path()), tree(runs[1].path()));
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let ok = a.len() > 20 && a.keys().eq(b.keys()) && differing.is_empty();
    outcome(ok, format!("{} files per run, differing: {differing:?}", a.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("golden_packet_decode", golden_decode),
        ("codec_round_trip_and_fuzz", codec_round_trip_and_fuzz),
        ("end_to_end_simulation", end_to_end),
        ("constant_engine_id_disambiguation", constant_id_disambiguation),
        ("brute_force_grouping_equivalence", brute_force_equivalence),
        ("variant_table_structure", variant_structure),
        ("hamming_statistics", hamming_statistics),
        ("tuple_uniqueness", tuple_uniqueness_check),
        ("cli_determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = catch_unwind(check).unwrap_or_else(|_| outcome(false, "panicked"));
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
