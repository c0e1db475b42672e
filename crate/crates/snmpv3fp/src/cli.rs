//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
//! error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use snmpv3fp_core::alias::{group_aliases_with_width, set_statistics, AliasSets, Variant, DEFAULT_BIN_WIDTH};
use snmpv3fp_core::analytics::{annotate_sets, RouterTagSet};
use snmpv3fp_core::pipeline::{process_scans, FilterConfig, FilterKind, FilterReport, ScanRecord};

use crate::figdata::{figdata_tables, report_tables, write_tables, AnalysisInput};
use crate::records::{self, write_table};
use crate::scanner::{run_scan, ScanPlan, DEFAULT_PORT, DEFAULT_RATE};
use crate::simulator::{run_virtual_campaign, serve, Population, PopulationSpec};
use crate::tables;

#[derive(Debug, Parser)]
#[command(name = "snmpv3fp", version, about = "SNMPv3 discovery fingerprinting toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Probe targets over UDP and store every response verbatim.
    Scan(ScanArgs),
    /// Decode and join two passes, then apply the validation filters.
    Filter(FilterArgs),
    /// Group validated records into alias sets.
    Alias(AliasArgs),
    /// Write aggregate report tables.
    Analyze(AnalysisArgs),
    /// Write tidy per-figure tables (figdata_<name>.csv).
    ExportFigdata(AnalysisArgs),
    /// Generate a population and scan it in process, or serve it over UDP.
    Simulate(SimulateArgs),
    /// Summarize previously written CSV files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// One IP address per line.
    #[arg(long)]
    targets: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RATE)]
    rate: f64,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Seconds to wait for responses after each probe.
    #[arg(long, default_value_t = 5.0)]
    timeout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "scan1")]
    label: String,
    /// CIDRs never probed.
    #[arg(long)]
    blocklist: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    scan1: PathBuf,
    #[arg(long)]
    scan2: PathBuf,
    /// Validated records.
    #[arg(long)]
    out: PathBuf,
    /// Per-filter removal counts.
    #[arg(long)]
    report: PathBuf,
    /// OUI registry (`XX-XX-XX<TAB>name`); the bundled subset if absent.
    #[arg(long)]
    oui: Option<PathBuf>,
    /// Keep MAC-based IDs whose OUI is unregistered.
    #[arg(long)]
    no_oui_filter: bool,
    #[arg(long, default_value_t = 10)]
    max_drift: i64,
    #[arg(long, default_value_t = 4)]
    min_id_len: usize,
    /// Enterprise numbers sharing one identity that make it promiscuous.
    #[arg(long, default_value_t = 2)]
    promiscuity: usize,
}

#[derive(Debug, Args)]
struct Registries {
    #[arg(long)]
    oui: Option<PathBuf>,
    /// Enterprise registry (`number<TAB>name`); the bundled subset if absent.
    #[arg(long)]
    enterprises: Option<PathBuf>,
    /// Router addresses, one per line.
    #[arg(long)]
    tags: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Grouping {
    #[arg(long, default_value_t = Variant::default())]
    variant: Variant,
    /// Width in seconds of the div20 and div20round bins.
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH, value_parser = clap::value_parser!(i64).range(1..))]
    bin_width: i64,
}

#[derive(Debug, Args)]
struct AliasArgs {
    #[arg(long)]
    valid: PathBuf,
    #[command(flatten)]
    grouping: Grouping,
    #[arg(long)]
    out: PathBuf,
    /// Also write the set statistics of every variant.
    #[arg(long)]
    variants_out: Option<PathBuf>,
    #[command(flatten)]
    registries: Registries,
}

#[derive(Debug, Args)]
struct AnalysisArgs {
    #[arg(long)]
    valid: PathBuf,
    #[command(flatten)]
    grouping: Grouping,
    /// Raw passes; enable drift tables and set the default reference time.
    #[arg(long, requires = "scan2")]
    scan1: Option<PathBuf>,
    #[arg(long, requires = "scan1")]
    scan2: Option<PathBuf>,
    #[arg(long)]
    pfx2as: Option<PathBuf>,
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Reference Unix time for uptime.
    #[arg(long)]
    asof: Option<i64>,
    #[command(flatten)]
    registries: Registries,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Population spec (`key=value` lines); defaults when absent.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RATE)]
    rate: f64,
    /// Seconds between the two passes.
    #[arg(long, default_value_t = 86_400)]
    gap: u64,
    /// Serve the population over UDP on its loopback addresses at this
    /// address's port instead of scanning it.
    #[arg(long)]
    serve: Option<SocketAddr>,
    /// Pass whose address ownership is served.
    #[arg(long, default_value = "scan1")]
    pass: String,
    /// Seconds to serve; 0 serves until killed.
    #[arg(long, default_value_t = 0)]
    duration: u64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    filter_report: Option<PathBuf>,
    #[arg(long)]
    aliases: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Also write the summary as `metric,value` CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Scan(a) => scan(a),
        Command::Filter(a) => filter(a),
        Command::Alias(a) => alias(a),
        Command::Analyze(a) => analyze(a, false),
        Command::ExportFigdata(a) => analyze(a, true),
        Command::Simulate(a) => simulate(a),
        Command::Report(a) => report(a),
    }
}

fn distinct_outputs(paths: &[&PathBuf]) -> Result<()> {
    let unique: BTreeSet<&PathBuf> = paths.iter().copied().collect();
    if unique.len() != paths.len() {
        bail!("output paths must differ");
    }
    Ok(())
}

fn read_scan(path: &Path) -> Result<Vec<ScanRecord>> {
    records::read_scan_records(records::open(path)?).with_context(|| path.display().to_string())
}

fn write_scan(path: &Path, recs: &[ScanRecord]) -> Result<()> {
    records::write_scan_records(records::create(path)?, recs).with_context(|| path.display().to_string())
}

fn scan(a: ScanArgs) -> Result<()> {
    let targets = records::read_ip_list(records::open(&a.targets)?).with_context(|| a.targets.display().to_string())?;
    let blocklist = match &a.blocklist {
        Some(p) => tables::load_cidr_list(p)?,
        None => Vec::new(),
    };
    if !(a.timeout.is_finite() && a.timeout >= 0.0) {
        bail!("timeout must be a non-negative number of seconds");
    }
    let plan = ScanPlan {
        rate: a.rate,
        port: a.port,
        timeout: Duration::from_secs_f64(a.timeout),
        seed: a.seed,
        blocklist,
        ..ScanPlan::new(targets, a.label.clone())
    };
    let mut recs = Vec::new();
    let summary = run_scan(&plan, &mut |r| recs.push(r.into_record(&a.label)))?;
    recs.sort_by_key(|r| (r.ip, r.response_index));
    write_scan(&a.out, &recs)?;
    eprintln!(
        "sent {} responded {} duplicate-responders {} responses {} late {} unsolicited {} blocked {} unroutable {} send-errors {}",
        summary.sent,
        summary.responded,
        summary.duplicate_responders,
        summary.responses,
        summary.late,
        summary.unsolicited,
        summary.blocked,
        summary.unroutable,
        summary.send_errors
    );
    Ok(())
}

fn filter(a: FilterArgs) -> Result<()> {
    if a.max_drift <= 0 || a.min_id_len == 0 || a.promiscuity == 0 {
        bail!("thresholds must be positive");
    }
    distinct_outputs(&[&a.out, &a.report])?;
    let oui = tables::load_oui(a.oui.as_deref())?;
    let cfg = FilterConfig {
        min_engine_id_len: a.min_id_len,
        max_lrt_drift: a.max_drift,
        promiscuous_min_enterprises: a.promiscuity,
        oui: (!a.no_oui_filter).then_some(&oui),
    };
    let processed = process_scans(&read_scan(&a.scan1)?, &read_scan(&a.scan2)?, &cfg);
    records::write_valid_records(records::create(&a.out)?, &processed.outcome.valid())?;
    records::write_filter_report(records::create(&a.report)?, &processed.outcome.report)?;
    Ok(())
}

fn read_valid(path: &Path) -> Result<Vec<snmpv3fp_core::pipeline::ValidRecord>> {
    records::read_valid_records(records::open(path)?).with_context(|| path.display().to_string())
}

fn annotated_sets(
    valid: &[snmpv3fp_core::pipeline::ValidRecord],
    grouping: &Grouping,
    reg: &Registries,
) -> Result<(AliasSets, Option<RouterTagSet>)> {
    let oui = tables::load_oui(reg.oui.as_deref())?;
    let ent = tables::load_enterprises(reg.enterprises.as_deref())?;
    let tags = reg.tags.as_deref().map(tables::load_router_tags).transpose()?;
    let mut sets = group_aliases_with_width(valid, grouping.variant, grouping.bin_width);
    annotate_sets(&mut sets, valid, &oui, &ent, tags.as_ref())?;
    Ok((sets, tags))
}

fn alias(a: AliasArgs) -> Result<()> {
    distinct_outputs(&[Some(&a.out), a.variants_out.as_ref()].into_iter().flatten().collect::<Vec<_>>())?;
    let valid = read_valid(&a.valid)?;
    let (sets, _) = annotated_sets(&valid, &a.grouping, &a.registries)?;
    records::write_alias_sets(records::create(&a.out)?, sets.iter())?;
    if let Some(p) = &a.variants_out {
        let rows = Variant::ALL.into_iter().map(|v| {
            let stats = set_statistics(group_aliases_with_width(&valid, v, a.grouping.bin_width).iter());
            vec![
                v.name().to_string(),
                stats.total.to_string(),
                stats.non_singleton.to_string(),
                stats.ips_in_non_singleton.to_string(),
                format!("{}", stats.mean_non_singleton),
            ]
        });
        write_table(
            records::create(p)?,
            &["variant", "sets", "non_singleton_sets", "ips_in_non_singleton", "mean_ips_per_non_singleton"],
            rows,
        )?;
    }
    Ok(())
}

fn analyze(a: AnalysisArgs, figdata: bool) -> Result<()> {
    let valid = read_valid(&a.valid)?;
    let (sets, tags) = annotated_sets(&valid, &a.grouping, &a.registries)?;
    let mapping = tables::load_as_mapping(a.pfx2as.as_deref(), a.regions.as_deref())?;
    let merged = match (&a.scan1, &a.scan2) {
        (Some(s1), Some(s2)) => {
            let (r1, r2) = (read_scan(s1)?, read_scan(s2)?);
            let cfg = FilterConfig::default();
            let scan1_end = r1.iter().map(|r| r.recv_time_ms.div_euclid(1000)).max();
            Some((process_scans(&r1, &r2, &cfg).merged, scan1_end))
        }
        _ => None,
    };
    // Uptime is measured at the end of the first pass when it is known.
    let asof = a
        .asof
        .or_else(|| merged.as_ref().and_then(|(_, end)| *end))
        .or_else(|| valid.iter().map(|r| r.lrt1).max())
        .unwrap_or(0);
    let input = AnalysisInput {
        valid: &valid,
        merged: merged.as_ref().map(|(m, _)| m.as_slice()),
        sets: &sets,
        mapping: &mapping,
        tags: tags.as_ref(),
        asof,
    };
    if figdata {
        write_tables(&a.out_dir, "figdata_", &figdata_tables(&input)?)?;
    } else {
        write_tables(&a.out_dir, "", &report_tables(&input)?)?;
    }
    Ok(())
}

fn load_spec(a: &SimulateArgs) -> Result<PopulationSpec> {
    let mut spec = match &a.spec {
        Some(p) => std::fs::read_to_string(p)
            .with_context(|| p.display().to_string())?
            .parse::<PopulationSpec>()
            .with_context(|| p.display().to_string())?,
        None => PopulationSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| path.display().to_string())
}

/// Population description files shared by both simulate modes.
fn write_population(pop: &Population, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_text(&dir.join("population.cfg"), &pop.spec.to_string())?;
    records::write_ip_list(records::create(&dir.join("targets.txt"))?, &pop.targets())?;
    records::write_ground_truth(records::create(&dir.join("ground_truth.csv"))?, &pop.ground_truth_rows())?;
    records::write_filter_report(
        records::create(&dir.join("expected_filter_report.csv"))?,
        &pop.expected_report(true),
    )?;
    write_text(&dir.join("pfx2as.tsv"), &pop.pfx2as_text())?;
    write_text(&dir.join("as_regions.tsv"), &pop.regions_text())?;
    records::write_ip_list(records::create(&dir.join("router_tags.txt"))?, &pop.router_tags())?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let spec = load_spec(&a)?;
    let pop = Population::generate(&spec)?;
    if let Some(addr) = a.serve {
        if !addr.ip().is_loopback() {
            bail!("--serve needs a loopback address");
        }
        if !pop.spec.loopback {
            bail!("serving needs a loopback population (loopback=true in the spec)");
        }
        if let Some(dir) = &a.out_dir {
            write_population(&pop, dir)?;
        }
        let server = serve(Arc::new(pop), addr.port(), &a.pass)?;
        eprintln!("serving on port {}", server.port);
        if a.duration == 0 {
            loop {
                std::thread::park();
            }
        }
        std::thread::sleep(Duration::from_secs(a.duration));
        server.shutdown();
        return Ok(());
    }
    let dir = a.out_dir.as_deref().context("--out-dir is required unless --serve is given")?;
    write_population(&pop, dir)?;
    let plan = ScanPlan { rate: a.rate, seed: spec.seed, port: spec.port, ..ScanPlan::new(pop.targets(), "scan1") };
    let run = run_virtual_campaign(&pop, &plan, Duration::from_secs(a.gap))?;
    write_scan(&dir.join("scan1.csv"), &run.campaign.scan1)?;
    write_scan(&dir.join("scan2.csv"), &run.campaign.scan2)?;
    let rows = run.request_logs.iter().enumerate().flat_map(|(pass, log)| {
        log.iter().map(move |(ip, n)| vec![format!("scan{}", pass + 1), ip.to_string(), n.to_string()])
    });
    write_table(records::create(&dir.join("request_log.csv"))?, &["scan_label", "ip", "requests"], rows)?;
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    if a.filter_report.is_none() && a.aliases.is_none() && a.valid.is_none() {
        bail!("nothing to report: give --filter-report, --aliases or --valid");
    }
    let mut metrics: Vec<(String, String)> = Vec::new();
    if let Some(p) = &a.filter_report {
        let r: FilterReport =
            records::read_filter_report(records::open(p)?).with_context(|| p.display().to_string())?;
        for (name, n) in r.rows() {
            metrics.push((format!("filter.{name}"), n.to_string()));
        }
        let removed: usize = FilterKind::ALL.iter().map(|k| r.removed_by(*k)).sum();
        metrics.push(("filter.total_removed".into(), removed.to_string()));
    }
    if let Some(p) = &a.valid {
        let valid = read_valid(p)?;
        let ips: BTreeSet<IpAddr> = valid.iter().map(|r| r.ip).collect();
        let v4 = ips.iter().filter(|ip| ip.is_ipv4()).count();
        metrics.push(("valid.ips".into(), ips.len().to_string()));
        metrics.push(("valid.ipv4".into(), v4.to_string()));
        metrics.push(("valid.ipv6".into(), (ips.len() - v4).to_string()));
        let ids: BTreeSet<&[u8]> = valid.iter().map(|r| r.engine_id.as_slice()).collect();
        metrics.push(("valid.engine_ids".into(), ids.len().to_string()));
    }
    if let Some(p) = &a.aliases {
        let sets = records::read_alias_sets(records::open(p)?).with_context(|| p.display().to_string())?;
        let non_singleton: Vec<_> = sets.iter().filter(|s| s.members.len() > 1).collect();
        let ips: usize = non_singleton.iter().map(|s| s.members.len()).sum();
        metrics.push(("alias.sets".into(), sets.len().to_string()));
        metrics.push(("alias.non_singleton_sets".into(), non_singleton.len().to_string()));
        metrics.push((
            "alias.mean_ips_per_non_singleton".into(),
            format!("{}", if non_singleton.is_empty() { 0.0 } else { ips as f64 / non_singleton.len() as f64 }),
        ));
        for fam in ["ipv4", "ipv6", "dual-stack"] {
            let n = sets.iter().filter(|s| s.family == fam).count();
            metrics.push((format!("alias.family.{fam}"), n.to_string()));
        }
    }
    let width = metrics.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &metrics {
        println!("{k:<width$}  {v}");
    }
    if let Some(p) = &a.out {
        write_table(
            records::create(p)?,
            &["metric", "value"],
            metrics.iter().map(|(k, v)| vec![k.clone(), v.clone()]),
        )?;
    }
    Ok(())
}
