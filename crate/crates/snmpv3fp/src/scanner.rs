//! Rate-limited discovery scanner.
//!
//! One request per target per pass, in a seeded random order. Responses are
//! stored verbatim; decoding happens later in the pipeline. Two transports
//! share the planning and accounting logic: real UDP sockets, and a
//! single-threaded virtual network driven by a simulated clock.

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr, SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snmpv3fp_core::codec::encode_discovery_request;
use snmpv3fp_core::pipeline::ScanRecord;
use snmpv3fp_core::prefix::{IpPrefix, PrefixTable};

pub const DEFAULT_PORT: u16 = 161;
pub const DEFAULT_RATE: f64 = 5000.0;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);
/// Token bucket replenishment granularity.
pub const TICK: Duration = Duration::from_millis(10);

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("invalid scan plan: {0}")]
    InvalidPlan(&'static str),
    #[error("socket setup failed: {0}")]
    Socket(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPlan {
    pub targets: Vec<IpAddr>,
    /// Packets per second.
    pub rate: f64,
    pub port: u16,
    pub timeout: Duration,
    pub scan_label: String,
    /// Fixes the probe order and the msgID.
    pub seed: u64,
    /// Never probed.
    pub blocklist: Vec<IpPrefix>,
}

impl ScanPlan {
    pub fn new(targets: Vec<IpAddr>, scan_label: impl Into<String>) -> Self {
        Self {
            targets,
            rate: DEFAULT_RATE,
            port: DEFAULT_PORT,
            timeout: DEFAULT_TIMEOUT,
            scan_label: scan_label.into(),
            seed: 0,
            blocklist: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(ScanError::InvalidPlan("rate must be positive"));
        }
        Ok(())
    }

    /// A two-byte msgID in 128..=32767 derived from the seed.
    pub fn msg_id(&self) -> i64 {
        128 + (self.seed % 32640) as i64
    }

    pub fn request(&self) -> Vec<u8> {
        encode_discovery_request(self.msg_id()).expect("msg_id in range")
    }

    /// Deduplicated targets in the seeded probe order, plus the number of
    /// entries dropped as duplicates.
    pub fn probe_order(&self) -> (Vec<IpAddr>, usize) {
        let mut seen = std::collections::HashSet::with_capacity(self.targets.len());
        let mut order: Vec<IpAddr> = self.targets.iter().copied().filter(|ip| seen.insert(*ip)).collect();
        let dups = self.targets.len() - order.len();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        (order, dups)
    }
}

/// One datagram from a probed target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawResponse {
    pub target: IpAddr,
    pub recv_time_ms: i64,
    pub payload: Vec<u8>,
    /// 1-based ordinal among this target's responses.
    pub response_index: u32,
}

impl RawResponse {
    pub fn into_record(self, scan_label: &str) -> ScanRecord {
        ScanRecord {
            ip: self.target,
            scan_label: scan_label.to_string(),
            recv_time_ms: self.recv_time_ms,
            response_index: self.response_index,
            payload: self.payload,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanSummary {
    pub sent: u64,
    /// Targets with at least one recorded response.
    pub responded: u64,
    /// Targets with more than one recorded response.
    pub duplicate_responders: u64,
    pub responses: u64,
    /// Responses after the target's timeout; dropped.
    pub late: u64,
    /// Datagrams from addresses that were never probed; dropped.
    pub unsolicited: u64,
    pub blocked: u64,
    pub unroutable: u64,
    pub duplicate_targets: u64,
    pub send_errors: u64,
    pub bytes_out: u64,
    pub bytes_in: u64,
    pub first_send_ms: i64,
    pub last_send_ms: i64,
    /// Pass end: last send plus timeout.
    pub end_ms: i64,
}

/// Replenishes `rate / 100` tokens at every 10 ms tick, holding at most one
/// tick's worth plus one token, so fractional refills are never lost.
#[derive(Debug, Clone)]
pub struct TokenBucket {
    per_tick: f64,
    capacity: f64,
    tokens: f64,
    tick: Option<u64>,
}

impl TokenBucket {
    pub fn new(rate: f64) -> Self {
        let per_tick = rate * TICK.as_secs_f64();
        Self { per_tick, capacity: per_tick + 1.0, tokens: 0.0, tick: None }
    }

    /// Earliest time at or after `now` (relative to the scan start) when a
    /// token is available; the token is consumed.
    pub fn next_send(&mut self, now: Duration) -> Duration {
        let tick_ms = TICK.as_millis() as u64;
        let mut tick = now.as_millis() as u64 / tick_ms;
        loop {
            match self.tick {
                None => self.tokens = self.capacity.min(self.per_tick.max(1.0)),
                Some(last) if tick > last => {
                    self.tokens = (self.tokens + (tick - last) as f64 * self.per_tick).min(self.capacity);
                }
                _ => {}
            }
            self.tick = Some(tick.max(self.tick.unwrap_or(0)));
            if self.tokens >= 1.0 - 1e-9 {
                self.tokens -= 1.0;
                let at = Duration::from_millis(self.tick.unwrap() * tick_ms);
                return at.max(now);
            }
            tick = self.tick.unwrap() + 1;
        }
    }
}

fn routable_target(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(a) => !(a.is_unspecified() || a.is_broadcast() || a.is_multicast()),
        IpAddr::V6(a) => !(a.is_unspecified() || a.is_multicast()),
    }
}

/// Outcome of planning: what to send, and what was skipped.
struct Prepared {
    order: Vec<IpAddr>,
    summary: ScanSummary,
}

fn prepare(plan: &ScanPlan) -> Result<Prepared, ScanError> {
    plan.validate()?;
    let mut block = PrefixTable::new();
    for p in &plan.blocklist {
        block.insert(*p, ());
    }
    let (order, dups) = plan.probe_order();
    let mut summary = ScanSummary { duplicate_targets: dups as u64, ..Default::default() };
    let order = order
        .into_iter()
        .filter(|ip| {
            if block.contains(*ip) {
                summary.blocked += 1;
                false
            } else if !routable_target(*ip) {
                summary.unroutable += 1;
                false
            } else {
                true
            }
        })
        .collect();
    Ok(Prepared { order, summary })
}

/// Assigns response indices and drops late arrivals.
struct ResponseTracker {
    timeout_ms: i64,
    sent_at: HashMap<IpAddr, i64>,
    counts: HashMap<IpAddr, u32>,
}

impl ResponseTracker {
    fn accept(
        &mut self,
        summary: &mut ScanSummary,
        from: IpAddr,
        recv_ms: i64,
        payload: Vec<u8>,
    ) -> Option<RawResponse> {
        summary.bytes_in += payload.len() as u64;
        let Some(&sent) = self.sent_at.get(&from) else {
            summary.unsolicited += 1;
            return None;
        };
        if recv_ms - sent > self.timeout_ms {
            summary.late += 1;
            return None;
        }
        let n = self.counts.entry(from).or_insert(0);
        *n += 1;
        summary.responses += 1;
        match *n {
            1 => summary.responded += 1,
            2 => summary.duplicate_responders += 1,
            _ => {}
        }
        Some(RawResponse { target: from, recv_time_ms: recv_ms, payload, response_index: *n })
    }
}

/// Function-call transport used by the in-process simulator.
pub trait VirtualNetwork {
    /// Called before each pass with its label and virtual start time.
    fn begin_pass(&mut self, _label: &str, _start_ms: i64) {}

    /// Delivers a datagram sent at `send_ms`; returns every reply with its
    /// arrival time.
    fn deliver(&mut self, dst: SocketAddr, payload: &[u8], send_ms: i64) -> Vec<(i64, Vec<u8>)>;
}

/// Send-all-then-drain scan over a virtual network, starting at `start_ms`.
pub fn run_scan_virtual(
    plan: &ScanPlan,
    net: &mut dyn VirtualNetwork,
    start_ms: i64,
    sink: &mut dyn FnMut(RawResponse),
) -> Result<ScanSummary, ScanError> {
    let Prepared { order, mut summary } = prepare(plan)?;
    let request = plan.request();
    let mut bucket = TokenBucket::new(plan.rate);
    let timeout_ms = plan.timeout.as_millis() as i64;
    let mut tracker = ResponseTracker { timeout_ms, sent_at: HashMap::new(), counts: HashMap::new() };
    let mut inflight: Vec<(i64, usize, IpAddr, Vec<u8>)> = Vec::new();
    let mut now = Duration::ZERO;
    summary.first_send_ms = start_ms;
    for ip in order {
        now = bucket.next_send(now);
        let send_ms = start_ms + now.as_millis() as i64;
        if summary.sent == 0 {
            summary.first_send_ms = send_ms;
        }
        tracker.sent_at.insert(ip, send_ms);
        summary.sent += 1;
        summary.bytes_out += request.len() as u64;
        summary.last_send_ms = send_ms;
        for (arrival, reply) in net.deliver(SocketAddr::new(ip, plan.port), &request, send_ms) {
            inflight.push((arrival, inflight.len(), ip, reply));
        }
    }
    summary.end_ms = if summary.sent == 0 { start_ms } else { summary.last_send_ms + timeout_ms };
    inflight.sort_by_key(|(arrival, seq, _, _)| (*arrival, *seq));
    for (arrival, _, ip, reply) in inflight {
        if let Some(r) = tracker.accept(&mut summary, ip, arrival, reply) {
            sink(r);
        }
    }
    Ok(summary)
}

pub fn unix_ms() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as i64).unwrap_or(0)
}

#[derive(Default)]
struct Counters {
    sent: AtomicU64,
    bytes_out: AtomicU64,
    send_errors: AtomicU64,
    last_send_ms: AtomicU64,
}

fn bind_for(v6: bool) -> io::Result<UdpSocket> {
    let addr: SocketAddr = if v6 { (Ipv6Addr::UNSPECIFIED, 0).into() } else { (Ipv4Addr::UNSPECIFIED, 0).into() };
    let sock = UdpSocket::bind(addr)?;
    sock.set_read_timeout(Some(Duration::from_millis(20)))?;
    Ok(sock)
}

/// Scans over real UDP sockets: one sender thread, one receiver thread per
/// address family, and a bounded queue into `sink` on the calling thread.
pub fn run_scan(plan: &ScanPlan, sink: &mut dyn FnMut(RawResponse)) -> Result<ScanSummary, ScanError> {
    let Prepared { order, summary } = prepare(plan)?;
    let request = plan.request();
    let timeout_ms = plan.timeout.as_millis() as i64;
    let need_v4 = order.iter().any(IpAddr::is_ipv4);
    let need_v6 = order.iter().any(IpAddr::is_ipv6);
    let v4 = if need_v4 { Some(Arc::new(bind_for(false)?)) } else { None };
    let v6 = if need_v6 { Some(Arc::new(bind_for(true)?)) } else { None };

    let sent_at: Arc<Mutex<HashMap<IpAddr, i64>>> = Arc::new(Mutex::new(HashMap::with_capacity(order.len())));
    let counters = Arc::new(Counters::default());
    let done = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::sync_channel::<(IpAddr, i64, Vec<u8>)>(4096);

    let mut receivers = Vec::new();
    for sock in [v4.clone(), v6.clone()].into_iter().flatten() {
        let (tx, done, counters) = (tx.clone(), done.clone(), counters.clone());
        receivers.push(thread::spawn(move || {
            let mut buf = vec![0u8; 65536];
            loop {
                match sock.recv_from(&mut buf) {
                    Ok((n, from)) => {
                        if tx.send((from.ip(), unix_ms(), buf[..n].to_vec())).is_err() {
                            return;
                        }
                    }
                    Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
                    Err(_) => {}
                }
                if done.load(Ordering::Acquire) {
                    let last = counters.last_send_ms.load(Ordering::Acquire) as i64;
                    if unix_ms() > last + timeout_ms {
                        return;
                    }
                }
            }
        }));
    }
    drop(tx);

    let sender = {
        let (sent_at, counters, done) = (sent_at.clone(), counters.clone(), done.clone());
        let (rate, port) = (plan.rate, plan.port);
        thread::spawn(move || {
            let mut bucket = TokenBucket::new(rate);
            let start = Instant::now();
            for ip in order {
                let at = bucket.next_send(start.elapsed());
                if let Some(wait) = at.checked_sub(start.elapsed()) {
                    thread::sleep(wait);
                }
                let sock = if ip.is_ipv4() { v4.as_ref() } else { v6.as_ref() };
                let sock = sock.expect("socket for family");
                let now = unix_ms();
                sent_at.lock().expect("send log").insert(ip, now);
                match sock.send_to(&request, SocketAddr::new(ip, port)) {
                    Ok(n) => {
                        counters.sent.fetch_add(1, Ordering::Relaxed);
                        counters.bytes_out.fetch_add(n as u64, Ordering::Relaxed);
                    }
                    Err(_) => {
                        counters.send_errors.fetch_add(1, Ordering::Relaxed);
                    }
                }
                counters.last_send_ms.store(now as u64, Ordering::Release);
            }
            if counters.last_send_ms.load(Ordering::Acquire) == 0 {
                counters.last_send_ms.store(unix_ms() as u64, Ordering::Release);
            }
            done.store(true, Ordering::Release);
        })
    };

    // Responses are buffered until the sender finishes so that every
    // target's send time is known before accounting.
    let mut pending = Vec::new();
    for item in rx {
        pending.push(item);
    }
    sender.join().expect("sender thread");
    for r in receivers {
        r.join().expect("receiver thread");
    }

    let mut summary = summary;
    let log = std::mem::take(&mut *sent_at.lock().expect("send log"));
    summary.first_send_ms = log.values().copied().min().unwrap_or(0);
    summary.sent = counters.sent.load(Ordering::Relaxed);
    summary.send_errors = counters.send_errors.load(Ordering::Relaxed);
    summary.bytes_out = counters.bytes_out.load(Ordering::Relaxed);
    summary.last_send_ms = counters.last_send_ms.load(Ordering::Relaxed) as i64;
    summary.end_ms = summary.last_send_ms + timeout_ms;
    let mut tracker = ResponseTracker { timeout_ms, sent_at: log, counts: HashMap::new() };
    for (from, recv_ms, payload) in pending {
        if let Some(r) = tracker.accept(&mut summary, from, recv_ms, payload) {
            sink(r);
        }
    }
    Ok(summary)
}

/// Sends one discovery request and waits for the first reply from `target`.
pub fn probe_one(target: SocketAddr, timeout: Duration) -> io::Result<Option<RawResponse>> {
    let sock = bind_for(target.is_ipv6())?;
    let request = encode_discovery_request(128).expect("msg_id in range");
    sock.send_to(&request, target)?;
    let deadline = Instant::now() + timeout;
    let mut buf = vec![0u8; 65536];
    while Instant::now() < deadline {
        match sock.recv_from(&mut buf) {
            Ok((n, from)) if from.ip() == target.ip() => {
                return Ok(Some(RawResponse {
                    target: target.ip(),
                    recv_time_ms: unix_ms(),
                    payload: buf[..n].to_vec(),
                    response_index: 1,
                }));
            }
            Ok(_) => {}
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            // ICMP port unreachable surfaces as a refused read on Linux.
            Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Executes passes and the pause between them.
pub trait ScanBackend {
    fn begin_pass(&mut self, _label: &str) {}
    fn scan(&mut self, plan: &ScanPlan, sink: &mut dyn FnMut(RawResponse)) -> Result<ScanSummary, ScanError>;
    fn wait(&mut self, gap: Duration);
}

/// Real sockets and wall-clock waiting.
#[derive(Debug, Default)]
pub struct UdpBackend;

impl ScanBackend for UdpBackend {
    fn scan(&mut self, plan: &ScanPlan, sink: &mut dyn FnMut(RawResponse)) -> Result<ScanSummary, ScanError> {
        run_scan(plan, sink)
    }

    fn wait(&mut self, gap: Duration) {
        thread::sleep(gap);
    }
}

/// Virtual network with a simulated clock that only moves forward.
pub struct VirtualBackend<N> {
    pub net: N,
    pub now_ms: i64,
}

impl<N: VirtualNetwork> VirtualBackend<N> {
    pub fn new(net: N, start_ms: i64) -> Self {
        Self { net, now_ms: start_ms }
    }
}

impl<N: VirtualNetwork> ScanBackend for VirtualBackend<N> {
    fn begin_pass(&mut self, label: &str) {
        self.net.begin_pass(label, self.now_ms);
    }

    fn scan(&mut self, plan: &ScanPlan, sink: &mut dyn FnMut(RawResponse)) -> Result<ScanSummary, ScanError> {
        let summary = run_scan_virtual(plan, &mut self.net, self.now_ms, sink)?;
        self.now_ms = self.now_ms.max(summary.end_ms);
        Ok(summary)
    }

    fn wait(&mut self, gap: Duration) {
        self.now_ms += gap.as_millis() as i64;
    }
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub scan1: Vec<ScanRecord>,
    pub scan2: Vec<ScanRecord>,
    pub summary1: ScanSummary,
    pub summary2: ScanSummary,
}

pub const PASS_LABELS: [&str; 2] = ["scan1", "scan2"];

/// Two passes labelled `scan1` and `scan2`, `gap` apart. Pass `i` uses seed
/// `plan.seed + i`. Records are sorted by (ip, response_index).
pub fn two_scan_campaign(plan: &ScanPlan, gap: Duration, backend: &mut dyn ScanBackend) -> Result<Campaign, ScanError> {
    let mut out: Vec<(Vec<ScanRecord>, ScanSummary)> = Vec::with_capacity(2);
    for (i, label) in PASS_LABELS.iter().enumerate() {
        if i > 0 {
            backend.wait(gap);
        }
        let pass = ScanPlan { scan_label: label.to_string(), seed: plan.seed.wrapping_add(i as u64), ..plan.clone() };
        backend.begin_pass(label);
        let mut records = Vec::new();
        let summary = backend.scan(&pass, &mut |r| records.push(r.into_record(label)))?;
        records.sort_by_key(|r| (r.ip, r.response_index));
        out.push((records, summary));
    }
    let (scan2, summary2) = out.pop().expect("two passes");
    let (scan1, summary1) = out.pop().expect("two passes");
    Ok(Campaign { scan1, scan2, summary1, summary2 })
}

/// Largest number of sends in any window of `window_ms` (send times sorted).
pub fn max_sends_in_window(send_ms: &[i64], window_ms: i64) -> usize {
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..send_ms.len() {
        while send_ms[hi] - send_ms[lo] >= window_ms {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

/// Per-destination request counts, used to check one-probe-per-target.
pub type RequestLog = BTreeMap<IpAddr, u64>;
