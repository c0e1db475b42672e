//! Agents answering discovery requests, in process and over UDP.

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::net::{IpAddr, SocketAddr};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snmpv3fp_core::codec::{
    decode_message, encode_report, ReportSpec, OID_USM_UNKNOWN_ENGINE_IDS, OID_USM_UNKNOWN_USER_NAMES,
};

use super::population::{Device, Population};
use super::spec::Anomaly;
use crate::scanner::{unix_ms, RequestLog, VirtualNetwork, PASS_LABELS};

/// `msgMaxSize` advertised by every agent.
pub const AGENT_MAX_SIZE: i32 = 1500;
const NOISE_LEN: usize = 48;

/// Which pass an agent is answering, and when that pass began.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassClock {
    pub index: usize,
    pub start_s: i64,
}

pub fn pass_index(label: &str) -> Option<usize> {
    PASS_LABELS.iter().position(|l| *l == label)
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn ip_bits(ip: IpAddr) -> u64 {
    match ip {
        IpAddr::V4(a) => u32::from(a) as u64,
        IpAddr::V6(a) => {
            let v = u128::from(a);
            (v as u64) ^ ((v >> 64) as u64)
        }
    }
}

/// One-way latency of the in-process network: 1 to 20 ms, fixed per
/// address and pass.
pub fn latency_ms(ip: IpAddr, pass: usize) -> i64 {
    1 + (mix(ip_bits(ip) ^ ((pass as u64) << 56)) % 20) as i64
}

fn noise(seed: u64, dev: &Device, pass: usize) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(dev.id as u64) ^ pass as u64));
    let mut out: Vec<u8> = (0..NOISE_LEN).map(|_| rng.random()).collect();
    // Never a BER SEQUENCE.
    if out[0] == 0x30 {
        out[0] = 0x31;
    }
    out
}

/// Per-interface clock skew in `±interface_jitter_s`, fixed per address
/// and pass.
pub fn interface_skew(pop: &Population, ip: IpAddr, pass: usize) -> i64 {
    let k = pop.spec.interface_jitter_s;
    if k == 0 {
        return 0;
    }
    let h = mix(pop.spec.seed ^ mix(ip_bits(ip)) ^ ((pass as u64) << 48));
    (h % (2 * k as u64 + 1)) as i64 - k
}

/// Replies of `dev` at `ip` to `request` received at agent time `now_ms`. The
/// usmStats counter of the i-th copy is `counter + i`. Requests that are
/// not SNMPv3 get silence.
pub fn agent_reply(
    pop: &Population,
    dev: &Device,
    ip: IpAddr,
    pass: PassClock,
    request: &[u8],
    now_ms: i64,
    counter: u32,
) -> Vec<Vec<u8>> {
    let Ok(msg) = decode_message(request) else {
        return Vec::new();
    };
    let copies = dev.replies_per_request(pop.spec.amplifier_replies);
    if dev.anomaly == Some(Anomaly::Malformed) {
        return (0..copies).map(|_| noise(pop.spec.seed, dev, pass.index)).collect();
    }
    let request_id = msg.scoped().map(|s| s.pdu.request_id).unwrap_or(0);
    let counter_oid: &[u32] =
        if msg.is_discovery() { &OID_USM_UNKNOWN_ENGINE_IDS } else { &OID_USM_UNKNOWN_USER_NAMES };
    let boots = dev.engine_boots(pass.index);
    let time = dev.engine_time(pass.index, pass.start_s, now_ms, interface_skew(pop, ip, pass.index));
    (0..copies)
        .map(|i| {
            encode_report(&ReportSpec {
                msg_id: msg.msg_id,
                request_id,
                engine_id: &dev.engine_id,
                engine_boots: boots,
                engine_time: time,
                max_size: AGENT_MAX_SIZE,
                counter_oid,
                counter: counter.wrapping_add(i),
            })
        })
        .collect()
}

/// Function-call transport over a population. The agent reads its clock
/// when the request arrives, and the reply is stamped at that same instant.
pub struct SimNetwork<'p> {
    pop: &'p Population,
    pass: PassClock,
    passes_begun: usize,
    owners: BTreeMap<IpAddr, u32>,
    counters: Vec<u32>,
    /// Requests per destination address, one map per pass.
    pub logs: Vec<RequestLog>,
}

impl<'p> SimNetwork<'p> {
    pub fn new(pop: &'p Population) -> Self {
        Self {
            pop,
            pass: PassClock { index: 0, start_s: pop.spec.start_time },
            passes_begun: 0,
            owners: pop.reassign_ephemeral(0),
            counters: vec![0; pop.devices.len()],
            logs: Vec::new(),
        }
    }
}

impl VirtualNetwork for SimNetwork<'_> {
    fn begin_pass(&mut self, label: &str, start_ms: i64) {
        let index = pass_index(label).unwrap_or(self.passes_begun);
        self.passes_begun += 1;
        self.pass = PassClock { index, start_s: start_ms.div_euclid(1000) };
        self.owners = self.pop.reassign_ephemeral(index);
        self.logs.push(RequestLog::new());
    }

    fn deliver(&mut self, dst: SocketAddr, payload: &[u8], send_ms: i64) -> Vec<(i64, Vec<u8>)> {
        if self.logs.is_empty() {
            self.logs.push(RequestLog::new());
        }
        *self.logs.last_mut().expect("log").entry(dst.ip()).or_insert(0) += 1;
        if dst.port() != self.pop.spec.port {
            return Vec::new();
        }
        let Some(&id) = self.owners.get(&dst.ip()) else {
            return Vec::new();
        };
        let dev = self.pop.device(id);
        let t = send_ms + latency_ms(dst.ip(), self.pass.index);
        let counter = self.counters[id as usize] + 1;
        let replies = agent_reply(self.pop, dev, dst.ip(), self.pass, payload, t, counter);
        self.counters[id as usize] += replies.len() as u32;
        replies.into_iter().map(|r| (t, r)).collect()
    }
}

/// Append-only per-address request counters.
#[derive(Debug, Default)]
pub struct AtomicRequestLog {
    counts: HashMap<IpAddr, AtomicU64>,
}

impl AtomicRequestLog {
    fn record(&self, ip: IpAddr) {
        if let Some(c) = self.counts.get(&ip) {
            c.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn snapshot(&self) -> RequestLog {
        self.counts.iter().map(|(ip, c)| (*ip, c.load(Ordering::Relaxed))).filter(|(_, n)| *n > 0).collect()
    }
}

/// UDP agents bound on every address owned in one pass. Dropping the
/// handle stops them.
pub struct AgentServer {
    pub port: u16,
    log: Arc<AtomicRequestLog>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl AgentServer {
    pub fn request_log(&self) -> RequestLog {
        self.log.snapshot()
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for AgentServer {
    fn drop(&mut self) {
        self.stop();
    }
}

struct Shared {
    pop: Arc<Population>,
    pass: PassClock,
    counters: Vec<AtomicU32>,
    log: Arc<AtomicRequestLog>,
}

async fn agent_loop(sock: tokio::net::UdpSocket, ip: IpAddr, dev: u32, shared: Arc<Shared>) {
    let mut buf = vec![0u8; 65536];
    loop {
        let Ok((n, from)) = sock.recv_from(&mut buf).await else {
            continue;
        };
        shared.log.record(ip);
        let device = shared.pop.device(dev);
        let copies = device.replies_per_request(shared.pop.spec.amplifier_replies);
        let counter = shared.counters[dev as usize].fetch_add(copies, Ordering::Relaxed) + 1;
        for reply in agent_reply(&shared.pop, device, ip, shared.pass, &buf[..n], unix_ms(), counter) {
            let _ = sock.send_to(&reply, from).await;
        }
    }
}

/// Binds one socket per address owned in pass `label` at `port`. Agents
/// read the wall clock; reboot epochs are absolute Unix times.
pub fn serve(pop: Arc<Population>, port: u16, label: &str) -> io::Result<AgentServer> {
    let index = pass_index(label).unwrap_or(0);
    let owners = pop.reassign_ephemeral(index);
    let mut sockets = Vec::with_capacity(owners.len());
    let mut port = port;
    for (&ip, &dev) in &owners {
        let s = std::net::UdpSocket::bind(SocketAddr::new(ip, port))?;
        s.set_nonblocking(true)?;
        // Port 0 picks a free port once; every agent then shares it.
        if port == 0 {
            port = s.local_addr()?.port();
        }
        sockets.push((s, ip, dev));
    }
    let log = Arc::new(AtomicRequestLog { counts: owners.keys().map(|ip| (*ip, AtomicU64::new(0))).collect() });
    let shared = Arc::new(Shared {
        counters: (0..pop.devices.len()).map(|_| AtomicU32::new(0)).collect(),
        pass: PassClock { index, start_s: unix_ms().div_euclid(1000) },
        pop,
        log: log.clone(),
    });
    let runtime = tokio::runtime::Builder::new_current_thread().enable_io().build()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let (ready_tx, ready_rx) = std::sync::mpsc::channel::<io::Result<()>>();
    let thread = thread::spawn(move || {
        runtime.block_on(async move {
            for (s, ip, dev) in sockets {
                match tokio::net::UdpSocket::from_std(s) {
                    Ok(sock) => {
                        tokio::spawn(agent_loop(sock, ip, dev, shared.clone()));
                    }
                    Err(e) => {
                        let _ = ready_tx.send(Err(e));
                        return;
                    }
                }
            }
            let _ = ready_tx.send(Ok(()));
            let _ = rx.await;
        });
    });
    match ready_rx.recv() {
        Ok(Ok(())) => Ok(AgentServer { port, log, shutdown: Some(tx), thread: Some(thread) }),
        Ok(Err(e)) => Err(e),
        Err(_) => Err(io::Error::other("agent runtime exited during startup")),
    }
}
