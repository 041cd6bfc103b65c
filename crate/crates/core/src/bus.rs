//! Message transport: every publisher's datagrams reach every client.
//!
//! Two backends share the contract. [`UdpBroadcaster`] sends real
//! datagrams to a broadcast address, which is the whole networking story
//! on stage: any box that joins the subnet hears everything, and nobody
//! reconfigures anything. [`SimNet`] is an in-process stand-in for tests:
//! same fan-out semantics, plus seeded loss, latency, and jitter injected
//! independently per (publisher, subscriber) link so that adding an
//! observer can never change what anyone else receives.
//!
//! Both carry raw OSC bytes, one packet per datagram, no framing.

use std::collections::{BinaryHeap, HashMap};
use std::io;
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4, UdpSocket};
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::osc::MAX_DATAGRAM_LEN;

/// Where datagrams go when nobody says otherwise.
pub const DEFAULT_BROADCAST_ADDR: SocketAddrV4 = SocketAddrV4::new(Ipv4Addr::BROADCAST, 9000);

/// Environment variable that overrides [`DEFAULT_BROADCAST_ADDR`].
pub const BROADCAST_ENV_VAR: &str = "STAGEWIRE_BROADCAST";

/// The configured broadcast target: `STAGEWIRE_BROADCAST` if set and
/// parseable, the compiled-in default otherwise.
pub fn default_broadcast_target() -> SocketAddrV4 {
    std::env::var(BROADCAST_ENV_VAR)
        .ok()
        .and_then(|value| value.parse().ok())
        .unwrap_or(DEFAULT_BROADCAST_ADDR)
}

/// A place packets can be sent: a real socket address or a named peer on
/// the simulated network (`sim:NAME` in text form).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Udp(SocketAddrV4),
    Sim(String),
}

impl FromStr for Endpoint {
    type Err = BusError;

    fn from_str(text: &str) -> Result<Self, BusError> {
        if let Some(name) = text.strip_prefix("sim:") {
            if name.is_empty() {
                return Err(BusError::BadEndpoint(text.into()));
            }
            return Ok(Endpoint::Sim(name.into()));
        }
        text.parse()
            .map(Endpoint::Udp)
            .map_err(|_| BusError::BadEndpoint(text.into()))
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Udp(addr) => write!(f, "{addr}"),
            Endpoint::Sim(name) => write!(f, "sim:{name}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum BusError {
    #[error("packet of {0} bytes exceeds the {MAX_DATAGRAM_LEN}-byte datagram limit")]
    Oversize(usize),
    #[error("name {0:?} is already taken on this bus")]
    DuplicateName(String),
    #[error("bus is shut down")]
    Closed,
    #[error("socket send failed: {0}")]
    SocketFailure(#[source] io::Error),
    #[error("could not bind port: {0}")]
    BindFailure(#[source] io::Error),
    #[error("not a usable endpoint: {0:?} (want HOST:PORT or sim:NAME)")]
    BadEndpoint(String),
    #[error("bad bus config: {0}")]
    BadConfig(&'static str),
}

// ── Simulated network ───────────────────────────────────────────

/// Impairments for the simulated network. The default is a perfect wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimNetConfig {
    pub latency_ms: u64,
    /// Extra delay drawn uniformly from `0..=jitter_ms` per packet.
    pub jitter_ms: u64,
    /// Probability a packet disappears on a link, drawn per packet.
    pub loss_rate: f64,
    pub seed: u64,
}

impl Default for SimNetConfig {
    fn default() -> Self {
        Self {
            latency_ms: 0,
            jitter_ms: 0,
            loss_rate: 0.0,
            seed: 0,
        }
    }
}

/// Loss and jitter draws come from a stream owned by one (publisher,
/// subscriber) link, seeded from the net seed and both names. Nothing any
/// other link does can advance the stream — that is the isolation story.
fn link_rng(seed: u64, publisher: &str, subscriber: &str) -> ChaCha8Rng {
    // FNV-1a; a stable hash, unlike the stdlib's randomized one.
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |byte: u8| {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for byte in seed.to_le_bytes() {
        eat(byte);
    }
    eat(0xff);
    for byte in publisher.bytes() {
        eat(byte);
    }
    eat(0xff);
    for byte in subscriber.bytes() {
        eat(byte);
    }
    ChaCha8Rng::seed_from_u64(hash)
}

struct Mailbox {
    queue: Mutex<MailboxState>,
    wakeup: Condvar,
}

struct MailboxState {
    packets: std::collections::VecDeque<(Vec<u8>, String)>,
    closed: bool,
}

impl Mailbox {
    fn new() -> Arc<Self> {
        Arc::new(Self {
            queue: Mutex::new(MailboxState {
                packets: std::collections::VecDeque::new(),
                closed: false,
            }),
            wakeup: Condvar::new(),
        })
    }

    fn push(&self, packet: Vec<u8>, sender: &str) {
        let mut state = self.queue.lock().unwrap();
        if !state.closed {
            state.packets.push_back((packet, sender.to_string()));
            self.wakeup.notify_one();
        }
    }

    fn close(&self) {
        self.queue.lock().unwrap().closed = true;
        self.wakeup.notify_all();
    }
}

/// One scheduled background delivery.
struct Pending {
    due: Instant,
    seq: u64,
    packet: Vec<u8>,
    sender: String,
    mailbox: Arc<Mailbox>,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.due == other.due && self.seq == other.seq
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; invert so the earliest due pops first,
        // seq breaking ties in schedule order.
        other
            .due
            .cmp(&self.due)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct SimState {
    subscribers: HashMap<String, Arc<Mailbox>>,
    publisher_names: Vec<String>,
    /// Per-link RNG streams, created lazily, never discarded: a link that
    /// existed keeps its draw position even if the subscriber departs.
    links: HashMap<(String, String), ChaCha8Rng>,
    /// Per-link floor for delivery times, so one link never reorders.
    link_horizon: HashMap<(String, String), Instant>,
    pending: BinaryHeap<Pending>,
    next_seq: u64,
    shutdown: bool,
}

struct SimNetInner {
    config: SimNetConfig,
    state: Mutex<SimState>,
    scheduler_wakeup: Condvar,
}

/// In-process broadcast network with seeded impairments.
///
/// With zero latency and jitter, delivery is synchronous inside
/// `publish`; otherwise a background thread delivers on schedule. Either
/// way each link's loss/jitter draws are a pure function of the seed, the
/// two names, and the packet's index on that link.
#[derive(Clone)]
pub struct SimNet {
    inner: Arc<SimNetInner>,
}

impl SimNet {
    pub fn new(config: SimNetConfig) -> Result<Self, BusError> {
        if !(0.0..=1.0).contains(&config.loss_rate) || !config.loss_rate.is_finite() {
            return Err(BusError::BadConfig("loss rate must be in [0, 1]"));
        }
        let inner = Arc::new(SimNetInner {
            config,
            state: Mutex::new(SimState {
                subscribers: HashMap::new(),
                publisher_names: Vec::new(),
                links: HashMap::new(),
                link_horizon: HashMap::new(),
                pending: BinaryHeap::new(),
                next_seq: 0,
                shutdown: false,
            }),
            scheduler_wakeup: Condvar::new(),
        });
        if config.latency_ms > 0 || config.jitter_ms > 0 {
            let worker = Arc::clone(&inner);
            std::thread::spawn(move || scheduler_loop(worker));
        }
        Ok(Self { inner })
    }

    /// Register a publishing side. Names are single-use per net so that
    /// every link keeps a private draw stream.
    pub fn publisher(&self, name: &str) -> Result<SimPublisher, BusError> {
        let mut state = self.inner.state.lock().unwrap();
        if state.shutdown {
            return Err(BusError::Closed);
        }
        if state.publisher_names.iter().any(|n| n == name) {
            return Err(BusError::DuplicateName(name.into()));
        }
        state.publisher_names.push(name.into());
        Ok(SimPublisher {
            net: Arc::clone(&self.inner),
            name: name.into(),
            fingerprint: fingerprint(name, &self.inner.config),
        })
    }

    /// Register a receiving side. Joining replays nothing and perturbs
    /// nobody: other links' RNG streams never see the new name.
    pub fn subscribe(&self, name: &str) -> Result<SimSubscriber, BusError> {
        let mut state = self.inner.state.lock().unwrap();
        if state.shutdown {
            return Err(BusError::Closed);
        }
        if state.subscribers.contains_key(name) {
            return Err(BusError::DuplicateName(name.into()));
        }
        let mailbox = Mailbox::new();
        state.subscribers.insert(name.into(), Arc::clone(&mailbox));
        Ok(SimSubscriber {
            net: Arc::clone(&self.inner),
            name: name.into(),
            mailbox,
        })
    }

    /// Close every mailbox. Receivers drain what they already have, then
    /// see [`BusError::Closed`].
    pub fn shutdown(&self) {
        let mut state = self.inner.state.lock().unwrap();
        state.shutdown = true;
        // Anything still pending on the scheduler is dropped: the show is
        // over and late packets have nowhere to go.
        state.pending.clear();
        for mailbox in state.subscribers.values() {
            mailbox.close();
        }
        self.inner.scheduler_wakeup.notify_all();
    }
}

/// Stable digest of the things a publisher is configured with. Exists so
/// tests can prove that growing the network leaves it untouched.
fn fingerprint(name: &str, config: &SimNetConfig) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |byte: u8| {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for byte in name.bytes() {
        eat(byte);
    }
    eat(0xff);
    for byte in config.seed.to_le_bytes() {
        eat(byte);
    }
    for byte in config.latency_ms.to_le_bytes() {
        eat(byte);
    }
    for byte in config.jitter_ms.to_le_bytes() {
        eat(byte);
    }
    for byte in config.loss_rate.to_bits().to_le_bytes() {
        eat(byte);
    }
    hash
}

fn scheduler_loop(inner: Arc<SimNetInner>) {
    let mut state = inner.state.lock().unwrap();
    loop {
        if state.shutdown {
            return;
        }
        let now = Instant::now();
        if let Some(next) = state.pending.peek() {
            if next.due <= now {
                let item = state.pending.pop().unwrap();
                item.mailbox.push(item.packet, &item.sender);
                continue;
            }
            let wait = next.due - now;
            let (next_state, _) = inner.scheduler_wakeup.wait_timeout(state, wait).unwrap();
            state = next_state;
        } else {
            state = inner.scheduler_wakeup.wait(state).unwrap();
        }
    }
}

/// Sending handle on a [`SimNet`].
pub struct SimPublisher {
    net: Arc<SimNetInner>,
    name: String,
    fingerprint: u64,
}

impl SimPublisher {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// What this publisher was configured with; constant for its lifetime.
    pub fn config_fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Fan one packet out to every current subscriber.
    pub fn publish(&self, packet: &[u8]) -> Result<(), BusError> {
        if packet.len() > MAX_DATAGRAM_LEN {
            return Err(BusError::Oversize(packet.len()));
        }
        let config = self.net.config;
        let mut state = self.net.state.lock().unwrap();
        if state.shutdown {
            return Err(BusError::Closed);
        }

        // Deterministic fan-out order (and so draw order) per publish.
        let mut names: Vec<String> = state.subscribers.keys().cloned().collect();
        names.sort_unstable();

        let now = Instant::now();
        let mut scheduled = false;
        for subscriber in names {
            let link = (self.name.clone(), subscriber.clone());
            let rng = state
                .links
                .entry(link.clone())
                .or_insert_with(|| link_rng(config.seed, &self.name, &subscriber));
            let lost = rng.gen::<f64>() < config.loss_rate;
            let jitter = if config.jitter_ms > 0 {
                rng.gen_range(0..=config.jitter_ms)
            } else {
                0
            };
            if lost {
                continue;
            }
            let mailbox = Arc::clone(&state.subscribers[&subscriber]);
            if config.latency_ms == 0 && config.jitter_ms == 0 {
                mailbox.push(packet.to_vec(), &self.name);
                continue;
            }
            // Jitter must not reorder a link: clamp each delivery to be
            // no earlier than the previous one on the same link.
            let mut due = now + Duration::from_millis(config.latency_ms + jitter);
            if let Some(horizon) = state.link_horizon.get(&link) {
                due = due.max(*horizon);
            }
            state.link_horizon.insert(link, due);
            let seq = state.next_seq;
            state.next_seq += 1;
            state.pending.push(Pending {
                due,
                seq,
                packet: packet.to_vec(),
                sender: self.name.clone(),
                mailbox,
            });
            scheduled = true;
        }
        if scheduled {
            self.net.scheduler_wakeup.notify_all();
        }
        Ok(())
    }
}

/// Receiving handle on a [`SimNet`]; single-consumer.
pub struct SimSubscriber {
    net: Arc<SimNetInner>,
    name: String,
    mailbox: Arc<Mailbox>,
}

impl SimSubscriber {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Next packet and its sender's name, waiting up to `timeout_ms`.
    ///
    /// `Ok(None)` is a timeout. After shutdown, queued packets still
    /// drain in order; only then does [`BusError::Closed`] surface.
    pub fn recv(&self, timeout_ms: u64) -> Result<Option<(Vec<u8>, String)>, BusError> {
        let deadline = Instant::now() + Duration::from_millis(timeout_ms);
        let mut state = self.mailbox.queue.lock().unwrap();
        loop {
            if let Some(item) = state.packets.pop_front() {
                return Ok(Some(item));
            }
            if state.closed {
                return Err(BusError::Closed);
            }
            let now = Instant::now();
            if now >= deadline {
                return Ok(None);
            }
            let (next_state, _) = self
                .mailbox
                .wakeup
                .wait_timeout(state, deadline - now)
                .unwrap();
            state = next_state;
        }
    }
}

impl Drop for SimSubscriber {
    fn drop(&mut self) {
        if let Ok(mut state) = self.net.state.lock() {
            state.subscribers.remove(&self.name);
        }
        self.mailbox.close();
    }
}

// ── Real UDP ────────────────────────────────────────────────────

/// Broadcast sender over a real socket.
pub struct UdpBroadcaster {
    socket: UdpSocket,
    target: SocketAddrV4,
}

impl UdpBroadcaster {
    /// Bind an ephemeral sending socket aimed at `target`.
    pub fn new(target: SocketAddrV4) -> Result<Self, BusError> {
        let socket = UdpSocket::bind((Ipv4Addr::UNSPECIFIED, 0)).map_err(BusError::BindFailure)?;
        socket
            .set_broadcast(true)
            .map_err(BusError::SocketFailure)?;
        Ok(Self { socket, target })
    }

    pub fn target(&self) -> SocketAddrV4 {
        self.target
    }

    /// One datagram to the configured target, best effort past the OS.
    pub fn publish(&self, packet: &[u8]) -> Result<(), BusError> {
        if packet.len() > MAX_DATAGRAM_LEN {
            return Err(BusError::Oversize(packet.len()));
        }
        self.socket
            .send_to(packet, self.target)
            .map_err(BusError::SocketFailure)?;
        Ok(())
    }

    /// One datagram to an explicit other target (the relay path).
    pub fn send_to(&self, packet: &[u8], target: SocketAddrV4) -> Result<(), BusError> {
        if packet.len() > MAX_DATAGRAM_LEN {
            return Err(BusError::Oversize(packet.len()));
        }
        self.socket
            .send_to(packet, target)
            .map_err(BusError::SocketFailure)?;
        Ok(())
    }
}

/// Datagram receiver bound to a local port.
pub struct UdpReceiver {
    socket: UdpSocket,
}

impl UdpReceiver {
    pub fn bind(port: u16) -> Result<Self, BusError> {
        let socket =
            UdpSocket::bind((Ipv4Addr::UNSPECIFIED, port)).map_err(BusError::BindFailure)?;
        Ok(Self { socket })
    }

    /// The actually bound port (useful when asking for port 0).
    pub fn local_port(&self) -> u16 {
        self.socket
            .local_addr()
            .map(|addr| addr.port())
            .unwrap_or(0)
    }

    /// Next datagram within `timeout_ms`; `None` on timeout.
    pub fn recv(&self, timeout_ms: u64) -> Result<Option<(Vec<u8>, SocketAddr)>, BusError> {
        self.socket
            .set_read_timeout(Some(Duration::from_millis(timeout_ms.max(1))))
            .map_err(BusError::SocketFailure)?;
        let mut buffer = vec![0u8; MAX_DATAGRAM_LEN];
        match self.socket.recv_from(&mut buffer) {
            Ok((length, sender)) => {
                buffer.truncate(length);
                Ok(Some((buffer, sender)))
            }
            Err(error)
                if error.kind() == io::ErrorKind::WouldBlock
                    || error.kind() == io::ErrorKind::TimedOut =>
            {
                Ok(None)
            }
            Err(error) => Err(BusError::SocketFailure(error)),
        }
    }
}
