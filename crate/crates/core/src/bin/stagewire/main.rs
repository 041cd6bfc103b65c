//! Operator CLI: ties the library modules into runnable pipelines.
//!
//! `sniff` captures datagrams to a trace, `replay` plays one back,
//! `detect` runs the heartbeat detector over a recording, `simulate`
//! streams a scripted surface performance, `route` turns incoming traffic
//! into cue emissions, and `relay` rebroadcasts datagrams for networks
//! where true broadcast is blocked.
//!
//! Commands never prompt; anything unexpected is a nonzero exit up front,
//! because discovering a bad flag mid-show is not an option.

use std::fs;
use std::io::{self, Write as _};
use std::net::{SocketAddr, SocketAddrV4, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use stagewire::bus::{default_broadcast_target, UdpBroadcaster, UdpReceiver};
use stagewire::cue::{load_rules, CueEngine, CueInput};
use stagewire::device_sim::{load_script, run_choreography};
use stagewire::osc::{decode_packet, encode_message, encode_packet};
use stagewire::pulse::{
    estimate_bpm, Detector, DetectorConfig, HeartbeatEvent, PulseSample, DEFAULT_BPM_WINDOW,
};
use stagewire::trace::{parse_trace, Direction, TracePacket, TraceWriter};
use stagewire::tuio::{parse_2dobj_bundle, Tracker};
use stagewire::{OscArg, OscMessage, OscPacket};

/// Address heartbeat events travel under on the wire.
const HEARTBEAT_ADDRESS: &str = "/lmtd/heartbeat";
/// Address raw pulse samples travel under, for sniffed sensor streams.
const SAMPLE_ADDRESS: &str = "/lmtd/sample";

#[derive(Parser)]
#[command(
    name = "stagewire",
    version,
    about = "Networked-performance interconnect: capture, replay, detect, simulate, route, relay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Capture datagrams from a port into a trace file, decoding to stdout.
    Sniff {
        /// UDP port to listen on.
        #[arg(long)]
        port: u16,
        /// Trace file to append to (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Stop after this many datagrams.
        #[arg(long)]
        count: Option<u64>,
        /// Stop after this many milliseconds.
        #[arg(long)]
        duration_ms: Option<u64>,
    },
    /// Re-send a trace's datagrams at their recorded offsets.
    Replay {
        /// Trace file to play back.
        trace: PathBuf,
        /// Target as HOST:PORT; defaults to the broadcast target.
        #[arg(long)]
        to: Option<String>,
        /// Time multiplier: 2.0 plays twice as fast.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Run the heartbeat detector over a samples file or trace.
    Detect {
        /// `t_ms<TAB>value` samples, or a trace carrying /lmtd/sample.
        input: PathBuf,
        /// Nominal sample rate in Hz.
        #[arg(long, default_value_t = 100.0)]
        rate: f64,
        /// Windowed-delta span in ms.
        #[arg(long, default_value_t = 150)]
        window: u64,
        /// Threshold multiple of the baseline.
        #[arg(long, default_value_t = 3.0)]
        gain: f64,
        /// Dead time between beats in ms.
        #[arg(long, default_value_t = 250)]
        refractory: u64,
        /// Baseline settling time before the first beat, in ms.
        #[arg(long, default_value_t = 2000)]
        warmup: u64,
        /// Baseline half-life in ms.
        #[arg(long, default_value_t = 2000)]
        halflife: u64,
        /// Absolute threshold floor (0 keeps scale invariance).
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        /// Flip the signal for sensors that read beats as drops.
        #[arg(long)]
        invert: bool,
        /// Beats averaged into the final BPM estimate.
        #[arg(long, default_value_t = DEFAULT_BPM_WINDOW)]
        bpm_window: usize,
        /// Also write detected beats as /lmtd/heartbeat trace lines.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Stream a choreography script as TUIO datagrams (or to a trace).
    Simulate {
        /// Choreography script (JSON).
        script: PathBuf,
        /// Target as HOST:PORT; defaults to the broadcast target.
        #[arg(long, conflicts_with = "out")]
        to: Option<String>,
        /// Write a trace instead of sending datagrams.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Time multiplier for live sending.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
        /// Render this many ms (default: one frame past the last action).
        #[arg(long)]
        duration_ms: Option<u64>,
    },
    /// Evaluate cue rules over incoming datagrams (live) or traces (offline).
    Route {
        /// Cue rules (JSON).
        rules: PathBuf,
        /// UDP port to listen on (live mode).
        #[arg(long, conflicts_with = "from")]
        listen: Option<u16>,
        /// Where to send emissions; defaults to the broadcast target.
        #[arg(long)]
        to: Option<String>,
        /// Trace file(s) to process offline; repeatable, merged by time.
        #[arg(long)]
        from: Vec<PathBuf>,
        /// Append emissions as `t_ms<TAB>rule_id<TAB>hex` lines.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Live mode: stop after this many milliseconds.
        #[arg(long)]
        duration_ms: Option<u64>,
        /// Live mode: stop after this many datagrams.
        #[arg(long)]
        count: Option<u64>,
    },
    /// Rebroadcast datagrams from a port to explicit targets.
    Relay {
        /// UDP port to listen on.
        #[arg(long)]
        listen: u16,
        /// Comma-separated HOST:PORT targets.
        #[arg(long, value_delimiter = ',', required = true)]
        to: Vec<String>,
        /// Stop after this many milliseconds.
        #[arg(long)]
        duration_ms: Option<u64>,
        /// Stop after this many datagrams.
        #[arg(long)]
        count: Option<u64>,
    },
}

/// Print one stdout line, exiting quietly if the reader has closed the
/// pipe — `stagewire detect … | head` is ordinary usage, not a crash.
fn emit_line(args: std::fmt::Arguments) {
    let mut out = io::stdout().lock();
    if out
        .write_fmt(args)
        .and_then(|()| out.write_all(b"\n"))
        .is_err()
    {
        std::process::exit(0);
    }
}

macro_rules! outln {
    ($($arg:tt)*) => { emit_line(format_args!($($arg)*)) };
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sniff {
            port,
            out,
            count,
            duration_ms,
        } => cmd_sniff(port, &out, count, duration_ms),
        Command::Replay { trace, to, speed } => cmd_replay(&trace, to.as_deref(), speed),
        Command::Detect {
            input,
            rate,
            window,
            gain,
            refractory,
            warmup,
            halflife,
            floor,
            invert,
            bpm_window,
            trace_out,
        } => {
            let config = DetectorConfig {
                sample_rate_hz: rate,
                window_ms: window,
                gain,
                baseline_halflife_ms: halflife,
                refractory_ms: refractory,
                warmup_ms: warmup,
                threshold_floor: floor,
                invert,
            };
            cmd_detect(&input, config, bpm_window, trace_out.as_deref())
        }
        Command::Simulate {
            script,
            to,
            out,
            speed,
            duration_ms,
        } => cmd_simulate(&script, to.as_deref(), out.as_deref(), speed, duration_ms),
        Command::Route {
            rules,
            listen,
            to,
            from,
            log,
            duration_ms,
            count,
        } => cmd_route(
            &rules,
            listen,
            to.as_deref(),
            &from,
            log.as_deref(),
            duration_ms,
            count,
        ),
        Command::Relay {
            listen,
            to,
            duration_ms,
            count,
        } => cmd_relay(listen, &to, duration_ms, count),
    }
}

// ── Shared plumbing ─────────────────────────────────────────────

/// Resolve a `--to` flag (or its absence) into a concrete target.
fn resolve_target(flag: Option<&str>) -> Result<SocketAddrV4> {
    let Some(text) = flag else {
        return Ok(default_broadcast_target());
    };
    if text.starts_with("sim:") {
        bail!("sim endpoints live inside one process; commands need HOST:PORT");
    }
    text.to_socket_addrs()
        .with_context(|| format!("cannot resolve target {text:?} (want HOST:PORT)"))?
        .find_map(|addr| match addr {
            SocketAddr::V4(v4) => Some(v4),
            SocketAddr::V6(_) => None,
        })
        .with_context(|| format!("{text:?} resolves to no IPv4 address"))
}

/// One-line human summary of a datagram for sniff output.
fn summarize(bytes: &[u8]) -> String {
    match decode_packet(bytes) {
        Ok(packet) => summarize_packet(&packet),
        Err(error) => format!("(undecodable: {error})"),
    }
}

fn summarize_packet(packet: &OscPacket) -> String {
    match packet {
        OscPacket::Message(message) => summarize_message(message),
        OscPacket::Bundle(bundle) => {
            let inner: Vec<String> = bundle.elements.iter().map(summarize_packet).collect();
            format!("#bundle tt={} [{}]", bundle.timetag, inner.join("; "))
        }
    }
}

fn summarize_message(message: &OscMessage) -> String {
    let mut text = message.address.clone();
    for arg in &message.args {
        text.push(' ');
        match arg {
            OscArg::Int(v) => text.push_str(&v.to_string()),
            OscArg::Float(v) => text.push_str(&format!("{v}")),
            OscArg::Str(v) => text.push_str(&format!("{v:?}")),
            OscArg::Blob(v) => text.push_str(&format!("blob[{}]", v.len())),
        }
    }
    text
}

/// Receive loop bounds shared by sniff/route/relay.
struct Bounds {
    started: Instant,
    count: Option<u64>,
    duration: Option<Duration>,
    seen: u64,
}

impl Bounds {
    fn new(count: Option<u64>, duration_ms: Option<u64>) -> Self {
        Self {
            started: Instant::now(),
            count,
            duration: duration_ms.map(Duration::from_millis),
            seen: 0,
        }
    }

    fn elapsed_ms(&self) -> u64 {
        self.started.elapsed().as_millis() as u64
    }

    /// Whether to keep looping, and how long the next poll may block.
    fn next_poll(&self) -> Option<u64> {
        if self.count.is_some_and(|limit| self.seen >= limit) {
            return None;
        }
        match self.duration {
            None => Some(100),
            Some(total) => {
                let elapsed = self.started.elapsed();
                if elapsed >= total {
                    None
                } else {
                    Some(((total - elapsed).as_millis() as u64).clamp(1, 100))
                }
            }
        }
    }
}

// ── sniff ───────────────────────────────────────────────────────

fn cmd_sniff(port: u16, out: &Path, count: Option<u64>, duration_ms: Option<u64>) -> Result<()> {
    let receiver =
        UdpReceiver::bind(port).with_context(|| format!("cannot listen on port {port}"))?;
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .with_context(|| format!("cannot open trace file {}", out.display()))?;
    let mut writer = TraceWriter::new(file);
    let mut bounds = Bounds::new(count, duration_ms);

    while let Some(poll_ms) = bounds.next_poll() {
        let Some((payload, sender)) = receiver.recv(poll_ms)? else {
            continue;
        };
        let t_ms = bounds.elapsed_ms();
        writer.append(&TracePacket {
            t_ms,
            direction: Direction::In,
            payload: payload.clone(),
        })?;
        outln!("{t_ms}\t{sender}\t{}", summarize(&payload));
        bounds.seen += 1;
    }
    Ok(())
}

// ── replay ──────────────────────────────────────────────────────

fn cmd_replay(trace_path: &Path, to: Option<&str>, speed: f64) -> Result<()> {
    if !(speed.is_finite() && speed > 0.0) {
        bail!("--speed must be positive");
    }
    let text = fs::read_to_string(trace_path)
        .with_context(|| format!("cannot read trace {}", trace_path.display()))?;
    let packets = parse_trace(&text)?;
    let target = resolve_target(to)?;
    let sender = UdpBroadcaster::new(target)?;

    let started = Instant::now();
    for packet in &packets {
        let due = Duration::from_millis((packet.t_ms as f64 / speed) as u64);
        let elapsed = started.elapsed();
        if due > elapsed {
            std::thread::sleep(due - elapsed);
        }
        sender.publish(&packet.payload)?;
    }
    Ok(())
}

// ── detect ──────────────────────────────────────────────────────

/// Read samples from either accepted input shape.
fn load_samples(path: &Path) -> Result<Vec<PulseSample>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let field_count = text
        .lines()
        .next()
        .map(|line| line.split('\t').count())
        .unwrap_or(0);
    match field_count {
        2 => parse_samples_file(&text),
        3 => Ok(samples_from_trace(&parse_trace(&text)?)),
        _ => bail!(
            "{}: expected `t_ms<TAB>value` sample lines or a 3-column trace",
            path.display()
        ),
    }
}

fn parse_samples_file(text: &str) -> Result<Vec<PulseSample>> {
    let mut samples = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        let (t_field, value_field) = line
            .split_once('\t')
            .with_context(|| format!("sample line {line_no}: expected two tab-separated fields"))?;
        let t: u64 = t_field
            .parse()
            .with_context(|| format!("sample line {line_no}: bad timestamp"))?;
        let value: f64 = value_field
            .parse()
            .with_context(|| format!("sample line {line_no}: bad value"))?;
        samples.push(PulseSample { t, value });
    }
    Ok(samples)
}

/// Pull `/lmtd/sample` messages out of a trace, ignoring other traffic —
/// a sniffed port may carry the whole show.
fn samples_from_trace(packets: &[TracePacket]) -> Vec<PulseSample> {
    let mut samples = Vec::new();
    for packet in packets {
        let Ok(decoded) = decode_packet(&packet.payload) else {
            continue;
        };
        for message in messages_in(&decoded) {
            if message.address != SAMPLE_ADDRESS {
                continue;
            }
            if let Some(value) = message.args.iter().find_map(|arg| arg.as_f64()) {
                samples.push(PulseSample {
                    t: packet.t_ms,
                    value,
                });
            }
        }
    }
    samples
}

fn messages_in(packet: &OscPacket) -> Vec<&OscMessage> {
    match packet {
        OscPacket::Message(message) => vec![message],
        OscPacket::Bundle(bundle) => bundle.elements.iter().flat_map(messages_in).collect(),
    }
}

fn cmd_detect(
    input: &Path,
    config: DetectorConfig,
    bpm_window: usize,
    trace_out: Option<&Path>,
) -> Result<()> {
    let samples = load_samples(input)?;
    let mut detector = Detector::new(config)?;
    let mut events: Vec<HeartbeatEvent> = Vec::new();
    for sample in samples {
        if let Some(event) = detector.process_sample(sample)? {
            outln!("{}\t{:.6}", event.t, event.strength);
            events.push(event);
        }
    }
    match estimate_bpm(&events, bpm_window) {
        Ok(bpm) => outln!("bpm\t{bpm:.1}"),
        Err(_) => outln!("no estimate"),
    }

    if let Some(path) = trace_out {
        let file =
            fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut writer = TraceWriter::new(file);
        for (index, event) in events.iter().enumerate() {
            let message = OscMessage::new(
                HEARTBEAT_ADDRESS,
                vec![
                    OscArg::Int(index as i32),
                    OscArg::Float(event.strength as f32),
                ],
            );
            writer.append(&TracePacket {
                t_ms: event.t,
                direction: Direction::Out,
                payload: encode_message(&message)?,
            })?;
        }
    }
    Ok(())
}

// ── simulate ────────────────────────────────────────────────────

fn cmd_simulate(
    script_path: &Path,
    to: Option<&str>,
    out: Option<&Path>,
    speed: f64,
    duration_ms: Option<u64>,
) -> Result<()> {
    if !(speed.is_finite() && speed > 0.0) {
        bail!("--speed must be positive");
    }
    let document = fs::read(script_path)
        .with_context(|| format!("cannot read script {}", script_path.display()))?;
    let script = load_script(&document)?;
    let frames = run_choreography(&script, duration_ms)?;

    let mut datagrams = Vec::with_capacity(frames.len());
    for (t, frame) in &frames {
        let bundle = stagewire::tuio::encode_2dobj_frame(frame)?;
        datagrams.push((*t, encode_packet(&OscPacket::Bundle(bundle))?));
    }

    if let Some(path) = out {
        let file =
            fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut writer = TraceWriter::new(file);
        for (t_ms, payload) in datagrams {
            writer.append(&TracePacket {
                t_ms,
                direction: Direction::Out,
                payload,
            })?;
        }
        return Ok(());
    }

    let target = resolve_target(to)?;
    let sender = UdpBroadcaster::new(target)?;
    let started = Instant::now();
    for (t_ms, payload) in datagrams {
        let due = Duration::from_millis((t_ms as f64 / speed) as u64);
        let elapsed = started.elapsed();
        if due > elapsed {
            std::thread::sleep(due - elapsed);
        }
        sender.publish(&payload)?;
    }
    Ok(())
}

// ── route ───────────────────────────────────────────────────────

/// Everything one routed packet can produce, in deterministic order.
struct Router {
    engine: CueEngine,
    tracker: Tracker,
}

impl Router {
    fn handle(&mut self, payload: &[u8], t: u64) -> Vec<stagewire::cue::CueEmission> {
        let Ok(decoded) = decode_packet(payload) else {
            return Vec::new(); // live wires carry noise; skip quietly
        };
        let mut emissions = Vec::new();
        match &decoded {
            OscPacket::Bundle(bundle) => match parse_2dobj_bundle(bundle) {
                Ok(frame) => {
                    let before = self.tracker.last_fseq();
                    for event in self.tracker.apply_frame(&frame) {
                        emissions.extend(self.engine.eval_event(CueInput::Surface(&event), t));
                    }
                    // Continuous rules read set rows only from frames the
                    // tracker accepted; stale frames must stay silent.
                    if self.tracker.last_fseq() != before {
                        for state in &frame.states {
                            emissions.extend(self.engine.eval_frame_continuous(state, t));
                        }
                    }
                }
                Err(_) => {
                    for message in messages_in(&decoded) {
                        emissions.extend(self.osc_input(message, t));
                    }
                }
            },
            OscPacket::Message(message) => {
                emissions.extend(self.osc_input(message, t));
            }
        }
        emissions
    }

    fn osc_input(&mut self, message: &OscMessage, t: u64) -> Vec<stagewire::cue::CueEmission> {
        let mut emissions = Vec::new();
        if message.address == HEARTBEAT_ADDRESS {
            let strength = message
                .args
                .iter()
                .find_map(|arg| match arg {
                    OscArg::Float(v) => Some(*v as f64),
                    _ => None,
                })
                .unwrap_or(0.0);
            let beat = HeartbeatEvent { t, strength };
            emissions.extend(self.engine.eval_event(CueInput::Heartbeat(&beat), t));
        }
        emissions.extend(self.engine.eval_event(CueInput::Osc(message), t));
        emissions
    }
}

fn cmd_route(
    rules_path: &Path,
    listen: Option<u16>,
    to: Option<&str>,
    from: &[PathBuf],
    log: Option<&Path>,
    duration_ms: Option<u64>,
    count: Option<u64>,
) -> Result<()> {
    let document = fs::read(rules_path)
        .with_context(|| format!("cannot read rules {}", rules_path.display()))?;
    let rules = load_rules(&document)?;
    let mut router = Router {
        engine: CueEngine::new(rules),
        tracker: Tracker::new(),
    };
    let mut log_file = log
        .map(|path| {
            fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))
        })
        .transpose()?;

    let mut write_emissions = |emissions: &[stagewire::cue::CueEmission],
                               sender: Option<&UdpBroadcaster>|
     -> Result<()> {
        for emission in emissions {
            let payload = encode_message(&emission.message)?;
            if let Some(sender) = sender {
                sender.publish(&payload)?;
            }
            let line = format!(
                "{}\t{}\t{}",
                emission.t,
                emission.rule_id,
                hex::encode(&payload)
            );
            if let Some(file) = log_file.as_mut() {
                writeln!(file, "{line}")?;
            }
            outln!("{line}");
        }
        Ok(())
    };

    if !from.is_empty() {
        // Offline: merge traces by timestamp (stable across files), run
        // the whole show on the trace clock.
        let mut merged: Vec<(u64, usize, usize, Vec<u8>)> = Vec::new();
        for (file_index, path) in from.iter().enumerate() {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read trace {}", path.display()))?;
            for (line_index, packet) in parse_trace(&text)?.into_iter().enumerate() {
                merged.push((packet.t_ms, file_index, line_index, packet.payload));
            }
        }
        merged.sort_by_key(|&(t, file, line, _)| (t, file, line));
        for (t, _, _, payload) in &merged {
            let emissions = router.handle(payload, *t);
            write_emissions(&emissions, None)?;
        }
        return Ok(());
    }

    let Some(port) = listen else {
        bail!("route needs either --listen PORT (live) or --from TRACE (offline)");
    };
    let receiver =
        UdpReceiver::bind(port).with_context(|| format!("cannot listen on port {port}"))?;
    let target = resolve_target(to)?;
    let sender = UdpBroadcaster::new(target)?;
    let mut bounds = Bounds::new(count, duration_ms);
    while let Some(poll_ms) = bounds.next_poll() {
        let Some((payload, _)) = receiver.recv(poll_ms)? else {
            continue;
        };
        bounds.seen += 1;
        let t = bounds.elapsed_ms();
        let emissions = router.handle(&payload, t);
        write_emissions(&emissions, Some(&sender))?;
    }
    Ok(())
}

// ── relay ───────────────────────────────────────────────────────

fn cmd_relay(
    listen: u16,
    to: &[String],
    duration_ms: Option<u64>,
    count: Option<u64>,
) -> Result<()> {
    let targets: Vec<SocketAddrV4> = to
        .iter()
        .map(|text| resolve_target(Some(text)))
        .collect::<Result<_>>()?;
    if targets.iter().any(|t| t.port() == listen) {
        // A relay feeding its own listening port would loop forever.
        bail!("relay target shares the listen port {listen}; that would loop");
    }
    let receiver =
        UdpReceiver::bind(listen).with_context(|| format!("cannot listen on port {listen}"))?;
    let sender = UdpBroadcaster::new(*targets.first().expect("clap requires at least one"))?;
    let mut bounds = Bounds::new(count, duration_ms);
    while let Some(poll_ms) = bounds.next_poll() {
        let Some((payload, _)) = receiver.recv(poll_ms)? else {
            continue;
        };
        bounds.seen += 1;
        for target in &targets {
            sender.send_to(&payload, *target)?;
        }
    }
    Ok(())
}
