//! The acceptance gate: one test per release criterion, each of which
//! prints a single `acceptance <name>: PASS` line (visible under
//! `cargo test --test acceptance -- --nocapture`) and enforces its own
//! runtime budget. Every numeric tolerance is pinned here, not computed.
//!
//! Where a criterion needs an independent check, the oracle lives in this
//! file and shares no code with the implementation: the pattern matcher
//! is checked against a regex translation, and the fiducial tracker
//! against a set-difference re-derivation of the event contract.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use stagewire::bus::{SimNet, SimNetConfig};
use stagewire::device_sim::{noise_rms_for_snr_db, synth_ppg, PpgParams};
use stagewire::osc::{decode_packet, encode_packet, match_address};
use stagewire::pulse::{estimate_bpm, Detector, DetectorConfig, PulseSample, DEFAULT_BPM_WINDOW};
use stagewire::tuio::{EventKind, FiducialState, SurfaceEvent, SurfaceFrame, Tracker};
use stagewire::{OscArg, OscBundle, OscMessage, OscPacket};

/// Print the criterion's pass line and enforce its runtime budget.
fn report(name: &str, detail: &str, started: Instant, budget_ms: u64) {
    let elapsed = started.elapsed();
    println!(
        "acceptance {name}: PASS — {detail} in {} ms (budget {budget_ms} ms)",
        elapsed.as_millis()
    );
    assert!(
        elapsed < Duration::from_millis(budget_ms),
        "{name} exceeded its {budget_ms} ms budget: took {elapsed:?}"
    );
}

// ── 1. OSC codec round-trip ─────────────────────────────────────

const CODEC_TRIPS: usize = 100_000;
const CODEC_BUDGET_MS: u64 = 10_000;

const ADDRESS_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789_";

fn gen_address(rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    for _ in 0..rng.gen_range(1..=3) {
        out.push('/');
        for _ in 0..rng.gen_range(0..=6) {
            out.push(ADDRESS_CHARS[rng.gen_range(0..ADDRESS_CHARS.len())] as char);
        }
    }
    out
}

fn gen_arg(rng: &mut ChaCha8Rng) -> OscArg {
    // Multibyte characters keep the padding math honest; random float
    // bits (NaNs and negative zero included) exercise bitwise equality.
    const STR_CHARS: &[char] = &['a', 'B', '7', '-', '.', 'é', 'π', '∆'];
    match rng.gen_range(0..4) {
        0 => OscArg::Int(rng.gen()),
        1 => OscArg::Float(f32::from_bits(rng.gen())),
        2 => OscArg::Str(
            (0..rng.gen_range(0..=12))
                .map(|_| STR_CHARS[rng.gen_range(0..STR_CHARS.len())])
                .collect(),
        ),
        _ => OscArg::Blob((0..rng.gen_range(0..=16)).map(|_| rng.gen()).collect()),
    }
}

fn gen_packet(rng: &mut ChaCha8Rng, depth: usize) -> OscPacket {
    if depth > 0 && rng.gen_bool(0.25) {
        let elements = (0..rng.gen_range(0..=3))
            .map(|_| gen_packet(rng, depth - 1))
            .collect();
        OscPacket::Bundle(OscBundle {
            timetag: rng.gen(),
            elements,
        })
    } else {
        OscPacket::Message(OscMessage::new(
            gen_address(rng),
            (0..rng.gen_range(0..=5)).map(|_| gen_arg(rng)).collect(),
        ))
    }
}

#[test]
fn osc_codec_round_trip() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x05c0dec);

    for i in 0..CODEC_TRIPS {
        let packet = gen_packet(&mut rng, 2);
        let bytes = encode_packet(&packet).expect("generated packets are encodable");
        let decoded = decode_packet(&bytes).expect("encoded packets decode");
        assert_eq!(decoded, packet, "decode∘encode altered packet {i}");
        let again = encode_packet(&decoded).expect("decoded packets re-encode");
        assert_eq!(again, bytes, "encode∘decode altered wire image {i}");
    }

    // Hand-encoded wire images, written out byte by byte from the OSC 1.0
    // layout rules rather than produced by this codec.
    let fixtures: [(&[u8], OscPacket); 3] = [
        (
            // "/ab" with no arguments: padded address, bare typetag comma.
            &[0x2f, 0x61, 0x62, 0x00, 0x2c, 0x00, 0x00, 0x00],
            OscPacket::Message(OscMessage::new("/ab", vec![])),
        ),
        (
            // "/x" with one of each argument type.
            &[
                0x2f, 0x78, 0x00, 0x00, // "/x" + 2 pad
                0x2c, 0x69, 0x66, 0x73, 0x62, 0x00, 0x00, 0x00, // ",ifsb" + 3 pad
                0x00, 0x00, 0x00, 0x01, // Int 1
                0x3f, 0x00, 0x00, 0x00, // Float 0.5
                0x68, 0x69, 0x00, 0x00, // "hi" + 2 pad
                0x00, 0x00, 0x00, 0x02, // blob length 2
                0xde, 0xad, 0x00, 0x00, // blob bytes + 2 pad
            ],
            OscPacket::Message(OscMessage::new(
                "/x",
                vec![
                    OscArg::Int(1),
                    OscArg::Float(0.5),
                    OscArg::Str("hi".into()),
                    OscArg::Blob(vec![0xde, 0xad]),
                ],
            )),
        ),
        (
            // Immediate bundle holding the no-argument message "/go".
            &[
                0x23, 0x62, 0x75, 0x6e, 0x64, 0x6c, 0x65, 0x00, // "#bundle\0"
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x01, // timetag 1
                0x00, 0x00, 0x00, 0x08, // element size 8
                0x2f, 0x67, 0x6f, 0x00, 0x2c, 0x00, 0x00, 0x00, // "/go" + ","
            ],
            OscPacket::Bundle(OscBundle::immediate(vec![OscPacket::Message(
                OscMessage::new("/go", vec![]),
            )])),
        ),
    ];
    for (i, (bytes, packet)) in fixtures.iter().enumerate() {
        assert_eq!(&decode_packet(bytes).unwrap(), packet, "fixture {i} decode");
        assert_eq!(&encode_packet(packet).unwrap(), bytes, "fixture {i} encode");
    }

    report(
        "osc-codec-round-trip",
        &format!("{CODEC_TRIPS} random packets both directions, 3 byte fixtures"),
        started,
        CODEC_BUDGET_MS,
    );
}

// ── 2. Pattern-match oracle ─────────────────────────────────────

const PATTERN_PAIRS: usize = 10_000;
const PATTERN_BUDGET_MS: u64 = 5_000;

const MEMBER_CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";

fn member_char(rng: &mut ChaCha8Rng) -> char {
    MEMBER_CHARS[rng.gen_range(0..MEMBER_CHARS.len())] as char
}

/// An ordered (lo, hi) pair drawn from one ASCII family, so no generated
/// range ever straddles '/' (0x2F sits below '0' and far below 'a').
fn range_pair(rng: &mut ChaCha8Rng) -> (char, char) {
    let (lo, hi) = if rng.gen_bool(0.5) {
        (b'0', b'9')
    } else {
        (b'a', b'z')
    };
    let a = rng.gen_range(lo..=hi);
    let b = rng.gen_range(lo..=hi);
    ((a.min(b)) as char, (a.max(b)) as char)
}

fn gen_pattern(rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    for _ in 0..rng.gen_range(1..=3) {
        out.push('/');
        for _ in 0..rng.gen_range(0..=4) {
            match rng.gen_range(0..8) {
                0 => out.push('?'),
                1 => out.push('*'),
                2 => {
                    out.push('[');
                    if rng.gen_bool(0.4) {
                        out.push('!');
                    }
                    for _ in 0..rng.gen_range(1..=3) {
                        if rng.gen_bool(0.3) {
                            let (lo, hi) = range_pair(rng);
                            out.push(lo);
                            out.push('-');
                            out.push(hi);
                        } else {
                            out.push(member_char(rng));
                        }
                    }
                    out.push(']');
                }
                3 => {
                    out.push('{');
                    let alternatives = rng.gen_range(1..=3);
                    for i in 0..alternatives {
                        if i > 0 {
                            out.push(',');
                        }
                        for _ in 0..rng.gen_range(0..=3) {
                            out.push(member_char(rng));
                        }
                    }
                    out.push('}');
                }
                _ => out.push(member_char(rng)),
            }
        }
    }
    out
}

/// Independent oracle: translate the pattern into an anchored regex.
///
/// Class bodies produced by `gen_pattern` contain only alphanumerics and
/// well-formed single-family ranges, so they splice into a regex class
/// verbatim and can never cover '/'. The matcher's extra "never match
/// '/'" rule therefore only needs spelling out for negated classes.
fn pattern_to_regex(pattern: &str) -> Regex {
    let mut out = String::from("^");
    let mut chars = pattern.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '?' => out.push_str("[^/]"),
            '*' => out.push_str("[^/]*"),
            '[' => {
                let negated = chars.peek() == Some(&'!');
                if negated {
                    chars.next();
                }
                let mut body = String::new();
                for c in chars.by_ref() {
                    if c == ']' {
                        break;
                    }
                    body.push(c);
                }
                if negated {
                    out.push_str(&format!("[^/{body}]"));
                } else {
                    out.push_str(&format!("[{body}]"));
                }
            }
            '{' => {
                let mut alternatives = vec![String::new()];
                for c in chars.by_ref() {
                    match c {
                        '}' => break,
                        ',' => alternatives.push(String::new()),
                        other => alternatives.last_mut().unwrap().push(other),
                    }
                }
                let joined = alternatives
                    .iter()
                    .map(|a| regex::escape(a))
                    .collect::<Vec<_>>()
                    .join("|");
                out.push_str(&format!("(?:{joined})"));
            }
            other => out.push_str(&regex::escape(&other.to_string())),
        }
    }
    out.push('$');
    Regex::new(&out).expect("generated patterns translate to valid regexes")
}

/// Build an address by concretizing the pattern, then usually perturb it
/// so near-misses get tested too, not just exact expansions.
fn derive_address(pattern: &str, rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    let mut chars = pattern.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '?' => out.push(member_char(rng)),
            '*' => {
                for _ in 0..rng.gen_range(0..=4) {
                    out.push(member_char(rng));
                }
            }
            '[' => {
                let negated = chars.peek() == Some(&'!');
                if negated {
                    chars.next();
                }
                let mut body: Vec<char> = Vec::new();
                for c in chars.by_ref() {
                    if c == ']' {
                        break;
                    }
                    body.push(c);
                }
                if negated {
                    loop {
                        let candidate = member_char(rng);
                        if !body.contains(&candidate) {
                            out.push(candidate);
                            break;
                        }
                    }
                } else {
                    // Pick a concrete member; ranges are single-family so
                    // any byte between the endpoints is a valid char.
                    let mut members: Vec<char> = Vec::new();
                    let mut i = 0;
                    while i < body.len() {
                        if i + 2 < body.len() && body[i + 1] == '-' {
                            members.push(rng.gen_range(body[i] as u8..=body[i + 2] as u8) as char);
                            i += 3;
                        } else {
                            members.push(body[i]);
                            i += 1;
                        }
                    }
                    out.push(*members.choose(rng).unwrap());
                }
            }
            '{' => {
                let mut alternatives = vec![String::new()];
                for c in chars.by_ref() {
                    match c {
                        '}' => break,
                        ',' => alternatives.push(String::new()),
                        other => alternatives.last_mut().unwrap().push(other),
                    }
                }
                out.push_str(alternatives.choose(rng).unwrap());
            }
            other => out.push(other),
        }
    }
    if rng.gen_bool(0.5) && out.len() > 1 {
        // One mutation: replace, insert, delete, or extend. Position 0 is
        // never touched so the address keeps its leading '/'.
        match rng.gen_range(0..4) {
            0 => {
                let at = rng.gen_range(1..out.len());
                let mut chars: Vec<char> = out.chars().collect();
                let at = at.min(chars.len() - 1);
                chars[at] = member_char(rng);
                out = chars.into_iter().collect();
            }
            1 => {
                let mut chars: Vec<char> = out.chars().collect();
                let at = rng.gen_range(1..=chars.len());
                chars.insert(at, member_char(rng));
                out = chars.into_iter().collect();
            }
            2 => {
                let mut chars: Vec<char> = out.chars().collect();
                let at = rng.gen_range(1..chars.len());
                chars.remove(at);
                out = chars.into_iter().collect();
            }
            _ => {
                out.push('/');
                out.push(member_char(rng));
            }
        }
    }
    out
}

#[test]
fn pattern_match_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a77e12);

    let mut disagreements = 0usize;
    let mut pairs = 0usize;
    while pairs < PATTERN_PAIRS {
        let pattern = gen_pattern(&mut rng);
        let oracle = pattern_to_regex(&pattern);
        for _ in 0..5 {
            let address = if rng.gen_bool(0.6) {
                derive_address(&pattern, &mut rng)
            } else {
                gen_address(&mut rng)
            };
            let got =
                match_address(&pattern, &address).expect("generated patterns are well-formed");
            let expected = oracle.is_match(&address);
            if got != expected {
                disagreements += 1;
                eprintln!("disagreement: pattern {pattern:?} address {address:?}: matcher {got}, oracle {expected}");
            }
            pairs += 1;
        }
    }
    assert_eq!(disagreements, 0, "matcher disagreed with the regex oracle");

    report(
        "pattern-match-oracle",
        &format!("{pairs} pattern/address pairs, 0 disagreements"),
        started,
        PATTERN_BUDGET_MS,
    );
}

// ── 3. Tracker equivalence ──────────────────────────────────────

const TRACKER_SEQUENCES: usize = 1_000;
const TRACKER_BUDGET_MS: u64 = 5_000;

/// Set-difference re-derivation of the tracker contract: membership is
/// computed from before/after session sets, not by incremental updates.
#[derive(Default)]
struct SetDiffOracle {
    last_fseq: Option<i32>,
    tracked: HashMap<i32, FiducialState>,
}

impl SetDiffOracle {
    fn apply(&mut self, frame: &SurfaceFrame) -> Vec<SurfaceEvent> {
        if frame.fseq == -1 {
            return Vec::new();
        }
        if let Some(last) = self.last_fseq {
            if frame.fseq <= last {
                return Vec::new();
            }
        }
        self.last_fseq = Some(frame.fseq);

        let before: HashSet<i32> = self.tracked.keys().copied().collect();
        let alive: HashSet<i32> = frame.alive.iter().copied().collect();
        let mut final_row: HashMap<i32, FiducialState> = HashMap::new();
        for state in &frame.states {
            final_row.insert(state.session_id, *state);
        }

        let mut events = Vec::new();
        for &session in &frame.alive {
            if !before.contains(&session) {
                let state = final_row
                    .get(&session)
                    .copied()
                    .unwrap_or_else(|| FiducialState::at_origin(session, 0));
                self.tracked.insert(session, state);
                events.push(SurfaceEvent {
                    kind: EventKind::Add,
                    state,
                    frame: frame.fseq,
                });
            }
        }
        let mut reported: HashSet<i32> = HashSet::new();
        for state in &frame.states {
            if before.contains(&state.session_id) && reported.insert(state.session_id) {
                let state = final_row[&state.session_id];
                self.tracked.insert(state.session_id, state);
                events.push(SurfaceEvent {
                    kind: EventKind::Update,
                    state,
                    frame: frame.fseq,
                });
            }
        }
        let mut gone: Vec<i32> = before.difference(&alive).copied().collect();
        gone.sort_unstable();
        for session in gone {
            let state = self.tracked.remove(&session).unwrap();
            events.push(SurfaceEvent {
                kind: EventKind::Remove,
                state,
                frame: frame.fseq,
            });
        }
        events
    }
}

fn random_pose(rng: &mut ChaCha8Rng, session: i32) -> FiducialState {
    FiducialState {
        session_id: session,
        class_id: session % 5,
        x: rng.gen_range(0.0..=1.0),
        y: rng.gen_range(0.0..=1.0),
        angle: rng.gen_range(0.0..std::f32::consts::TAU),
        vel_x: rng.gen_range(-2.0..2.0),
        vel_y: rng.gen_range(-2.0..2.0),
        vel_rot: rng.gen_range(-4.0..4.0),
        accel_motion: rng.gen_range(0.0..8.0),
        accel_rot: rng.gen_range(0.0..8.0),
    }
}

#[test]
fn tracker_matches_set_difference_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x70a10);

    let mut stale_frames = 0usize;
    for sequence in 0..TRACKER_SEQUENCES {
        let mut tracker = Tracker::new();
        let mut oracle = SetDiffOracle::default();
        let mut alive: Vec<i32> = Vec::new();
        let mut next_session: i32 = 0;
        let mut fseq: i32 = 0;

        for _ in 0..rng.gen_range(1..=50) {
            if fseq > 0 && rng.gen_bool(0.15) {
                // Stale or keep-alive frame: content must be ignored.
                let stale_fseq = if rng.gen_bool(0.5) {
                    -1
                } else {
                    rng.gen_range(0..=fseq)
                };
                let mut states = Vec::new();
                for &session in &alive {
                    if rng.gen_bool(0.5) {
                        states.push(random_pose(&mut rng, session));
                    }
                }
                let frame = SurfaceFrame {
                    fseq: stale_fseq,
                    alive: alive.clone(),
                    states,
                };
                let sessions_before = tracker.session_count();
                assert!(
                    tracker.apply_frame(&frame).is_empty(),
                    "stale frame produced events"
                );
                assert!(oracle.apply(&frame).is_empty());
                assert_eq!(tracker.session_count(), sessions_before);
                stale_frames += 1;
                continue;
            }

            alive.retain(|_| rng.gen_bool(0.8));
            while alive.len() < 8 && rng.gen_bool(0.4) {
                alive.push(next_session);
                next_session += 1;
            }
            if rng.gen_bool(0.3) {
                alive.shuffle(&mut rng);
            }
            let mut states = Vec::new();
            for &session in &alive {
                if rng.gen_bool(0.7) {
                    states.push(random_pose(&mut rng, session));
                    if rng.gen_bool(0.1) {
                        // Duplicate set row; the last one must win.
                        states.push(random_pose(&mut rng, session));
                    }
                }
            }
            states.shuffle(&mut rng);
            fseq += rng.gen_range(1..=3);
            let frame = SurfaceFrame {
                fseq,
                alive: alive.clone(),
                states,
            };

            let got = tracker.apply_frame(&frame);
            let expected = oracle.apply(&frame);
            assert_eq!(
                got, expected,
                "event streams diverged in sequence {sequence}"
            );
            assert_eq!(tracker.session_count(), oracle.tracked.len());
            for (&session, state) in &oracle.tracked {
                assert_eq!(tracker.state(session), Some(state));
            }
        }
    }
    assert!(stale_frames > 0, "generator never produced a stale frame");

    report(
        "tracker-equivalence",
        &format!("{TRACKER_SEQUENCES} sequences (≤50 frames, ≤8 sessions), {stale_frames} stale frames ignored"),
        started,
        TRACKER_BUDGET_MS,
    );
}

// ── 4. Heartbeat detection ──────────────────────────────────────

const HEARTBEAT_BUDGET_MS: u64 = 10_000;
const BPM_TOLERANCE: f64 = 2.0;
const BEAT_MATCH_MS: u64 = 80;
const BEAT_MATCH_FRACTION: f64 = 0.95;
const SNR_DB: f64 = 20.0;

fn detect_all(
    samples: &[PulseSample],
    config: DetectorConfig,
) -> Vec<stagewire::pulse::HeartbeatEvent> {
    let mut detector = Detector::new(config).unwrap();
    let mut events = Vec::new();
    for &sample in samples {
        if let Some(event) = detector.process_sample(sample).unwrap() {
            events.push(event);
        }
    }
    events
}

#[test]
fn heartbeat_detection_accuracy() {
    let started = Instant::now();
    let config = DetectorConfig::default();

    for (i, &bpm) in [50.0, 60.0, 90.0, 120.0].iter().enumerate() {
        for (j, &amplitude) in [0.5, 1.0, 2.0].iter().enumerate() {
            let mut params = PpgParams {
                bpm,
                duration_ms: 30_000,
                sample_rate_hz: 100.0,
                pulse_width_ms: 120,
                amplitude,
                baseline_drift_amplitude: 0.05,
                noise_rms: 0.0,
                seed: 4_000 + (i * 3 + j) as u64,
            };
            params.noise_rms = noise_rms_for_snr_db(&params, SNR_DB);
            let signal = synth_ppg(&params).unwrap();
            let events = detect_all(&signal.samples, config);

            let estimated = estimate_bpm(&events, DEFAULT_BPM_WINDOW)
                .unwrap_or_else(|e| panic!("{bpm} bpm × {amplitude}: no estimate ({e})"));
            assert!(
                (estimated - bpm).abs() <= BPM_TOLERANCE,
                "{bpm} bpm × {amplitude}: estimated {estimated:.2}"
            );

            // Beats the detector is architecturally unable to report —
            // those inside its warm-up — don't count against matching.
            let eligible: Vec<u64> = signal
                .beat_times
                .iter()
                .copied()
                .filter(|&t| t >= config.warmup_ms)
                .collect();
            let mut used = vec![false; events.len()];
            let mut matched = 0usize;
            for &beat in &eligible {
                let candidate = events
                    .iter()
                    .enumerate()
                    .filter(|(k, e)| !used[*k] && e.t.abs_diff(beat) <= BEAT_MATCH_MS)
                    .min_by_key(|(_, e)| e.t.abs_diff(beat));
                if let Some((k, _)) = candidate {
                    used[k] = true;
                    matched += 1;
                }
            }
            assert!(
                matched as f64 >= BEAT_MATCH_FRACTION * eligible.len() as f64,
                "{bpm} bpm × {amplitude}: matched {matched}/{} beats",
                eligible.len()
            );
        }
    }

    // Scale/offset invariance must be exact with the default zero floor:
    // identical trigger timestamps, not merely close ones.
    let mut params = PpgParams {
        bpm: 60.0,
        duration_ms: 30_000,
        sample_rate_hz: 100.0,
        pulse_width_ms: 120,
        amplitude: 1.0,
        baseline_drift_amplitude: 0.05,
        noise_rms: 0.0,
        seed: 4_100,
    };
    params.noise_rms = noise_rms_for_snr_db(&params, SNR_DB);
    let signal = synth_ppg(&params).unwrap();
    let reference: Vec<u64> = detect_all(&signal.samples, config)
        .iter()
        .map(|e| e.t)
        .collect();
    assert!(!reference.is_empty());
    for (scale, offset) in [(2.0, 5.0), (0.25, -3.0), (1_000.0, -40_000.0)] {
        let transformed: Vec<PulseSample> = signal
            .samples
            .iter()
            .map(|s| PulseSample {
                t: s.t,
                value: s.value * scale + offset,
            })
            .collect();
        let timestamps: Vec<u64> = detect_all(&transformed, config)
            .iter()
            .map(|e| e.t)
            .collect();
        assert_eq!(
            timestamps, reference,
            "×{scale} +{offset} shifted the trigger times"
        );
    }

    report(
        "heartbeat-detection",
        &format!(
            "12 bpm×amplitude runs at {SNR_DB} dB SNR within ±{BPM_TOLERANCE} BPM, ≥{:.0}% beats within ±{BEAT_MATCH_MS} ms, invariance exact",
            BEAT_MATCH_FRACTION * 100.0
        ),
        started,
        HEARTBEAT_BUDGET_MS,
    );
}

// ── 5. Broadcast semantics ──────────────────────────────────────

const BUS_BUDGET_MS: u64 = 5_000;

/// Everything one subscriber saw: (payload, publisher) in arrival order.
type DeliveryLog = Vec<(Vec<u8>, String)>;

fn drain(sub: &stagewire::bus::SimSubscriber) -> DeliveryLog {
    let mut received = Vec::new();
    while let Ok(Some(item)) = sub.recv(0) {
        received.push(item);
    }
    received
}

#[test]
fn broadcast_semantics() {
    let started = Instant::now();

    // Lossless fan-out: every packet, every subscriber, exactly once, in
    // per-publisher order.
    {
        let net = SimNet::new(SimNetConfig {
            latency_ms: 0,
            jitter_ms: 0,
            loss_rate: 0.0,
            seed: 7,
        })
        .unwrap();
        let alpha = net.publisher("alpha").unwrap();
        let beta = net.publisher("beta").unwrap();
        let subs: Vec<_> = ["s1", "s2", "s3"]
            .iter()
            .map(|n| net.subscribe(n).unwrap())
            .collect();
        for i in 0..200u32 {
            alpha.publish(format!("a{i}").as_bytes()).unwrap();
            beta.publish(format!("b{i}").as_bytes()).unwrap();
        }
        for sub in &subs {
            let received = drain(sub);
            assert_eq!(received.len(), 400, "{} missed packets", sub.name());
            for publisher in ["alpha", "beta"] {
                let from: Vec<&[u8]> = received
                    .iter()
                    .filter(|(_, name)| name == publisher)
                    .map(|(payload, _)| payload.as_slice())
                    .collect();
                let expected: Vec<Vec<u8>> = (0..200u32)
                    .map(|i| format!("{}{i}", &publisher[..1]).into_bytes())
                    .collect();
                assert_eq!(from.len(), 200);
                assert!(
                    from.iter().zip(&expected).all(|(got, want)| got == want),
                    "per-publisher order broken for {publisher}"
                );
            }
        }
    }

    // A subscriber joining mid-stream must not perturb anyone else's
    // deliveries (per-link RNG streams) or any publisher's config.
    let run = |with_late_joiner: bool| -> (DeliveryLog, DeliveryLog) {
        let net = SimNet::new(SimNetConfig {
            latency_ms: 0,
            jitter_ms: 0,
            loss_rate: 0.3,
            seed: 99,
        })
        .unwrap();
        let publisher = net.publisher("pub").unwrap();
        let a = net.subscribe("a").unwrap();
        let b = net.subscribe("b").unwrap();
        let fingerprint = publisher.config_fingerprint();
        let mut late = None;
        for i in 0..300u32 {
            if with_late_joiner && i == 150 {
                late = Some(net.subscribe("late").unwrap());
            }
            publisher.publish(&i.to_be_bytes()).unwrap();
        }
        assert_eq!(
            publisher.config_fingerprint(),
            fingerprint,
            "publisher config changed when a subscriber joined"
        );
        if let Some(late) = &late {
            assert!(!drain(late).is_empty());
        }
        (drain(&a), drain(&b))
    };
    let (a_without, b_without) = run(false);
    let (a_with, b_with) = run(true);
    assert_eq!(a_without, a_with, "bystander a saw different packets");
    assert_eq!(b_without, b_with, "bystander b saw different packets");

    // Seeded lossy runs replay byte-for-byte; the delivered count sits
    // within 3σ of Binomial(2000, 0.7); a different seed diverges.
    let lossy = |seed: u64| -> DeliveryLog {
        let net = SimNet::new(SimNetConfig {
            latency_ms: 0,
            jitter_ms: 0,
            loss_rate: 0.3,
            seed,
        })
        .unwrap();
        let publisher = net.publisher("pub").unwrap();
        let sub = net.subscribe("sub").unwrap();
        for i in 0..2_000u32 {
            publisher.publish(&i.to_be_bytes()).unwrap();
        }
        drain(&sub)
    };
    let first = lossy(42);
    assert_eq!(first, lossy(42), "same seed did not replay identically");
    assert_ne!(first, lossy(43), "different seed replayed identically");
    let delivered = first.len() as f64;
    let mean = 2_000.0 * 0.7;
    let sigma = (2_000.0 * 0.3 * 0.7_f64).sqrt();
    assert!(
        (delivered - mean).abs() <= 3.0 * sigma,
        "delivered {delivered} outside {mean}±3σ"
    );

    report(
        "broadcast-semantics",
        &format!(
            "lossless exactly-once ×3 subscribers, bystanders byte-identical, seeded loss replayed ({} of 2000 delivered)",
            first.len()
        ),
        started,
        BUS_BUDGET_MS,
    );
}

// ── 6. End-to-end golden show ───────────────────────────────────

const SHOW_BUDGET_MS: u64 = 15_000;

fn show_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/show")
        .join(name)
}

fn run_stagewire(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_stagewire"))
        .args(args)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("binary runs");
    assert!(status.success(), "stagewire {args:?} failed");
}

#[test]
fn golden_show_is_deterministic() {
    let started = Instant::now();
    let workdir = tempfile::tempdir().unwrap();

    let mut logs = Vec::new();
    for run in ["first", "second"] {
        let dir = workdir.path().join(run);
        std::fs::create_dir(&dir).unwrap();
        let tuio = dir.join("tuio.trace");
        let pulse = dir.join("pulse.trace");
        let emissions = dir.join("emissions.log");

        run_stagewire(&[
            "simulate",
            show_fixture("choreography.json").to_str().unwrap(),
            "--out",
            tuio.to_str().unwrap(),
        ]);
        run_stagewire(&[
            "detect",
            show_fixture("ppg.tsv").to_str().unwrap(),
            "--trace-out",
            pulse.to_str().unwrap(),
        ]);
        run_stagewire(&[
            "route",
            show_fixture("rules.json").to_str().unwrap(),
            "--from",
            tuio.to_str().unwrap(),
            "--from",
            pulse.to_str().unwrap(),
            "--log",
            emissions.to_str().unwrap(),
        ]);
        logs.push(std::fs::read(&emissions).unwrap());
    }

    assert!(!logs[0].is_empty(), "golden show produced no emissions");
    assert_eq!(logs[0], logs[1], "consecutive runs diverged");
    let text = String::from_utf8(logs[0].clone()).unwrap();
    for rule in ["card-on", "card-off", "cup-pan", "cup-zone", "pulse-flash"] {
        assert!(text.contains(rule), "golden log missing rule {rule}");
    }

    report(
        "golden-show",
        &format!(
            "two pipeline runs byte-identical ({} emissions)",
            text.lines().count()
        ),
        started,
        SHOW_BUDGET_MS,
    );
}
