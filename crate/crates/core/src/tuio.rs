//! TUIO 1.1 2Dobj profile: the protocol reacTIVision speaks for
//! fiducial-tagged objects on a camera surface.
//!
//! A frame arrives as one OSC bundle of `/tuio/2Dobj` messages: an `alive`
//! row listing live session ids, one `set` row per object that changed, and
//! an `fseq` row carrying the frame sequence number. [`parse_2dobj_bundle`]
//! turns such a bundle into a [`SurfaceFrame`], [`Tracker`] folds frames
//! into add/update/remove events, and [`encode_2dobj_frame`] is the inverse
//! used by the surface simulator.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use thiserror::Error;

use crate::osc::{OscArg, OscBundle, OscMessage, OscPacket};

/// Address every 2Dobj profile message carries.
pub const TUIO_2DOBJ_ADDRESS: &str = "/tuio/2Dobj";

/// reacTIVision's conventional UDP port.
pub const DEFAULT_TUIO_PORT: u16 = 3333;

const TAU: f32 = std::f32::consts::TAU;

/// One tracked fiducial: identity, pose, and sender-computed kinematics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiducialState {
    /// Unique per physical placement; never recycled within a stream.
    pub session_id: i32,
    /// Fiducial marker number.
    pub class_id: i32,
    /// Normalized position, both in [0, 1].
    pub x: f32,
    pub y: f32,
    /// Radians in [0, 2π).
    pub angle: f32,
    /// Normalized units per second.
    pub vel_x: f32,
    pub vel_y: f32,
    /// Radians per second.
    pub vel_rot: f32,
    /// Per-second² scalars, passed through as the sender computed them.
    pub accel_motion: f32,
    pub accel_rot: f32,
}

impl FiducialState {
    /// A state with the given identity at the surface origin.
    pub fn at_origin(session_id: i32, class_id: i32) -> Self {
        Self {
            session_id,
            class_id,
            x: 0.0,
            y: 0.0,
            angle: 0.0,
            vel_x: 0.0,
            vel_y: 0.0,
            vel_rot: 0.0,
            accel_motion: 0.0,
            accel_rot: 0.0,
        }
    }

    fn validate(&self) -> Result<(), TuioError> {
        if self.session_id < 0 || self.class_id < 0 {
            return Err(TuioError::InvariantViolation(
                "negative session or class id",
            ));
        }
        for v in [
            self.x,
            self.y,
            self.angle,
            self.vel_x,
            self.vel_y,
            self.vel_rot,
            self.accel_motion,
            self.accel_rot,
        ] {
            if !v.is_finite() {
                return Err(TuioError::InvariantViolation("non-finite field"));
            }
        }
        if !(0.0..=1.0).contains(&self.x) || !(0.0..=1.0).contains(&self.y) {
            return Err(TuioError::InvariantViolation("position outside [0,1]"));
        }
        if !(0.0..TAU).contains(&self.angle) {
            return Err(TuioError::InvariantViolation("angle outside [0,2π)"));
        }
        Ok(())
    }
}

/// One coherent snapshot of the surface.
///
/// `alive` preserves announcement order; `states` holds the sessions that
/// carried a `set` row this frame, each of which must appear in `alive`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceFrame {
    pub fseq: i32,
    pub alive: Vec<i32>,
    pub states: Vec<FiducialState>,
}

impl SurfaceFrame {
    /// A frame with nothing on the surface.
    pub fn empty(fseq: i32) -> Self {
        Self {
            fseq,
            alive: Vec::new(),
            states: Vec::new(),
        }
    }
}

/// What happened to one session between consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Add,
    Update,
    Remove,
}

/// One tracker output event. For `Remove`, `state` is the last known state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceEvent {
    pub kind: EventKind,
    pub state: FiducialState,
    /// The fseq of the frame that produced this event.
    pub frame: i32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TuioError {
    #[error("not a 2Dobj bundle: {0}")]
    NotTuio(&'static str),
    #[error("malformed 2Dobj row: {0}")]
    MalformedRow(&'static str),
    #[error("bundle carries no fseq row")]
    MissingFseq,
    #[error("set row for session {0} absent from the alive set")]
    InconsistentAlive(i32),
    #[error("frame violates an invariant: {0}")]
    InvariantViolation(&'static str),
}

// ── Wire layer ──────────────────────────────────────────────────

/// Parse one reacTIVision-style bundle into a frame.
///
/// A `source` row is tolerated and ignored. Positions are clamped into
/// [0, 1] and the angle is folded into [0, 2π) to absorb sender float fuzz;
/// structural problems are hard errors.
pub fn parse_2dobj_bundle(bundle: &OscBundle) -> Result<SurfaceFrame, TuioError> {
    let mut alive: Vec<i32> = Vec::new();
    let mut states: Vec<FiducialState> = Vec::new();
    let mut fseq: Option<i32> = None;

    for element in &bundle.elements {
        let OscPacket::Message(msg) = element else {
            return Err(TuioError::NotTuio("nested bundle"));
        };
        if msg.address != TUIO_2DOBJ_ADDRESS {
            return Err(TuioError::NotTuio("wrong address"));
        }
        let Some(OscArg::Str(command)) = msg.args.first() else {
            return Err(TuioError::MalformedRow("first argument must be a string"));
        };
        match command.as_str() {
            "alive" => {
                for arg in &msg.args[1..] {
                    let OscArg::Int(session) = arg else {
                        return Err(TuioError::MalformedRow("alive ids must be ints"));
                    };
                    if *session < 0 {
                        return Err(TuioError::MalformedRow("negative session id"));
                    }
                    if !alive.contains(session) {
                        alive.push(*session);
                    }
                }
            }
            "set" => states.push(parse_set_row(&msg.args[1..])?),
            "fseq" => match msg.args[1..] {
                [OscArg::Int(value)] => fseq = Some(value),
                _ => return Err(TuioError::MalformedRow("fseq takes one int")),
            },
            "source" => {}
            _ => return Err(TuioError::MalformedRow("unknown command word")),
        }
    }

    let fseq = fseq.ok_or(TuioError::MissingFseq)?;
    for state in &states {
        if !alive.contains(&state.session_id) {
            return Err(TuioError::InconsistentAlive(state.session_id));
        }
    }
    Ok(SurfaceFrame {
        fseq,
        alive,
        states,
    })
}

fn parse_set_row(args: &[OscArg]) -> Result<FiducialState, TuioError> {
    let [OscArg::Int(session_id), OscArg::Int(class_id), OscArg::Float(x), OscArg::Float(y), OscArg::Float(angle), OscArg::Float(vel_x), OscArg::Float(vel_y), OscArg::Float(vel_rot), OscArg::Float(accel_motion), OscArg::Float(accel_rot)] =
        args
    else {
        return Err(TuioError::MalformedRow("set takes 2 ints then 8 floats"));
    };
    if *session_id < 0 || *class_id < 0 {
        return Err(TuioError::MalformedRow("negative session or class id"));
    }
    for v in [x, y, angle, vel_x, vel_y, vel_rot, accel_motion, accel_rot] {
        if !v.is_finite() {
            return Err(TuioError::MalformedRow("non-finite float field"));
        }
    }
    Ok(FiducialState {
        session_id: *session_id,
        class_id: *class_id,
        x: x.clamp(0.0, 1.0),
        y: y.clamp(0.0, 1.0),
        angle: normalize_angle(*angle),
        vel_x: *vel_x,
        vel_y: *vel_y,
        vel_rot: *vel_rot,
        accel_motion: *accel_motion,
        accel_rot: *accel_rot,
    })
}

/// Fold radians into [0, 2π).
pub fn normalize_angle(angle: f32) -> f32 {
    let folded = angle.rem_euclid(TAU);
    if folded >= TAU {
        0.0
    } else {
        folded
    }
}

/// Encode a frame as the bundle [`parse_2dobj_bundle`] would read back:
/// alive row, one set row per state, fseq row, in that order.
pub fn encode_2dobj_frame(frame: &SurfaceFrame) -> Result<OscBundle, TuioError> {
    for session in &frame.alive {
        if *session < 0 {
            return Err(TuioError::InvariantViolation("negative session id"));
        }
    }
    for state in &frame.states {
        state.validate()?;
        if !frame.alive.contains(&state.session_id) {
            return Err(TuioError::InconsistentAlive(state.session_id));
        }
    }

    let mut elements = Vec::with_capacity(frame.states.len() + 2);
    let mut alive_args = vec![OscArg::Str("alive".into())];
    alive_args.extend(frame.alive.iter().map(|&s| OscArg::Int(s)));
    elements.push(OscPacket::Message(OscMessage::new(
        TUIO_2DOBJ_ADDRESS,
        alive_args,
    )));
    for state in &frame.states {
        elements.push(OscPacket::Message(OscMessage::new(
            TUIO_2DOBJ_ADDRESS,
            vec![
                OscArg::Str("set".into()),
                OscArg::Int(state.session_id),
                OscArg::Int(state.class_id),
                OscArg::Float(state.x),
                OscArg::Float(state.y),
                OscArg::Float(state.angle),
                OscArg::Float(state.vel_x),
                OscArg::Float(state.vel_y),
                OscArg::Float(state.vel_rot),
                OscArg::Float(state.accel_motion),
                OscArg::Float(state.accel_rot),
            ],
        )));
    }
    elements.push(OscPacket::Message(OscMessage::new(
        TUIO_2DOBJ_ADDRESS,
        vec![OscArg::Str("fseq".into()), OscArg::Int(frame.fseq)],
    )));
    Ok(OscBundle::immediate(elements))
}

// ── Session tracking ────────────────────────────────────────────

/// Folds a frame stream into per-session lifecycle events.
///
/// Stale frames (fseq at or below the last accepted one) are dropped
/// silently; fseq -1 is a keep-alive that changes nothing. There is no
/// session timeout: removal happens only through absence from an alive set,
/// so a lost datagram self-heals on the next frame.
#[derive(Debug, Default)]
pub struct Tracker {
    last_fseq: Option<i32>,
    tracked: HashMap<i32, FiducialState>,
}

impl Tracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// The fseq of the last accepted frame, if any.
    pub fn last_fseq(&self) -> Option<i32> {
        self.last_fseq
    }

    /// Number of sessions currently on the surface.
    pub fn session_count(&self) -> usize {
        self.tracked.len()
    }

    /// Last known state for a session, if tracked.
    pub fn state(&self, session_id: i32) -> Option<&FiducialState> {
        self.tracked.get(&session_id)
    }

    /// Apply one frame, returning events in the order Add, Update, Remove.
    ///
    /// Adds follow the frame's alive order, updates the set-row order, and
    /// removes ascend by session id. A session announced alive without a
    /// set row is added with a placeholder state at the origin and filled
    /// in by its first set row.
    pub fn apply_frame(&mut self, frame: &SurfaceFrame) -> Vec<SurfaceEvent> {
        if frame.fseq == -1 {
            return Vec::new();
        }
        if let Some(last) = self.last_fseq {
            if frame.fseq <= last {
                return Vec::new();
            }
        }
        self.last_fseq = Some(frame.fseq);

        // Last set row wins when a session carries more than one.
        let mut set_rows: HashMap<i32, FiducialState> = HashMap::new();
        for state in &frame.states {
            set_rows.insert(state.session_id, *state);
        }

        let mut events = Vec::new();
        for &session in &frame.alive {
            if let Entry::Vacant(slot) = self.tracked.entry(session) {
                let state = set_rows
                    .remove(&session)
                    .unwrap_or_else(|| FiducialState::at_origin(session, 0));
                slot.insert(state);
                events.push(SurfaceEvent {
                    kind: EventKind::Add,
                    state,
                    frame: frame.fseq,
                });
            }
        }
        let mut updated: Vec<i32> = Vec::new();
        for state in &frame.states {
            if updated.contains(&state.session_id) {
                continue;
            }
            if let Some(row) = set_rows.get(&state.session_id) {
                self.tracked.insert(state.session_id, *row);
                updated.push(state.session_id);
                events.push(SurfaceEvent {
                    kind: EventKind::Update,
                    state: *row,
                    frame: frame.fseq,
                });
            }
        }
        let mut removed: Vec<i32> = self
            .tracked
            .keys()
            .copied()
            .filter(|s| !frame.alive.contains(s))
            .collect();
        removed.sort_unstable();
        for session in removed {
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
