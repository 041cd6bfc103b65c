//! Declarative cue rules: the binding between what happens on stage and
//! what gets sent to the sound and visual machines.
//!
//! A rules file is an ordered JSON list. Every rule whose `match` clause
//! fits an incoming event fires — order decides only the emission order,
//! never suppression, because one gesture routinely drives several
//! responses at once (a chord *and* a lighting change). Discrete matchers
//! are edge-triggered per session so holding a card on the table does not
//! retrigger its cue; continuous matchers map a surface axis through a
//! clamped linear range at a bounded rate.
//!
//! Rules are validated completely at load. A show file with a typo fails
//! before the house opens, not during the performance.

use std::collections::{HashMap, HashSet};

use serde::Deserialize;

use crate::osc::{is_valid_address, match_address, validate_pattern, OscArg, OscMessage};
use crate::pulse::HeartbeatEvent;
use crate::tuio::{EventKind, FiducialState, SurfaceEvent};

use thiserror::Error;

/// Continuous rules default to 30 emissions per second per object.
pub const DEFAULT_MAX_RATE_HZ: f64 = 30.0;

fn default_max_rate() -> f64 {
    DEFAULT_MAX_RATE_HZ
}

/// Which pose component a continuous rule reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
    Angle,
}

impl Axis {
    fn read(self, state: &FiducialState) -> f32 {
        match self {
            Axis::X => state.x,
            Axis::Y => state.y,
            Axis::Angle => state.angle,
        }
    }
}

/// The `match` clause of a rule.
///
/// Serde cannot enforce `deny_unknown_fields` on an internally tagged
/// enum, so [`load_rules`] checks the raw key sets itself before the
/// typed parse.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchSpec {
    /// An object of this class arrives on the surface.
    FiducialAdd { class: i32 },
    /// An object of this class leaves.
    FiducialRemove { class: i32 },
    /// An object of this class crosses into the rectangle (inclusive
    /// bounds); re-arms when it leaves or is lifted.
    RegionEnter {
        class: i32,
        x0: f32,
        y0: f32,
        x1: f32,
        y1: f32,
    },
    /// Every detected beat.
    Heartbeat,
    /// Every OSC message whose address satisfies the pattern — the hook
    /// for external devices that already speak OSC.
    OscMatch { pattern: String },
    /// A pose axis, linearly mapped and rate-limited.
    Continuous {
        class: i32,
        axis: Axis,
        /// Input interval [a, b]; values outside clamp to the ends.
        #[serde(rename = "in")]
        in_range: [f32; 2],
        /// Output interval [c, d]; may run backwards for inverse maps.
        out: [f32; 2],
        #[serde(default = "default_max_rate")]
        max_rate_hz: f64,
    },
}

/// One emission slot: a literal or a placeholder to fill from the event.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgTemplate {
    Int(IntSlot),
    Float(FloatSlot),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum IntSlot {
    Literal(i32),
    /// `{class}` or `{session}`.
    Placeholder(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FloatSlot {
    Literal(f32),
    /// `{x}`, `{y}`, `{angle}`, or `{value}`.
    Placeholder(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitSpec {
    pub address: String,
    #[serde(default)]
    pub args: Vec<ArgTemplate>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CueRule {
    pub id: String,
    #[serde(rename = "match")]
    pub match_spec: MatchSpec,
    pub emit: EmitSpec,
}

/// One outbound cue, ready for the bus.
#[derive(Debug, Clone, PartialEq)]
pub struct CueEmission {
    pub t: u64,
    pub rule_id: String,
    pub message: OscMessage,
}

#[derive(Debug, Error)]
pub enum CueError {
    #[error("rules document is not valid JSON: {0}")]
    ParseError(#[from] serde_json::Error),
    #[error("invalid rule: {0}")]
    InvalidRule(String),
}

/// Which placeholders an event kind can actually fill.
fn allowed_placeholders(spec: &MatchSpec) -> (&'static [&'static str], &'static [&'static str]) {
    // (int placeholders, float placeholders)
    match spec {
        MatchSpec::FiducialAdd { .. }
        | MatchSpec::FiducialRemove { .. }
        | MatchSpec::RegionEnter { .. } => (&["{class}", "{session}"], &["{x}", "{y}", "{angle}"]),
        MatchSpec::Heartbeat | MatchSpec::OscMatch { .. } => (&[], &["{value}"]),
        MatchSpec::Continuous { .. } => (
            &["{class}", "{session}"],
            &["{x}", "{y}", "{angle}", "{value}"],
        ),
    }
}

/// Exact key set each match kind accepts, for the strictness pre-pass.
fn reject_unknown_match_fields(raw: &serde_json::Value) -> Result<(), CueError> {
    let Some(rules) = raw.as_array() else {
        return Ok(()); // the typed parse will report the real shape error
    };
    for rule in rules {
        let Some(spec) = rule.get("match").and_then(|m| m.as_object()) else {
            continue;
        };
        let Some(kind) = spec.get("kind").and_then(|k| k.as_str()) else {
            continue;
        };
        let allowed: &[&str] = match kind {
            "fiducial_add" | "fiducial_remove" => &["kind", "class"],
            "region_enter" => &["kind", "class", "x0", "y0", "x1", "y1"],
            "heartbeat" => &["kind"],
            "osc_match" => &["kind", "pattern"],
            "continuous" => &["kind", "class", "axis", "in", "out", "max_rate_hz"],
            _ => continue,
        };
        for key in spec.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CueError::InvalidRule(format!(
                    "unknown field {key:?} in a {kind:?} match clause"
                )));
            }
        }
    }
    Ok(())
}

/// Parse and fully validate a rules document.
pub fn load_rules(document: &[u8]) -> Result<Vec<CueRule>, CueError> {
    let raw: serde_json::Value = serde_json::from_slice(document)?;
    reject_unknown_match_fields(&raw)?;
    let rules: Vec<CueRule> = serde_json::from_value(raw)?;
    let mut seen_ids = HashSet::new();
    for rule in &rules {
        let fail = |reason: String| {
            Err(CueError::InvalidRule(format!(
                "rule {:?}: {reason}",
                rule.id
            )))
        };
        if rule.id.is_empty() {
            return fail("id must not be empty".into());
        }
        if !seen_ids.insert(rule.id.clone()) {
            return fail("id is used by an earlier rule; emission logs need unique ids".into());
        }
        match &rule.match_spec {
            MatchSpec::RegionEnter { x0, y0, x1, y1, .. } => {
                if !(x0 < x1 && y0 < y1) {
                    return fail(format!(
                        "region ({x0}, {y0})–({x1}, {y1}) is not well-ordered"
                    ));
                }
            }
            MatchSpec::OscMatch { pattern } => {
                if let Err(error) = validate_pattern(pattern) {
                    return fail(format!("bad address pattern: {error}"));
                }
            }
            MatchSpec::Continuous {
                in_range,
                out,
                max_rate_hz,
                ..
            } => {
                if in_range[0] == in_range[1]
                    || !in_range.iter().chain(out.iter()).all(|v| v.is_finite())
                {
                    return fail(format!(
                        "input range [{}, {}] is degenerate",
                        in_range[0], in_range[1]
                    ));
                }
                if !(max_rate_hz.is_finite() && *max_rate_hz > 0.0) {
                    return fail(format!("max_rate_hz {max_rate_hz} must be positive"));
                }
            }
            MatchSpec::FiducialAdd { .. }
            | MatchSpec::FiducialRemove { .. }
            | MatchSpec::Heartbeat => {}
        }
        if !is_valid_address(&rule.emit.address) {
            return fail(format!("emit address {:?} is not valid", rule.emit.address));
        }
        let (int_allowed, float_allowed) = allowed_placeholders(&rule.match_spec);
        for arg in &rule.emit.args {
            match arg {
                ArgTemplate::Int(IntSlot::Placeholder(name))
                    if !int_allowed.contains(&name.as_str()) =>
                {
                    return fail(format!(
                        "int placeholder {name:?} is not available to this match kind"
                    ));
                }
                ArgTemplate::Float(FloatSlot::Placeholder(name))
                    if !float_allowed.contains(&name.as_str()) =>
                {
                    return fail(format!(
                        "float placeholder {name:?} is not available to this match kind"
                    ));
                }
                _ => {}
            }
        }
    }
    Ok(rules)
}

/// Everything a placeholder might pull from one event.
#[derive(Default, Clone, Copy)]
struct Fill {
    x: f32,
    y: f32,
    angle: f32,
    value: f32,
    class: i32,
    session: i32,
}

impl Fill {
    fn from_state(state: &FiducialState) -> Self {
        Self {
            x: state.x,
            y: state.y,
            angle: state.angle,
            value: 0.0,
            class: state.class_id,
            session: state.session_id,
        }
    }

    fn int(&self, name: &str) -> i32 {
        match name {
            "{class}" => self.class,
            "{session}" => self.session,
            // Unreachable after load validation; zero beats a panic mid-show.
            _ => 0,
        }
    }

    fn float(&self, name: &str) -> f32 {
        match name {
            "{x}" => self.x,
            "{y}" => self.y,
            "{angle}" => self.angle,
            "{value}" => self.value,
            _ => 0.0,
        }
    }
}

fn render(emit: &EmitSpec, fill: &Fill) -> OscMessage {
    let args = emit
        .args
        .iter()
        .map(|template| match template {
            ArgTemplate::Int(IntSlot::Literal(v)) => OscArg::Int(*v),
            ArgTemplate::Int(IntSlot::Placeholder(name)) => OscArg::Int(fill.int(name)),
            ArgTemplate::Float(FloatSlot::Literal(v)) => OscArg::Float(*v),
            ArgTemplate::Float(FloatSlot::Placeholder(name)) => OscArg::Float(fill.float(name)),
            ArgTemplate::Str(s) => OscArg::Str(s.clone()),
        })
        .collect();
    OscMessage::new(&emit.address, args)
}

/// One of the three event families a rule can match.
#[derive(Debug, Clone, Copy)]
pub enum CueInput<'a> {
    Surface(&'a SurfaceEvent),
    Heartbeat(&'a HeartbeatEvent),
    Osc(&'a OscMessage),
}

/// Evaluates loaded rules against an event stream.
///
/// Holds the per-(rule, session) edge and rate state; feed it events in
/// time order from a single owner.
pub struct CueEngine {
    rules: Vec<CueRule>,
    /// (rule index, session) pairs whose FiducialAdd already fired.
    add_fired: HashSet<(usize, i32)>,
    /// (rule index, session) pairs currently inside their region.
    inside: HashSet<(usize, i32)>,
    /// Last continuous emission per (rule index, session), in ms.
    last_continuous: HashMap<(usize, i32), u64>,
}

impl CueEngine {
    pub fn new(rules: Vec<CueRule>) -> Self {
        Self {
            rules,
            add_fired: HashSet::new(),
            inside: HashSet::new(),
            last_continuous: HashMap::new(),
        }
    }

    pub fn rules(&self) -> &[CueRule] {
        &self.rules
    }

    /// Evaluate one discrete event at time `t`; all matching rules fire,
    /// in file order.
    pub fn eval_event(&mut self, input: CueInput<'_>, t: u64) -> Vec<CueEmission> {
        let mut emissions = Vec::new();
        for index in 0..self.rules.len() {
            let rule = &self.rules[index];
            let fired: Option<Fill> = match (&rule.match_spec, input) {
                (MatchSpec::FiducialAdd { class }, CueInput::Surface(event)) => {
                    let key = (index, event.state.session_id);
                    match event.kind {
                        EventKind::Add
                            if event.state.class_id == *class && !self.add_fired.contains(&key) =>
                        {
                            self.add_fired.insert(key);
                            Some(Fill::from_state(&event.state))
                        }
                        EventKind::Remove => {
                            self.add_fired.remove(&key);
                            None
                        }
                        _ => None,
                    }
                }
                (MatchSpec::FiducialRemove { class }, CueInput::Surface(event)) => {
                    (event.kind == EventKind::Remove && event.state.class_id == *class)
                        .then(|| Fill::from_state(&event.state))
                }
                (
                    MatchSpec::RegionEnter {
                        class,
                        x0,
                        y0,
                        x1,
                        y1,
                    },
                    CueInput::Surface(event),
                ) => {
                    let key = (index, event.state.session_id);
                    if event.kind == EventKind::Remove {
                        self.inside.remove(&key);
                        None
                    } else if event.state.class_id == *class {
                        let now_inside = (*x0..=*x1).contains(&event.state.x)
                            && (*y0..=*y1).contains(&event.state.y);
                        let was_inside = self.inside.contains(&key);
                        if now_inside {
                            self.inside.insert(key);
                        } else {
                            self.inside.remove(&key);
                        }
                        (now_inside && !was_inside).then(|| Fill::from_state(&event.state))
                    } else {
                        None
                    }
                }
                (MatchSpec::Heartbeat, CueInput::Heartbeat(event)) => Some(Fill {
                    value: event.strength as f32,
                    ..Fill::default()
                }),
                (MatchSpec::OscMatch { pattern }, CueInput::Osc(message)) => {
                    match match_address(pattern, &message.address) {
                        Ok(true) => {
                            let value = message
                                .args
                                .iter()
                                .find_map(|arg| arg.as_f64())
                                .unwrap_or(0.0);
                            Some(Fill {
                                value: value as f32,
                                ..Fill::default()
                            })
                        }
                        _ => None,
                    }
                }
                _ => None,
            };
            if let Some(fill) = fired {
                emissions.push(CueEmission {
                    t,
                    rule_id: self.rules[index].id.clone(),
                    message: render(&self.rules[index].emit, &fill),
                });
            }
        }
        emissions
    }

    /// Evaluate continuous rules against one object's current state.
    ///
    /// Call once per set row per frame. Emissions per (rule, session) are
    /// spaced at least `1000 / max_rate_hz` ms apart; suppressed samples
    /// vanish rather than queue.
    pub fn eval_frame_continuous(&mut self, state: &FiducialState, t: u64) -> Vec<CueEmission> {
        let mut emissions = Vec::new();
        for index in 0..self.rules.len() {
            let MatchSpec::Continuous {
                class,
                axis,
                in_range,
                out,
                max_rate_hz,
            } = &self.rules[index].match_spec
            else {
                continue;
            };
            let (class, axis, in_range, out, max_rate_hz) =
                (*class, *axis, *in_range, *out, *max_rate_hz);
            if state.class_id != class {
                continue;
            }
            let key = (index, state.session_id);
            let min_spacing_ms = 1000.0 / max_rate_hz;
            if let Some(&last) = self.last_continuous.get(&key) {
                if ((t - last) as f64) < min_spacing_ms {
                    continue;
                }
            }
            self.last_continuous.insert(key, t);

            let raw = axis.read(state);
            let unit = ((raw - in_range[0]) / (in_range[1] - in_range[0])).clamp(0.0, 1.0);
            let value = out[0] + (out[1] - out[0]) * unit;
            let fill = Fill {
                value,
                ..Fill::from_state(state)
            };
            emissions.push(CueEmission {
                t,
                rule_id: self.rules[index].id.clone(),
                message: render(&self.rules[index].emit, &fill),
            });
        }
        emissions
    }
}
