//! MIDI-percussion-to-OSC bridge: a rule table mapping (channel, note)
//! pairs to outbound messages, standing in for the patch software that
//! would sit between a drum kit and the network.

use serde::Deserialize;

use crate::osc::{is_valid_address, OscArg, OscMessage};

use super::SimError;

/// One already-parsed note-on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MidiEvent {
    pub t_ms: u64,
    /// 1–16, as printed on the instrument.
    pub channel: u8,
    pub note: u8,
    /// 0 means note-off by convention and never fires a rule.
    pub velocity: u8,
}

/// One bridge rule: exact (channel, note) match, templated emission.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MidiBridgeRule {
    pub channel: u8,
    pub note: u8,
    pub emit: MidiEmit,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MidiEmit {
    pub address: String,
    #[serde(default)]
    pub args: Vec<MidiArgTemplate>,
}

/// Argument slot: a literal, or `{"int": "{velocity}"}` to splice the
/// event's velocity in.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MidiArgTemplate {
    Int(IntTemplate),
    Float(f32),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum IntTemplate {
    Literal(i32),
    Placeholder(String),
}

/// Parse and validate a rules document (a JSON list of rules).
pub fn load_midi_rules(document: &[u8]) -> Result<Vec<MidiBridgeRule>, SimError> {
    let rules: Vec<MidiBridgeRule> = serde_json::from_slice(document)?;
    for (index, rule) in rules.iter().enumerate() {
        let fail = |reason: String| Err(SimError::RuleInvalid(format!("rule {index}: {reason}")));
        if !(1..=16).contains(&rule.channel) {
            return fail(format!("channel {} outside 1–16", rule.channel));
        }
        if rule.note > 127 {
            return fail(format!("note {} outside 0–127", rule.note));
        }
        if !is_valid_address(&rule.emit.address) {
            return fail(format!(
                "emit address {:?} is not a valid OSC address",
                rule.emit.address
            ));
        }
        for arg in &rule.emit.args {
            if let MidiArgTemplate::Int(IntTemplate::Placeholder(name)) = arg {
                if name != "{velocity}" {
                    return fail(format!("unknown placeholder {name:?}"));
                }
            }
        }
    }
    Ok(rules)
}

/// Parse an event file: one `t_ms<TAB>channel<TAB>note<TAB>velocity` line
/// per event. Line numbers in errors are 1-based.
pub fn parse_midi_events(text: &str) -> Result<Vec<MidiEvent>, SimError> {
    let mut events = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let fail = || SimError::RuleInvalid(format!("event line {}: bad field", index + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        let [t_ms, channel, note, velocity] = fields[..] else {
            return Err(SimError::RuleInvalid(format!(
                "event line {}: expected 4 tab-separated fields",
                index + 1
            )));
        };
        let event = MidiEvent {
            t_ms: t_ms.parse().map_err(|_| fail())?,
            channel: channel.parse().map_err(|_| fail())?,
            note: note.parse().map_err(|_| fail())?,
            velocity: velocity.parse().map_err(|_| fail())?,
        };
        // Same ranges the rule loader enforces, so a bad file fails at
        // parse time instead of silently matching nothing.
        if !(1..=16).contains(&event.channel) || event.note > 127 || event.velocity > 127 {
            return Err(SimError::RuleInvalid(format!(
                "event line {}: value outside MIDI range",
                index + 1
            )));
        }
        events.push(event);
    }
    Ok(events)
}

/// Run one event through the table: first matching (channel, note) rule
/// wins; velocity 0 is a note-off and emits nothing.
pub fn midi_to_osc(rules: &[MidiBridgeRule], event: &MidiEvent) -> Option<OscMessage> {
    if event.velocity == 0 {
        return None;
    }
    let rule = rules
        .iter()
        .find(|rule| rule.channel == event.channel && rule.note == event.note)?;
    let args = rule
        .emit
        .args
        .iter()
        .map(|template| match template {
            MidiArgTemplate::Int(IntTemplate::Literal(v)) => OscArg::Int(*v),
            MidiArgTemplate::Int(IntTemplate::Placeholder(_)) => OscArg::Int(event.velocity as i32),
            MidiArgTemplate::Float(v) => OscArg::Float(*v),
            MidiArgTemplate::Str(s) => OscArg::Str(s.clone()),
        })
        .collect();
    Some(OscMessage::new(&rule.emit.address, args))
}
