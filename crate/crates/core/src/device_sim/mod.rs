//! Software stand-ins for the show hardware.
//!
//! Three generators: [`run_choreography`] turns a scripted sequence of
//! place/move/lift actions into the TUIO frame stream a camera tracker
//! would emit, [`synth_ppg`] produces pulse-sensor waveforms with known
//! beat times for detector testing, and [`midi_to_osc`] maps percussion
//! hits to OSC messages the way a patch bay would. All three are pure
//! functions of their inputs (plus a seed), so every downstream test can
//! hold a ground truth.

mod choreography;
mod midi;
mod ppg;

pub use choreography::{
    load_script, run_choreography, Action, ChoreographyScript, DEFAULT_FRAME_RATE_HZ,
};
pub use midi::{load_midi_rules, midi_to_osc, parse_midi_events, MidiBridgeRule, MidiEvent};
pub use ppg::{noise_rms_for_snr_db, synth_ppg, PpgParams, PpgSignal};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("choreography script invalid: {0}")]
    ScriptInvalid(String),
    #[error("bad generator parameters: {0}")]
    BadParams(&'static str),
    #[error("MIDI bridge rule invalid: {0}")]
    RuleInvalid(String),
    #[error("document is not valid JSON: {0}")]
    BadDocument(#[from] serde_json::Error),
}
