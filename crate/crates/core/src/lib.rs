//! stagewire: a networked-performance interconnect toolkit.
//!
//! The pieces mirror a small show rig: an OSC wire codec ([`osc`]), a TUIO
//! 2Dobj surface layer ([`tuio`]), a heartbeat detector over opacity samples
//! ([`pulse`]), a broadcast message bus with a deterministic simulated
//! network ([`bus`]), a declarative cue engine ([`cue`]), software stand-ins
//! for the hardware devices ([`device_sim`]), and a diffable datagram trace
//! format ([`trace`]). The `stagewire` binary ties them into runnable
//! pipelines: sniff, replay, detect, simulate, route, relay.

pub mod bus;
pub mod cue;
pub mod device_sim;
pub mod osc;
pub mod pulse;
pub mod trace;
pub mod tuio;

pub use osc::{OscArg, OscBundle, OscError, OscMessage, OscPacket};
