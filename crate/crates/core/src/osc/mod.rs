//! OSC 1.0 wire protocol: typed messages, bundles, a bit-exact codec, and
//! address pattern matching.
//!
//! Supported argument types are exactly `i` (int32), `f` (float32), `s`
//! (string) and `b` (blob). Anything else is a decode error: a show rig
//! should fail loudly on traffic it does not understand rather than guess.

mod codec;
mod pattern;

pub use codec::{
    decode_bundle, decode_bundle_with_limit, decode_message, decode_packet, encode_bundle,
    encode_bundle_with_limit, encode_message, encode_packet,
};
pub use pattern::{match_address, validate_pattern};

use thiserror::Error;

/// Largest datagram the codec will produce or a UDP socket can carry
/// (65535 minus IP and UDP headers).
pub const MAX_DATAGRAM_LEN: usize = 65507;

/// Default bundle nesting bound. Encode and decode both refuse anything
/// deeper.
pub const DEFAULT_MAX_BUNDLE_DEPTH: usize = 8;

/// Timetag value meaning "deliver immediately".
pub const TIMETAG_IMMEDIATE: u64 = 1;

/// One OSC argument.
///
/// `Float` compares bitwise so that round-trip equality holds for every
/// encodable value, including NaNs and negative zero.
#[derive(Debug, Clone)]
pub enum OscArg {
    /// 32-bit signed integer, tag `i`.
    Int(i32),
    /// 32-bit IEEE-754 float, tag `f`.
    Float(f32),
    /// UTF-8 text with no interior NUL, tag `s`.
    Str(String),
    /// Raw bytes, tag `b`.
    Blob(Vec<u8>),
}

impl OscArg {
    /// The OSC type tag character for this argument.
    pub fn type_tag(&self) -> char {
        match self {
            OscArg::Int(_) => 'i',
            OscArg::Float(_) => 'f',
            OscArg::Str(_) => 's',
            OscArg::Blob(_) => 'b',
        }
    }

    /// Numeric view used by placeholder substitution and sample extraction.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            OscArg::Int(v) => Some(f64::from(*v)),
            OscArg::Float(v) => Some(f64::from(*v)),
            _ => None,
        }
    }
}

impl PartialEq for OscArg {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (OscArg::Int(a), OscArg::Int(b)) => a == b,
            (OscArg::Float(a), OscArg::Float(b)) => a.to_bits() == b.to_bits(),
            (OscArg::Str(a), OscArg::Str(b)) => a == b,
            (OscArg::Blob(a), OscArg::Blob(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for OscArg {}

/// One OSC message: a '/'-rooted address plus ordered arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OscMessage {
    pub address: String,
    pub args: Vec<OscArg>,
}

impl OscMessage {
    pub fn new(address: impl Into<String>, args: Vec<OscArg>) -> Self {
        Self {
            address: address.into(),
            args,
        }
    }
}

/// An OSC bundle: a timetag plus nested messages and bundles.
///
/// Timetags are carried verbatim but never scheduled; receivers in this
/// toolkit act on bundle contents as soon as they decode them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OscBundle {
    /// 64-bit fixed-point NTP time (seconds:fraction); 1 means immediately.
    pub timetag: u64,
    pub elements: Vec<OscPacket>,
}

impl OscBundle {
    /// Bundle marked for immediate delivery.
    pub fn immediate(elements: Vec<OscPacket>) -> Self {
        Self {
            timetag: TIMETAG_IMMEDIATE,
            elements,
        }
    }
}

/// Either unit that can travel in one datagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OscPacket {
    Message(OscMessage),
    Bundle(OscBundle),
}

/// Codec failures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OscError {
    #[error("invalid address {0:?}: must start with '/' and contain no NUL or whitespace")]
    InvalidAddress(String),
    #[error("blob of {0} bytes exceeds the 32-bit signed length limit")]
    OversizeBlob(usize),
    #[error("encoded packet of {0} bytes exceeds the {MAX_DATAGRAM_LEN}-byte datagram limit")]
    Oversize(usize),
    #[error("buffer length {0} is not a multiple of 4")]
    BadAlignment(usize),
    #[error("buffer truncated while reading {0}")]
    Truncated(&'static str),
    #[error("unknown type tag {0:?}: only i, f, s, b are supported")]
    UnknownTypeTag(char),
    #[error("{0} trailing bytes after the last argument")]
    TrailingBytes(usize),
    #[error("string padding contains non-NUL bytes")]
    BadPadding,
    #[error("string argument contains interior NUL")]
    InteriorNul,
    #[error("bundle nesting exceeds the depth limit of {0}")]
    DepthExceeded(usize),
    #[error("expected \"#bundle\" magic")]
    BadMagic,
}

/// Address pattern failures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("malformed pattern: {0}")]
    Malformed(&'static str),
}

/// True when `address` satisfies the OscMessage address invariants.
pub fn is_valid_address(address: &str) -> bool {
    address.starts_with('/')
        && !address.is_empty()
        && !address.contains('\0')
        && !address.contains(char::is_whitespace)
}
