//! C ABI over the stagewire library, for embedding in show-control hosts
//! that are not written in Rust (Max/MSP externals, Pure Data, C++ media
//! engines).
//!
//! Conventions, uniform across the surface:
//! - Every fallible call returns [`SwStatus`]; out-parameters are written
//!   only on `SW_STATUS_OK` unless documented otherwise.
//! - Handles (`SwMessage`, `SwDetector`, `SwTracker`) are opaque, created
//!   by `_new`/`_decode` and released by the matching `_free`, which
//!   accepts NULL.
//! - String outputs copy into a caller buffer and always NUL-terminate
//!   when the capacity is nonzero; `needed` receives the full length
//!   excluding the NUL, so `needed + 1` bytes always suffice.
//! - Nothing here panics: every input error maps to a status code.

use std::ffi::{c_char, CStr};
use std::ptr;

use stagewire::osc::{decode_packet, encode_message, match_address};
use stagewire::pulse::{Detector, DetectorConfig, PulseSample};
use stagewire::tuio::{parse_2dobj_bundle, EventKind, Tracker};
use stagewire::{OscArg, OscMessage, OscPacket};

/// Result of every fallible call in this API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwStatus {
    /// The call succeeded and all out-parameters are valid.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument value violated the documented contract.
    InvalidArgument = 3,
    /// The argument at this index holds a different type.
    TypeMismatch = 4,
    /// An index was past the end of the collection.
    OutOfRange = 5,
    /// The caller buffer is too small; `needed` holds the full size.
    BufferTooSmall = 6,
    /// The bytes do not decode as the expected OSC unit.
    ParseFailed = 7,
    /// The value cannot be encoded to the wire.
    EncodeFailed = 8,
    /// The bundle decoded, but is not a TUIO 2Dobj frame.
    NotTuio = 9,
    /// A sample timestamp did not advance past its predecessor.
    NonMonotonicTime = 10,
    /// A configuration field is out of its legal range.
    BadConfig = 11,
}

/// A static description of a status code, for logs. Never NULL.
#[no_mangle]
pub extern "C" fn sw_status_describe(status: SwStatus) -> *const c_char {
    let text: &'static CStr = match status {
        SwStatus::Ok => c"ok",
        SwStatus::NullArgument => c"required pointer was NULL",
        SwStatus::InvalidUtf8 => c"string was not valid UTF-8",
        SwStatus::InvalidArgument => c"argument violated its contract",
        SwStatus::TypeMismatch => c"argument holds a different type",
        SwStatus::OutOfRange => c"index out of range",
        SwStatus::BufferTooSmall => c"buffer too small; see needed",
        SwStatus::ParseFailed => c"bytes did not decode",
        SwStatus::EncodeFailed => c"value cannot be encoded",
        SwStatus::NotTuio => c"bundle is not a TUIO 2Dobj frame",
        SwStatus::NonMonotonicTime => c"timestamp did not advance",
        SwStatus::BadConfig => c"configuration out of range",
    };
    text.as_ptr()
}

/// Copy `source` into a C string buffer per the API's buffer convention.
fn copy_out(source: &[u8], buf: *mut c_char, cap: usize, needed: *mut usize) -> SwStatus {
    if !needed.is_null() {
        unsafe { *needed = source.len() };
    }
    if buf.is_null() {
        // Size query: asking for the length alone is legal.
        return if cap == 0 {
            SwStatus::Ok
        } else {
            SwStatus::NullArgument
        };
    }
    if cap == 0 || source.len() + 1 > cap {
        return SwStatus::BufferTooSmall;
    }
    unsafe {
        ptr::copy_nonoverlapping(source.as_ptr(), buf.cast::<u8>(), source.len());
        *buf.add(source.len()) = 0;
    }
    SwStatus::Ok
}

unsafe fn read_c_str<'a>(ptr: *const c_char) -> Result<&'a str, SwStatus> {
    if ptr.is_null() {
        return Err(SwStatus::NullArgument);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| SwStatus::InvalidUtf8)
}

// ── OSC messages ────────────────────────────────────────────────

/// An OSC message being built or inspected. Opaque.
pub struct SwMessage {
    inner: OscMessage,
}

/// Create a message with the given '/'-rooted address and no arguments.
///
/// # Safety
/// `address` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_message_new(
    address: *const c_char,
    out: *mut *mut SwMessage,
) -> SwStatus {
    if out.is_null() {
        return SwStatus::NullArgument;
    }
    let address = match read_c_str(address) {
        Ok(s) => s,
        Err(status) => return status,
    };
    if !stagewire::osc::is_valid_address(address) {
        return SwStatus::InvalidArgument;
    }
    *out = Box::into_raw(Box::new(SwMessage {
        inner: OscMessage::new(address, Vec::new()),
    }));
    SwStatus::Ok
}

/// Release a message handle. NULL is a no-op.
///
/// # Safety
/// `msg` must be a handle from this API, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sw_message_free(msg: *mut SwMessage) {
    if !msg.is_null() {
        drop(Box::from_raw(msg));
    }
}

unsafe fn push_arg(msg: *mut SwMessage, arg: OscArg) -> SwStatus {
    let Some(msg) = msg.as_mut() else {
        return SwStatus::NullArgument;
    };
    msg.inner.args.push(arg);
    SwStatus::Ok
}

/// Append a 32-bit integer argument.
///
/// # Safety
/// `msg` must be a live handle from this API.
#[no_mangle]
pub unsafe extern "C" fn sw_message_add_int(msg: *mut SwMessage, value: i32) -> SwStatus {
    push_arg(msg, OscArg::Int(value))
}

/// Append a 32-bit float argument.
///
/// # Safety
/// `msg` must be a live handle from this API.
#[no_mangle]
pub unsafe extern "C" fn sw_message_add_float(msg: *mut SwMessage, value: f32) -> SwStatus {
    push_arg(msg, OscArg::Float(value))
}

/// Append a string argument.
///
/// # Safety
/// `msg` must be a live handle; `value` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sw_message_add_str(msg: *mut SwMessage, value: *const c_char) -> SwStatus {
    let value = match read_c_str(value) {
        Ok(s) => s.to_owned(),
        Err(status) => return status,
    };
    push_arg(msg, OscArg::Str(value))
}

/// Append a blob argument. `bytes` may be NULL only when `len` is 0.
///
/// # Safety
/// `msg` must be a live handle; `bytes` must point to `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn sw_message_add_blob(
    msg: *mut SwMessage,
    bytes: *const u8,
    len: usize,
) -> SwStatus {
    let blob = if len == 0 {
        Vec::new()
    } else if bytes.is_null() {
        return SwStatus::NullArgument;
    } else {
        std::slice::from_raw_parts(bytes, len).to_vec()
    };
    push_arg(msg, OscArg::Blob(blob))
}

/// Encode the message to OSC wire bytes.
///
/// On `SW_STATUS_BUFFER_TOO_SMALL`, `written` holds the size required.
///
/// # Safety
/// `msg` must be a live handle; `buf` must hold `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sw_message_encode(
    msg: *const SwMessage,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
) -> SwStatus {
    let Some(msg) = msg.as_ref() else {
        return SwStatus::NullArgument;
    };
    let Ok(bytes) = encode_message(&msg.inner) else {
        return SwStatus::EncodeFailed;
    };
    if !written.is_null() {
        *written = bytes.len();
    }
    if buf.is_null() {
        return if cap == 0 {
            SwStatus::Ok
        } else {
            SwStatus::NullArgument
        };
    }
    if bytes.len() > cap {
        return SwStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
    SwStatus::Ok
}

/// Decode one datagram as an OSC message (not a bundle).
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_message_decode(
    bytes: *const u8,
    len: usize,
    out: *mut *mut SwMessage,
) -> SwStatus {
    if bytes.is_null() || out.is_null() {
        return SwStatus::NullArgument;
    }
    let buf = std::slice::from_raw_parts(bytes, len);
    match decode_packet(buf) {
        Ok(OscPacket::Message(inner)) => {
            *out = Box::into_raw(Box::new(SwMessage { inner }));
            SwStatus::Ok
        }
        Ok(OscPacket::Bundle(_)) | Err(_) => SwStatus::ParseFailed,
    }
}

/// Copy the message's address into `buf`.
///
/// # Safety
/// `msg` must be a live handle; `buf`/`needed` per the buffer convention.
#[no_mangle]
pub unsafe extern "C" fn sw_message_address(
    msg: *const SwMessage,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> SwStatus {
    let Some(msg) = msg.as_ref() else {
        return SwStatus::NullArgument;
    };
    copy_out(msg.inner.address.as_bytes(), buf, cap, needed)
}

/// Number of arguments; 0 for a NULL handle.
///
/// # Safety
/// `msg` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sw_message_arg_count(msg: *const SwMessage) -> usize {
    msg.as_ref().map_or(0, |m| m.inner.args.len())
}

/// The OSC type tag ('i', 'f', 's', or 'b') of the argument at `index`.
///
/// # Safety
/// `msg` must be a live handle; `tag` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_message_arg_tag(
    msg: *const SwMessage,
    index: usize,
    tag: *mut c_char,
) -> SwStatus {
    let Some(msg) = msg.as_ref() else {
        return SwStatus::NullArgument;
    };
    if tag.is_null() {
        return SwStatus::NullArgument;
    }
    let Some(arg) = msg.inner.args.get(index) else {
        return SwStatus::OutOfRange;
    };
    *tag = arg.type_tag() as c_char;
    SwStatus::Ok
}

/// Read the integer argument at `index`.
///
/// # Safety
/// `msg` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_message_arg_int(
    msg: *const SwMessage,
    index: usize,
    value: *mut i32,
) -> SwStatus {
    let Some(msg) = msg.as_ref() else {
        return SwStatus::NullArgument;
    };
    if value.is_null() {
        return SwStatus::NullArgument;
    }
    match msg.inner.args.get(index) {
        Some(OscArg::Int(v)) => {
            *value = *v;
            SwStatus::Ok
        }
        Some(_) => SwStatus::TypeMismatch,
        None => SwStatus::OutOfRange,
    }
}

/// Read the float argument at `index`.
///
/// # Safety
/// `msg` must be a live handle; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_message_arg_float(
    msg: *const SwMessage,
    index: usize,
    value: *mut f32,
) -> SwStatus {
    let Some(msg) = msg.as_ref() else {
        return SwStatus::NullArgument;
    };
    if value.is_null() {
        return SwStatus::NullArgument;
    }
    match msg.inner.args.get(index) {
        Some(OscArg::Float(v)) => {
            *value = *v;
            SwStatus::Ok
        }
        Some(_) => SwStatus::TypeMismatch,
        None => SwStatus::OutOfRange,
    }
}

/// Copy the string argument at `index` into `buf`.
///
/// # Safety
/// `msg` must be a live handle; `buf`/`needed` per the buffer convention.
#[no_mangle]
pub unsafe extern "C" fn sw_message_arg_str(
    msg: *const SwMessage,
    index: usize,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> SwStatus {
    let Some(msg) = msg.as_ref() else {
        return SwStatus::NullArgument;
    };
    match msg.inner.args.get(index) {
        Some(OscArg::Str(v)) => copy_out(v.as_bytes(), buf, cap, needed),
        Some(_) => SwStatus::TypeMismatch,
        None => SwStatus::OutOfRange,
    }
}

/// Copy the blob argument at `index` into `buf` (no NUL terminator).
///
/// On `SW_STATUS_BUFFER_TOO_SMALL`, `needed` holds the blob's size.
///
/// # Safety
/// `msg` must be a live handle; `buf` must hold `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sw_message_arg_blob(
    msg: *const SwMessage,
    index: usize,
    buf: *mut u8,
    cap: usize,
    needed: *mut usize,
) -> SwStatus {
    let Some(msg) = msg.as_ref() else {
        return SwStatus::NullArgument;
    };
    let blob = match msg.inner.args.get(index) {
        Some(OscArg::Blob(v)) => v,
        Some(_) => return SwStatus::TypeMismatch,
        None => return SwStatus::OutOfRange,
    };
    if !needed.is_null() {
        *needed = blob.len();
    }
    if buf.is_null() {
        return if cap == 0 {
            SwStatus::Ok
        } else {
            SwStatus::NullArgument
        };
    }
    if blob.len() > cap {
        return SwStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(blob.as_ptr(), buf, blob.len());
    SwStatus::Ok
}

// ── Address pattern matching ────────────────────────────────────

/// Match an OSC 1.0 address pattern against a concrete address.
///
/// Malformed patterns return `SW_STATUS_INVALID_ARGUMENT`.
///
/// # Safety
/// `pattern` and `address` must be NUL-terminated strings; `matched`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_pattern_match(
    pattern: *const c_char,
    address: *const c_char,
    matched: *mut bool,
) -> SwStatus {
    if matched.is_null() {
        return SwStatus::NullArgument;
    }
    let pattern = match read_c_str(pattern) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let address = match read_c_str(address) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match match_address(pattern, address) {
        Ok(result) => {
            *matched = result;
            SwStatus::Ok
        }
        Err(_) => SwStatus::InvalidArgument,
    }
}

// ── Heartbeat detector ──────────────────────────────────────────

/// Detector tuning; obtain defaults from `sw_detector_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SwDetectorConfig {
    /// Nominal samples per second.
    pub sample_rate_hz: f64,
    /// Span of the windowed delta, in ms.
    pub window_ms: u64,
    /// Trigger threshold as a multiple of the baseline.
    pub gain: f64,
    /// Baseline EMA half-life, in ms.
    pub baseline_halflife_ms: u64,
    /// Dead time after a beat, in ms.
    pub refractory_ms: u64,
    /// Settling time before the first beat can fire, in ms.
    pub warmup_ms: u64,
    /// Absolute threshold floor; 0 preserves scale invariance.
    pub threshold_floor: f64,
    /// Negate samples for sensors that read beats as drops.
    pub invert: bool,
}

impl From<SwDetectorConfig> for DetectorConfig {
    fn from(c: SwDetectorConfig) -> Self {
        DetectorConfig {
            sample_rate_hz: c.sample_rate_hz,
            window_ms: c.window_ms,
            gain: c.gain,
            baseline_halflife_ms: c.baseline_halflife_ms,
            refractory_ms: c.refractory_ms,
            warmup_ms: c.warmup_ms,
            threshold_floor: c.threshold_floor,
            invert: c.invert,
        }
    }
}

/// One detected beat.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SwHeartbeat {
    /// Timestamp of the triggering sample, in stream ms.
    pub t_ms: u64,
    /// Windowed delta at the trigger; grows with pulse amplitude.
    pub strength: f64,
}

/// A running heartbeat detector. Opaque.
pub struct SwDetector {
    inner: Detector,
}

/// Fill `out` with the defaults that need no per-performer calibration.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_detector_config_default(out: *mut SwDetectorConfig) -> SwStatus {
    if out.is_null() {
        return SwStatus::NullArgument;
    }
    let d = DetectorConfig::default();
    *out = SwDetectorConfig {
        sample_rate_hz: d.sample_rate_hz,
        window_ms: d.window_ms,
        gain: d.gain,
        baseline_halflife_ms: d.baseline_halflife_ms,
        refractory_ms: d.refractory_ms,
        warmup_ms: d.warmup_ms,
        threshold_floor: d.threshold_floor,
        invert: d.invert,
    };
    SwStatus::Ok
}

/// Create a detector from `config` (NULL means defaults).
///
/// # Safety
/// `out` must be writable; `config` must be NULL or point to a valid
/// configuration struct.
#[no_mangle]
pub unsafe extern "C" fn sw_detector_new(
    config: *const SwDetectorConfig,
    out: *mut *mut SwDetector,
) -> SwStatus {
    if out.is_null() {
        return SwStatus::NullArgument;
    }
    let config = config
        .as_ref()
        .map_or_else(DetectorConfig::default, |&c| c.into());
    match Detector::new(config) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(SwDetector { inner }));
            SwStatus::Ok
        }
        Err(_) => SwStatus::BadConfig,
    }
}

/// Release a detector handle. NULL is a no-op.
///
/// # Safety
/// `detector` must be a handle from this API, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sw_detector_free(detector: *mut SwDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Feed one sample. `*fired` reports whether a beat triggered, and when
/// it did, `*beat` (if non-NULL) receives the event.
///
/// Timestamps must strictly increase across calls.
///
/// # Safety
/// `detector` must be a live handle; `fired` must be writable; `beat`
/// must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sw_detector_process(
    detector: *mut SwDetector,
    t_ms: u64,
    value: f64,
    beat: *mut SwHeartbeat,
    fired: *mut bool,
) -> SwStatus {
    let Some(detector) = detector.as_mut() else {
        return SwStatus::NullArgument;
    };
    if fired.is_null() {
        return SwStatus::NullArgument;
    }
    match detector
        .inner
        .process_sample(PulseSample { t: t_ms, value })
    {
        Ok(Some(event)) => {
            *fired = true;
            if !beat.is_null() {
                *beat = SwHeartbeat {
                    t_ms: event.t,
                    strength: event.strength,
                };
            }
            SwStatus::Ok
        }
        Ok(None) => {
            *fired = false;
            SwStatus::Ok
        }
        Err(_) => SwStatus::NonMonotonicTime,
    }
}

// ── TUIO fiducial tracker ───────────────────────────────────────

/// What happened to one session between consecutive frames.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwEventKind {
    Add = 0,
    Update = 1,
    Remove = 2,
}

/// One tracker event, flattened for C. For removes, the pose fields hold
/// the last state seen before lift-off.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SwSurfaceEvent {
    pub kind: SwEventKind,
    /// fseq of the frame that produced this event.
    pub frame: i32,
    pub session_id: i32,
    pub class_id: i32,
    pub x: f32,
    pub y: f32,
    /// Radians in [0, 2π).
    pub angle: f32,
    pub vel_x: f32,
    pub vel_y: f32,
    pub vel_rot: f32,
    pub accel_motion: f32,
    pub accel_rot: f32,
}

/// A stateful fiducial tracker. Opaque.
pub struct SwTracker {
    inner: Tracker,
}

/// Create an empty tracker.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sw_tracker_new(out: *mut *mut SwTracker) -> SwStatus {
    if out.is_null() {
        return SwStatus::NullArgument;
    }
    *out = Box::into_raw(Box::new(SwTracker {
        inner: Tracker::new(),
    }));
    SwStatus::Ok
}

/// Release a tracker handle. NULL is a no-op.
///
/// # Safety
/// `tracker` must be a handle from this API, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sw_tracker_free(tracker: *mut SwTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

/// Feed one raw datagram that should contain a TUIO 2Dobj bundle.
///
/// Up to `capacity` events are written to `events`; `*count` always
/// receives the number produced. When more events were produced than
/// fit, the overflow is dropped and `SW_STATUS_BUFFER_TOO_SMALL` is
/// returned after the tracker state has still advanced; 16 slots cover
/// any frame of at most 8 concurrent sessions. Stale or keep-alive
/// frames succeed with `*count == 0`.
///
/// # Safety
/// `tracker` must be a live handle; `datagram` must point to `len`
/// bytes; `events` must hold `capacity` writable slots; `count` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sw_tracker_feed(
    tracker: *mut SwTracker,
    datagram: *const u8,
    len: usize,
    events: *mut SwSurfaceEvent,
    capacity: usize,
    count: *mut usize,
) -> SwStatus {
    let Some(tracker) = tracker.as_mut() else {
        return SwStatus::NullArgument;
    };
    if datagram.is_null() || count.is_null() || (events.is_null() && capacity > 0) {
        return SwStatus::NullArgument;
    }
    let buf = std::slice::from_raw_parts(datagram, len);
    let bundle = match decode_packet(buf) {
        Ok(OscPacket::Bundle(bundle)) => bundle,
        Ok(OscPacket::Message(_)) => return SwStatus::NotTuio,
        Err(_) => return SwStatus::ParseFailed,
    };
    let frame = match parse_2dobj_bundle(&bundle) {
        Ok(frame) => frame,
        Err(_) => return SwStatus::NotTuio,
    };
    let produced = tracker.inner.apply_frame(&frame);
    *count = produced.len();
    for (slot, event) in produced.iter().take(capacity).enumerate() {
        let s = event.state;
        *events.add(slot) = SwSurfaceEvent {
            kind: match event.kind {
                EventKind::Add => SwEventKind::Add,
                EventKind::Update => SwEventKind::Update,
                EventKind::Remove => SwEventKind::Remove,
            },
            frame: event.frame,
            session_id: s.session_id,
            class_id: s.class_id,
            x: s.x,
            y: s.y,
            angle: s.angle,
            vel_x: s.vel_x,
            vel_y: s.vel_y,
            vel_rot: s.vel_rot,
            accel_motion: s.accel_motion,
            accel_rot: s.accel_rot,
        };
    }
    if produced.len() > capacity {
        SwStatus::BufferTooSmall
    } else {
        SwStatus::Ok
    }
}

/// Number of sessions currently on the surface; 0 for a NULL handle.
///
/// # Safety
/// `tracker` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn sw_tracker_session_count(tracker: *const SwTracker) -> usize {
    tracker.as_ref().map_or(0, |t| t.inner.session_count())
}
