//! Datagram traces: the capture/replay text format.
//!
//! One packet per line, `t_ms<TAB>direction<TAB>hex(payload)`, timestamps
//! as offsets from trace start and never decreasing. Text with lowercase
//! hex rather than anything binary so that golden traces diff cleanly in
//! review and survive any platform's line tooling.

use std::io::{self, Write};

use thiserror::Error;

/// Which way the datagram crossed the capture point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    fn as_str(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
        }
    }
}

/// One captured datagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracePacket {
    pub t_ms: u64,
    pub direction: Direction,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("trace line {line}: timestamp decreases")]
    NonMonotonic { line: usize },
    #[error("trace write failed: {0}")]
    Io(#[from] io::Error),
}

/// Render one packet as its trace line (no newline).
pub fn format_line(packet: &TracePacket) -> String {
    format!(
        "{}\t{}\t{}",
        packet.t_ms,
        packet.direction.as_str(),
        hex::encode(&packet.payload)
    )
}

/// Parse a whole trace document, enforcing the timestamp order invariant.
/// Line numbers in errors are 1-based.
pub fn parse_trace(text: &str) -> Result<Vec<TracePacket>, TraceError> {
    let mut packets = Vec::new();
    let mut previous_t: Option<u64> = None;
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        let fail = |reason: &str| TraceError::ParseError {
            line: line_no,
            reason: reason.to_string(),
        };
        let mut fields = line.split('\t');
        let (Some(t_field), Some(dir_field), Some(hex_field), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(fail("expected exactly 3 tab-separated fields"));
        };
        let t_ms: u64 = t_field
            .parse()
            .map_err(|_| fail("timestamp is not an unsigned integer"))?;
        let direction = match dir_field {
            "in" => Direction::In,
            "out" => Direction::Out,
            _ => return Err(fail("direction must be \"in\" or \"out\"")),
        };
        let payload = hex::decode(hex_field).map_err(|_| fail("payload is not valid hex"))?;
        if previous_t.is_some_and(|prev| t_ms < prev) {
            return Err(TraceError::NonMonotonic { line: line_no });
        }
        previous_t = Some(t_ms);
        packets.push(TracePacket {
            t_ms,
            direction,
            payload,
        });
    }
    Ok(packets)
}

/// Incremental writer for live capture; flushes after every line so a
/// trace survives an interrupted session.
pub struct TraceWriter<W: Write> {
    sink: W,
    last_t: Option<u64>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(sink: W) -> Self {
        Self { sink, last_t: None }
    }

    pub fn append(&mut self, packet: &TracePacket) -> Result<(), TraceError> {
        if self.last_t.is_some_and(|prev| packet.t_ms < prev) {
            return Err(TraceError::NonMonotonic { line: 0 });
        }
        self.last_t = Some(packet.t_ms);
        writeln!(self.sink, "{}", format_line(packet))?;
        self.sink.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}
