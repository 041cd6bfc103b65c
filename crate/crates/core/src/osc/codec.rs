//! Binary encode/decode for OSC 1.0 packets.
//!
//! Layout is big-endian throughout. Strings are NUL-terminated and padded
//! to a 4-byte boundary; blobs carry a 32-bit count and pad to a 4-byte
//! boundary; every complete packet is a multiple of 4 bytes long.

use super::{
    is_valid_address, OscArg, OscBundle, OscError, OscMessage, OscPacket, DEFAULT_MAX_BUNDLE_DEPTH,
    MAX_DATAGRAM_LEN,
};

const BUNDLE_MAGIC: &[u8; 8] = b"#bundle\0";

// ── Encoding ────────────────────────────────────────────────────

/// Encode one message to wire bytes.
pub fn encode_message(msg: &OscMessage) -> Result<Vec<u8>, OscError> {
    let mut out = Vec::with_capacity(64);
    write_message(&mut out, msg)?;
    if out.len() > MAX_DATAGRAM_LEN {
        return Err(OscError::Oversize(out.len()));
    }
    Ok(out)
}

/// Encode one bundle to wire bytes with the default depth bound.
pub fn encode_bundle(bundle: &OscBundle) -> Result<Vec<u8>, OscError> {
    encode_bundle_with_limit(bundle, DEFAULT_MAX_BUNDLE_DEPTH)
}

/// Encode one bundle, refusing nesting deeper than `max_depth`.
pub fn encode_bundle_with_limit(bundle: &OscBundle, max_depth: usize) -> Result<Vec<u8>, OscError> {
    let mut out = Vec::with_capacity(64);
    write_bundle(&mut out, bundle, 1, max_depth)?;
    if out.len() > MAX_DATAGRAM_LEN {
        return Err(OscError::Oversize(out.len()));
    }
    Ok(out)
}

/// Encode a message or bundle.
pub fn encode_packet(packet: &OscPacket) -> Result<Vec<u8>, OscError> {
    match packet {
        OscPacket::Message(m) => encode_message(m),
        OscPacket::Bundle(b) => encode_bundle(b),
    }
}

fn write_message(out: &mut Vec<u8>, msg: &OscMessage) -> Result<(), OscError> {
    if !is_valid_address(&msg.address) {
        return Err(OscError::InvalidAddress(msg.address.clone()));
    }
    write_padded_str(out, &msg.address)?;

    let mut tags = String::with_capacity(msg.args.len() + 1);
    tags.push(',');
    for arg in &msg.args {
        tags.push(arg.type_tag());
    }
    write_padded_str(out, &tags)?;

    for arg in &msg.args {
        match arg {
            OscArg::Int(v) => out.extend_from_slice(&v.to_be_bytes()),
            OscArg::Float(v) => out.extend_from_slice(&v.to_bits().to_be_bytes()),
            OscArg::Str(s) => write_padded_str(out, s)?,
            OscArg::Blob(b) => {
                if b.len() > i32::MAX as usize {
                    return Err(OscError::OversizeBlob(b.len()));
                }
                out.extend_from_slice(&(b.len() as i32).to_be_bytes());
                out.extend_from_slice(b);
                let pad = (4 - b.len() % 4) % 4;
                out.extend_from_slice(&[0u8; 3][..pad]);
            }
        }
    }
    Ok(())
}

fn write_bundle(
    out: &mut Vec<u8>,
    bundle: &OscBundle,
    depth: usize,
    max_depth: usize,
) -> Result<(), OscError> {
    if depth > max_depth {
        return Err(OscError::DepthExceeded(max_depth));
    }
    out.extend_from_slice(BUNDLE_MAGIC);
    out.extend_from_slice(&bundle.timetag.to_be_bytes());
    for element in &bundle.elements {
        // Reserve the size slot, write the element, then fill it in.
        let size_at = out.len();
        out.extend_from_slice(&[0u8; 4]);
        let start = out.len();
        match element {
            OscPacket::Message(m) => write_message(out, m)?,
            OscPacket::Bundle(b) => write_bundle(out, b, depth + 1, max_depth)?,
        }
        let size = (out.len() - start) as i32;
        out[size_at..size_at + 4].copy_from_slice(&size.to_be_bytes());
    }
    Ok(())
}

/// String content, a NUL terminator, then NULs to the next 4-byte boundary.
fn write_padded_str(out: &mut Vec<u8>, s: &str) -> Result<(), OscError> {
    if s.as_bytes().contains(&0) {
        return Err(OscError::InteriorNul);
    }
    out.extend_from_slice(s.as_bytes());
    let pad = 4 - s.len() % 4;
    out.extend_from_slice(&[0u8; 4][..pad]);
    Ok(())
}

// ── Decoding ────────────────────────────────────────────────────

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], OscError> {
        if self.remaining() < n {
            return Err(OscError::Truncated(what));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn read_i32(&mut self, what: &'static str) -> Result<i32, OscError> {
        let b = self.take(4, what)?;
        Ok(i32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn read_u64(&mut self, what: &'static str) -> Result<u64, OscError> {
        let b = self.take(8, what)?;
        Ok(u64::from_be_bytes(b.try_into().unwrap()))
    }

    /// NUL-terminated string padded to a 4-byte boundary; padding must be NUL.
    fn read_padded_str(&mut self, what: &'static str) -> Result<&'a str, OscError> {
        let start = self.pos;
        let nul = self.buf[start..]
            .iter()
            .position(|&b| b == 0)
            .ok_or(OscError::Truncated(what))?;
        let end = start + nul;
        let padded_end = start + (nul / 4 + 1) * 4;
        if padded_end > self.buf.len() {
            return Err(OscError::Truncated(what));
        }
        if self.buf[end..padded_end].iter().any(|&b| b != 0) {
            return Err(OscError::BadPadding);
        }
        self.pos = padded_end;
        std::str::from_utf8(&self.buf[start..end]).map_err(|_| OscError::Truncated(what))
    }
}

/// Decode one message, consuming the entire buffer.
pub fn decode_message(buf: &[u8]) -> Result<OscMessage, OscError> {
    if !buf.len().is_multiple_of(4) {
        return Err(OscError::BadAlignment(buf.len()));
    }
    let mut r = Reader::new(buf);
    let msg = read_message(&mut r)?;
    if r.remaining() > 0 {
        return Err(OscError::TrailingBytes(r.remaining()));
    }
    Ok(msg)
}

/// Decode one bundle with the default depth bound, consuming the buffer.
pub fn decode_bundle(buf: &[u8]) -> Result<OscBundle, OscError> {
    decode_bundle_with_limit(buf, DEFAULT_MAX_BUNDLE_DEPTH)
}

/// Decode one bundle, refusing nesting deeper than `max_depth`.
pub fn decode_bundle_with_limit(buf: &[u8], max_depth: usize) -> Result<OscBundle, OscError> {
    if !buf.len().is_multiple_of(4) {
        return Err(OscError::BadAlignment(buf.len()));
    }
    let mut r = Reader::new(buf);
    let bundle = read_bundle(&mut r, 1, max_depth)?;
    if r.remaining() > 0 {
        return Err(OscError::TrailingBytes(r.remaining()));
    }
    Ok(bundle)
}

/// Decode a datagram as either a message or a bundle, judged by its first byte.
pub fn decode_packet(buf: &[u8]) -> Result<OscPacket, OscError> {
    if buf.first() == Some(&b'#') {
        decode_bundle(buf).map(OscPacket::Bundle)
    } else {
        decode_message(buf).map(OscPacket::Message)
    }
}

fn read_message(r: &mut Reader<'_>) -> Result<OscMessage, OscError> {
    let address = r.read_padded_str("address")?;
    if !is_valid_address(address) {
        return Err(OscError::InvalidAddress(address.to_string()));
    }
    let address = address.to_string();

    let tags = r.read_padded_str("type tags")?;
    let Some(tags) = tags.strip_prefix(',') else {
        return Err(OscError::Truncated("type tag string"));
    };

    let mut args = Vec::with_capacity(tags.len());
    for tag in tags.chars() {
        let arg = match tag {
            'i' => OscArg::Int(r.read_i32("int argument")?),
            'f' => {
                let bits = r.read_i32("float argument")? as u32;
                OscArg::Float(f32::from_bits(bits))
            }
            's' => OscArg::Str(r.read_padded_str("string argument")?.to_string()),
            'b' => {
                let len = r.read_i32("blob length")?;
                if len < 0 {
                    return Err(OscError::OversizeBlob(len as usize));
                }
                let data = r.take(len as usize, "blob data")?.to_vec();
                let pad = (4 - len as usize % 4) % 4;
                let padding = r.take(pad, "blob padding")?;
                if padding.iter().any(|&b| b != 0) {
                    return Err(OscError::BadPadding);
                }
                OscArg::Blob(data)
            }
            other => return Err(OscError::UnknownTypeTag(other)),
        };
        args.push(arg);
    }
    Ok(OscMessage { address, args })
}

fn read_bundle(r: &mut Reader<'_>, depth: usize, max_depth: usize) -> Result<OscBundle, OscError> {
    if depth > max_depth {
        return Err(OscError::DepthExceeded(max_depth));
    }
    if r.take(8, "bundle magic")? != BUNDLE_MAGIC {
        return Err(OscError::BadMagic);
    }
    let timetag = r.read_u64("timetag")?;
    let mut elements = Vec::new();
    while r.remaining() > 0 {
        let size = r.read_i32("element size")?;
        if size < 0 || size % 4 != 0 {
            return Err(OscError::BadAlignment(size.max(0) as usize));
        }
        let body = r.take(size as usize, "bundle element")?;
        let mut inner = Reader::new(body);
        let element = if body.first() == Some(&b'#') {
            OscPacket::Bundle(read_bundle(&mut inner, depth + 1, max_depth)?)
        } else {
            OscPacket::Message(read_message(&mut inner)?)
        };
        if inner.remaining() > 0 {
            return Err(OscError::TrailingBytes(inner.remaining()));
        }
        elements.push(element);
    }
    Ok(OscBundle { timetag, elements })
}
