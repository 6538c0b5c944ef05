//! Reading and writing event streams.
//!
//! Two encodings are supported:
//!
//! * text: a header line `ee3p-csv v1 <width> <height>` followed by one
//!   `x,y,t,p` line per event;
//! * binary: `EE3P`, version byte `1`, `u16` width, `u16` height, `u64`
//!   event count, then 15-byte records of `u16 x`, `u16 y`, `u64 t`, `i8 p`
//!   and two zero padding bytes. All integers are little-endian.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, SensorGeometry};

pub const BINARY_MAGIC: &[u8; 4] = b"EE3P";
pub const BINARY_VERSION: u8 = 1;
pub const BINARY_HEADER_LEN: usize = 17;
pub const BINARY_RECORD_LEN: usize = 15;
pub const TEXT_MAGIC: &str = "ee3p-csv";
pub const TEXT_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Auto,
    Text,
    Binary,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Format::Auto),
            "text" | "csv" => Ok(Format::Text),
            "binary" | "bin" => Ok(Format::Binary),
            other => Err(Error::parameter(
                "format",
                format!("unknown format {other:?} (expected auto, text or binary)"),
            )),
        }
    }
}

/// Picks a concrete format from the first bytes of a source.
pub fn detect_format(bytes: &[u8]) -> Result<Format> {
    if bytes.starts_with(BINARY_MAGIC) {
        Ok(Format::Binary)
    } else if bytes.starts_with(TEXT_MAGIC.as_bytes()) {
        Ok(Format::Text)
    } else {
        Err(Error::MalformedHeader(
            "neither EE3P magic nor ee3p-csv header".into(),
        ))
    }
}

pub fn read_stream<R: Read>(mut source: R, format: Format) -> Result<EventStream> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    decode(&bytes, format)
}

pub fn read_path(path: impl AsRef<Path>, format: Format) -> Result<EventStream> {
    let bytes = fs::read(path)?;
    decode(&bytes, format)
}

pub fn decode(bytes: &[u8], format: Format) -> Result<EventStream> {
    let format = match format {
        Format::Auto => detect_format(bytes)?,
        f => f,
    };
    match format {
        Format::Binary => decode_binary(bytes),
        Format::Text => {
            let text = std::str::from_utf8(bytes)
                .map_err(|e| Error::MalformedHeader(format!("text input is not UTF-8: {e}")))?;
            decode_text(text)
        }
        Format::Auto => unreachable!(),
    }
}

pub fn write_stream<W: Write>(stream: &EventStream, format: Format, mut sink: W) -> Result<()> {
    let bytes = encode(stream, format)?;
    sink.write_all(&bytes)?;
    Ok(())
}

pub fn write_path(stream: &EventStream, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(stream, format)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Serializes a stream. `Format::Auto` writes binary.
pub fn encode(stream: &EventStream, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Text => Ok(encode_text(stream).into_bytes()),
        Format::Binary | Format::Auto => encode_binary(stream),
    }
}

/// Tracks per-record invariants shared by both decoders.
struct RecordChecker {
    geometry: SensorGeometry,
    previous: Option<u64>,
}

impl RecordChecker {
    fn check(&mut self, record: usize, e: &Event) -> Result<()> {
        if let Some(previous) = self.previous {
            if e.t < previous {
                return Err(Error::TimestampRegression {
                    record,
                    previous,
                    current: e.t,
                });
            }
        }
        if !self.geometry.contains(e.x, e.y) {
            return Err(Error::EventOutOfBounds {
                record,
                x: e.x,
                y: e.y,
                width: self.geometry.width,
                height: self.geometry.height,
            });
        }
        self.previous = Some(e.t);
        Ok(())
    }
}

fn decode_text(text: &str) -> Result<EventStream> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedHeader("empty input".into()))?;
    let geometry = parse_text_header(header)?;
    let mut checker = RecordChecker {
        geometry,
        previous: None,
    };
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let record = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let e = parse_text_record(record, line)?;
        checker.check(record, &e)?;
        events.push(e);
    }
    Ok(EventStream::new(geometry, events))
}

fn parse_text_header(header: &str) -> Result<SensorGeometry> {
    let fields: Vec<&str> = header.split_whitespace().collect();
    match fields.as_slice() {
        [magic, version, w, h] if *magic == TEXT_MAGIC && *version == TEXT_VERSION => {
            let parse = |s: &str| {
                s.parse::<u32>()
                    .map_err(|_| Error::MalformedHeader(format!("bad dimension {s:?}")))
            };
            let (width, height) = (parse(w)?, parse(h)?);
            SensorGeometry::new(width, height).map_err(|_| {
                Error::MalformedHeader(format!("geometry {width}x{height} has a zero dimension"))
            })
        }
        _ => Err(Error::MalformedHeader(format!(
            "expected \"{TEXT_MAGIC} {TEXT_VERSION} <width> <height>\", got {header:?}"
        ))),
    }
}

fn parse_text_record(record: usize, line: &str) -> Result<Event> {
    let malformed = |message: String| Error::MalformedRecord { record, message };
    let mut parts = line.split(',');
    let mut next = |name: &str| {
        parts
            .next()
            .map(str::trim)
            .ok_or_else(|| malformed(format!("missing field {name}")))
    };
    let x = next("x")?;
    let y = next("y")?;
    let t = next("t")?;
    let p = next("p")?;
    if parts.next().is_some() {
        return Err(malformed("expected 4 fields".into()));
    }
    let x = x
        .parse::<u32>()
        .map_err(|_| malformed(format!("bad x {x:?}")))?;
    let y = y
        .parse::<u32>()
        .map_err(|_| malformed(format!("bad y {y:?}")))?;
    let t = t
        .parse::<u64>()
        .map_err(|_| malformed(format!("bad timestamp {t:?}")))?;
    let p_raw = p
        .parse::<i64>()
        .map_err(|_| malformed(format!("bad polarity {p:?}")))?;
    let p = i8::try_from(p_raw)
        .ok()
        .and_then(Polarity::from_i8)
        .ok_or(Error::InvalidPolarity {
            record,
            value: p_raw,
        })?;
    Ok(Event { x, y, t, p })
}

fn encode_text(stream: &EventStream) -> String {
    let mut out = String::with_capacity(24 + stream.events.len() * 20);
    let _ = writeln!(
        out,
        "{TEXT_MAGIC} {TEXT_VERSION} {} {}",
        stream.geometry.width, stream.geometry.height
    );
    for e in &stream.events {
        let _ = writeln!(out, "{},{},{},{}", e.x, e.y, e.t, e.p.as_i8());
    }
    out
}

fn decode_binary(bytes: &[u8]) -> Result<EventStream> {
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(Error::Truncated {
            expected: BINARY_HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let (header, body) = bytes.split_at(BINARY_HEADER_LEN);
    if &header[0..4] != BINARY_MAGIC {
        return Err(Error::MalformedHeader("missing EE3P magic".into()));
    }
    if header[4] != BINARY_VERSION {
        return Err(Error::MalformedHeader(format!(
            "unsupported version {}",
            header[4]
        )));
    }
    let width = u16::from_le_bytes([header[5], header[6]]) as u32;
    let height = u16::from_le_bytes([header[7], header[8]]) as u32;
    let geometry = SensorGeometry::new(width, height).map_err(|_| {
        Error::MalformedHeader(format!("geometry {width}x{height} has a zero dimension"))
    })?;
    let count = u64::from_le_bytes(header[9..17].try_into().unwrap());
    let expected = count
        .checked_mul(BINARY_RECORD_LEN as u64)
        .and_then(|n| n.checked_add(BINARY_HEADER_LEN as u64))
        .ok_or_else(|| Error::MalformedHeader(format!("event count {count} overflows")))?;
    if (bytes.len() as u64) < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len() as u64,
        });
    }
    if (bytes.len() as u64) > expected {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after {count} records",
            bytes.len() as u64 - expected
        )));
    }

    let mut checker = RecordChecker {
        geometry,
        previous: None,
    };
    let mut events = Vec::with_capacity(count as usize);
    for (i, rec) in body.chunks_exact(BINARY_RECORD_LEN).enumerate() {
        let record = i + 1;
        let x = u16::from_le_bytes([rec[0], rec[1]]) as u32;
        let y = u16::from_le_bytes([rec[2], rec[3]]) as u32;
        let t = u64::from_le_bytes(rec[4..12].try_into().unwrap());
        let p_raw = rec[12] as i8;
        let p = Polarity::from_i8(p_raw).ok_or(Error::InvalidPolarity {
            record,
            value: p_raw as i64,
        })?;
        if rec[13] != 0 || rec[14] != 0 {
            return Err(Error::MalformedRecord {
                record,
                message: "nonzero padding bytes".into(),
            });
        }
        let e = Event { x, y, t, p };
        checker.check(record, &e)?;
        events.push(e);
    }
    Ok(EventStream::new(geometry, events))
}

fn encode_binary(stream: &EventStream) -> Result<Vec<u8>> {
    let SensorGeometry { width, height } = stream.geometry;
    let (Ok(w), Ok(h)) = (u16::try_from(width), u16::try_from(height)) else {
        return Err(Error::GeometryTooLarge { width, height });
    };
    let mut out = Vec::with_capacity(BINARY_HEADER_LEN + BINARY_RECORD_LEN * stream.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.push(BINARY_VERSION);
    out.extend_from_slice(&w.to_le_bytes());
    out.extend_from_slice(&h.to_le_bytes());
    out.extend_from_slice(&(stream.len() as u64).to_le_bytes());
    for e in &stream.events {
        // Events inside a u16 geometry always have u16 coordinates.
        let x = u16::try_from(e.x).map_err(|_| Error::GeometryTooLarge { width, height })?;
        let y = u16::try_from(e.y).map_err(|_| Error::GeometryTooLarge { width, height })?;
        out.extend_from_slice(&x.to_le_bytes());
        out.extend_from_slice(&y.to_le_bytes());
        out.extend_from_slice(&e.t.to_le_bytes());
        out.push(e.p.as_i8() as u8);
        out.extend_from_slice(&[0, 0]);
    }
    Ok(out)
}
