//! Event tuples, sensor geometry and regions of interest.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of a brightness change.
///
/// A pixel that saw no change above threshold emits nothing, so there is no
/// zero variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(i8)]
pub enum Polarity {
    Negative = -1,
    Positive = 1,
}

impl Polarity {
    pub fn from_i8(value: i8) -> Option<Self> {
        match value {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }

    #[inline]
    pub fn as_i8(self) -> i8 {
        self as i8
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

/// A single brightness-change report. `t` is in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub x: u32,
    pub y: u32,
    pub t: u64,
    pub p: Polarity,
}

impl Event {
    pub fn new(x: u32, y: u32, t: u64, p: Polarity) -> Self {
        Self { x, y, t, p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u32,
    pub height: u32,
}

impl SensorGeometry {
    /// 1280×720, the resolution of the reference sensor.
    pub const HD: SensorGeometry = SensorGeometry {
        width: 1280,
        height: 720,
    };

    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidGeometry { width, height });
        }
        Ok(Self { width, height })
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height
    }
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self::HD
    }
}

/// Axis-aligned square window with half-open bounds `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionOfInterest {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
}

impl RegionOfInterest {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self> {
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidRoi(format!(
                "bottom-right ({x1},{y1}) must exceed top-left ({x0},{y0})"
            )));
        }
        if x1 - x0 != y1 - y0 {
            return Err(Error::InvalidRoi(format!(
                "region must be square, got {}x{}",
                x1 - x0,
                y1 - y0
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Square of side `side` whose top-left corner is `(x0, y0)`.
    pub fn square(x0: u32, y0: u32, side: u32) -> Result<Self> {
        let x1 = x0
            .checked_add(side)
            .ok_or_else(|| Error::InvalidRoi("corner overflows u32".into()))?;
        let y1 = y0
            .checked_add(side)
            .ok_or_else(|| Error::InvalidRoi("corner overflows u32".into()))?;
        Self::new(x0, y0, x1, y1)
    }

    /// Square of side `side` centred as closely as possible on `(cx, cy)`.
    pub fn centered(cx: u32, cy: u32, side: u32) -> Result<Self> {
        let half = side / 2;
        if cx < half || cy < half {
            return Err(Error::InvalidRoi(format!(
                "a {side}px region centred on ({cx},{cy}) crosses the sensor origin"
            )));
        }
        Self::square(cx - half, cy - half, side)
    }

    pub fn x0(&self) -> u32 {
        self.x0
    }
    pub fn y0(&self) -> u32 {
        self.y0
    }
    pub fn x1(&self) -> u32 {
        self.x1
    }
    pub fn y1(&self) -> u32 {
        self.y1
    }

    #[inline]
    pub fn side(&self) -> u32 {
        self.x1 - self.x0
    }

    #[inline]
    pub fn contains(&self, e: &Event) -> bool {
        self.x0 <= e.x && e.x < self.x1 && self.y0 <= e.y && e.y < self.y1
    }

    pub fn fits(&self, geometry: &SensorGeometry) -> bool {
        self.x1 <= geometry.width && self.y1 <= geometry.height
    }

    pub fn check_fits(&self, geometry: &SensorGeometry) -> Result<()> {
        if self.fits(geometry) {
            Ok(())
        } else {
            Err(Error::InvalidRoi(format!(
                "{self} exceeds sensor {}x{}",
                geometry.width, geometry.height
            )))
        }
    }
}

impl fmt::Display for RegionOfInterest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})-({},{})", self.x0, self.y0, self.x1, self.y1)
    }
}

/// Point-in-region test for a single event.
pub fn roi_contains(roi: &RegionOfInterest, e: &Event) -> bool {
    roi.contains(e)
}

/// Events in timestamp order together with the sensor they came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub geometry: SensorGeometry,
    pub events: Vec<Event>,
}

impl EventStream {
    pub fn new(geometry: SensorGeometry, events: Vec<Event>) -> Self {
        Self { geometry, events }
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        Self::new(geometry, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_timestamp(&self) -> Option<u64> {
        self.events.first().map(|e| e.t)
    }

    pub fn last_timestamp(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }

    pub fn validate(&self) -> Validation {
        validate_stream(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    TimestampDecreased { previous: u64, current: u64 },
    OutOfBounds { x: u32, y: u32 },
    InvalidGeometry,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::TimestampDecreased { previous, current } => {
                write!(f, "timestamp decreased ({previous} -> {current})")
            }
            ViolationKind::OutOfBounds { x, y } => {
                write!(f, "event ({x},{y}) outside sensor bounds")
            }
            ViolationKind::InvalidGeometry => write!(f, "sensor geometry has a zero dimension"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Zero-based index of the first offending event.
    pub index: usize,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {}", self.index, self.kind)
    }
}

pub type Validation = std::result::Result<(), Violation>;

/// Checks ordering and bounds, reporting the first violation found.
pub fn validate_stream(stream: &EventStream) -> Validation {
    let g = stream.geometry;
    if g.width == 0 || g.height == 0 {
        return Err(Violation {
            index: 0,
            kind: ViolationKind::InvalidGeometry,
        });
    }
    let mut previous = 0u64;
    for (index, e) in stream.events.iter().enumerate() {
        if index > 0 && e.t < previous {
            return Err(Violation {
                index,
                kind: ViolationKind::TimestampDecreased {
                    previous,
                    current: e.t,
                },
            });
        }
        if !g.contains(e.x, e.y) {
            return Err(Violation {
                index,
                kind: ViolationKind::OutOfBounds { x: e.x, y: e.y },
            });
        }
        previous = e.t;
    }
    Ok(())
}
