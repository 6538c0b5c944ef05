//! Event-aggregation frames over a region of interest.
//!
//! Events are binned into contiguous, non-overlapping intervals of
//! `duration_us` starting at the stream's first timestamp. Within a frame,
//! each cell holds the polarity of the last event that hit it (or, in
//! additive mode, the sum of polarities). Frames are kept sparse: only
//! nonzero cells are stored, in row-major order.

use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, RegionOfInterest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellMode {
    /// Cell takes the polarity of the latest event.
    #[default]
    Overwrite,
    /// Cell accumulates polarities without clamping.
    Additive,
}

impl CellMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Overwrite => "overwrite",
            Self::Additive => "additive",
        }
    }
}

impl FromStr for CellMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overwrite" => Ok(Self::Overwrite),
            "additive" => Ok(Self::Additive),
            other => Err(Error::parameter(
                "cell-mode",
                format!("expected overwrite or additive, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationFrame {
    side: u32,
    index: usize,
    t_start: u64,
    t_end: u64,
    /// (row-major cell index, value), sorted by cell index, values nonzero.
    cells: Vec<(u32, i32)>,
}

impl AggregationFrame {
    pub fn empty(side: u32, index: usize, t_start: u64, t_end: u64) -> Self {
        Self {
            side,
            index,
            t_start,
            t_end,
            cells: Vec::new(),
        }
    }

    /// Builds a frame from a row-major `side × side` array.
    pub fn from_dense(side: u32, index: usize, t_start: u64, t_end: u64, values: &[i32]) -> Self {
        assert_eq!(values.len(), (side * side) as usize, "dense frame size");
        let cells = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, &v)| (i as u32, v))
            .collect();
        Self {
            side,
            index,
            t_start,
            t_end,
            cells,
        }
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn t_start(&self) -> u64 {
        self.t_start
    }

    pub fn t_end(&self) -> u64 {
        self.t_end
    }

    pub fn nonzero(&self) -> &[(u32, i32)] {
        &self.cells
    }

    pub fn nonzero_count(&self) -> usize {
        self.cells.len()
    }

    pub fn value_at(&self, row: u32, col: u32) -> i32 {
        let key = row * self.side + col;
        self.cells
            .binary_search_by_key(&key, |&(i, _)| i)
            .map(|pos| self.cells[pos].1)
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<i32> {
        let mut out = vec![0; (self.side * self.side) as usize];
        for &(i, v) in &self.cells {
            out[i as usize] = v;
        }
        out
    }

    /// Binary portable graymap: 0 → 128, positive → 255, negative → 0.
    pub fn to_pgm(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n255\n", self.side, self.side);
        let mut out = header.into_bytes();
        let body_start = out.len();
        out.resize(body_start + (self.side * self.side) as usize, 128);
        for &(i, v) in &self.cells {
            out[body_start + i as usize] = if v > 0 { 255 } else { 0 };
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    pub roi: RegionOfInterest,
    pub duration_us: u64,
    /// Start of frame 0, the stream's first timestamp.
    pub t0: u64,
    pub mode: CellMode,
    pub frames: Vec<AggregationFrame>,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn side(&self) -> u32 {
        self.roi.side()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameOptions {
    pub mode: CellMode,
    /// Number of independent chunks to build in parallel; `None` uses the
    /// rayon pool size. Output does not depend on it.
    pub chunks: Option<usize>,
}

pub fn build_frames(
    stream: &EventStream,
    roi: RegionOfInterest,
    duration_us: u64,
) -> Result<FrameSequence> {
    build_frames_with(stream, roi, duration_us, FrameOptions::default())
}

pub fn build_frames_with(
    stream: &EventStream,
    roi: RegionOfInterest,
    duration_us: u64,
    options: FrameOptions,
) -> Result<FrameSequence> {
    if duration_us == 0 {
        return Err(Error::parameter("duration_us", "must be at least 1"));
    }
    roi.check_fits(&stream.geometry)?;
    let (Some(t0), Some(t_last)) = (stream.first_timestamp(), stream.last_timestamp()) else {
        return Ok(FrameSequence {
            roi,
            duration_us,
            t0: 0,
            mode: options.mode,
            frames: Vec::new(),
        });
    };
    // Only intervals the stream fully covers become frames.
    let frame_count = ((t_last - t0) / duration_us) as usize;
    let chunks = options
        .chunks
        .unwrap_or_else(rayon::current_num_threads)
        .clamp(1, frame_count.max(1));
    let per_chunk = frame_count.div_ceil(chunks).max(1);
    let ranges: Vec<Range<usize>> = (0..frame_count)
        .step_by(per_chunk)
        .map(|lo| lo..(lo + per_chunk).min(frame_count))
        .collect();

    let events = &stream.events;
    let frames: Vec<AggregationFrame> = ranges
        .into_par_iter()
        .map(|range| {
            let t_lo = t0 + range.start as u64 * duration_us;
            let t_hi = t0 + range.end as u64 * duration_us;
            let lo = events.partition_point(|e| e.t < t_lo);
            let hi = events.partition_point(|e| e.t < t_hi);
            FrameBuilder::new(roi, duration_us, t0, options.mode).run(&events[lo..hi], range)
        })
        .flatten()
        .collect();

    Ok(FrameSequence {
        roi,
        duration_us,
        t0,
        mode: options.mode,
        frames,
    })
}

struct FrameBuilder {
    roi: RegionOfInterest,
    duration_us: u64,
    t0: u64,
    mode: CellMode,
    scratch: Vec<i32>,
    touched: Vec<u32>,
}

impl FrameBuilder {
    fn new(roi: RegionOfInterest, duration_us: u64, t0: u64, mode: CellMode) -> Self {
        let side = roi.side() as usize;
        Self {
            roi,
            duration_us,
            t0,
            mode,
            scratch: vec![0; side * side],
            touched: Vec::new(),
        }
    }

    /// `events` must all fall inside the frames in `range`.
    fn run(mut self, events: &[Event], range: Range<usize>) -> Vec<AggregationFrame> {
        let side = self.roi.side();
        let mut frames = Vec::with_capacity(range.len());
        let mut current = range.start;
        for e in events {
            if !self.roi.contains(e) {
                continue;
            }
            let k = ((e.t - self.t0) / self.duration_us) as usize;
            while current < k {
                frames.push(self.flush(current));
                current += 1;
            }
            let cell = (e.y - self.roi.y0()) * side + (e.x - self.roi.x0());
            let slot = &mut self.scratch[cell as usize];
            // duplicates left by additive cancellation are removed at flush
            if *slot == 0 && self.touched.last() != Some(&cell) {
                self.touched.push(cell);
            }
            match self.mode {
                CellMode::Overwrite => *slot = e.p.as_i8() as i32,
                CellMode::Additive => *slot += e.p.as_i8() as i32,
            }
        }
        while current < range.end {
            frames.push(self.flush(current));
            current += 1;
        }
        frames
    }

    fn flush(&mut self, index: usize) -> AggregationFrame {
        self.touched.sort_unstable();
        self.touched.dedup();
        let mut cells = Vec::with_capacity(self.touched.len());
        for &cell in &self.touched {
            let v = std::mem::take(&mut self.scratch[cell as usize]);
            if v != 0 {
                cells.push((cell, v));
            }
        }
        self.touched.clear();
        let t_start = self.t0 + index as u64 * self.duration_us;
        AggregationFrame {
            side: self.roi.side(),
            index,
            t_start,
            t_end: t_start + self.duration_us,
            cells,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateStrategy {
    Explicit(usize),
    /// Frame with the most nonzero cells; ties go to the lowest index.
    MaxEventCount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub frame: AggregationFrame,
    pub source_index: usize,
}

impl Template {
    pub fn side(&self) -> u32 {
        self.frame.side()
    }
}

pub fn select_template(seq: &FrameSequence, strategy: TemplateStrategy) -> Result<Template> {
    let index = match strategy {
        TemplateStrategy::Explicit(index) => index,
        TemplateStrategy::MaxEventCount => seq
            .frames
            .iter()
            .enumerate()
            .rev()
            .max_by_key(|(_, f)| f.nonzero_count())
            .map(|(i, _)| i)
            .unwrap_or(0),
    };
    let frame = seq
        .frames
        .get(index)
        .ok_or(Error::TemplateOutOfRange {
            index,
            len: seq.len(),
        })?
        .clone();
    Ok(Template {
        frame,
        source_index: index,
    })
}
