//! Template-versus-frame correlation responses.
//!
//! Two backends compute the same quantities. `Direct` sums products cell by
//! cell; `Transform` multiplies 2D spectra and relies on the cyclic
//! correlation theorem, so shifts wrap around the frame edges in both.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::aggregate::{AggregationFrame, FrameSequence, Template};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationMode {
    /// Template and frame compared in place.
    #[default]
    ZeroShift,
    /// Best score over all cyclic 2D displacements.
    MaxOverShifts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    Raw,
    /// Divided by the product of L2 norms, so scores lie in [-1, 1].
    #[default]
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Direct,
    Transform,
}

impl CorrelationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ZeroShift => "zero",
            Self::MaxOverShifts => "shift",
        }
    }
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::Normalized => "norm",
        }
    }
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Direct => "direct",
            Self::Transform => "transform",
        }
    }
}

impl FromStr for CorrelationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" | "zero_shift" => Ok(Self::ZeroShift),
            "shift" | "max_over_shifts" => Ok(Self::MaxOverShifts),
            other => Err(Error::parameter(
                "corr-mode",
                format!("expected zero or shift, got {other:?}"),
            )),
        }
    }
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "norm" | "normalized" => Ok(Self::Normalized),
            other => Err(Error::parameter(
                "corr-norm",
                format!("expected raw or norm, got {other:?}"),
            )),
        }
    }
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "transform" | "fft" => Ok(Self::Transform),
            other => Err(Error::parameter(
                "backend",
                format!("expected direct or transform, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CorrelationSettings {
    pub mode: CorrelationMode,
    pub normalization: Normalization,
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResponse {
    pub scores: Vec<f64>,
    pub mode: CorrelationMode,
    pub normalization: Normalization,
}

impl CorrelationResponse {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// `index,t_start_us,score` rows with a header line.
    pub fn to_csv(&self, seq: &FrameSequence) -> String {
        let mut out = String::from("index,t_start_us,score\n");
        for (f, s) in seq.frames.iter().zip(&self.scores) {
            let _ = writeln!(out, "{},{},{}", f.index(), f.t_start(), s);
        }
        out
    }
}

pub fn correlate(
    template: &Template,
    seq: &FrameSequence,
    settings: CorrelationSettings,
) -> Result<CorrelationResponse> {
    if template.side() != seq.side() {
        return Err(Error::DimensionMismatch {
            template: template.side(),
            frames: seq.side(),
        });
    }
    let scores = correlate_frames(&template.frame, &seq.frames, settings)?;
    Ok(CorrelationResponse {
        scores,
        mode: settings.mode,
        normalization: settings.normalization,
    })
}

/// Scores `template` against each frame. All frames must share the
/// template's side length.
pub fn correlate_frames(
    template: &AggregationFrame,
    frames: &[AggregationFrame],
    settings: CorrelationSettings,
) -> Result<Vec<f64>> {
    if let Some(f) = frames.iter().find(|f| f.side() != template.side()) {
        return Err(Error::DimensionMismatch {
            template: template.side(),
            frames: f.side(),
        });
    }
    let scores = match settings.backend {
        Backend::Direct => {
            let direct = DirectBackend::new(template);
            frames
                .par_iter()
                .map(|f| direct.score(f, settings.mode, settings.normalization))
                .collect()
        }
        Backend::Transform => {
            let transform = TransformBackend::new(template);
            frames
                .par_iter()
                .map_init(
                    || transform.workspace(),
                    |ws, f| transform.score(ws, f, settings.mode, settings.normalization),
                )
                .collect()
        }
    };
    Ok(scores)
}

fn sum_of_squares(frame: &AggregationFrame) -> f64 {
    frame
        .nonzero()
        .iter()
        .map(|&(_, v)| (v as i64 * v as i64) as f64)
        .sum()
}

fn normalize(raw: f64, template_energy: f64, frame_energy: f64, norm: Normalization) -> f64 {
    match norm {
        Normalization::Raw => raw,
        Normalization::Normalized => {
            if template_energy == 0.0 || frame_energy == 0.0 {
                0.0
            } else {
                raw / (template_energy.sqrt() * frame_energy.sqrt())
            }
        }
    }
}

/// Explicit sums in exact integer arithmetic.
struct DirectBackend {
    side: usize,
    dense: Vec<i64>,
    energy: f64,
}

impl DirectBackend {
    fn new(template: &AggregationFrame) -> Self {
        Self {
            side: template.side() as usize,
            dense: template.to_dense().into_iter().map(i64::from).collect(),
            energy: sum_of_squares(template),
        }
    }

    fn score(&self, frame: &AggregationFrame, mode: CorrelationMode, norm: Normalization) -> f64 {
        let raw = match mode {
            CorrelationMode::ZeroShift => self.dot(frame),
            CorrelationMode::MaxOverShifts => self.max_over_shifts(frame),
        };
        // Cyclic shifts preserve the norm, so normalizing the best raw score
        // gives the best normalized score.
        normalize(raw as f64, self.energy, sum_of_squares(frame), norm)
    }

    /// Accumulates every displacement at once: each nonzero template cell
    /// adds its weighted, cyclically shifted copy of the frame rows.
    fn max_over_shifts(&self, frame: &AggregationFrame) -> i64 {
        let n = self.side;
        let dense: Vec<i64> = frame.to_dense().into_iter().map(i64::from).collect();
        let mut acc = vec![0i64; n * n];
        for (cell, &tv) in self.dense.iter().enumerate() {
            if tv == 0 {
                continue;
            }
            let (rr, rc) = (cell / n, cell % n);
            for qr in 0..n {
                let dy = (qr + n - rr) % n;
                let out = &mut acc[dy * n..(dy + 1) * n];
                let row = &dense[qr * n..(qr + 1) * n];
                // frame column rc + j lands on dx = j, wrapping past the edge
                let (head, tail) = out.split_at_mut(n - rc);
                for (a, &f) in head.iter_mut().zip(&row[rc..]) {
                    *a += tv * f;
                }
                for (a, &f) in tail.iter_mut().zip(&row[..rc]) {
                    *a += tv * f;
                }
            }
        }
        acc.into_iter().max().unwrap_or(0)
    }

    fn dot(&self, frame: &AggregationFrame) -> i64 {
        frame
            .nonzero()
            .iter()
            .map(|&(cell, v)| self.dense[cell as usize] * v as i64)
            .sum()
    }
}

/// Frequency-domain products via a row/column 2D FFT.
struct TransformBackend {
    side: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Conjugated template spectrum.
    template_conj: Vec<Complex64>,
    energy: f64,
}

struct Workspace {
    grid: Vec<Complex64>,
    column: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl TransformBackend {
    fn new(template: &AggregationFrame) -> Self {
        let side = template.side() as usize;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(side);
        let inverse = planner.plan_fft_inverse(side);
        let mut this = Self {
            side,
            forward,
            inverse,
            template_conj: Vec::new(),
            energy: sum_of_squares(template),
        };
        let mut ws = this.workspace();
        this.load(&mut ws, template);
        this.fft2(&mut ws, true);
        this.template_conj = ws.grid.iter().map(|c| c.conj()).collect();
        this
    }

    fn workspace(&self) -> Workspace {
        let n = self.side;
        let scratch_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        Workspace {
            grid: vec![Complex64::default(); n * n],
            column: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    fn load(&self, ws: &mut Workspace, frame: &AggregationFrame) {
        ws.grid.fill(Complex64::default());
        for &(cell, v) in frame.nonzero() {
            ws.grid[cell as usize] = Complex64::new(v as f64, 0.0);
        }
    }

    fn fft2(&self, ws: &mut Workspace, forward: bool) {
        let n = self.side;
        let plan = if forward {
            &self.forward
        } else {
            &self.inverse
        };
        plan.process_with_scratch(&mut ws.grid, &mut ws.scratch);
        for c in 0..n {
            for r in 0..n {
                ws.column[r] = ws.grid[r * n + c];
            }
            plan.process_with_scratch(&mut ws.column, &mut ws.scratch);
            for r in 0..n {
                ws.grid[r * n + c] = ws.column[r];
            }
        }
    }

    fn score(
        &self,
        ws: &mut Workspace,
        frame: &AggregationFrame,
        mode: CorrelationMode,
        norm: Normalization,
    ) -> f64 {
        let cells = (self.side * self.side) as f64;
        self.load(ws, frame);
        self.fft2(ws, true);
        let raw = match mode {
            CorrelationMode::ZeroShift => {
                // Parseval: Σ a·b = (1/N) Σ conj(Â)·B̂
                let sum: Complex64 = self
                    .template_conj
                    .iter()
                    .zip(&ws.grid)
                    .map(|(t, f)| t * f)
                    .sum();
                sum.re / cells
            }
            CorrelationMode::MaxOverShifts => {
                for (g, t) in ws.grid.iter_mut().zip(&self.template_conj) {
                    *g *= t;
                }
                self.fft2(ws, false);
                ws.grid
                    .iter()
                    .map(|c| c.re / cells)
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        };
        normalize(raw, self.energy, sum_of_squares(frame), norm)
    }
}
