//! The end-to-end estimate: frames, template, correlation, peaks, report.

use crate::aggregate::{
    build_frames_with, select_template, CellMode, FrameOptions, FrameSequence, Template,
    TemplateStrategy,
};
use crate::correlate::{correlate, CorrelationResponse, CorrelationSettings};
use crate::error::{Error, Result};
use crate::estimate::{detect_peaks, summarize, EstimateReport, PeakConfig, PeakSeries, Unit};
use crate::event::{EventStream, RegionOfInterest};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub roi: RegionOfInterest,
    pub duration_us: u64,
    pub template: TemplateStrategy,
    pub cell_mode: CellMode,
    pub correlation: CorrelationSettings,
    pub peaks: PeakConfig,
    pub unit: Unit,
}

impl PipelineConfig {
    pub fn new(roi: RegionOfInterest, duration_us: u64) -> Self {
        Self {
            roi,
            duration_us,
            template: TemplateStrategy::MaxEventCount,
            cell_mode: CellMode::Overwrite,
            correlation: CorrelationSettings::default(),
            peaks: PeakConfig::default(),
            unit: Unit::Hz,
        }
    }

    pub fn with_unit(mut self, unit: Unit) -> Self {
        self.unit = unit;
        self
    }

    /// Checks everything that can be checked without reading events.
    pub fn validate(&self) -> Result<()> {
        if self.duration_us == 0 {
            return Err(Error::parameter("duration-us", "must be at least 1"));
        }
        self.peaks.validate(self.duration_us)
    }
}

/// Everything up to and including the correlation response.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub frames: FrameSequence,
    pub template: Template,
    pub response: CorrelationResponse,
}

impl Analysis {
    pub fn peaks(&self, cfg: &PeakConfig) -> Result<PeakSeries> {
        detect_peaks(&self.response, &self.frames, cfg)
    }
}

pub fn analyze(stream: &EventStream, cfg: &PipelineConfig) -> Result<Analysis> {
    cfg.validate()?;
    let frames = build_frames_with(
        stream,
        cfg.roi,
        cfg.duration_us,
        FrameOptions {
            mode: cfg.cell_mode,
            chunks: None,
        },
    )?;
    if frames.len() < 3 {
        return Err(Error::InsufficientPeaks { found: 0 });
    }
    let template = select_template(&frames, cfg.template)?;
    let response = correlate(&template, &frames, cfg.correlation)?;
    Ok(Analysis {
        frames,
        template,
        response,
    })
}

pub fn estimate(stream: &EventStream, cfg: &PipelineConfig) -> Result<EstimateReport> {
    let analysis = analyze(stream, cfg)?;
    let peaks = analysis.peaks(&cfg.peaks)?;
    summarize(&peaks, cfg.unit)
}
