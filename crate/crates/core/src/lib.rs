//! Frequency and rotational-speed estimation from event-camera streams.
//!
//! Events inside a square region of interest are binned into fixed-duration
//! frames; one frame is used as a template and correlated against every
//! frame; the spacing of correlation peaks gives one period per Δt, which is
//! reported in Hz or RPM with a per-second standard error.
//!
//! ```
//! use ee3p::{estimate, generate, PipelineConfig, RegionOfInterest, SceneSpec};
//!
//! let stream = generate(&SceneSpec::flash(2000.0, 0.05)).unwrap();
//! let roi = RegionOfInterest::centered(640, 360, 45).unwrap();
//! let report = estimate(&stream, &PipelineConfig::new(roi, 100)).unwrap();
//! assert_eq!(report.overall.mean, 2000.0);
//! ```

pub mod aggregate;
pub mod config;
pub mod correlate;
pub mod error;
pub mod estimate;
pub mod event;
pub mod ingest;
pub mod pipeline;
pub mod synth;

pub use aggregate::{
    build_frames, build_frames_with, select_template, AggregationFrame, CellMode, FrameOptions,
    FrameSequence, Template, TemplateStrategy,
};
pub use correlate::{
    correlate, correlate_frames, Backend, CorrelationMode, CorrelationResponse,
    CorrelationSettings, Normalization,
};
pub use error::{Error, ErrorCategory, Result};
pub use estimate::{
    detect_peaks, hz_from_delta, rpm_from_delta, summarize, EstimateReport, IntervalStats,
    PeakConfig, PeakSeries, Unit,
};
pub use event::{
    roi_contains, validate_stream, Event, EventStream, Polarity, RegionOfInterest, SensorGeometry,
    Validation, Violation, ViolationKind,
};
pub use ingest::{decode, encode, read_path, read_stream, write_path, write_stream, Format};
pub use pipeline::{analyze, estimate, Analysis, PipelineConfig};
pub use synth::{generate, ground_truth_period_us, SceneKind, SceneSpec};
