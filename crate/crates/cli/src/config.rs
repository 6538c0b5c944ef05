//! Flag and config-file resolution into a checked run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ee3p::config::parse_key_values;
use ee3p::{
    CorrelationSettings, Error, Format, PeakConfig, PipelineConfig, RegionOfInterest, Result,
    TemplateStrategy,
};

use crate::RunArgs;

/// Keys accepted in a config file, in flag spelling with `_` for `-`.
const KEYS: &[&str] = &[
    "input",
    "format",
    "roi",
    "duration_us",
    "template",
    "corr_mode",
    "corr_norm",
    "backend",
    "min_prominence",
    "min_separation_us",
    "max_plateau_frames",
    "cell_mode",
    "refine_peaks",
    "unit",
    "report",
    "csv",
    "dump_frames",
    "scores",
    "durations",
    "roi_sizes",
    "index",
];

/// Everything a run needs, parsed and validated. RoI and duration stay
/// optional here because a sweep may supply them per row.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub format: Format,
    pub roi: Option<RegionOfInterest>,
    pub duration_us: Option<u64>,
    pub base: PipelineConfig,
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub dump_frames: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub extra: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::parameter("input", "required"))
    }

    pub fn roi(&self) -> Result<RegionOfInterest> {
        self.roi.ok_or_else(|| Error::InvalidRoi("required".into()))
    }

    pub fn duration_us(&self) -> Result<u64> {
        self.duration_us
            .ok_or_else(|| Error::parameter("duration-us", "required"))
    }

    /// Pipeline for the given RoI and duration, with all shared settings.
    pub fn pipeline_for(&self, roi: RegionOfInterest, duration_us: u64) -> Result<PipelineConfig> {
        let cfg = PipelineConfig {
            roi,
            duration_us,
            ..self.base.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        self.pipeline_for(self.roi()?, self.duration_us()?)
    }
}

/// Reads `path`, keeping the path in any error message.
pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| with_path(e, path))
}

pub fn with_path(e: io::Error, path: &Path) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Merges flags over the optional config file. `extra` carries the
/// command-specific flags (sweep lists, frame indices) in the same way.
pub fn resolve(args: &RunArgs, extra: &[(&str, Option<&String>)]) -> Result<RunConfig> {
    let mut values: BTreeMap<String, String> = BTreeMap::new();
    if let Some(path) = &args.config {
        let bytes = read_file(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::parameter("config", "file is not UTF-8"))?;
        for (key, value) in parse_key_values(&text)? {
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::parameter("config", format!("unknown key {key:?}")));
            }
            values.insert(key, value);
        }
    }
    let flags = [
        ("input", &args.input),
        ("format", &args.format),
        ("roi", &args.roi),
        ("duration_us", &args.duration_us),
        ("template", &args.template),
        ("corr_mode", &args.corr_mode),
        ("corr_norm", &args.corr_norm),
        ("backend", &args.backend),
        ("min_prominence", &args.min_prominence),
        ("min_separation_us", &args.min_separation_us),
        ("max_plateau_frames", &args.max_plateau_frames),
        ("cell_mode", &args.cell_mode),
        ("refine_peaks", &args.refine_peaks),
        ("unit", &args.unit),
        ("report", &args.report),
        ("csv", &args.csv),
        ("dump_frames", &args.dump_frames),
        ("scores", &args.scores),
    ];
    for (key, value) in flags
        .iter()
        .map(|(k, v)| (*k, v.as_ref()))
        .chain(extra.iter().copied())
    {
        if let Some(v) = value {
            values.insert(key.to_string(), v.clone());
        }
    }
    build(values)
}

fn build(mut v: BTreeMap<String, String>) -> Result<RunConfig> {
    let mut take = |k: &str| v.remove(k).map(|s| s.trim().to_string());

    let input = take("input").map(PathBuf::from);
    let format = match take("format") {
        Some(s) => s.parse()?,
        None => Format::Auto,
    };
    let roi = take("roi").map(|s| parse_roi(&s)).transpose()?;
    let duration_us = take("duration_us")
        .map(|s| parse_u64("duration-us", &s))
        .transpose()?;
    let template = match take("template").as_deref() {
        None | Some("auto") => TemplateStrategy::MaxEventCount,
        Some(s) => TemplateStrategy::Explicit(s.parse().map_err(|_| {
            Error::parameter(
                "template",
                format!("expected auto or a frame index, got {s:?}"),
            )
        })?),
    };
    let mut correlation = CorrelationSettings::default();
    if let Some(s) = take("corr_mode") {
        correlation.mode = s.parse()?;
    }
    if let Some(s) = take("corr_norm") {
        correlation.normalization = s.parse()?;
    }
    if let Some(s) = take("backend") {
        correlation.backend = s.parse()?;
    }
    let mut peaks = PeakConfig::default();
    if let Some(s) = take("min_prominence") {
        peaks.min_prominence = s
            .parse()
            .map_err(|_| Error::parameter("min-prominence", format!("not a number: {s:?}")))?;
    }
    if let Some(s) = take("min_separation_us") {
        peaks.min_separation_us = Some(parse_u64("min-separation-us", &s)?);
    }
    if let Some(s) = take("max_plateau_frames") {
        peaks.max_plateau_frames = parse_u64("max-plateau-frames", &s)? as usize;
    }
    if let Some(s) = take("refine_peaks") {
        peaks.refine = match s.as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            _ => {
                return Err(Error::parameter(
                    "refine-peaks",
                    format!("not a boolean: {s:?}"),
                ))
            }
        };
    }
    let cell_mode = take("cell_mode")
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or_default();
    let unit = take("unit")
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or_default();
    let report = take("report").map(PathBuf::from);
    let csv = take("csv").map(PathBuf::from);
    let dump_frames = take("dump_frames").map(PathBuf::from);
    let scores = take("scores").map(PathBuf::from);

    // placeholder RoI; replaced per run in `pipeline_for`
    let mut base = PipelineConfig::new(RegionOfInterest::square(0, 0, 1)?, 1);
    base.template = template;
    base.cell_mode = cell_mode;
    base.correlation = correlation;
    base.peaks = peaks;
    base.unit = unit;
    // sweeps over durations check the separation per row
    PipelineConfig {
        duration_us: duration_us.unwrap_or(1),
        ..base.clone()
    }
    .validate()?;

    Ok(RunConfig {
        input,
        format,
        roi,
        duration_us,
        base,
        report,
        csv,
        dump_frames,
        scores,
        extra: v,
    })
}

fn parse_u64(field: &'static str, s: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| Error::parameter(field, format!("not a non-negative integer: {s:?}")))
}

pub fn parse_roi(s: &str) -> Result<RegionOfInterest> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let nums: Option<Vec<u32>> = parts.iter().map(|p| p.parse().ok()).collect();
    match nums.as_deref() {
        Some(&[x0, y0, x1, y1]) => RegionOfInterest::new(x0, y0, x1, y1),
        _ => Err(Error::InvalidRoi(format!(
            "expected x0,y0,x1,y1, got {s:?}"
        ))),
    }
}

/// Comma-separated list; an empty list is an error.
pub fn parse_list<T: std::str::FromStr>(field: &'static str, s: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect();
    if items.is_empty() {
        return Err(Error::parameter(field, "empty list"));
    }
    items
        .iter()
        .map(|p| {
            p.parse()
                .map_err(|_| Error::parameter(field, format!("bad list item {p:?}")))
        })
        .collect()
}
