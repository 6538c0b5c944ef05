//! The subcommands. Each returns the first error it meets; `main` turns it
//! into an exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use ee3p::aggregate::build_frames_with;
use ee3p::ingest::detect_format;
use ee3p::{
    analyze, decode, encode, generate, ground_truth_period_us, select_template, summarize,
    validate_stream, Analysis, Error, EstimateReport, EventStream, Format, FrameOptions,
    FrameSequence, PipelineConfig, RegionOfInterest, Result, SceneSpec,
};

use crate::config::{parse_list, read_file, resolve, with_path, RunConfig};
use crate::{FramesArgs, RunArgs, SweepArgs, SynthArgs, ValidateArgs};

pub const REPORT_SCHEMA: &str = "ee3p-report/1";
pub const SWEEP_SCHEMA: &str = "ee3p-sweep/1";

fn load(cfg: &RunConfig) -> Result<EventStream> {
    let bytes = read_file(cfg.input()?)?;
    decode(&bytes, cfg.format)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| with_path(e, path))
}

fn format_name(format: Format) -> &'static str {
    match format {
        Format::Auto => "auto",
        Format::Text => "text",
        Format::Binary => "binary",
    }
}

/// Run parameters echoed into every report.
#[derive(Debug, Serialize)]
struct RunInfo {
    input: String,
    roi: [u32; 4],
    duration_us: u64,
    frame_count: usize,
    template_index: usize,
    cell_mode: &'static str,
    corr_mode: &'static str,
    corr_norm: &'static str,
    backend: &'static str,
    min_prominence: f64,
    min_separation_us: u64,
    max_plateau_frames: usize,
    refine_peaks: bool,
}

impl RunInfo {
    fn new(input: &Path, cfg: &PipelineConfig, a: &Analysis) -> Self {
        let r = cfg.roi;
        Self {
            input: input.display().to_string(),
            roi: [r.x0(), r.y0(), r.x1(), r.y1()],
            duration_us: cfg.duration_us,
            frame_count: a.frames.len(),
            template_index: a.template.source_index,
            cell_mode: cfg.cell_mode.as_str(),
            corr_mode: cfg.correlation.mode.as_str(),
            corr_norm: cfg.correlation.normalization.as_str(),
            backend: cfg.correlation.backend.as_str(),
            min_prominence: cfg.peaks.min_prominence,
            min_separation_us: cfg.peaks.separation_for(cfg.duration_us),
            max_plateau_frames: cfg.peaks.max_plateau_frames,
            refine_peaks: cfg.peaks.refine,
        }
    }
}

#[derive(Serialize)]
struct ReportFile<'a> {
    schema: &'static str,
    run: RunInfo,
    #[serde(flatten)]
    result: &'a EstimateReport,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn dump_frames(dir: &Path, seq: &FrameSequence, indices: &[usize]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| with_path(e, dir))?;
    for &i in indices {
        let frame = &seq.frames[i];
        write_file(&dir.join(format!("frame_{i:06}.pgm")), frame.to_pgm())?;
    }
    Ok(())
}

pub fn estimate(args: &RunArgs) -> Result<()> {
    let cfg = resolve(args, &[])?;
    let pipeline = cfg.pipeline()?;
    let input = cfg.input()?;
    let stream = load(&cfg)?;
    let analysis = analyze(&stream, &pipeline)?;

    // written before peak detection so a failed run can still be inspected
    if let Some(path) = &cfg.scores {
        write_file(path, analysis.response.to_csv(&analysis.frames))?;
    }
    if let Some(dir) = &cfg.dump_frames {
        let all: Vec<usize> = (0..analysis.frames.len()).collect();
        dump_frames(dir, &analysis.frames, &all)?;
        write_file(&dir.join("template.pgm"), analysis.template.frame.to_pgm())?;
    }

    let peaks = analysis.peaks(&pipeline.peaks)?;
    let report = summarize(&peaks, pipeline.unit)?;
    let file = ReportFile {
        schema: REPORT_SCHEMA,
        run: RunInfo::new(input, &pipeline, &analysis),
        result: &report,
    };
    let json = to_json(&file);
    if let Some(path) = &cfg.csv {
        write_file(path, report.to_csv())?;
    }
    match &cfg.report {
        Some(path) => {
            write_file(path, json)?;
            println!(
                "{} {} from {} peaks",
                report.overall.display_value(),
                match report.unit {
                    ee3p::Unit::Hz => "Hz",
                    ee3p::Unit::Rpm => "RPM",
                },
                report.peak_count
            );
        }
        None => print!("{json}"),
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Axis {
    Durations,
    RoiSizes,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Durations => "duration_us",
            Axis::RoiSizes => "roi_px",
        }
    }
}

#[derive(Serialize)]
struct SweepRow {
    value: u64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    roi: Option<[u32; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<EstimateReport>,
}

#[derive(Serialize)]
struct SweepFile<'a> {
    schema: &'static str,
    input: String,
    axis: &'static str,
    rows: &'a [SweepRow],
}

fn run_row(stream: &EventStream, cfg: Result<PipelineConfig>) -> Result<EstimateReport> {
    let cfg = cfg?;
    cfg.roi.check_fits(&stream.geometry)?;
    ee3p::estimate(stream, &cfg)
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let cfg = resolve(
        &args.run,
        &[
            ("durations", args.durations.as_ref()),
            ("roi_sizes", args.roi_sizes.as_ref()),
        ],
    )?;
    let (axis, values): (Axis, Vec<u64>) =
        match (cfg.extra.get("durations"), cfg.extra.get("roi_sizes")) {
            (Some(d), None) => (Axis::Durations, parse_list("durations", d)?),
            (None, Some(r)) => (Axis::RoiSizes, parse_list("roi-sizes", r)?),
            (Some(_), Some(_)) => {
                return Err(Error::parameter(
                    "sweep",
                    "give either --durations or --roi-sizes, not both",
                ))
            }
            (None, None) => {
                return Err(Error::parameter(
                    "sweep",
                    "nothing to sweep: give --durations or --roi-sizes",
                ))
            }
        };
    let roi = cfg.roi()?;
    let row_configs: Vec<Result<PipelineConfig>> = match axis {
        Axis::Durations => values.iter().map(|&d| cfg.pipeline_for(roi, d)).collect(),
        Axis::RoiSizes => {
            let duration = cfg.duration_us()?;
            let (cx, cy) = ((roi.x0() + roi.x1()) / 2, (roi.y0() + roi.y1()) / 2);
            values
                .iter()
                .map(|&side| {
                    let side = u32::try_from(side)
                        .map_err(|_| Error::InvalidRoi(format!("side {side} too large")))?;
                    let r = RegionOfInterest::centered(cx, cy, side)?;
                    cfg.pipeline_for(r, duration)
                })
                .collect()
        }
    };
    let input = cfg.input()?.to_path_buf();
    let stream = load(&cfg)?;

    let rows: Vec<SweepRow> = values
        .par_iter()
        .zip(row_configs.into_par_iter())
        .map(|(&value, pc)| {
            let roi = pc.as_ref().ok().map(|p| {
                let r = p.roi;
                [r.x0(), r.y0(), r.x1(), r.y1()]
            });
            match run_row(&stream, pc) {
                Ok(report) => SweepRow {
                    value,
                    status: "ok",
                    roi,
                    error: None,
                    result: Some(report),
                },
                Err(e) => SweepRow {
                    value,
                    status: e.category().as_str(),
                    roi,
                    error: Some(e.to_string()),
                    result: None,
                },
            }
        })
        .collect();

    let table = sweep_table(axis, &rows);
    print!("{table}");
    if let Some(path) = &cfg.csv {
        write_file(path, sweep_csv(axis, &rows))?;
    }
    if let Some(path) = &cfg.report {
        let file = SweepFile {
            schema: SWEEP_SCHEMA,
            input: input.display().to_string(),
            axis: axis.name(),
            rows: &rows,
        };
        write_file(path, to_json(&file))?;
    }
    Ok(())
}

/// One line per row, one column per second of data, then the overall value.
fn sweep_table(axis: Axis, rows: &[SweepRow]) -> String {
    let buckets = rows
        .iter()
        .filter_map(|r| r.result.as_ref())
        .flat_map(|r| r.seconds.iter().filter_map(|s| s.t_bucket))
        .max()
        .map_or(0, |b| b + 1);
    let mut header = vec![axis.name().to_string()];
    header.extend((0..buckets).map(|b| format!("{b} s")));
    header.push("overall".into());
    let mut lines = vec![header];
    for row in rows {
        let mut cells = vec![row.value.to_string()];
        match &row.result {
            Some(r) => {
                for b in 0..buckets {
                    let s = r.seconds.iter().find(|s| s.t_bucket == Some(b));
                    cells.push(s.map(|s| s.display_value()).unwrap_or_else(|| "-".into()));
                }
                cells.push(r.overall.display_value());
            }
            None => cells.push(row.status.to_string()),
        }
        lines.push(cells);
    }
    let cols = lines.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            lines
                .iter()
                .filter_map(|l| l.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for line in &lines {
        let padded: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(s, &w)| format!("{s:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    }
    out
}

fn sweep_csv(axis: Axis, rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{},t_bucket,mean,sigma,two_sigma,M,value,status\n",
        axis.name()
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        match &row.result {
            Some(r) => {
                let groups = r.seconds.iter().chain(std::iter::once(&r.overall));
                for s in groups {
                    let bucket = s
                        .t_bucket
                        .map_or_else(|| "overall".into(), |b| b.to_string());
                    let _ = writeln!(
                        out,
                        "{},{bucket},{},{},{},{},{},ok",
                        row.value,
                        s.mean,
                        opt(s.sigma),
                        opt(s.two_sigma),
                        s.m,
                        s.display_value()
                    );
                }
            }
            None => {
                let _ = writeln!(out, "{},,,,,,,{}", row.value, row.status);
            }
        }
    }
    out
}

pub fn frames(args: &FramesArgs) -> Result<()> {
    let cfg = resolve(&args.run, &[("index", args.index.as_ref())])?;
    let dir = cfg
        .dump_frames
        .clone()
        .ok_or_else(|| Error::parameter("dump-frames", "required"))?;
    let pipeline = cfg.pipeline()?;
    let wanted: Option<Vec<usize>> = cfg
        .extra
        .get("index")
        .map(|s| parse_list("index", s))
        .transpose()?;
    let stream = load(&cfg)?;
    let seq = build_frames_with(
        &stream,
        pipeline.roi,
        pipeline.duration_us,
        FrameOptions {
            mode: pipeline.cell_mode,
            chunks: None,
        },
    )?;
    let indices = match wanted {
        Some(list) => {
            if let Some(&bad) = list.iter().find(|&&i| i >= seq.len()) {
                return Err(Error::parameter(
                    "index",
                    format!("frame {bad} out of range for {} frames", seq.len()),
                ));
            }
            list
        }
        None => (0..seq.len()).collect(),
    };
    dump_frames(&dir, &seq, &indices)?;
    println!(
        "{} frames of {}x{} px from t0 = {} us; wrote {} to {}",
        seq.len(),
        seq.side(),
        seq.side(),
        seq.t0,
        indices.len(),
        dir.display()
    );
    if !seq.is_empty() {
        let template = select_template(&seq, pipeline.template)?;
        write_file(&dir.join("template.pgm"), template.frame.to_pgm())?;
        println!(
            "template: frame {} ({} nonzero cells)",
            template.source_index,
            template.frame.nonzero_count()
        );
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut text = match &args.spec {
        Some(path) => String::from_utf8(read_file(path)?)
            .map_err(|_| Error::parameter("spec", "file is not UTF-8"))?,
        None => String::new(),
    };
    for line in &args.set {
        text.push('\n');
        text.push_str(line);
    }
    let mut spec: SceneSpec = text.parse()?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let format = match args.format.parse()? {
        Format::Auto => match args.output.extension().and_then(|e| e.to_str()) {
            Some("csv" | "txt") => Format::Text,
            _ => Format::Binary,
        },
        f => f,
    };
    let stream = generate(&spec)?;
    write_file(&args.output, encode(&stream, format)?)?;
    println!(
        "wrote {} events ({}) to {}",
        stream.len(),
        format_name(format),
        args.output.display()
    );
    println!(
        "ground-truth period: {} us ({} Hz)",
        ground_truth_period_us(&spec),
        spec.frequency_hz
    );
    Ok(())
}

pub fn validate(args: &ValidateArgs) -> Result<()> {
    let bytes = read_file(&args.input)?;
    let format = match args.format.parse()? {
        Format::Auto => detect_format(&bytes)?,
        f => f,
    };
    let stream = decode(&bytes, format)?;
    validate_stream(&stream).map_err(|v| Error::MalformedRecord {
        record: v.index + 1,
        message: v.kind.to_string(),
    })?;
    let g = stream.geometry;
    match (stream.first_timestamp(), stream.last_timestamp()) {
        (Some(a), Some(b)) => println!(
            "ok: {} events, {}x{} sensor, {} format, t = {a}..{b} us",
            stream.len(),
            g.width,
            g.height,
            format_name(format)
        ),
        _ => println!(
            "ok: empty stream, {}x{} sensor, {} format",
            g.width,
            g.height,
            format_name(format)
        ),
    }
    Ok(())
}
