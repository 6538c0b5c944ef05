//! Peak picking on correlation responses and Hz/RPM statistics.
//!
//! Peaks are local maxima (a flat top counts once, at its middle frame)
//! whose topographic prominence, as a fraction of the score range, reaches
//! `min_prominence`; a greedy left-to-right pass then enforces
//! `min_separation_us`. Successive peak times give Δt samples,
//! which are turned into per-delta frequencies and averaged per second of
//! data with a standard error of the mean.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::FrameSequence;
use crate::correlate::CorrelationResponse;
use crate::error::{Error, Result};

pub const US_PER_S: f64 = 1e6;
pub const DEFAULT_MIN_PROMINENCE: f64 = 0.3;
pub const DEFAULT_MAX_PLATEAU_FRAMES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Hz,
    Rpm,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Unit::Hz => "hz",
            Unit::Rpm => "rpm",
        }
    }

    fn convert_hz(self, hz: f64) -> f64 {
        match self {
            Unit::Hz => hz,
            Unit::Rpm => hz * 60.0,
        }
    }
}

impl FromStr for Unit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hz" => Ok(Unit::Hz),
            "rpm" => Ok(Unit::Rpm),
            other => Err(Error::parameter(
                "unit",
                format!("expected hz or rpm, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakConfig {
    /// Minimum prominence as a fraction of `max − min` of the scores.
    pub min_prominence: f64,
    /// Minimum spacing between retained peaks; `None` means one frame.
    pub min_separation_us: Option<u64>,
    /// Widest flat top still read as a peak. Longer flat runs carry no
    /// timing information.
    pub max_plateau_frames: usize,
    /// Refine peak times by fitting a parabola through each peak and its
    /// neighbours.
    pub refine: bool,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            min_prominence: DEFAULT_MIN_PROMINENCE,
            min_separation_us: None,
            max_plateau_frames: DEFAULT_MAX_PLATEAU_FRAMES,
            refine: false,
        }
    }
}

impl PeakConfig {
    pub fn separation_for(&self, duration_us: u64) -> u64 {
        self.min_separation_us.unwrap_or(duration_us)
    }

    pub fn validate(&self, duration_us: u64) -> Result<()> {
        if !(self.min_prominence > 0.0 && self.min_prominence <= 1.0) {
            return Err(Error::parameter(
                "min-prominence",
                format!("must lie in (0, 1], got {}", self.min_prominence),
            ));
        }
        if self.max_plateau_frames == 0 {
            return Err(Error::parameter("max-plateau-frames", "must be at least 1"));
        }
        let sep = self.separation_for(duration_us);
        if sep < duration_us {
            return Err(Error::parameter(
                "min-separation-us",
                format!("{sep} is shorter than the aggregation duration {duration_us}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakSeries {
    /// Frame indices of the retained peaks.
    pub indices: Vec<usize>,
    /// Start time of each peak frame, strictly increasing.
    pub peak_times_us: Vec<u64>,
    pub deltas_us: Vec<u64>,
    /// Sub-frame peak times, present when refinement was requested.
    pub refined_times_us: Option<Vec<f64>>,
    /// Start of the frame sequence; seconds are counted from here.
    pub origin_us: u64,
}

impl PeakSeries {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Δt samples used for statistics: refined when available.
    pub fn effective_deltas_us(&self) -> Vec<f64> {
        match &self.refined_times_us {
            Some(times) => times.windows(2).map(|w| w[1] - w[0]).collect(),
            None => self.deltas_us.iter().map(|&d| d as f64).collect(),
        }
    }
}

/// Topographic prominence of the peak occupying `left..=right` (a single
/// index, or a flat top): height above the higher of the two lowest points
/// reachable before meeting a value at least as high.
fn prominence(scores: &[f64], left: usize, right: usize) -> f64 {
    let h = scores[left];
    let mut left_min = h;
    for &v in scores[..left].iter().rev() {
        if v >= h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &scores[right + 1..] {
        if v >= h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Local maxima as `(left, right)` bounds. A flat top no wider than
/// `max_width` counts once when both of its outer neighbours are lower.
fn local_maxima(scores: &[f64], max_width: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let n = scores.len();
    let mut k = 1;
    while k + 1 < n {
        if scores[k] > scores[k - 1] {
            let mut right = k;
            while right + 1 < n && scores[right + 1] == scores[k] {
                right += 1;
            }
            if right + 1 < n && scores[right + 1] < scores[k] && right - k < max_width {
                out.push((k, right));
            }
            k = right + 1;
        } else {
            k += 1;
        }
    }
    out
}

pub fn detect_peaks(
    resp: &CorrelationResponse,
    seq: &FrameSequence,
    cfg: &PeakConfig,
) -> Result<PeakSeries> {
    cfg.validate(seq.duration_us)?;
    if resp.len() != seq.len() {
        return Err(Error::parameter(
            "scores",
            format!("{} scores for {} frames", resp.len(), seq.len()),
        ));
    }
    let scores = &resp.scores;
    if scores.len() < 3 {
        return Err(Error::InsufficientPeaks { found: 0 });
    }
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    let range = hi - lo;

    let separation = cfg.separation_for(seq.duration_us);
    let mut indices: Vec<usize> = Vec::new();
    if range > 0.0 {
        for (left, right) in local_maxima(scores, cfg.max_plateau_frames) {
            // relative slack keeps the test stable under rescaled scores
            if prominence(scores, left, right) < cfg.min_prominence * range * (1.0 - 1e-12) {
                continue;
            }
            let k = (left + right) / 2;
            let t = seq.frames[k].t_start();
            if let Some(&last) = indices.last() {
                if t - seq.frames[last].t_start() < separation {
                    continue;
                }
            }
            indices.push(k);
        }
    }
    if indices.len() < 2 {
        return Err(Error::InsufficientPeaks {
            found: indices.len(),
        });
    }

    let peak_times_us: Vec<u64> = indices.iter().map(|&k| seq.frames[k].t_start()).collect();
    let deltas_us = peak_times_us.windows(2).map(|w| w[1] - w[0]).collect();
    let refined_times_us = cfg.refine.then(|| {
        indices
            .iter()
            .zip(&peak_times_us)
            .map(|(&k, &t)| {
                let (a, b, c) = (scores[k - 1], scores[k], scores[k + 1]);
                let curvature = a - 2.0 * b + c;
                let offset = if curvature < 0.0 {
                    0.5 * (a - c) / curvature
                } else {
                    0.0
                };
                t as f64 + offset * seq.duration_us as f64
            })
            .collect()
    });
    Ok(PeakSeries {
        indices,
        peak_times_us,
        deltas_us,
        refined_times_us,
        origin_us: seq.t0,
    })
}

fn check_delta(delta_us: i64) -> Result<f64> {
    if delta_us <= 0 {
        return Err(Error::parameter(
            "delta_us",
            format!("must be positive, got {delta_us}"),
        ));
    }
    Ok(delta_us as f64)
}

/// Frequency of one period lasting `delta_us` microseconds.
pub fn hz_from_delta(delta_us: i64) -> Result<f64> {
    Ok(US_PER_S / check_delta(delta_us)?)
}

/// Revolutions per minute for one revolution lasting `delta_us`.
pub fn rpm_from_delta(delta_us: i64) -> Result<f64> {
    Ok(hz_from_delta(delta_us)? * 60.0)
}

/// Mean and standard error of a group of per-delta values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    /// Second of data, counted from the first frame. Absent for the
    /// whole-recording summary.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_bucket: Option<u64>,
    /// Mean in the report's unit.
    pub mean: f64,
    pub mean_hz: f64,
    pub mean_rpm: f64,
    /// Standard error of the mean; absent when only one sample exists.
    pub sigma: Option<f64>,
    pub two_sigma: Option<f64>,
    #[serde(rename = "M")]
    pub m: usize,
}

impl IntervalStats {
    fn from_hz(values_hz: &[f64], unit: Unit, t_bucket: Option<u64>) -> Self {
        let m = values_hz.len();
        let mean_hz = values_hz.iter().sum::<f64>() / m as f64;
        let mean_rpm = values_hz.iter().map(|v| v * 60.0).sum::<f64>() / m as f64;
        let mean = match unit {
            Unit::Hz => mean_hz,
            Unit::Rpm => mean_rpm,
        };
        let sigma = (m >= 2).then(|| {
            let var = values_hz
                .iter()
                .map(|&v| (unit.convert_hz(v) - mean).powi(2))
                .sum::<f64>()
                / (m - 1) as f64;
            (var / m as f64).sqrt()
        });
        Self {
            t_bucket,
            mean,
            mean_hz,
            mean_rpm,
            sigma,
            two_sigma: sigma.map(|s| 2.0 * s),
            m,
        }
    }

    /// `mean ± 2σ` with two decimals.
    pub fn display_value(&self) -> String {
        match self.two_sigma {
            Some(ts) => format!("{:.2} ± {:.2}", self.mean, ts),
            None => format!("{:.2} ± n/a", self.mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub unit: Unit,
    /// Number of retained peaks, N.
    pub peak_count: usize,
    pub origin_us: u64,
    pub peak_times_us: Vec<u64>,
    pub deltas_us: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub refined_deltas_us: Option<Vec<f64>>,
    pub overall: IntervalStats,
    /// One record per second that contains at least one delta.
    pub seconds: Vec<IntervalStats>,
}

impl EstimateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-second table: `t_bucket,mean,sigma,two_sigma,M,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_bucket,mean,sigma,two_sigma,M,value\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for s in &self.seconds {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.t_bucket.unwrap_or_default(),
                s.mean,
                opt(s.sigma),
                opt(s.two_sigma),
                s.m,
                s.display_value()
            );
        }
        out
    }
}

pub fn summarize(peaks: &PeakSeries, unit: Unit) -> Result<EstimateReport> {
    if peaks.len() < 2 {
        return Err(Error::InsufficientPeaks { found: peaks.len() });
    }
    let deltas = peaks.effective_deltas_us();
    let left_times: Vec<f64> = match &peaks.refined_times_us {
        Some(t) => t[..t.len() - 1].to_vec(),
        None => peaks.peak_times_us[..peaks.len() - 1]
            .iter()
            .map(|&t| t as f64)
            .collect(),
    };
    let mut values_hz = Vec::with_capacity(deltas.len());
    for &d in &deltas {
        if d.is_nan() || d <= 0.0 {
            return Err(Error::parameter(
                "delta_us",
                format!("must be positive, got {d}"),
            ));
        }
        values_hz.push(US_PER_S / d);
    }

    // Deltas are bucketed by the second containing their left peak.
    let bucket_of = |t: f64| ((t - peaks.origin_us as f64).max(0.0) / US_PER_S).floor() as u64;
    let mut seconds = Vec::new();
    let mut start = 0;
    while start < values_hz.len() {
        let bucket = bucket_of(left_times[start]);
        let mut end = start + 1;
        while end < values_hz.len() && bucket_of(left_times[end]) == bucket {
            end += 1;
        }
        seconds.push(IntervalStats::from_hz(
            &values_hz[start..end],
            unit,
            Some(bucket),
        ));
        start = end;
    }

    Ok(EstimateReport {
        unit,
        peak_count: peaks.len(),
        origin_us: peaks.origin_us,
        peak_times_us: peaks.peak_times_us.clone(),
        deltas_us: peaks.deltas_us.clone(),
        refined_deltas_us: peaks.refined_times_us.as_ref().map(|_| deltas.clone()),
        overall: IntervalStats::from_hz(&values_hz, unit, None),
        seconds,
    })
}
