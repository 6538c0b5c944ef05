//! Synthetic event streams with exactly known periodicity.
//!
//! Each scene is an ideal pixel array looking at a periodic brightness
//! pattern. A pixel fires when its log-brightness crosses a contrast step, so
//! events appear only where a feature boundary sweeps over a pixel centre.
//! Crossing times are solved analytically per pixel and rounded to the
//! nearest microsecond, which is what sampling the scene on a 1 µs grid would
//! give.
//!
//! Features are a fixed factor [`FEATURE_INTENSITY_RATIO`] brighter than the
//! background. With a relative contrast threshold `c`, one crossing of the
//! feature boundary fires `floor(ln(ratio) / ln(1 + c))` events of the same
//! polarity at the same timestamp.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::slice::ParallelSliceMut;

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, SensorGeometry};

pub const FEATURE_INTENSITY_RATIO: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlashParams {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    /// Fraction of each period the light is on.
    pub duty: f64,
}

/// A bright disc whose rim oscillates radially, producing a ring of edge
/// events that expands and contracts once per period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VibrationParams {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub amplitude: f64,
}

/// A bright annular sector (the mark) on a disc spinning counter-clockwise
/// in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationParams {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub mark_width_rad: f64,
    /// Radial length of the mark, measured inward from the rim.
    pub mark_extent: f64,
    /// Off-axis viewing angle; the disc is squashed vertically by `cos(tilt)`.
    pub tilt_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SceneKind {
    Flash(FlashParams),
    Vibration(VibrationParams),
    Rotation(RotationParams),
}

impl SceneKind {
    pub fn name(&self) -> &'static str {
        match self {
            SceneKind::Flash(_) => "flash",
            SceneKind::Vibration(_) => "vibration",
            SceneKind::Rotation(_) => "rotation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub frequency_hz: f64,
    pub duration_s: f64,
    pub geometry: SensorGeometry,
    pub seed: u64,
    /// Background events per pixel per second.
    pub noise_rate: f64,
    /// Relative intensity change needed to fire one event.
    pub contrast_threshold: f64,
}

pub const DEFAULT_CONTRAST_THRESHOLD: f64 = 0.5;

impl SceneSpec {
    fn with_kind(kind: SceneKind, frequency_hz: f64, duration_s: f64) -> Self {
        Self {
            kind,
            frequency_hz,
            duration_s,
            geometry: SensorGeometry::HD,
            seed: 0,
            noise_rate: 0.0,
            contrast_threshold: DEFAULT_CONTRAST_THRESHOLD,
        }
    }

    /// 50% duty flashing disc of radius 15 px in the middle of a 720p sensor.
    pub fn flash(frequency_hz: f64, duration_s: f64) -> Self {
        Self::with_kind(
            SceneKind::Flash(FlashParams {
                center_x: 640.0,
                center_y: 360.0,
                radius: 15.0,
                duty: 0.5,
            }),
            frequency_hz,
            duration_s,
        )
    }

    pub fn vibration(frequency_hz: f64, duration_s: f64) -> Self {
        Self::with_kind(
            SceneKind::Vibration(VibrationParams {
                center_x: 640.0,
                center_y: 360.0,
                radius: 100.0,
                amplitude: 12.0,
            }),
            frequency_hz,
            duration_s,
        )
    }

    pub fn rotation(frequency_hz: f64, duration_s: f64) -> Self {
        Self::with_kind(
            SceneKind::Rotation(RotationParams {
                center_x: 640.0,
                center_y: 360.0,
                radius: 120.0,
                mark_width_rad: 0.6,
                mark_extent: 50.0,
                tilt_deg: 0.0,
            }),
            frequency_hz,
            duration_s,
        )
    }

    pub fn duration_us(&self) -> u64 {
        (self.duration_s * 1e6).round() as u64
    }

    pub fn period_us(&self) -> f64 {
        ground_truth_period_us(self)
    }

    /// Events fired by one crossing of a feature boundary.
    pub fn events_per_crossing(&self) -> u32 {
        let step = (1.0 + self.contrast_threshold).ln();
        (FEATURE_INTENSITY_RATIO.ln() / step + 1e-12).floor() as u32
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::parameter(
                    field,
                    format!("must be positive, got {v}"),
                ))
            }
        };
        positive("frequency_hz", self.frequency_hz)?;
        positive("duration_s", self.duration_s)?;
        if self.frequency_hz * self.duration_s < 2.0 {
            return Err(Error::parameter(
                "duration_s",
                format!(
                    "{} s covers fewer than two periods at {} Hz",
                    self.duration_s, self.frequency_hz
                ),
            ));
        }
        SensorGeometry::new(self.geometry.width, self.geometry.height)?;
        if !(self.noise_rate.is_finite() && self.noise_rate >= 0.0) {
            return Err(Error::parameter(
                "noise_rate",
                format!("must be non-negative, got {}", self.noise_rate),
            ));
        }
        positive("contrast_threshold", self.contrast_threshold)?;

        let (cx, cy, half_w, half_h) = match self.kind {
            SceneKind::Flash(p) => {
                positive("radius", p.radius)?;
                if !(p.duty > 0.0 && p.duty < 1.0) {
                    return Err(Error::parameter(
                        "duty",
                        format!("must lie in (0, 1), got {}", p.duty),
                    ));
                }
                (p.center_x, p.center_y, p.radius, p.radius)
            }
            SceneKind::Vibration(p) => {
                positive("radius", p.radius)?;
                positive("amplitude", p.amplitude)?;
                if p.amplitude >= p.radius {
                    return Err(Error::parameter(
                        "amplitude",
                        format!("must be below the radius {}", p.radius),
                    ));
                }
                let r = p.radius + p.amplitude;
                (p.center_x, p.center_y, r, r)
            }
            SceneKind::Rotation(p) => {
                positive("radius", p.radius)?;
                if !(p.mark_width_rad > 0.0 && p.mark_width_rad < TAU) {
                    return Err(Error::parameter(
                        "mark_width_rad",
                        format!("must lie in (0, 2π), got {}", p.mark_width_rad),
                    ));
                }
                if !(p.mark_extent > 0.0 && p.mark_extent <= p.radius) {
                    return Err(Error::parameter(
                        "mark_extent",
                        format!("must lie in (0, radius], got {}", p.mark_extent),
                    ));
                }
                if !(0.0..=60.0).contains(&p.tilt_deg) {
                    return Err(Error::parameter(
                        "tilt_deg",
                        format!("must lie in [0, 60], got {}", p.tilt_deg),
                    ));
                }
                let squash = p.tilt_deg.to_radians().cos();
                (p.center_x, p.center_y, p.radius, p.radius * squash)
            }
        };
        let inside = cx.is_finite()
            && cy.is_finite()
            && cx - half_w >= 0.0
            && cy - half_h >= 0.0
            && cx + half_w <= self.geometry.width as f64
            && cy + half_h <= self.geometry.height as f64;
        if !inside {
            return Err(Error::parameter(
                "center",
                format!(
                    "{} feature at ({cx},{cy}) does not fit the {}x{} sensor",
                    self.kind.name(),
                    self.geometry.width,
                    self.geometry.height
                ),
            ));
        }
        Ok(())
    }

    /// Flat `key = value` rendering accepted by [`SceneSpec::from_str`].
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("kind", self.kind.name().to_string());
        kv("frequency_hz", self.frequency_hz.to_string());
        kv("duration_s", self.duration_s.to_string());
        kv("width", self.geometry.width.to_string());
        kv("height", self.geometry.height.to_string());
        kv("seed", self.seed.to_string());
        kv("noise_rate", self.noise_rate.to_string());
        kv("contrast_threshold", self.contrast_threshold.to_string());
        match self.kind {
            SceneKind::Flash(p) => {
                kv("center_x", p.center_x.to_string());
                kv("center_y", p.center_y.to_string());
                kv("radius", p.radius.to_string());
                kv("duty", p.duty.to_string());
            }
            SceneKind::Vibration(p) => {
                kv("center_x", p.center_x.to_string());
                kv("center_y", p.center_y.to_string());
                kv("radius", p.radius.to_string());
                kv("amplitude", p.amplitude.to_string());
            }
            SceneKind::Rotation(p) => {
                kv("center_x", p.center_x.to_string());
                kv("center_y", p.center_y.to_string());
                kv("radius", p.radius.to_string());
                kv("mark_width_rad", p.mark_width_rad.to_string());
                kv("mark_extent", p.mark_extent.to_string());
                kv("tilt_deg", p.tilt_deg.to_string());
            }
        }
        out
    }
}

/// Parses `key = value` lines; `#` starts a comment. Unset keys take the
/// defaults of the matching constructor ([`SceneSpec::flash`] etc.).
impl FromStr for SceneSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let pairs = crate::config::parse_key_values(text)?;
        let get = |key: &str| {
            pairs
                .iter()
                .rev()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        };
        let num = |key: &'static str| -> Result<Option<f64>> {
            get(key)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::parameter(key, format!("not a number: {v:?}")))
                })
                .transpose()
        };
        let int = |key: &'static str| -> Result<Option<u64>> {
            get(key)
                .map(|v| {
                    v.parse::<u64>()
                        .map_err(|_| Error::parameter(key, format!("not an integer: {v:?}")))
                })
                .transpose()
        };

        const COMMON: &[&str] = &[
            "kind",
            "frequency_hz",
            "duration_s",
            "width",
            "height",
            "seed",
            "noise_rate",
            "contrast_threshold",
            "center_x",
            "center_y",
            "radius",
        ];
        let kind = get("kind").ok_or_else(|| Error::parameter("kind", "missing"))?;
        let frequency_hz =
            num("frequency_hz")?.ok_or_else(|| Error::parameter("frequency_hz", "missing"))?;
        let duration_s =
            num("duration_s")?.ok_or_else(|| Error::parameter("duration_s", "missing"))?;
        let (mut spec, extra): (SceneSpec, &[&str]) = match kind {
            "flash" => (Self::flash(frequency_hz, duration_s), &["duty"]),
            "vibration" => (Self::vibration(frequency_hz, duration_s), &["amplitude"]),
            "rotation" => (
                Self::rotation(frequency_hz, duration_s),
                &["mark_width_rad", "mark_extent", "tilt_deg"],
            ),
            other => {
                return Err(Error::parameter(
                    "kind",
                    format!("unknown scene kind {other:?} (flash, vibration, rotation)"),
                ))
            }
        };
        if let Some((key, _)) = pairs
            .iter()
            .find(|(k, _)| !COMMON.contains(&k.as_str()) && !extra.contains(&k.as_str()))
        {
            return Err(Error::parameter(
                "spec",
                format!("unknown key {key:?} for {kind} scenes"),
            ));
        }

        let width = int("width")?
            .map(|w| w as u32)
            .unwrap_or(spec.geometry.width);
        let height = int("height")?
            .map(|h| h as u32)
            .unwrap_or(spec.geometry.height);
        spec.geometry = SensorGeometry::new(width, height)?;
        if let Some(seed) = int("seed")? {
            spec.seed = seed;
        }
        if let Some(v) = num("noise_rate")? {
            spec.noise_rate = v;
        }
        if let Some(v) = num("contrast_threshold")? {
            spec.contrast_threshold = v;
        }
        let cx = num("center_x")?;
        let cy = num("center_y")?;
        let radius = num("radius")?;
        match &mut spec.kind {
            SceneKind::Flash(p) => {
                p.center_x = cx.unwrap_or(p.center_x);
                p.center_y = cy.unwrap_or(p.center_y);
                p.radius = radius.unwrap_or(p.radius);
                p.duty = num("duty")?.unwrap_or(p.duty);
            }
            SceneKind::Vibration(p) => {
                p.center_x = cx.unwrap_or(p.center_x);
                p.center_y = cy.unwrap_or(p.center_y);
                p.radius = radius.unwrap_or(p.radius);
                p.amplitude = num("amplitude")?.unwrap_or(p.amplitude);
            }
            SceneKind::Rotation(p) => {
                p.center_x = cx.unwrap_or(p.center_x);
                p.center_y = cy.unwrap_or(p.center_y);
                p.radius = radius.unwrap_or(p.radius);
                p.mark_width_rad = num("mark_width_rad")?.unwrap_or(p.mark_width_rad);
                p.mark_extent = num("mark_extent")?.unwrap_or(p.mark_extent);
                p.tilt_deg = num("tilt_deg")?.unwrap_or(p.tilt_deg);
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Period of the scene in microseconds.
pub fn ground_truth_period_us(spec: &SceneSpec) -> f64 {
    1e6 / spec.frequency_hz
}

/// Renders the scene. Output is sorted by `(t, y, x, p)` and depends only on
/// `spec` (including its seed).
pub fn generate(spec: &SceneSpec) -> Result<EventStream> {
    spec.validate()?;
    let duration_us = spec.duration_us();
    let period = spec.period_us();
    let repeats = spec.events_per_crossing() as usize;
    let mut events = Vec::new();

    if repeats > 0 {
        let mut emit = |x: u32, y: u32, phase_us: f64, p: Polarity| {
            // phase_us in [0, period): the first crossing of this boundary
            let mut k = 0u64;
            loop {
                let t = (phase_us + k as f64 * period).round();
                if t >= duration_us as f64 {
                    break;
                }
                let e = Event::new(x, y, t as u64, p);
                for _ in 0..repeats {
                    events.push(e);
                }
                k += 1;
            }
        };

        match spec.kind {
            SceneKind::Flash(f) => {
                let off_phase = f.duty * period;
                for_each_pixel(
                    spec.geometry,
                    f.center_x,
                    f.center_y,
                    f.radius,
                    f.radius,
                    |x, y, dx, dy| {
                        if dx * dx + dy * dy <= f.radius * f.radius {
                            emit(x, y, 0.0, Polarity::Positive);
                            emit(x, y, off_phase, Polarity::Negative);
                        }
                    },
                );
            }
            SceneKind::Vibration(v) => {
                let reach = v.radius + v.amplitude;
                for_each_pixel(
                    spec.geometry,
                    v.center_x,
                    v.center_y,
                    reach,
                    reach,
                    |x, y, dx, dy| {
                        let rho = (dx * dx + dy * dy).sqrt();
                        let s = (rho - v.radius) / v.amplitude;
                        if s.abs() >= 1.0 {
                            return;
                        }
                        // rim radius is radius + amplitude·sin(2π t / T)
                        let rise = s.asin();
                        let fall = std::f64::consts::PI - rise;
                        emit(x, y, phase_to_us(rise, period), Polarity::Positive);
                        emit(x, y, phase_to_us(fall, period), Polarity::Negative);
                    },
                );
            }
            SceneKind::Rotation(r) => {
                let squash = r.tilt_deg.to_radians().cos();
                let inner = r.radius - r.mark_extent;
                let half = r.mark_width_rad / 2.0;
                for_each_pixel(
                    spec.geometry,
                    r.center_x,
                    r.center_y,
                    r.radius,
                    r.radius * squash,
                    |x, y, dx, dy| {
                        let dy = dy / squash;
                        let rho = (dx * dx + dy * dy).sqrt();
                        if rho < inner || rho > r.radius {
                            return;
                        }
                        // mark centre sits at angle 2π t / T
                        let phi = dy.atan2(dx);
                        emit(x, y, phase_to_us(phi - half, period), Polarity::Positive);
                        emit(x, y, phase_to_us(phi + half, period), Polarity::Negative);
                    },
                );
            }
        }
    }

    add_noise(spec, duration_us, &mut events)?;
    events.par_sort_unstable_by_key(|e| (e.t, e.y, e.x, e.p));
    Ok(EventStream::new(spec.geometry, events))
}

/// Maps an angle to the first time in `[0, period)` the phase `2π t / T`
/// reaches it.
fn phase_to_us(angle: f64, period: f64) -> f64 {
    angle.rem_euclid(TAU) / TAU * period
}

/// Visits pixels whose centres lie in the bounding box of an ellipse,
/// passing offsets of the pixel centre from the ellipse centre.
fn for_each_pixel(
    geometry: SensorGeometry,
    cx: f64,
    cy: f64,
    half_w: f64,
    half_h: f64,
    mut f: impl FnMut(u32, u32, f64, f64),
) {
    let x_lo = (cx - half_w - 1.0).floor().max(0.0) as u32;
    let y_lo = (cy - half_h - 1.0).floor().max(0.0) as u32;
    let x_hi = ((cx + half_w + 1.0).ceil() as u32).min(geometry.width);
    let y_hi = ((cy + half_h + 1.0).ceil() as u32).min(geometry.height);
    for y in y_lo..y_hi {
        for x in x_lo..x_hi {
            f(x, y, x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        }
    }
}

fn add_noise(spec: &SceneSpec, duration_us: u64, events: &mut Vec<Event>) -> Result<()> {
    if spec.noise_rate == 0.0 || duration_us == 0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pixels = spec.geometry.width as f64 * spec.geometry.height as f64;
    let mean = spec.noise_rate * pixels * spec.duration_s;
    let count = Poisson::new(mean)
        .map_err(|e| Error::parameter("noise_rate", e.to_string()))?
        .sample(&mut rng) as usize;
    events.reserve(count);
    for _ in 0..count {
        let x = rng.gen_range(0..spec.geometry.width);
        let y = rng.gen_range(0..spec.geometry.height);
        let t = rng.gen_range(0..duration_us);
        let p = if rng.gen_bool(0.5) {
            Polarity::Positive
        } else {
            Polarity::Negative
        };
        events.push(Event::new(x, y, t, p));
    }
    Ok(())
}
