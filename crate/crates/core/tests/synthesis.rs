//! Generator contracts checked against geometric and timing oracles.

use std::collections::HashMap;

use ee3p::{generate, validate_stream, Event, Polarity, SceneKind, SceneSpec};

/// Every event after the first period has a partner one period earlier at
/// the same pixel and polarity, within `slack_us`.
fn assert_periodic(spec: &SceneSpec, slack_us: f64) {
    let s = generate(spec).unwrap();
    let period = spec.period_us();
    let mut by_key: HashMap<(u32, u32, i8), Vec<f64>> = HashMap::new();
    for e in &s.events {
        by_key
            .entry((e.x, e.y, e.p.as_i8()))
            .or_default()
            .push(e.t as f64);
    }
    let mut checked = 0usize;
    for (key, times) in &by_key {
        for &t in times.iter().filter(|&&t| t >= period + slack_us + 1.0) {
            let want = t - period;
            let i = times.partition_point(|&u| u < want - slack_us);
            assert!(
                times.get(i).is_some_and(|&u| u <= want + slack_us),
                "{key:?} at {t} has no partner"
            );
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn flash_is_exactly_periodic() {
    let spec = SceneSpec::flash(2000.0, 0.01);
    assert_periodic(&spec, 0.0);
}

#[test]
fn rotation_20hz_repeats_every_50ms() {
    let spec = SceneSpec::rotation(20.0, 1.0);
    let s = generate(&spec).unwrap();
    let shifted = |k: u64| -> Vec<Event> {
        let mut v: Vec<Event> = s
            .events
            .iter()
            .filter(|e| e.t >= k * 50_000 && e.t < (k + 1) * 50_000)
            .map(|e| Event::new(e.x, e.y, e.t - k * 50_000, e.p))
            .collect();
        v.sort_by_key(|e| (e.t, e.y, e.x, e.p));
        v
    };
    let first = shifted(1);
    assert!(!first.is_empty());
    for k in 2..19 {
        assert_eq!(shifted(k), first, "period {k}");
    }
}

#[test]
fn rotation_and_vibration_periodic_within_quantization() {
    assert_periodic(&SceneSpec::rotation(21.1, 0.2), 1.0);
    assert_periodic(&SceneSpec::vibration(98.0, 0.05), 1.0);
    let mut tilted = SceneSpec::rotation(26.3, 0.2);
    if let SceneKind::Rotation(r) = &mut tilted.kind {
        r.tilt_deg = 45.0;
    }
    assert_periodic(&tilted, 1.0);
}

#[test]
fn noise_free_events_stay_on_feature_support() {
    let flash = SceneSpec::flash(2000.0, 0.01);
    let SceneKind::Flash(f) = flash.kind else {
        unreachable!()
    };
    for e in generate(&flash).unwrap().events {
        let (dx, dy) = (e.x as f64 + 0.5 - f.center_x, e.y as f64 + 0.5 - f.center_y);
        assert!(dx.hypot(dy) <= f.radius);
    }

    let vib = SceneSpec::vibration(98.0, 0.05);
    let SceneKind::Vibration(v) = vib.kind else {
        unreachable!()
    };
    for e in generate(&vib).unwrap().events {
        let rho = (e.x as f64 + 0.5 - v.center_x).hypot(e.y as f64 + 0.5 - v.center_y);
        assert!((rho - v.radius).abs() < v.amplitude);
    }
}

#[test]
fn tilted_rotation_stays_inside_squashed_ellipse() {
    let mut spec = SceneSpec::rotation(26.3, 0.2);
    let SceneKind::Rotation(r) = &mut spec.kind else {
        unreachable!()
    };
    r.tilt_deg = 45.0;
    let r = *r;
    let squash = 45f64.to_radians().cos();
    let s = generate(&spec).unwrap();
    assert!(!s.is_empty());
    let mut max_dy: f64 = 0.0;
    for e in &s.events {
        let dx = (e.x as f64 + 0.5 - r.center_x) / r.radius;
        let dy = (e.y as f64 + 0.5 - r.center_y) / (r.radius * squash);
        assert!(
            dx * dx + dy * dy <= 1.0 + 1e-9,
            "({}, {}) outside",
            e.x,
            e.y
        );
        max_dy = max_dy.max((e.y as f64 + 0.5 - r.center_y).abs());
    }
    // the footprint really is squashed
    assert!(max_dy <= r.radius * squash + 1.0);
    assert!(max_dy > r.radius * squash - 2.0);
}

#[test]
fn noise_is_uniform_and_balanced() {
    let mut spec = SceneSpec::flash(2000.0, 0.01);
    spec.geometry = ee3p::SensorGeometry::new(200, 100).unwrap();
    if let SceneKind::Flash(f) = &mut spec.kind {
        f.center_x = 100.0;
        f.center_y = 50.0;
    }
    spec.noise_rate = 500.0;
    spec.seed = 3;
    let signal = {
        let mut quiet = spec.clone();
        quiet.noise_rate = 0.0;
        generate(&quiet).unwrap().len()
    };
    let s = generate(&spec).unwrap();
    assert_eq!(validate_stream(&s), Ok(()));
    let noise = s.len() - signal;
    // Poisson mean 500 · 20000 px · 0.01 s = 100000
    assert!((noise as f64 - 100_000.0).abs() < 5.0 * 100_000f64.sqrt());
    let positive = s
        .events
        .iter()
        .filter(|e| e.p == Polarity::Positive)
        .count();
    let negative = s.len() - positive;
    assert!((positive as f64 - negative as f64).abs() < 5.0 * (s.len() as f64).sqrt());
}

#[test]
fn every_generated_stream_validates() {
    for spec in [
        SceneSpec::flash(2000.0, 0.01),
        SceneSpec::vibration(98.0, 0.1),
        SceneSpec::rotation(21.1, 0.2),
    ] {
        let mut spec = spec;
        spec.noise_rate = 0.5;
        assert_eq!(validate_stream(&generate(&spec).unwrap()), Ok(()));
    }
}
