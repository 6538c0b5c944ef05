use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ee3p(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ee3p"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// 2000 Hz flash at the sensor centre, written to `name`.
fn flash(dir: &Path, name: &str, seconds: &str) {
    let o = ee3p(
        dir,
        &[
            "synth",
            "--set",
            "kind=flash",
            "--set",
            "frequency_hz=2000",
            "--set",
            &format!("duration_s={seconds}"),
            "--output",
            name,
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("ground-truth period: 500 us"));
}

const ROI: &str = "618,338,663,383";

#[test]
fn synth_then_estimate_recovers_2000hz() {
    let dir = tempfile::tempdir().unwrap();
    flash(dir.path(), "flash.csv", "0.2");
    let text = fs::read_to_string(dir.path().join("flash.csv")).unwrap();
    assert!(text.starts_with("ee3p-csv v1 1280 720\n"));

    let o = ee3p(
        dir.path(),
        &[
            "estimate",
            "--input",
            "flash.csv",
            "--roi",
            ROI,
            "--duration-us",
            "100",
            "--template",
            "auto",
            "--report",
            "r.json",
            "--csv",
            "r.csv",
            "--scores",
            "s.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["schema"], "ee3p-report/1");
    assert_eq!(report["unit"], "hz");
    assert_eq!(report["overall"]["mean"], 2000.0);
    assert_eq!(report["overall"]["two_sigma"], 0.0);
    assert_eq!(
        report["run"]["roi"],
        serde_json::json!([618, 338, 663, 383])
    );
    assert_eq!(report["run"]["duration_us"], 100);
    assert!(report["deltas_us"]
        .as_array()
        .unwrap()
        .iter()
        .all(|d| d == 500));

    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(csv.starts_with("t_bucket,mean,sigma,two_sigma,M,value\n0,2000,"));
    let scores = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(scores.lines().next(), Some("index,t_start_us,score"));
    assert_eq!(
        scores.lines().count() - 1,
        report["run"]["frame_count"].as_u64().unwrap() as usize
    );
}

#[test]
fn rpm_unit_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    flash(dir.path(), "flash.bin", "0.1");
    fs::write(
        dir.path().join("run.cfg"),
        format!("input = flash.bin\nroi = {ROI}\nduration-us = 250\nunit = rpm\n"),
    )
    .unwrap();
    // flag wins over the file
    let o = ee3p(
        dir.path(),
        &["estimate", "--config", "run.cfg", "--duration-us", "100"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["unit"], "rpm");
    assert_eq!(report["overall"]["mean"], 120_000.0);
    assert_eq!(report["run"]["duration_us"], 100);
}

#[test]
fn inverted_roi_is_a_config_error_naming_roi() {
    let dir = tempfile::tempdir().unwrap();
    flash(dir.path(), "flash.bin", "0.01");
    let o = ee3p(
        dir.path(),
        &[
            "estimate",
            "--input",
            "flash.bin",
            "--roi",
            "100,0,50,50",
            "--duration-us",
            "100",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error[config]: roi"), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn roi_outside_sensor_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    flash(dir.path(), "flash.bin", "0.01");
    let o = ee3p(
        dir.path(),
        &[
            "estimate",
            "--input",
            "flash.bin",
            "--roi",
            "1270,0,1290,20",
            "--duration-us",
            "100",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).starts_with("error[config]: roi"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn empty_roi_reports_insufficient_peaks() {
    let dir = tempfile::tempdir().unwrap();
    flash(dir.path(), "flash.bin", "0.05");
    let o = ee3p(
        dir.path(),
        &[
            "estimate",
            "--input",
            "flash.bin",
            "--roi",
            "0,0,30,30",
            "--duration-us",
            "100",
            "--report",
            "r.json",
        ],
    );
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).starts_with("error[insufficient_peaks]"));
    assert!(!dir.path().join("r.json").exists());
}

#[test]
fn error_categories_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let run = |input: &str| {
        ee3p(
            p,
            &[
                "estimate",
                "--input",
                input,
                "--roi",
                "0,0,10,10",
                "--duration-us",
                "100",
            ],
        )
    };

    let o = run("missing.bin");
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[io]"));

    fs::write(p.join("bad.csv"), "ee3p-csv v1 20 20\n1,1,5,1\n1,1,4,1\n").unwrap();
    let o = run("bad.csv");
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[format]"));
    assert!(stderr(&o).contains("record 2"));

    let o = ee3p(
        p,
        &["estimate", "--roi", "0,0,10,10", "--duration-us", "100"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]: input"));

    let o = ee3p(p, &["estimate", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]"));

    for (flag, value, field) in [
        ("--corr-mode", "sideways", "corr-mode"),
        ("--backend", "gpu", "backend"),
        ("--unit", "mph", "unit"),
        ("--min-prominence", "0", "min-prominence"),
        ("--min-separation-us", "10", "min-separation-us"),
        ("--template", "first", "template"),
    ] {
        let o = ee3p(
            p,
            &[
                "estimate",
                "--input",
                "x",
                "--roi",
                "0,0,10,10",
                "--duration-us",
                "100",
                flag,
                value,
            ],
        );
        assert_eq!(o.status.code(), Some(2), "{flag}");
        assert!(
            stderr(&o).starts_with(&format!("error[config]: {field}")),
            "{}",
            stderr(&o)
        );
    }
}

#[test]
fn json_report_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    flash(dir.path(), "flash.bin", "0.1");
    let args = |out: &'static str| {
        [
            "estimate",
            "--input",
            "flash.bin",
            "--roi",
            ROI,
            "--duration-us",
            "100",
            "--corr-mode",
            "shift",
            "--report",
            out,
        ]
    };
    assert!(ee3p(dir.path(), &args("a.json")).status.success());
    assert!(ee3p(dir.path(), &args("b.json")).status.success());
    let a = fs::read(dir.path().join("a.json")).unwrap();
    let b = fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn duration_sweep_degrades_at_long_frames() {
    let dir = tempfile::tempdir().unwrap();
    flash(dir.path(), "flash.bin", "1");
    let o = ee3p(
        dir.path(),
        &[
            "sweep",
            "--input",
            "flash.bin",
            "--roi",
            ROI,
            "--durations",
            "100,250,500,1000",
            "--report",
            "sweep.json",
            "--csv",
            "sweep.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.starts_with("duration_us"));
    assert_eq!(table.lines().count(), 5);

    let sweep: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    let rows = sweep["rows"].as_array().unwrap();
    let values: Vec<u64> = rows.iter().map(|r| r["value"].as_u64().unwrap()).collect();
    assert_eq!(values, [100, 250, 500, 1000]);
    for row in &rows[..2] {
        assert_eq!(row["status"], "ok");
        let mean = row["result"]["overall"]["mean"].as_f64().unwrap();
        assert!((mean - 2000.0).abs() < 0.8, "{mean}");
    }
    for row in &rows[2..] {
        let degraded = row["status"] != "ok"
            || (row["result"]["overall"]["mean"].as_f64().unwrap() - 2000.0).abs() > 200.0;
        assert!(degraded, "{row}");
    }
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv.starts_with("duration_us,t_bucket,mean,sigma,two_sigma,M,value,status\n"));
}

#[test]
fn roi_size_sweep_stays_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    flash(dir.path(), "flash.bin", "0.5");
    let o = ee3p(
        dir.path(),
        &[
            "sweep",
            "--input",
            "flash.bin",
            "--roi",
            ROI,
            "--duration-us",
            "100",
            "--roi-sizes",
            "125,45,20",
            "--report",
            "sweep.json",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let sweep: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep["axis"], "roi_px");
    for row in sweep["rows"].as_array().unwrap() {
        assert_eq!(row["status"], "ok", "{row}");
        let mean = row["result"]["overall"]["mean"].as_f64().unwrap();
        assert!((mean - 2000.0).abs() < 0.8);
        let side = row["value"].as_u64().unwrap();
        let roi = &row["roi"];
        assert_eq!(roi[2].as_u64().unwrap() - roi[0].as_u64().unwrap(), side);
    }
}

#[test]
fn sweep_needs_exactly_one_non_empty_axis() {
    let dir = tempfile::tempdir().unwrap();
    flash(dir.path(), "flash.bin", "0.01");
    let base = [
        "sweep",
        "--input",
        "flash.bin",
        "--roi",
        ROI,
        "--duration-us",
        "100",
    ];
    for extra in [
        &["--durations", ""][..],
        &["--roi-sizes", " , "][..],
        &[][..],
        &["--durations", "100", "--roi-sizes", "20"][..],
    ] {
        let args: Vec<&str> = base.iter().chain(extra).copied().collect();
        let o = ee3p(dir.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{extra:?}");
        assert!(stderr(&o).starts_with("error[config]"));
    }
}

#[test]
fn synth_rejects_duty_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("spec.cfg"),
        "kind = flash\nfrequency_hz = 2000\nduration_s = 0.01\nduty = 1.5\n",
    )
    .unwrap();
    let o = ee3p(
        dir.path(),
        &["synth", "--spec", "spec.cfg", "--output", "x.bin"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]: duty"));
    assert!(!dir.path().join("x.bin").exists());
}

#[test]
fn synth_output_validates_and_seed_changes_noise() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("spec.cfg"),
        "kind = rotation\nfrequency_hz = 20\nduration_s = 0.15\nnoise_rate = 5\ntilt_deg = 45\n",
    )
    .unwrap();
    for (seed, out) in [("1", "a.bin"), ("1", "b.bin"), ("2", "c.bin")] {
        let o = ee3p(
            p,
            &[
                "synth", "--spec", "spec.cfg", "--seed", seed, "--output", out,
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let v = ee3p(p, &["validate", "--input", out]);
        assert!(v.status.success());
        assert!(stdout(&v).starts_with("ok: "));
    }
    let read = |n: &str| fs::read(p.join(n)).unwrap();
    assert_eq!(read("a.bin"), read("b.bin"));
    assert_ne!(read("a.bin"), read("c.bin"));
}

#[test]
fn frames_dumps_graymaps() {
    let dir = tempfile::tempdir().unwrap();
    flash(dir.path(), "flash.bin", "0.01");
    let o = ee3p(
        dir.path(),
        &[
            "frames",
            "--input",
            "flash.bin",
            "--roi",
            ROI,
            "--duration-us",
            "100",
            "--dump-frames",
            "out",
            "--index",
            "0,5",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let pgm = fs::read(dir.path().join("out/frame_000005.pgm")).unwrap();
    let header = b"P5\n45 45\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert_eq!(pgm.len(), header.len() + 45 * 45);
    // frame 5 starts at the second rising edge, so it has white cells
    assert!(pgm[header.len()..].contains(&255));
    assert!(dir.path().join("out/template.pgm").exists());
    assert!(!dir.path().join("out/frame_000001.pgm").exists());

    let o = ee3p(
        dir.path(),
        &[
            "frames",
            "--input",
            "flash.bin",
            "--roi",
            ROI,
            "--duration-us",
            "100",
            "--dump-frames",
            "out",
            "--index",
            "100000",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[config]: index"));
}

#[test]
fn validate_reports_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("oob.csv"), "ee3p-csv v1 10 10\n3,12,0,1\n").unwrap();
    let o = ee3p(dir.path(), &["validate", "--input", "oob.csv"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[format]: record 1"));

    fs::write(dir.path().join("short.bin"), b"EE3P\x01").unwrap();
    let o = ee3p(dir.path(), &["validate", "--input", "short.bin"]);
    assert_eq!(o.status.code(), Some(4));
}
