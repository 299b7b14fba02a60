use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use meshreg::io::{load_edges, DEFAULT_THRESHOLD};
use meshreg::synth::SynthField;
use meshreg::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn meshreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshreg"))
        .args(args)
        .output()
        .expect("failed to launch meshreg")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn synth(dir: &Path, family: &str, seed: u64, extra: &[&str]) -> PathBuf {
    let out = dir.join(format!("{family}-{seed}"));
    let seed = seed.to_string();
    let mut args = vec!["synth", "--family", family, "--seed", &seed, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let r = meshreg(&args);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&meshreg(&["--help"])), 0);
    assert_eq!(code(&meshreg(&["--version"])), 0);
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(code(&meshreg(&[])), 1);
    assert_eq!(code(&meshreg(&["register", "--source", "a.png"])), 1);
    assert_eq!(code(&meshreg(&["synth", "--family", "blob", "--seed", "1", "--out", "x"])), 1);
}

#[test]
fn missing_input_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.png");
    let r = meshreg(&["register", "--source", s(&missing), "--target", s(&missing), "--out", s(dir.path())]);
    assert_eq!(code(&r), 2);
    assert!(stderr(&r).contains(s(&missing)), "{}", stderr(&r));
    let r = meshreg(&["dt", "--source", s(&missing), "--out", s(dir.path())]);
    assert_eq!(code(&r), 2);
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synth(dir.path(), "ellipse", 0, &["--size", "64"]);
    let cfg = dir.path().join("c.toml");
    for text in ["lamda = 0.1\n", "lambda = -1.0\n", "lambda = [\n"] {
        std::fs::write(&cfg, text).unwrap();
        let r = meshreg(&[
            "register",
            "--source",
            s(&pair.join("source.png")),
            "--target",
            s(&pair.join("target.png")),
            "--config",
            s(&cfg),
            "--out",
            s(&dir.path().join("out")),
        ]);
        assert_eq!(code(&r), 1, "{text}: {}", stderr(&r));
    }
}

#[test]
fn empty_contour_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synth(dir.path(), "ellipse", 0, &["--size", "64"]);
    let blank = dir.path().join("blank.png");
    meshreg::io::save_edges(&blank, &meshreg::EdgeMap::empty(64, 64)).unwrap();
    let r = meshreg(&[
        "register",
        "--source",
        s(&blank),
        "--target",
        s(&pair.join("target.png")),
        "--out",
        s(&dir.path().join("out")),
    ]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));
}

#[test]
fn register_identical_files_reports_zero_distance() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synth(dir.path(), "star", 4, &[]);
    let out = dir.path().join("out");
    let src = pair.join("source.png");
    let r = meshreg(&["register", "--source", s(&src), "--target", s(&src), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["metrics"]["mean"], 0.0);
    assert_eq!(report["metrics"]["max"], 0.0);
}

#[test]
fn full_registration_writes_parseable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synth(dir.path(), "polyline", 2, &[]);
    let out = dir.path().join("out");
    let r = meshreg(&[
        "register",
        "--source",
        s(&pair.join("source.png")),
        "--target",
        s(&pair.join("target.png")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));

    let model = read_json(&out.join("model.json"));
    assert_eq!(model["patches"].as_array().unwrap().len(), 676);
    let report = read_json(&out.join("report.json"));
    assert!(report["metrics"]["mean"].as_f64().unwrap() < 0.5);
    assert_eq!(report["levels"].as_array().unwrap().len(), 3);

    let csv = std::fs::read_to_string(out.join("field.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,y,ux,uy,covered"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 150 * 150);
    assert!(rows.iter().all(|r| r.len() == 5 && r[2].is_finite() && r[3].is_finite()));

    for svg in ["overlay.svg", "grid.svg"] {
        let text = std::fs::read_to_string(out.join(svg)).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"), "{svg}");
    }
    let overlay = std::fs::read_to_string(out.join("overlay.svg")).unwrap();
    for color in ["red", "blue", "green"] {
        assert!(overlay.contains(&format!("fill=\"{color}\"")));
    }
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "register");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn synth_is_deterministic_and_peak_zero_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "star", 9, &[]);
    let b = dir.path().join("again");
    let r = meshreg(&["synth", "--family", "star", "--seed", "9", "--out", s(&b)]);
    assert_eq!(code(&r), 0);
    for f in ["source.png", "target.png", "field.csv", "bumps.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let flat = synth(dir.path(), "ellipse", 3, &["--peak", "0"]);
    assert_eq!(
        std::fs::read(flat.join("source.png")).unwrap(),
        std::fs::read(flat.join("target.png")).unwrap()
    );
}

/// The bump formula evaluated directly from the JSON parameters.
fn bump_oracle(doc: &Value, x: f64, y: f64) -> (f64, f64) {
    let t = &doc["translation"];
    let (mut gx, mut gy) = (t[0].as_f64().unwrap(), t[1].as_f64().unwrap());
    for b in doc["bumps"].as_array().unwrap() {
        let (cx, cy) = (b["center"][0].as_f64().unwrap(), b["center"][1].as_f64().unwrap());
        let sigma = b["sigma"].as_f64().unwrap();
        let k = (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp();
        gx += b["amplitude"][0].as_f64().unwrap() * k;
        gy += b["amplitude"][1].as_f64().unwrap() * k;
    }
    (gx, gy)
}

#[test]
fn synth_field_matches_the_bump_formula() {
    let dir = tempfile::tempdir().unwrap();
    let out = synth(dir.path(), "ellipse", 21, &["--shift-x", "1.5", "--shift-y", "-2"]);
    let doc = read_json(&out.join("bumps.json"));
    let n = doc["bumps"].as_array().unwrap().len();
    assert!((2..=4).contains(&n));
    let field: SynthField = serde_json::from_value(doc.clone()).unwrap();
    let csv = std::fs::read_to_string(out.join("field.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let (x, y) = (rng.random_range(0..150usize), rng.random_range(0..150usize));
        let (gx, gy) = bump_oracle(&doc, x as f64, y as f64);
        let g = field.eval(Vec2::new(x as f64, y as f64));
        assert!((g.x - gx).abs() <= 1e-9 && (g.y - gy).abs() <= 1e-9);
        let row: Vec<f64> = rows[y * 150 + x].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!((row[0], row[1]), (x as f64, y as f64));
        // The CSV carries six decimals.
        assert!((row[2] - gx).abs() <= 5e-7 + 1e-12 && (row[3] - gy).abs() <= 5e-7 + 1e-12);
    }
}

#[test]
fn dt_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("one.png");
    meshreg::io::save_edges(&src, &meshreg::EdgeMap::from_pixels(9, 7, &[(6, 2)])).unwrap();
    let out = dir.path().join("dt");
    let r = meshreg(&["dt", "--source", s(&src), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let csv = std::fs::read_to_string(out.join("dt.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 7);
    for (y, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 9);
        for (x, &v) in row.iter().enumerate() {
            let d = ((x as f64 - 6.0).powi(2) + (y as f64 - 2.0).powi(2)).sqrt();
            assert!((v - d).abs() <= 5e-7, "({x}, {y}): {v} vs {d}");
        }
    }
    assert!(out.join("dt.png").is_file());
}

#[test]
fn eval_is_symmetric_and_zero_on_identical_maps() {
    let dir = tempfile::tempdir().unwrap();
    let pair = synth(dir.path(), "star", 1, &[]);
    let (a, b) = (pair.join("source.png"), pair.join("target.png"));
    let run = |x: &Path, y: &Path| {
        let r = meshreg(&["eval", "--source", s(x), "--target", s(y)]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        serde_json::from_slice::<Value>(&r.stdout).unwrap()
    };
    let same = run(&a, &a);
    assert_eq!(same["mean"], 0.0);
    assert_eq!(same["max"], 0.0);
    let ab = run(&a, &b);
    let ba = run(&b, &a);
    assert!((ab["mean"].as_f64().unwrap() - ba["mean"].as_f64().unwrap()).abs() < 1e-12);
    assert_eq!(ab["max"], ba["max"]);
    assert_eq!(ab["n_points"], ba["n_points"]);
    let edges = load_edges(&a, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(same["n_points"].as_u64().unwrap() as usize, 2 * edges.contour_count());
}
