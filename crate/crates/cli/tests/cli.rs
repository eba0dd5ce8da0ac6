//! End-to-end runs of the `phasecell` binary.

use std::path::Path;
use std::process::{Command, Output};

fn phasecell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasecell")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// `(x, p, value)` rows of a field CSV, skipping the units comment and header.
fn read_field_csv(path: &Path) -> Vec<(f64, f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# hbar="));
    assert_eq!(lines.next().unwrap(), "x,p,value");
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            (v[0], v[1], v[2])
        })
        .collect()
}

#[test]
fn fock1_wigner_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    let o = phasecell(&["wigner", "--state", "fock:1", "--grid", "auto", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rows = read_field_csv(&out);
    let min = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    assert!((min + 1.0 / std::f64::consts::PI).abs() < 1e-6, "{min}");
}

#[test]
fn coherent_state_is_classical() {
    let o = phasecell(&["nonclass", "--state", "coherent:1+0i"]);
    assert!(o.status.success());
    let line = stdout(&o);
    assert!(line.starts_with("classical"), "{line}");
    let o = phasecell(&["nonclass", "--state", "coherent:1+0i", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["report"]["n_bar_min"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn cat_state_is_nonclassical() {
    let o = phasecell(&["nonclass", "--state", "cat:3"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("nonclassical"));
}

#[test]
fn verify_all_passes() {
    let o = phasecell(&["verify", "--all"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.contains("[PASS]")).count(), 8);
}

#[test]
fn exit_codes() {
    assert_eq!(phasecell(&["wigner", "--state", "squeezed:1"]).status.code(), Some(2));
    assert_eq!(phasecell(&["wigner", "--grid", "1,2,3"]).status.code(), Some(2));
    assert_eq!(phasecell(&["detector", "--plate-L", "0.1", "--mode-spacing", "0.5"]).status.code(), Some(2));
    // a coherent state far outside an 8-level basis
    assert_eq!(phasecell(&["state", "--state", "coherent:6+0i", "--cutoff", "8"]).status.code(), Some(3));
    assert_eq!(phasecell(&["husimi", "--out", "/nonexistent-dir/q.csv"]).status.code(), Some(4));
}

#[test]
fn csv_output_is_deterministic() {
    let a = phasecell(&["husimi", "--state", "cat:2", "--grid", "auto:41"]);
    let b = phasecell(&["husimi", "--state", "cat:2", "--grid", "auto:41"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exported_state_reproduces_field() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("cat.json");
    let (w1, w2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let grid = "-4,4,-3,3,33,29";
    assert!(phasecell(&["state", "--state", "cat:3", "--out", state.to_str().unwrap()]).status.success());
    assert!(phasecell(&["wigner", "--state", "cat:3", "--grid", grid, "--out", w1.to_str().unwrap()]).status.success());
    assert!(phasecell(&["wigner", "--state", state.to_str().unwrap(), "--grid", grid, "--out", w2.to_str().unwrap()]).status.success());
    let (a, b) = (read_field_csv(&w1), read_field_csv(&w2));
    assert_eq!(a.len(), 33 * 29);
    for (r, s) in a.iter().zip(&b) {
        assert!((r.2 - s.2).abs() <= 1e-12);
    }
}

#[test]
fn heatmap_marks_negativity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.ppm");
    let o = phasecell(&["wigner", "--state", "fock:1", "--grid", "-3,3,-3,3,31,31", "--format", "ppm", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let bytes = std::fs::read(&out).unwrap();
    let header = b"P6\n31 31\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    let pixels = &bytes[header.len()..];
    assert_eq!(pixels.len(), 31 * 31 * 3);
    let px = |row: usize, col: usize| &pixels[3 * (row * 31 + col)..3 * (row * 31 + col) + 3];
    // the origin holds the most negative value: saturated blue
    assert_eq!(px(15, 15), &[0, 0, 255]);
    // far corner is essentially zero: white
    assert_eq!(px(0, 0), &[255, 255, 255]);
}

#[test]
fn detector_reports_uncertainty_product() {
    let o = phasecell(&["detector", "--state", "vacuum", "--plate-L", "2", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let product = v["summary"]["product"].as_f64().unwrap();
    assert!((product - std::f64::consts::PI / 6.0).abs() < 1e-15);
    let csv = phasecell(&["detector", "--plate-L", "2"]);
    assert!(stdout(&csv).lines().nth(1) == Some("k,p_k,P_k"));
}

#[test]
fn partition_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let part = dir.path().join("part.json");
    let doc = serde_json::json!({
        "coverage": {"x_lo": -6.0, "x_hi": 6.0, "p_lo": -6.0, "p_hi": 6.0},
        "cells": [
            {"id": "left", "x_lo": -6.0, "x_hi": 0.0, "p_lo": -6.0, "p_hi": 6.0},
            {"id": "right", "x_lo": 0.0, "x_hi": 6.0, "p_lo": -6.0, "p_hi": 6.0}
        ]
    });
    std::fs::write(&part, doc.to_string()).unwrap();
    let o = phasecell(&["cells", "--state", "fock:1", "--grid", "-6,6,-6,6,121,121", "--partition", part.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    for r in rows {
        let p: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
        assert!((p - 0.5).abs() < 1e-6);
    }
}
