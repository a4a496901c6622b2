//! Synthetic datasets and a thin wrapper around the built binary.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dtagn_core::appearance::{write_image_sequence, ImageSequence, MANIFEST_HEADER};
use dtagn_core::subject::SubjectId;
use dtagn_core::{Real, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CLASSES: usize = 3;
pub const POINTS: usize = 4;
pub const FRAMES: usize = 3;
/// 2 · points · frames.
pub const GEOMETRY_DIM: usize = 24;
pub const IMAGE_SIZE: usize = 16;
pub const RAW_IMAGE_FRAMES: usize = 6;

pub fn sequence_id(subject: usize, k: usize) -> String {
    format!("s{subject:02}_{k}")
}

pub fn subject_id(subject: usize) -> String {
    format!("S{subject}")
}

pub fn label_of(k: usize) -> usize {
    k % CLASSES
}

/// Mouth height per frame for each class: steady, dropping, rising.
fn mouth_track(label: usize) -> [Real; FRAMES] {
    match label {
        0 => [-1.0, -1.0, -1.0],
        1 => [-1.0, -2.0, -3.0],
        _ => [-1.0, -0.6, -0.3],
    }
}

/// Points: nose, left eye, right eye, mouth. Each sequence gets its own
/// pixel-space scale and offset plus per-point jitter.
pub fn write_landmarks(dir: &Path, subjects: usize, per_subject: usize, seed: u64) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("sequence_id,subject_id,label,frame_index");
    for k in 1..=POINTS {
        write!(csv, ",x{k},y{k}").unwrap();
    }
    csv.push('\n');
    for s in 0..subjects {
        let eye_gap = rng.random_range(0.8..1.2);
        for k in 0..per_subject {
            let label = label_of(k);
            let scale: Real = rng.random_range(40.0..80.0);
            let (ox, oy): (Real, Real) = (rng.random_range(100.0..200.0), rng.random_range(100.0..200.0));
            for (t, mouth) in mouth_track(label).into_iter().enumerate() {
                let template = [[0.0, 0.0], [-eye_gap, 1.0], [eye_gap, 1.0], [0.0, mouth]];
                write!(csv, "{},{},{label},{t}", sequence_id(s, k), subject_id(s)).unwrap();
                for (i, p) in template.iter().enumerate() {
                    let (jx, jy): (Real, Real) = if i == 0 {
                        (0.0, 0.0)
                    } else {
                        (rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03))
                    };
                    // Image rows grow downwards.
                    write!(csv, ",{:.4},{:.4}", ox + scale * (p[0] + jx), oy - scale * (p[1] + jy)).unwrap();
                }
                csv.push('\n');
            }
        }
    }
    let data = dir.join("landmarks.csv");
    std::fs::write(&data, csv).unwrap();
    let layout = dir.join("layout.cfg");
    std::fs::write(&layout, format!("points={POINTS}\nframes={FRAMES}\nnose=0\nmirror=0,2,1,3\n")).unwrap();
    (data, layout)
}

/// A bright horizontal bar that stays put, moves down or moves up.
pub fn write_images(dir: &Path, subjects: usize, per_subject: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xface);
    let mut manifest = format!("{MANIFEST_HEADER}\n");
    let n = IMAGE_SIZE;
    for s in 0..subjects {
        let brightness: Real = rng.random_range(0.75..1.0);
        let (left, right) = (rng.random_range(2..5), rng.random_range(11..14));
        for k in 0..per_subject {
            let label = label_of(k);
            let mut data = Vec::with_capacity(RAW_IMAGE_FRAMES * n * n);
            for t in 0..RAW_IMAGE_FRAMES {
                let progress = t as Real / (RAW_IMAGE_FRAMES - 1) as Real;
                let row = match label {
                    0 => 7.0,
                    1 => 3.0 + 9.0 * progress,
                    _ => 12.0 - 9.0 * progress,
                }
                .round() as usize;
                for y in 0..n {
                    for x in 0..n {
                        let on = (y == row || y == row + 1) && (left..right).contains(&x);
                        let base: Real = if on { brightness } else { 0.1 };
                        data.push((base + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0));
                    }
                }
            }
            let id = sequence_id(s, k);
            let seq = ImageSequence::new(
                id.clone(),
                SubjectId::new(subject_id(s)),
                label,
                Tensor::new(vec![RAW_IMAGE_FRAMES, n, n], data).unwrap(),
            )
            .unwrap();
            write_image_sequence(&dir.join("frames").join(&id), &seq).unwrap();
            writeln!(manifest, "{id},{},{label},{RAW_IMAGE_FRAMES},frames/{id}", subject_id(s)).unwrap();
        }
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}

pub fn dtagn<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_dtagn"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Runs the binary and panics with its output unless it succeeds.
pub fn ok<I, S>(args: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = dtagn(args);
    assert!(out.status.success(), "stdout:\n{}\nstderr:\n{}", stdout(&out), stderr(&out));
    stdout(&out)
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub const GEOMETRY_ARCH: &str = "D24-FC10-FC10-S3";
pub const APPEARANCE_ARCH: &str = "I16-C(3,4)-L3-P2-FC16-S3";

/// Prepared caches for `subjects × per_subject` sequences in `dir`.
pub fn prepared(dir: &Path, subjects: usize, per_subject: usize, seed: u64) -> (PathBuf, PathBuf) {
    let (landmarks, layout) = write_landmarks(dir, subjects, per_subject, seed);
    let manifest = write_images(dir, subjects, per_subject, seed);
    let geo = dir.join("geometry.cache");
    let app = dir.join("appearance.cache");
    ok(["prepare", "geometry", "--landmarks", path_str(&landmarks), "--layout", path_str(&layout), "--out", path_str(&geo)]);
    ok(["prepare", "appearance", "--manifest", path_str(&manifest), "--out", path_str(&app)]);
    (geo, app)
}
