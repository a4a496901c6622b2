//! Grayscale frame stacks for the appearance network: temporal resampling,
//! key-frame selection, flip/rotation augmentation and the on-disk layout
//! (manifest CSV plus one directory of PGM frames per sequence).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fsutil::write_dir_atomic;
use crate::pgm::Gray;
use crate::subject::SubjectId;
use crate::tensor::{Real, Tensor};

pub const DEFAULT_KEY_FRAMES: [usize; 3] = [1, 7, 12];
pub const DEFAULT_ANGLES_DEG: [Real; 6] = [-15.0, -10.0, -5.0, 5.0, 10.0, 15.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSequence {
    pub sequence_id: String,
    pub subject: SubjectId,
    pub label: usize,
    /// `[frames, height, width]`, values in `[0, 1]`.
    pub frames: Tensor,
}

impl ImageSequence {
    pub fn new(
        sequence_id: impl Into<String>,
        subject: SubjectId,
        label: usize,
        frames: Tensor,
    ) -> Result<Self> {
        if frames.rank() != 3 {
            return Err(Error::invalid(format!(
                "image sequence needs [frames, height, width], got {:?}",
                frames.shape()
            )));
        }
        Ok(ImageSequence {
            sequence_id: sequence_id.into(),
            subject,
            label,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn height(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.frames.shape()[2]
    }

    pub fn frame(&self, t: usize) -> &[Real] {
        let plane = self.height() * self.width();
        &self.frames.data()[t * plane..(t + 1) * plane]
    }

    fn with_frames(&self, frames: Tensor) -> Self {
        ImageSequence {
            frames,
            ..self.clone()
        }
    }

    fn map_frames(&self, f: impl Fn(&[Real]) -> Vec<Real>) -> Result<Self> {
        let data = (0..self.len()).flat_map(|t| f(self.frame(t))).collect();
        Ok(self.with_frames(Tensor::new(self.frames.shape().to_vec(), data)?))
    }
}

/// Linear interpolation at `target` uniformly spaced positions spanning the
/// first to the last input frame.
pub fn resample_sequence(seq: &ImageSequence, target: usize) -> Result<ImageSequence> {
    if target == 0 {
        return Err(Error::invalid("resample target length must be >= 1"));
    }
    let n = seq.len();
    if n == 0 {
        return Err(Error::invalid(format!("sequence {} has no frames", seq.sequence_id)));
    }
    if n == target {
        return Ok(seq.clone());
    }
    let plane = seq.height() * seq.width();
    let mut data = Vec::with_capacity(target * plane);
    for i in 0..target {
        let pos = if target == 1 {
            0.0
        } else {
            i as Real * (n - 1) as Real / (target - 1) as Real
        };
        let lo = (pos.floor() as usize).min(n - 1);
        let hi = (lo + 1).min(n - 1);
        let frac = pos - lo as Real;
        let (a, b) = (seq.frame(lo), seq.frame(hi));
        if frac == 0.0 {
            data.extend_from_slice(a);
        } else {
            data.extend(a.iter().zip(b).map(|(&p, &q)| (1.0 - frac) * p + frac * q));
        }
    }
    Ok(seq.with_frames(Tensor::new(vec![target, seq.height(), seq.width()], data)?))
}

/// Picks frames by 1-based index, in the order given.
pub fn select_frames(seq: &ImageSequence, indices: &[usize]) -> Result<ImageSequence> {
    if indices.is_empty() {
        return Err(Error::invalid("frame selection is empty"));
    }
    let mut data = Vec::with_capacity(indices.len() * seq.height() * seq.width());
    for &i in indices {
        if i == 0 || i > seq.len() {
            return Err(Error::invalid(format!(
                "frame index {i} out of range 1..={}",
                seq.len()
            )));
        }
        data.extend_from_slice(seq.frame(i - 1));
    }
    Ok(seq.with_frames(Tensor::new(
        vec![indices.len(), seq.height(), seq.width()],
        data,
    )?))
}

/// How a raw variable-length sequence becomes network input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalPlan {
    /// Length after resampling.
    pub resample_to: usize,
    /// Leading frames kept after resampling (all when equal to `resample_to`).
    pub keep: usize,
    /// 1-based key frames taken from the kept frames.
    pub key_frames: Vec<usize>,
}

impl TemporalPlan {
    /// Resample to 12 frames and take frames 1, 7 and 12.
    pub fn standard() -> Self {
        TemporalPlan {
            resample_to: 12,
            keep: 12,
            key_frames: DEFAULT_KEY_FRAMES.to_vec(),
        }
    }

    /// For sequences that return to neutral: resample to 24 and keep the first 12.
    pub fn front_half() -> Self {
        TemporalPlan {
            resample_to: 24,
            ..Self::standard()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.keep == 0 || self.keep > self.resample_to {
            return Err(Error::invalid(format!(
                "cannot keep {} of {} resampled frames",
                self.keep, self.resample_to
            )));
        }
        if let Some(&bad) = self.key_frames.iter().find(|&&i| i == 0 || i > self.keep) {
            return Err(Error::invalid(format!(
                "key frame {bad} out of range 1..={}",
                self.keep
            )));
        }
        Ok(())
    }

    pub fn apply(&self, seq: &ImageSequence) -> Result<ImageSequence> {
        self.validate()?;
        let resampled = resample_sequence(seq, self.resample_to)?;
        let kept = select_frames(&resampled, &(1..=self.keep).collect::<Vec<_>>())?;
        select_frames(&kept, &self.key_frames)
    }
}

pub fn flip_horizontal(seq: &ImageSequence) -> Result<ImageSequence> {
    let w = seq.width();
    seq.map_frames(|f| f.chunks(w).flat_map(|row| row.iter().rev().copied()).collect())
}

/// Rotates every frame by `degrees` about the image center, bilinear sampling,
/// zero outside the source.
pub fn rotate_images(seq: &ImageSequence, degrees: Real) -> Result<ImageSequence> {
    let (h, w) = (seq.height(), seq.width());
    let (s, c) = degrees.to_radians().sin_cos();
    let (cy, cx) = ((h as Real - 1.0) / 2.0, (w as Real - 1.0) / 2.0);
    seq.map_frames(|f| {
        let at = |y: isize, x: isize| -> Real {
            if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                0.0
            } else {
                f[y as usize * w + x as usize]
            }
        };
        let mut out = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as Real - cx, y as Real - cy);
                // Inverse mapping: source point that lands on (x, y).
                let sx = c * dx + s * dy + cx;
                let sy = -s * dx + c * dy + cy;
                let (x0, y0) = (sx.floor(), sy.floor());
                let (fx, fy) = (sx - x0, sy - y0);
                let (x0, y0) = (x0 as isize, y0 as isize);
                let top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1);
                let bottom = (1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1);
                out.push((1.0 - fy) * top + fy * bottom);
            }
        }
        out
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceAugment {
    pub enabled: bool,
    pub angles_deg: Vec<Real>,
}

impl Default for AppearanceAugment {
    fn default() -> Self {
        AppearanceAugment {
            enabled: true,
            angles_deg: DEFAULT_ANGLES_DEG.to_vec(),
        }
    }
}

impl AppearanceAugment {
    pub fn disabled() -> Self {
        AppearanceAugment {
            enabled: false,
            ..Default::default()
        }
    }

    pub fn multiplier(&self) -> usize {
        if self.enabled {
            2 * (1 + self.angles_deg.len())
        } else {
            1
        }
    }
}

/// The original, its rotations, the flipped sequence, then its rotations.
pub fn augment_images(seq: &ImageSequence, augment: &AppearanceAugment) -> Result<Vec<ImageSequence>> {
    if !augment.enabled {
        return Ok(vec![seq.clone()]);
    }
    let mut out = Vec::with_capacity(augment.multiplier());
    for base in [seq.clone(), flip_horizontal(seq)?] {
        let rotated = augment
            .angles_deg
            .iter()
            .map(|&a| rotate_images(&base, a))
            .collect::<Result<Vec<_>>>()?;
        out.push(base);
        out.extend(rotated);
    }
    Ok(out)
}

pub fn build_appearance_trainset(
    sequences: &[ImageSequence],
    augment: &AppearanceAugment,
) -> Result<Vec<(Tensor, usize)>> {
    let mut out = Vec::with_capacity(sequences.len() * augment.multiplier());
    for seq in sequences {
        out.extend(augment_images(seq, augment)?.into_iter().map(|s| (s.frames, seq.label)));
    }
    Ok(out)
}

pub fn frame_file_name(t: usize) -> String {
    format!("frame_{t:03}.pgm")
}

/// One manifest row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sequence_id: String,
    pub subject: SubjectId,
    pub label: usize,
    pub frame_count: usize,
    /// Relative to the manifest's directory unless absolute.
    pub dir: PathBuf,
}

pub const MANIFEST_HEADER: &str = "sequence_id,subject_id,label,frame_count,dir";

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        let err = |reason: String| Error::Data {
            path: path.to_path_buf(),
            line,
            reason,
        };
        if row == 0 && record.get(0) == Some("sequence_id") {
            continue;
        }
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", record.len())));
        }
        let label = record[2]
            .parse()
            .map_err(|_| err(format!("label {:?} is not a class index", &record[2])))?;
        let frame_count: usize = record[3]
            .parse()
            .map_err(|_| err(format!("frame count {:?} is not an integer", &record[3])))?;
        if frame_count == 0 {
            return Err(err("frame count must be >= 1".into()));
        }
        out.push(ManifestEntry {
            sequence_id: record[0].to_string(),
            subject: SubjectId::new(&record[1]),
            label,
            frame_count,
            dir: PathBuf::from(&record[4]),
        });
    }
    Ok(out)
}

/// Loads every sequence named by a manifest. All frames of one sequence must
/// share dimensions.
pub fn read_image_dataset(manifest: &Path) -> Result<Vec<ImageSequence>> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    read_manifest(manifest)?
        .into_iter()
        .map(|entry| {
            let dir = base.join(&entry.dir);
            let mut size = None;
            let mut data = Vec::new();
            for t in 0..entry.frame_count {
                let path = dir.join(frame_file_name(t));
                let img = Gray::load(&path)?;
                match size {
                    None => size = Some((img.height, img.width)),
                    Some(s) if s != (img.height, img.width) => {
                        return Err(Error::invalid(format!(
                            "{} is {}x{}, earlier frames are {}x{}",
                            path.display(),
                            img.width,
                            img.height,
                            s.1,
                            s.0
                        )))
                    }
                    _ => {}
                }
                data.extend(img.to_unit());
            }
            let (h, w) = size.expect("frame_count >= 1");
            ImageSequence::new(
                entry.sequence_id,
                entry.subject,
                entry.label,
                Tensor::new(vec![entry.frame_count, h, w], data)?,
            )
        })
        .collect()
}

/// Writes one sequence's frames as `frame_000.pgm`, … into `dir`.
pub fn write_image_sequence(dir: &Path, seq: &ImageSequence) -> Result<()> {
    write_dir_atomic(dir, |staging| {
        for t in 0..seq.len() {
            Gray::from_unit(seq.width(), seq.height(), seq.frame(t))?
                .save(&staging.join(frame_file_name(t)))?;
        }
        Ok(())
    })
}
