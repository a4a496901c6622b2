use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use dtagn_core::appearance::{frame_file_name, read_image_dataset, read_manifest, TemporalPlan};
use dtagn_core::cache::{
    cache_status, digest_parts, hex, write_appearance_cache, write_geometry_cache, AppearanceCache,
    CacheStatus, Digest32, GeometryCache, APPEARANCE_MAGIC, CACHE_VERSION, GEOMETRY_MAGIC,
};
use dtagn_core::fsutil::write_atomic;
use dtagn_core::geometry::{normalize_landmarks, read_landmark_csv, LandmarkLayout};
use dtagn_core::subject::SubjectId;
use dtagn_core::{Error, Result};

use crate::args::{PrepareAppearance, PrepareGeometry, TemporalMode};

/// Returns true when the cache is current and nothing needs doing.
fn up_to_date(out: &Path, magic: &[u8; 4], digest: &Digest32) -> Result<bool> {
    match cache_status(out, magic, digest)? {
        CacheStatus::UpToDate => {
            println!("up to date: {} (inputs {})", out.display(), &hex(digest)[..16]);
            Ok(true)
        }
        CacheStatus::Incompatible => {
            println!("rebuilding {}: not a readable version-{CACHE_VERSION} cache", out.display());
            Ok(false)
        }
        CacheStatus::Stale | CacheStatus::Missing => Ok(false),
    }
}

fn summary<'a>(count: usize, subjects: impl Iterator<Item = &'a SubjectId>, labels: impl Iterator<Item = usize>) -> String {
    let subjects: BTreeSet<&SubjectId> = subjects.collect();
    let labels: BTreeSet<usize> = labels.collect();
    format!(
        "{count} sequences, {} subjects, {} classes",
        subjects.len(),
        labels.len()
    )
}

pub fn geometry(a: &PrepareGeometry) -> Result<()> {
    let csv = fs::read(&a.landmarks)?;
    let layout_text = fs::read(&a.layout)?;
    let digest = digest_parts([b"landmarks".as_slice(), &csv, &layout_text]);
    if up_to_date(&a.out, GEOMETRY_MAGIC, &digest)? {
        return Ok(());
    }
    let layout = LandmarkLayout::load(&a.layout)?;
    let raw = read_landmark_csv(&a.landmarks, Arc::new(layout.clone()))?;
    if raw.is_empty() {
        return Err(Error::invalid(format!("{} holds no sequences", a.landmarks.display())));
    }
    let sequences = raw.iter().map(normalize_landmarks).collect::<Result<Vec<_>>>()?;
    let line = summary(
        sequences.len(),
        sequences.iter().map(|s| &s.subject),
        sequences.iter().map(|s| s.label),
    );
    let cache = GeometryCache { input_digest: digest, layout, sequences };
    write_atomic(&a.out, &write_geometry_cache(&cache))?;
    println!("wrote {}: {line}, {} inputs per sequence", a.out.display(), cache.layout.dimension());
    Ok(())
}

pub fn appearance(a: &PrepareAppearance) -> Result<()> {
    let plan = match a.mode {
        TemporalMode::Standard => TemporalPlan::standard(),
        TemporalMode::FrontHalf => TemporalPlan::front_half(),
    };
    let plan = TemporalPlan { key_frames: a.key_frames.clone(), ..plan };
    plan.validate()?;

    let manifest = fs::read(&a.manifest)?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let settings = format!("{}/{}/{:?}", plan.resample_to, plan.keep, plan.key_frames);
    let mut parts: Vec<Vec<u8>> = vec![b"images".to_vec(), manifest, settings.into_bytes()];
    for entry in read_manifest(&a.manifest)? {
        for t in 0..entry.frame_count {
            parts.push(fs::read(base.join(&entry.dir).join(frame_file_name(t)))?);
        }
    }
    let digest = digest_parts(parts.iter().map(Vec::as_slice));
    if up_to_date(&a.out, APPEARANCE_MAGIC, &digest)? {
        return Ok(());
    }

    let raw = read_image_dataset(&a.manifest)?;
    let first = raw
        .first()
        .ok_or_else(|| Error::invalid(format!("{} lists no sequences", a.manifest.display())))?;
    let size = (first.height(), first.width());
    if let Some(bad) = raw.iter().find(|s| (s.height(), s.width()) != size) {
        return Err(Error::invalid(format!(
            "sequence {} is {}x{} but {} is {}x{}",
            bad.sequence_id,
            bad.width(),
            bad.height(),
            first.sequence_id,
            size.1,
            size.0
        )));
    }
    let sequences = raw.iter().map(|s| plan.apply(s)).collect::<Result<Vec<_>>>()?;
    let line = summary(
        sequences.len(),
        sequences.iter().map(|s| &s.subject),
        sequences.iter().map(|s| s.label),
    );
    let cache = AppearanceCache { input_digest: digest, plan, sequences };
    write_atomic(&a.out, &write_appearance_cache(&cache))?;
    println!(
        "wrote {}: {line}, {} key frames of {}x{}",
        a.out.display(),
        cache.plan.key_frames.len(),
        size.1,
        size.0
    );
    Ok(())
}
