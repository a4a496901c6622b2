//! Binary caches of prepared datasets.
//!
//! ```text
//! magic                 4 bytes ("DTGC" landmarks, "DTAC" images)
//! version               u32 LE
//! input digest          32 bytes, SHA-256 over the source files and settings
//! payload length        u64 LE
//! payload
//! payload checksum      32 bytes, SHA-256 of the payload
//! ```
//!
//! Values are stored as f64 bit patterns so a cache reloads exactly.

use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::appearance::{ImageSequence, TemporalPlan};
use crate::binio::{put_string, put_u32, put_u64, Reader};
use crate::error::{Error, Result};
use crate::geometry::{LandmarkLayout, LandmarkSequence};
use crate::subject::SubjectId;
use crate::tensor::{Real, Tensor};

pub const GEOMETRY_MAGIC: &[u8; 4] = b"DTGC";
pub const APPEARANCE_MAGIC: &[u8; 4] = b"DTAC";
pub const CACHE_VERSION: u32 = 1;

pub type Digest32 = [u8; 32];

/// SHA-256 over length-prefixed parts, so part boundaries matter.
pub fn digest_parts<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> Digest32 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

pub fn hex(d: &Digest32) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Missing,
    /// Present, readable header, same inputs.
    UpToDate,
    /// Present but built from different inputs or settings.
    Stale,
    /// Present but written by another format version (or unreadable).
    Incompatible,
}

/// Compares an existing cache's header with the digest of the current inputs.
pub fn cache_status(path: &Path, magic: &[u8; 4], digest: &Digest32) -> Result<CacheStatus> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(CacheStatus::Missing),
        Err(e) => return Err(e.into()),
    };
    Ok(match envelope(&bytes, magic) {
        Ok((d, _)) if &d == digest => CacheStatus::UpToDate,
        Ok(_) => CacheStatus::Stale,
        Err(_) => CacheStatus::Incompatible,
    })
}

fn cache_error(offset: u64, reason: String) -> Error {
    Error::CacheFormat { offset, reason }
}

/// Offset of the payload within a cache file.
const PAYLOAD_OFFSET: u64 = 48;

fn seal(magic: &[u8; 4], digest: &Digest32, payload: Vec<u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 80);
    out.extend_from_slice(magic);
    put_u32(&mut out, CACHE_VERSION);
    out.extend_from_slice(digest);
    put_u64(&mut out, payload.len() as u64);
    let check: Digest32 = Sha256::digest(&payload).into();
    out.extend_from_slice(&payload);
    out.extend_from_slice(&check);
    out
}

/// Validates the envelope; returns the input digest and the payload.
fn envelope<'a>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<(Digest32, &'a [u8])> {
    let mut r = Reader::new(bytes, cache_error);
    if r.take(4, "magic")? != magic {
        return Err(cache_error(0, format!("bad magic, expected {:?}", String::from_utf8_lossy(magic))));
    }
    let version = r.u32("version")?;
    if version != CACHE_VERSION {
        return Err(cache_error(
            4,
            format!("cache version {version}, this build reads {CACHE_VERSION}; re-run prepare"),
        ));
    }
    let digest: Digest32 = r.take(32, "input digest")?.try_into().expect("32 bytes");
    let len = r.u64("payload length")?;
    let start = r.offset();
    let len = usize::try_from(len).map_err(|_| cache_error(start as u64, "payload too large".into()))?;
    let payload = r.take(len, "payload")?;
    let check = r.take(32, "payload checksum")?;
    r.finish()?;
    let actual: Digest32 = Sha256::digest(payload).into();
    if actual.as_slice() != check {
        return Err(cache_error(start as u64, "payload checksum mismatch".into()));
    }
    Ok((digest, payload))
}

fn put_reals(out: &mut Vec<u8>, values: impl IntoIterator<Item = Real>) {
    for v in values {
        put_u64(out, (v as f64).to_bits());
    }
}

fn reals(r: &mut Reader, n: usize, what: &str) -> Result<Vec<Real>> {
    if n.checked_mul(8).is_none_or(|b| b > r.remaining()) {
        return Err(r.fail(format!("truncated: {what} needs {n} values")));
    }
    (0..n).map(|_| Ok(f64::from_bits(r.u64(what)?) as Real)).collect()
}

fn usize_u32(r: &mut Reader, what: &str) -> Result<usize> {
    Ok(r.u32(what)? as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryCache {
    pub input_digest: Digest32,
    pub layout: LandmarkLayout,
    /// Normalized sequences.
    pub sequences: Vec<LandmarkSequence>,
}

pub fn write_geometry_cache(cache: &GeometryCache) -> Vec<u8> {
    let mut p = Vec::new();
    let l = &cache.layout;
    put_u32(&mut p, l.points as u32);
    put_u32(&mut p, l.frames as u32);
    put_u32(&mut p, l.nose as u32);
    match &l.mirror {
        Some(m) => {
            put_u32(&mut p, 1);
            m.iter().for_each(|&i| put_u32(&mut p, i as u32));
        }
        None => put_u32(&mut p, 0),
    }
    put_u32(&mut p, cache.sequences.len() as u32);
    for s in &cache.sequences {
        put_string(&mut p, &s.sequence_id);
        put_string(&mut p, s.subject.as_str());
        put_u32(&mut p, s.label as u32);
        put_reals(&mut p, s.coords.iter().flat_map(|c| [c[0], c[1]]));
    }
    seal(GEOMETRY_MAGIC, &cache.input_digest, p)
}

pub fn read_geometry_cache(bytes: &[u8]) -> Result<GeometryCache> {
    let (input_digest, payload) = envelope(bytes, GEOMETRY_MAGIC)?;
    let mut r = Reader::at(payload, PAYLOAD_OFFSET, cache_error);
    let points = usize_u32(&mut r, "points")?;
    let frames = usize_u32(&mut r, "frames")?;
    let nose = usize_u32(&mut r, "nose")?;
    let mirror = match r.u32("mirror flag")? {
        0 => None,
        1 => Some((0..points).map(|_| usize_u32(&mut r, "mirror")).collect::<Result<Vec<_>>>()?),
        other => return Err(r.fail(format!("bad mirror flag {other}"))),
    };
    let layout = LandmarkLayout { points, frames, nose, mirror };
    layout.validate().map_err(|e| r.fail(e.to_string()))?;
    let shared = Arc::new(layout.clone());
    let count = usize_u32(&mut r, "sequence count")?;
    let mut sequences = Vec::new();
    for _ in 0..count {
        let id = r.string("sequence id")?;
        let subject = SubjectId(r.string("subject id")?);
        let label = usize_u32(&mut r, "label")?;
        let flat = reals(&mut r, 2 * points * frames, "coordinates")?;
        let coords = flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        sequences.push(LandmarkSequence::new(id, subject, label, shared.clone(), coords)?);
    }
    r.finish()?;
    Ok(GeometryCache { input_digest, layout, sequences })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceCache {
    pub input_digest: Digest32,
    pub plan: TemporalPlan,
    /// Key-frame stacks ready for the network.
    pub sequences: Vec<ImageSequence>,
}

pub fn write_appearance_cache(cache: &AppearanceCache) -> Vec<u8> {
    let mut p = Vec::new();
    put_u32(&mut p, cache.plan.resample_to as u32);
    put_u32(&mut p, cache.plan.keep as u32);
    put_u32(&mut p, cache.plan.key_frames.len() as u32);
    cache.plan.key_frames.iter().for_each(|&k| put_u32(&mut p, k as u32));
    put_u32(&mut p, cache.sequences.len() as u32);
    for s in &cache.sequences {
        put_string(&mut p, &s.sequence_id);
        put_string(&mut p, s.subject.as_str());
        put_u32(&mut p, s.label as u32);
        s.frames.shape().iter().for_each(|&e| put_u32(&mut p, e as u32));
        put_reals(&mut p, s.frames.data().iter().copied());
    }
    seal(APPEARANCE_MAGIC, &cache.input_digest, p)
}

pub fn read_appearance_cache(bytes: &[u8]) -> Result<AppearanceCache> {
    let (input_digest, payload) = envelope(bytes, APPEARANCE_MAGIC)?;
    let mut r = Reader::at(payload, PAYLOAD_OFFSET, cache_error);
    let resample_to = usize_u32(&mut r, "resample length")?;
    let keep = usize_u32(&mut r, "kept frames")?;
    let keys = usize_u32(&mut r, "key frame count")?;
    if keys > r.remaining() / 4 {
        return Err(r.fail("truncated: key frames"));
    }
    let key_frames = (0..keys).map(|_| usize_u32(&mut r, "key frame")).collect::<Result<Vec<_>>>()?;
    let plan = TemporalPlan { resample_to, keep, key_frames };
    let count = usize_u32(&mut r, "sequence count")?;
    let mut sequences = Vec::new();
    for _ in 0..count {
        let id = r.string("sequence id")?;
        let subject = SubjectId(r.string("subject id")?);
        let label = usize_u32(&mut r, "label")?;
        let shape = (0..3).map(|_| usize_u32(&mut r, "extent")).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |a, &e| a.checked_mul(e));
        let n = n.ok_or_else(|| r.fail("frame extents overflow"))?;
        let data = reals(&mut r, n, "pixels")?;
        let frames = Tensor::new(shape, data).map_err(|e| r.fail(e.to_string()))?;
        sequences.push(ImageSequence::new(id, subject, label, frames)?);
    }
    r.finish()?;
    Ok(AppearanceCache { input_digest, plan, sequences })
}
