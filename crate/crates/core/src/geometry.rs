//! Landmark trajectories: per-frame normalization, flattening into network
//! input vectors, and training-set augmentation.
//!
//! A normalized frame has its nose point at the origin and unit population
//! standard deviation along each axis:
//!
//! ```text
//! x̄_k = (x_k - x_nose) / σ_x      ȳ_k = (y_k - y_nose) / σ_y
//! ```

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::config::KeyValues;
use crate::error::{Error, Result};
use crate::subject::SubjectId;
use crate::tensor::{Real, Tensor};

pub const DEFAULT_NOISE_SIGMA: Real = 0.01;
pub const DEFAULT_ROTATION: (Real, Real) = (
    -std::f64::consts::PI as Real / 10.0,
    std::f64::consts::PI as Real / 10.0,
);

/// Point numbering shared by every sequence of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkLayout {
    /// `n`, landmarks per frame.
    pub points: usize,
    /// `T_g`, frames per sequence.
    pub frames: usize,
    /// Index of the nose landmark (0-based).
    pub nose: usize,
    /// Left/right correspondence used by horizontal flips (0-based).
    pub mirror: Option<Vec<usize>>,
}

impl LandmarkLayout {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 || self.frames == 0 {
            return Err(Error::invalid("layout needs at least one point and one frame"));
        }
        if self.nose >= self.points {
            return Err(Error::invalid(format!(
                "nose index {} out of range for {} points",
                self.nose, self.points
            )));
        }
        if let Some(m) = &self.mirror {
            check_mirror(m, self.points)?;
        }
        Ok(())
    }

    /// `2·n·T_g`.
    pub fn dimension(&self) -> usize {
        2 * self.points * self.frames
    }

    /// Reads `points`, `frames`, `nose` and optional `mirror` keys.
    pub fn from_config(kv: &KeyValues) -> Result<Self> {
        let int = |key: &str| -> Result<usize> {
            let v = kv
                .get(key)
                .ok_or_else(|| Error::invalid(format!("landmark config is missing `{key}`")))?;
            v.parse()
                .map_err(|_| Error::invalid(format!("`{key}` must be a non-negative integer, got {v:?}")))
        };
        let mirror = match kv.get("mirror") {
            None | Some("") => None,
            Some(text) => Some(
                text.split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| Error::invalid(format!("bad mirror entry {t:?}")))
                    })
                    .collect::<Result<Vec<usize>>>()?,
            ),
        };
        let layout = LandmarkLayout {
            points: int("points")?,
            frames: int("frames")?,
            nose: int("nose")?,
            mirror,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_config(&KeyValues::load(path)?)
    }
}

fn check_mirror(mirror: &[usize], points: usize) -> Result<()> {
    if mirror.len() != points {
        return Err(Error::invalid(format!(
            "mirror map has {} entries, expected {points}",
            mirror.len()
        )));
    }
    for (i, &j) in mirror.iter().enumerate() {
        if j >= points || mirror[j] != i {
            return Err(Error::invalid(format!(
                "mirror map is not an involution at index {i}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSequence {
    pub sequence_id: String,
    pub subject: SubjectId,
    pub label: usize,
    pub layout: Arc<LandmarkLayout>,
    /// Frame-major `(x, y)` points, `frames × points` entries.
    pub coords: Vec<[Real; 2]>,
}

/// Flattened normalized trajectory: frame-major, `(x, y)` interleaved per point.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryVector(pub Vec<Real>);

impl GeometryVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        Tensor::from_vec(self.0.clone())
    }
}

impl LandmarkSequence {
    pub fn new(
        sequence_id: impl Into<String>,
        subject: SubjectId,
        label: usize,
        layout: Arc<LandmarkLayout>,
        coords: Vec<[Real; 2]>,
    ) -> Result<Self> {
        layout.validate()?;
        let seq = LandmarkSequence {
            sequence_id: sequence_id.into(),
            subject,
            label,
            layout,
            coords,
        };
        if seq.coords.len() != seq.layout.points * seq.layout.frames {
            return Err(Error::invalid(format!(
                "sequence {} has {} points, layout needs {}x{}",
                seq.sequence_id,
                seq.coords.len(),
                seq.layout.frames,
                seq.layout.points
            )));
        }
        Ok(seq)
    }

    pub fn frame(&self, t: usize) -> &[[Real; 2]] {
        let n = self.layout.points;
        &self.coords[t * n..(t + 1) * n]
    }

    fn with_coords(&self, coords: Vec<[Real; 2]>) -> Self {
        LandmarkSequence {
            coords,
            ..self.clone()
        }
    }
}

fn population_std(values: impl Iterator<Item = Real> + Clone) -> Real {
    let n = values.clone().count() as Real;
    let mean = values.clone().sum::<Real>() / n;
    (values.map(|v| (v - mean) * (v - mean)).sum::<Real>() / n).sqrt()
}

/// Per frame: subtract the nose point and divide each axis by its population
/// standard deviation.
pub fn normalize_landmarks(seq: &LandmarkSequence) -> Result<LandmarkSequence> {
    let (n, nose) = (seq.layout.points, seq.layout.nose);
    let mut coords = Vec::with_capacity(seq.coords.len());
    for t in 0..seq.layout.frames {
        let frame = seq.frame(t);
        let origin = frame[nose];
        let mut scale = [0.0; 2];
        for (axis, name) in [(0, 'x'), (1, 'y')] {
            let sigma = population_std(frame.iter().map(|p| p[axis]));
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::DegenerateFrame {
                    sequence: seq.sequence_id.clone(),
                    frame: t,
                    axis: name,
                });
            }
            scale[axis] = sigma;
        }
        coords.extend(
            frame
                .iter()
                .map(|p| [(p[0] - origin[0]) / scale[0], (p[1] - origin[1]) / scale[1]]),
        );
        debug_assert_eq!(coords.len(), (t + 1) * n);
    }
    Ok(seq.with_coords(coords))
}

/// Concatenates all frames: `[x̄_1, ȳ_1, …, x̄_n, ȳ_n]` for frame 1, then frame 2, …
pub fn vectorize(seq: &LandmarkSequence) -> GeometryVector {
    GeometryVector(seq.coords.iter().flat_map(|p| [p[0], p[1]]).collect())
}

/// Adds independent `N(0, σ²)` noise to every coordinate.
pub fn augment_noise<R: Rng + ?Sized>(
    seq: &LandmarkSequence,
    sigma: Real,
    rng: &mut R,
) -> Result<LandmarkSequence> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(seq.clone());
    }
    let normal = Normal::new(0.0, sigma as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let mut draw = || normal.sample(rng) as Real;
    Ok(seq.with_coords(
        seq.coords
            .iter()
            .map(|p| [p[0] + draw(), p[1] + draw()])
            .collect(),
    ))
}

/// Rotates every frame about the origin by its own angle drawn from `U[β, γ]`.
pub fn augment_rotate<R: Rng + ?Sized>(
    seq: &LandmarkSequence,
    rng: &mut R,
    beta: Real,
    gamma: Real,
) -> Result<LandmarkSequence> {
    if !(beta <= gamma) {
        return Err(Error::invalid(format!(
            "rotation interval [{beta}, {gamma}] is empty"
        )));
    }
    let angles: Vec<Real> = if beta == gamma {
        vec![beta; seq.layout.frames]
    } else {
        let dist = Uniform::new_inclusive(beta as f64, gamma as f64)
            .map_err(|e| Error::invalid(e.to_string()))?;
        (0..seq.layout.frames).map(|_| dist.sample(rng) as Real).collect()
    };
    Ok(rotate_frames(seq, &angles))
}

/// Rotates frame `t` by `angles[t]` radians (counter-clockwise for a y-up frame).
pub fn rotate_frames(seq: &LandmarkSequence, angles: &[Real]) -> LandmarkSequence {
    let n = seq.layout.points;
    let coords = seq
        .coords
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let (s, c) = angles[k / n].sin_cos();
            [c * p[0] - s * p[1], s * p[0] + c * p[1]]
        })
        .collect();
    seq.with_coords(coords)
}

/// Mirrors `x → -x` and swaps left/right point indices through the mirror map.
pub fn flip_landmarks(seq: &LandmarkSequence) -> Result<LandmarkSequence> {
    let mirror = seq
        .layout
        .mirror
        .as_ref()
        .ok_or_else(|| Error::invalid("flip needs a mirror map in the landmark layout"))?;
    check_mirror(mirror, seq.layout.points)?;
    let n = seq.layout.points;
    let mut coords = Vec::with_capacity(seq.coords.len());
    for t in 0..seq.layout.frames {
        let frame = seq.frame(t);
        coords.extend((0..n).map(|k| {
            let p = frame[mirror[k]];
            [-p[0], p[1]]
        }));
    }
    Ok(seq.with_coords(coords))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryAugment {
    pub enabled: bool,
    pub noise_sigma: Real,
    pub rotation: (Real, Real),
    /// Noisy and rotated copies made of each of {original, flip}.
    pub copies: usize,
}

impl Default for GeometryAugment {
    fn default() -> Self {
        GeometryAugment {
            enabled: true,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            rotation: DEFAULT_ROTATION,
            copies: 3,
        }
    }
}

impl GeometryAugment {
    pub fn disabled() -> Self {
        GeometryAugment {
            enabled: false,
            ..Default::default()
        }
    }

    /// Outputs produced per input sequence.
    pub fn multiplier(&self) -> usize {
        if self.enabled {
            2 * (1 + 2 * self.copies)
        } else {
            1
        }
    }
}

/// Expands normalized sequences into labelled training vectors. With the
/// defaults each sequence yields 14 vectors, in this order: the original,
/// three noisy and three rotated copies of it, then the same seven for the
/// horizontally flipped sequence.
pub fn build_geometry_trainset<R: Rng + ?Sized>(
    sequences: &[LandmarkSequence],
    augment: &GeometryAugment,
    rng: &mut R,
) -> Result<Vec<(GeometryVector, usize)>> {
    let mut out = Vec::with_capacity(sequences.len() * augment.multiplier());
    for seq in sequences {
        if !augment.enabled {
            out.push((vectorize(seq), seq.label));
            continue;
        }
        for base in [seq.clone(), flip_landmarks(seq)?] {
            out.push((vectorize(&base), seq.label));
            for _ in 0..augment.copies {
                out.push((vectorize(&augment_noise(&base, augment.noise_sigma, rng)?), seq.label));
            }
            for _ in 0..augment.copies {
                let (lo, hi) = augment.rotation;
                out.push((vectorize(&augment_rotate(&base, rng, lo, hi)?), seq.label));
            }
        }
    }
    Ok(out)
}

/// Reads raw landmark rows `sequence_id,subject_id,label,frame_index,x1,y1,…,xn,yn`.
/// A leading header row starting with `sequence_id` is skipped. Sequences are
/// returned in order of first appearance, frames sorted by `frame_index`.
pub fn read_landmark_csv(path: &Path, layout: Arc<LandmarkLayout>) -> Result<Vec<LandmarkSequence>> {
    layout.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let n = layout.points;
    let data_err = |line: u64, reason: String| Error::Data {
        path: path.to_path_buf(),
        line,
        reason,
    };

    struct Pending {
        subject: String,
        label: usize,
        line: u64,
        frames: Vec<(i64, u64, Vec<[Real; 2]>)>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, Pending> = HashMap::new();

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if row == 0 && record.get(0) == Some("sequence_id") {
            continue;
        }
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != 4 + 2 * n {
            return Err(data_err(
                line,
                format!(
                    "expected {} fields (4 + 2x{n} coordinates), found {}",
                    4 + 2 * n,
                    record.len()
                ),
            ));
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let label: usize = field(2)
            .parse()
            .map_err(|_| data_err(line, format!("label {:?} is not a class index", field(2))))?;
        let frame_index: i64 = field(3)
            .parse()
            .map_err(|_| data_err(line, format!("frame index {:?} is not an integer", field(3))))?;
        let mut points = Vec::with_capacity(n);
        for k in 0..n {
            let mut xy = [0.0; 2];
            for (a, slot) in xy.iter_mut().enumerate() {
                let text = field(4 + 2 * k + a);
                *slot = text
                    .parse::<Real>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| data_err(line, format!("coordinate {text:?} is not a finite number")))?;
            }
            points.push(xy);
        }
        let id = field(0).to_string();
        let entry = pending.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Pending {
                subject: field(1).to_string(),
                label,
                line,
                frames: Vec::new(),
            }
        });
        if entry.subject != field(1) || entry.label != label {
            return Err(data_err(
                line,
                format!("sequence {id} changes subject or label (first seen on line {})", entry.line),
            ));
        }
        entry.frames.push((frame_index, line, points));
    }

    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let mut p = pending.remove(&id).expect("every ordered id is pending");
        p.frames.sort_by_key(|f| f.0);
        if let Some(w) = p.frames.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(data_err(w[1].1, format!("sequence {id} repeats frame index {}", w[1].0)));
        }
        if p.frames.len() != layout.frames {
            return Err(data_err(
                p.line,
                format!(
                    "sequence {id} has {} frames, layout needs {}",
                    p.frames.len(),
                    layout.frames
                ),
            ));
        }
        let coords = p.frames.into_iter().flat_map(|f| f.2).collect();
        out.push(LandmarkSequence::new(id, SubjectId(p.subject), p.label, layout.clone(), coords)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn layout(points: usize, frames: usize, nose: usize, mirror: Option<Vec<usize>>) -> Arc<LandmarkLayout> {
        Arc::new(LandmarkLayout {
            points,
            frames,
            nose,
            mirror,
        })
    }

    fn seq(l: Arc<LandmarkLayout>, coords: Vec<[Real; 2]>) -> LandmarkSequence {
        LandmarkSequence::new("s", "1".into(), 0, l, coords).unwrap()
    }

    #[test]
    fn normalizes_three_points_by_hand() {
        let s = seq(layout(3, 1, 0, None), vec![[2., 3.], [4., 5.], [0., 1.]]);
        let out = normalize_landmarks(&s).unwrap();
        // σ = sqrt(8/3) on both axes; 2/σ = sqrt(3/2).
        let k = (1.5 as Real).sqrt();
        let expect = [[0.0, 0.0], [k, k], [-k, -k]];
        for (p, e) in out.coords.iter().zip(expect) {
            assert!((p[0] - e[0]).abs() < 1e-12 && (p[1] - e[1]).abs() < 1e-12);
        }
        assert!((k - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn normalized_frame_is_a_fixpoint() {
        let s = seq(layout(3, 1, 0, None), vec![[2., 3.], [4., 5.], [0., 1.]]);
        let once = normalize_landmarks(&s).unwrap();
        let twice = normalize_landmarks(&once).unwrap();
        for (a, b) in once.coords.iter().zip(&twice.coords) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_frame_reports_index() {
        let s = seq(layout(2, 2, 0, None), vec![[0., 0.], [1., 1.], [3., 3.], [3., 3.]]);
        match normalize_landmarks(&s) {
            Err(Error::DegenerateFrame { frame, .. }) => assert_eq!(frame, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vectorize_order() {
        let s = seq(layout(1, 2, 0, None), vec![[1., 2.], [3., 4.]]);
        assert_eq!(vectorize(&s).0, vec![1., 2., 3., 4.]);
        let l = layout(49, 12, 0, None);
        let s = seq(l, vec![[0.0; 2]; 49 * 12]);
        assert_eq!(vectorize(&s).len(), 1176);
    }

    #[test]
    fn rotation_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = seq(layout(1, 1, 0, None), vec![[1., 0.]]);
        let half_pi = std::f64::consts::FRAC_PI_2 as Real;
        let r = augment_rotate(&s, &mut rng, half_pi, half_pi).unwrap();
        assert!(r.coords[0][0].abs() < 1e-15 && (r.coords[0][1] - 1.0).abs() < 1e-15);
        assert_eq!(augment_rotate(&s, &mut rng, 0.0, 0.0).unwrap(), s);
        assert!(augment_rotate(&s, &mut rng, 0.2, 0.1).is_err());
    }

    #[test]
    fn noise_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = seq(layout(2, 1, 0, None), vec![[1., 0.], [0., 1.]]);
        assert_eq!(augment_noise(&s, 0.0, &mut rng).unwrap(), s);
        assert!(augment_noise(&s, -0.1, &mut rng).is_err());
    }

    #[test]
    fn noise_variance_matches_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let l = layout(50, 1_000, 0, None);
        let s = seq(l, vec![[0.0; 2]; 50_000]);
        let noisy = augment_noise(&s, 0.01, &mut rng).unwrap();
        let draws: Vec<Real> = noisy.coords.iter().flat_map(|p| [p[0], p[1]]).collect();
        assert_eq!(draws.len(), 100_000);
        let mean = draws.iter().sum::<Real>() / draws.len() as Real;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<Real>() / draws.len() as Real;
        assert!((var / 1e-4 - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn flip_rules() {
        let l = layout(3, 1, 1, Some(vec![2, 1, 0]));
        let s = seq(l.clone(), vec![[-1., 2.], [0., 0.5], [1.5, 3.]]);
        let f = flip_landmarks(&s).unwrap();
        assert_eq!(f.coords, vec![[-1.5, 3.], [0., 0.5], [1., 2.]]);
        assert_eq!(flip_landmarks(&f).unwrap(), s);

        let symmetric = seq(l, vec![[-1., 2.], [0., 0.5], [1., 2.]]);
        let f = flip_landmarks(&symmetric).unwrap();
        for (a, b) in f.coords.iter().zip(&symmetric.coords) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }

        let no_map = seq(layout(1, 1, 0, None), vec![[1., 1.]]);
        assert!(flip_landmarks(&no_map).is_err());
        let bad = LandmarkLayout { points: 3, frames: 1, nose: 0, mirror: Some(vec![1, 2, 0]) };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trainset_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = layout(2, 2, 0, Some(vec![1, 0]));
        let s = seq(l, vec![[-1., 0.], [1., 1.], [-1., 0.5], [1., 0.]]);
        let out = build_geometry_trainset(std::slice::from_ref(&s), &GeometryAugment::default(), &mut rng).unwrap();
        assert_eq!(out.len(), 14);
        assert_eq!(out[0].0, vectorize(&s));
        assert_eq!(out[7].0, vectorize(&flip_landmarks(&s).unwrap()));
        let plain = build_geometry_trainset(&[s.clone(), s], &GeometryAugment::disabled(), &mut rng).unwrap();
        assert_eq!(plain.len(), 2);
    }

    #[test]
    fn layout_from_config() {
        let kv = KeyValues::parse("points=3\nframes=12\nnose=1\nmirror=2,1,0\n", Path::new("c")).unwrap();
        let l = LandmarkLayout::from_config(&kv).unwrap();
        assert_eq!(l.dimension(), 72);
        assert_eq!(l.mirror, Some(vec![2, 1, 0]));
        let kv = KeyValues::parse("points=3\nframes=12\nnose=3\n", Path::new("c")).unwrap();
        assert!(LandmarkLayout::from_config(&kv).is_err());
    }

    fn frame_strategy() -> impl Strategy<Value = Vec<[Real; 2]>> {
        proptest::collection::vec((-100.0..100.0 as Real, -100.0..100.0 as Real), 3..12)
            .prop_map(|pts| pts.into_iter().map(|(x, y)| [x, y]).collect())
    }

    fn spread_ok(pts: &[[Real; 2]]) -> bool {
        (0..2).all(|a| population_std(pts.iter().map(|p| p[a])) > 1e-3)
    }

    proptest! {
        #[test]
        fn normalized_frames_have_unit_spread(pts in frame_strategy(), nose in 0usize..3) {
            prop_assume!(spread_ok(&pts));
            let s = seq(layout(pts.len(), 1, nose, None), pts);
            let out = normalize_landmarks(&s).unwrap();
            prop_assert_eq!(out.coords[nose], [0.0, 0.0]);
            for a in 0..2 {
                let sd = population_std(out.coords.iter().map(|p| p[a]));
                prop_assert!((sd - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn normalization_ignores_shift_and_scale(
            pts in frame_strategy(),
            dx in -50.0..50.0 as Real,
            dy in -50.0..50.0 as Real,
            k in 0.1..10.0 as Real,
        ) {
            prop_assume!(spread_ok(&pts));
            let moved: Vec<[Real; 2]> = pts.iter().map(|p| [k * p[0] + dx, k * p[1] + dy]).collect();
            let l = layout(pts.len(), 1, 0, None);
            let a = normalize_landmarks(&seq(l.clone(), pts)).unwrap();
            let b = normalize_landmarks(&seq(l, moved)).unwrap();
            for (p, q) in a.coords.iter().zip(&b.coords) {
                prop_assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
            }
        }

        #[test]
        fn rotation_keeps_pairwise_distances(pts in frame_strategy(), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = seq(layout(pts.len(), 1, 0, None), pts);
            let (lo, hi) = DEFAULT_ROTATION;
            let r = augment_rotate(&s, &mut rng, lo, hi).unwrap();
            let dist = |c: &[[Real; 2]], i: usize, j: usize| {
                ((c[i][0] - c[j][0]).powi(2) + (c[i][1] - c[j][1]).powi(2)).sqrt()
            };
            for i in 0..s.coords.len() {
                for j in 0..i {
                    prop_assert!((dist(&s.coords, i, j) - dist(&r.coords, i, j)).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn trainset_is_fourteen_fold(count in 1usize..6, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = layout(2, 1, 0, Some(vec![1, 0]));
            let seqs: Vec<_> = (0..count).map(|i| seq(l.clone(), vec![[-1.0, i as Real], [1.0, 0.0]])).collect();
            let out = build_geometry_trainset(&seqs, &GeometryAugment::default(), &mut rng).unwrap();
            prop_assert_eq!(out.len(), 14 * count);
        }
    }
}
