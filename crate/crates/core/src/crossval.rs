//! Subject-grouped k-fold protocol over one or both streams, with late fusion
//! of the held-out scores.

use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::appearance::{build_appearance_trainset, AppearanceAugment, ImageSequence};
use crate::error::{Error, Result};
use crate::eval::{confusion_matrix, fuse, make_folds, ConfusionMatrix, FoldPlan, ScoreVector};
use crate::geometry::{build_geometry_trainset, vectorize, GeometryAugment, LandmarkSequence};
use crate::netspec::ModelSpec;
use crate::nn::{train, BuildOptions, EpochStats, Network, Sample, TrainConfig};
use crate::subject::SubjectId;
use crate::tensor::{Real, Tensor};

/// Architecture and optimizer settings for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSetup {
    pub spec: ModelSpec,
    pub build: BuildOptions,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalConfig {
    pub folds: usize,
    pub alpha: Real,
    /// Fold `k` trains with seed `seed + k`.
    pub seed: u64,
    /// Folds run concurrently on this many threads.
    pub workers: usize,
    pub geometry_augment: GeometryAugment,
    pub appearance_augment: AppearanceAugment,
}

impl Default for CrossvalConfig {
    fn default() -> Self {
        CrossvalConfig {
            folds: 10,
            alpha: 0.5,
            seed: 0,
            workers: 1,
            geometry_augment: GeometryAugment::default(),
            appearance_augment: AppearanceAugment::default(),
        }
    }
}

/// Normalized landmark sequences and/or key-frame image stacks. When both are
/// present they must describe the same sequence ids.
#[derive(Debug, Clone, Copy, Default)]
pub struct CrossvalData<'a> {
    pub geometry: Option<(&'a [LandmarkSequence], &'a StreamSetup)>,
    pub appearance: Option<(&'a [ImageSequence], &'a StreamSetup)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Geometry,
    Appearance,
    Fused,
}

impl StreamKind {
    pub const ALL: [StreamKind; 3] = [StreamKind::Geometry, StreamKind::Appearance, StreamKind::Fused];

    pub fn name(self) -> &'static str {
        match self {
            StreamKind::Geometry => "geometry",
            StreamKind::Appearance => "appearance",
            StreamKind::Fused => "fused",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub sequence_id: String,
    pub subject: SubjectId,
    pub label: usize,
    pub fold: usize,
    pub geometry: Option<ScoreVector>,
    pub appearance: Option<ScoreVector>,
    pub fused: Option<ScoreVector>,
}

impl Prediction {
    pub fn scores(&self, kind: StreamKind) -> Option<&ScoreVector> {
        match kind {
            StreamKind::Geometry => self.geometry.as_ref(),
            StreamKind::Appearance => self.appearance.as_ref(),
            StreamKind::Fused => self.fused.as_ref(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test_subjects: Vec<SubjectId>,
    pub train_count: usize,
    pub geometry_model: Option<Network>,
    pub appearance_model: Option<Network>,
    pub geometry_history: Vec<EpochStats>,
    pub appearance_history: Vec<EpochStats>,
    pub predictions: Vec<Prediction>,
}

impl FoldOutcome {
    pub fn confusion(&self, kind: StreamKind, classes: usize) -> Option<ConfusionMatrix> {
        confusion_over(self.predictions.iter(), kind, classes)
    }
}

#[derive(Debug, Clone)]
pub struct CrossvalReport {
    pub classes: usize,
    pub alpha: Real,
    pub plan: FoldPlan,
    pub folds: Vec<FoldOutcome>,
}

impl CrossvalReport {
    pub fn predictions(&self) -> impl Iterator<Item = &Prediction> {
        self.folds.iter().flat_map(|f| f.predictions.iter())
    }

    /// Pooled over every fold's test items; `None` if the stream did not run.
    pub fn confusion(&self, kind: StreamKind) -> Option<ConfusionMatrix> {
        confusion_over(self.predictions(), kind, self.classes)
    }

    pub fn accuracy(&self, kind: StreamKind) -> Option<Real> {
        self.confusion(kind).map(|m| m.accuracy())
    }

    pub fn streams(&self) -> Vec<StreamKind> {
        StreamKind::ALL
            .into_iter()
            .filter(|&k| self.predictions().next().is_some_and(|p| p.scores(k).is_some()))
            .collect()
    }
}

fn confusion_over<'a>(
    predictions: impl Iterator<Item = &'a Prediction>,
    kind: StreamKind,
    classes: usize,
) -> Option<ConfusionMatrix> {
    let (mut truths, mut preds) = (Vec::new(), Vec::new());
    for p in predictions {
        truths.push(p.label);
        preds.push(p.scores(kind)?.prediction());
    }
    if truths.is_empty() {
        return None;
    }
    confusion_matrix(&truths, &preds, classes).ok()
}

/// One sequence as seen by both streams.
struct Item {
    sequence_id: String,
    subject: SubjectId,
    label: usize,
    geometry: Option<usize>,
    appearance: Option<usize>,
}

fn align(data: &CrossvalData) -> Result<Vec<Item>> {
    let mut items: Vec<Item> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    if let Some((seqs, _)) = data.geometry {
        for (i, s) in seqs.iter().enumerate() {
            if by_id.insert(s.sequence_id.clone(), items.len()).is_some() {
                return Err(Error::invalid(format!("duplicate sequence id {}", s.sequence_id)));
            }
            items.push(Item {
                sequence_id: s.sequence_id.clone(),
                subject: s.subject.clone(),
                label: s.label,
                geometry: Some(i),
                appearance: None,
            });
        }
    }
    if let Some((seqs, _)) = data.appearance {
        let joined = data.geometry.is_some();
        let mut seen = BTreeSet::new();
        for (i, s) in seqs.iter().enumerate() {
            if !seen.insert(s.sequence_id.as_str()) {
                return Err(Error::invalid(format!("duplicate sequence id {}", s.sequence_id)));
            }
            match by_id.get(&s.sequence_id) {
                Some(&k) => {
                    let item = &mut items[k];
                    if item.subject != s.subject || item.label != s.label {
                        return Err(Error::invalid(format!(
                            "sequence {} has subject/label {}/{} in the landmark data but {}/{} in the image data",
                            s.sequence_id, item.subject, item.label, s.subject, s.label
                        )));
                    }
                    item.appearance = Some(i);
                }
                None if joined => {
                    return Err(Error::invalid(format!(
                        "sequence {} has images but no landmarks",
                        s.sequence_id
                    )))
                }
                None => items.push(Item {
                    sequence_id: s.sequence_id.clone(),
                    subject: s.subject.clone(),
                    label: s.label,
                    geometry: None,
                    appearance: Some(i),
                }),
            }
        }
        if joined {
            if let Some(missing) = items.iter().find(|it| it.appearance.is_none()) {
                return Err(Error::invalid(format!(
                    "sequence {} has landmarks but no images",
                    missing.sequence_id
                )));
            }
        }
    }
    if items.is_empty() {
        return Err(Error::invalid("cross-validation needs at least one dataset"));
    }
    Ok(items)
}

fn check_setup(setup: &StreamSetup, shape: &[usize], what: &str) -> Result<()> {
    let expected = setup.spec.input_shape();
    if expected != shape {
        return Err(Error::invalid(format!(
            "{what} inputs have shape {shape:?} but {} expects {expected:?}",
            setup.spec
        )));
    }
    setup.train.validate()
}

pub fn fold_seed(base: u64, fold: usize) -> u64 {
    base.wrapping_add(fold as u64)
}

/// Runs the full protocol. Results do not depend on `config.workers`.
pub fn run_crossval(data: CrossvalData, config: &CrossvalConfig) -> Result<CrossvalReport> {
    if !(0.0..=1.0).contains(&config.alpha) {
        return Err(Error::invalid(format!("fusion weight must lie in [0, 1], got {}", config.alpha)));
    }
    let items = align(&data)?;
    let classes = match (data.geometry, data.appearance) {
        (Some((_, g)), Some((_, a))) if g.spec.classes != a.spec.classes => {
            return Err(Error::invalid(format!(
                "geometry network has {} classes, appearance network {}",
                g.spec.classes, a.spec.classes
            )))
        }
        (Some((_, s)), _) | (None, Some((_, s))) => s.spec.classes,
        (None, None) => unreachable!("align rejects empty input"),
    };
    if let Some(bad) = items.iter().find(|it| it.label >= classes) {
        return Err(Error::invalid(format!(
            "sequence {} has label {} but the networks have {classes} classes",
            bad.sequence_id, bad.label
        )));
    }
    if let Some((seqs, setup)) = data.geometry {
        check_setup(setup, &[seqs[0].layout.dimension()], "landmark")?;
    }
    if let Some((seqs, setup)) = data.appearance {
        check_setup(setup, seqs[0].frames.shape(), "image")?;
    }

    let plan = make_folds(items.iter().map(|it| &it.subject), config.folds)?;
    let run = |fold: usize| run_fold(&data, &items, &plan, fold, classes, config);
    let folds = if config.workers <= 1 {
        (0..plan.len()).map(run).collect::<Result<Vec<_>>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| (0..plan.len()).into_par_iter().map(run).collect::<Result<Vec<_>>>())?
    };
    Ok(CrossvalReport {
        classes,
        alpha: config.alpha,
        plan,
        folds,
    })
}

fn run_fold(
    data: &CrossvalData,
    items: &[Item],
    plan: &FoldPlan,
    fold: usize,
    classes: usize,
    config: &CrossvalConfig,
) -> Result<FoldOutcome> {
    let (train_items, test_items): (Vec<&Item>, Vec<&Item>) =
        items.iter().partition(|it| plan.fold_of(&it.subject) != Some(fold));
    let train_subjects: BTreeSet<&SubjectId> = train_items.iter().map(|it| &it.subject).collect();
    let leaked: Vec<String> = test_items
        .iter()
        .map(|it| &it.subject)
        .filter(|s| train_subjects.contains(s))
        .map(|s| s.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !leaked.is_empty() {
        return Err(Error::SubjectLeakage {
            fold,
            subjects: leaked,
        });
    }
    if train_items.is_empty() {
        return Err(Error::invalid(format!("fold {fold} leaves no training data")));
    }

    let seed = fold_seed(config.seed, fold);
    let mut outcome = FoldOutcome {
        fold,
        test_subjects: plan.folds()[fold].clone(),
        train_count: train_items.len(),
        geometry_model: None,
        appearance_model: None,
        geometry_history: Vec::new(),
        appearance_history: Vec::new(),
        predictions: test_items
            .iter()
            .map(|it| Prediction {
                sequence_id: it.sequence_id.clone(),
                subject: it.subject.clone(),
                label: it.label,
                fold,
                geometry: None,
                appearance: None,
                fused: None,
            })
            .collect(),
    };

    if let Some((seqs, setup)) = data.geometry {
        let train_seqs: Vec<LandmarkSequence> =
            train_items.iter().map(|it| seqs[it.geometry.expect("aligned")].clone()).collect();
        let (model, history) = train_geometry(&train_seqs, setup, &config.geometry_augment, seed)?;
        for (p, it) in outcome.predictions.iter_mut().zip(&test_items) {
            let x = vectorize(&seqs[it.geometry.expect("aligned")]).to_tensor()?;
            p.geometry = Some(ScoreVector::from_tensor(&model.predict(&x)?)?);
        }
        outcome.geometry_model = Some(model);
        outcome.geometry_history = history;
    }

    if let Some((seqs, setup)) = data.appearance {
        let train_seqs: Vec<ImageSequence> =
            train_items.iter().map(|it| seqs[it.appearance.expect("aligned")].clone()).collect();
        let (model, history) = train_appearance(&train_seqs, setup, &config.appearance_augment, seed)?;
        for (p, it) in outcome.predictions.iter_mut().zip(&test_items) {
            let x: &Tensor = &seqs[it.appearance.expect("aligned")].frames;
            p.appearance = Some(ScoreVector::from_tensor(&model.predict(x)?)?);
        }
        outcome.appearance_model = Some(model);
        outcome.appearance_history = history;
    }

    for p in &mut outcome.predictions {
        p.fused = match (&p.geometry, &p.appearance) {
            (Some(g), Some(a)) => Some(fuse(a, g, config.alpha)?),
            _ => None,
        };
    }
    debug_assert!(outcome.predictions.iter().all(|p| p.label < classes));
    Ok(outcome)
}

/// Augments `sequences`, initializes a network and trains it. The seed drives
/// augmentation, initialization, shuffling and dropout.
pub fn train_geometry(
    sequences: &[LandmarkSequence],
    setup: &StreamSetup,
    augment: &GeometryAugment,
    seed: u64,
) -> Result<(Network, Vec<EpochStats>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = build_geometry_trainset(sequences, augment, &mut rng)?
        .into_iter()
        .map(|(v, label)| Ok(Sample { input: v.to_tensor()?, label }))
        .collect::<Result<Vec<_>>>()?;
    fit(setup, &samples, &mut rng, seed)
}

/// Image counterpart of [`train_geometry`], on an independent random stream.
pub fn train_appearance(
    sequences: &[ImageSequence],
    setup: &StreamSetup,
    augment: &AppearanceAugment,
    seed: u64,
) -> Result<(Network, Vec<EpochStats>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let samples: Vec<Sample> = build_appearance_trainset(sequences, augment)?
        .into_iter()
        .map(|(input, label)| Sample { input, label })
        .collect();
    fit(setup, &samples, &mut rng, seed)
}

fn fit(
    setup: &StreamSetup,
    samples: &[Sample],
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> Result<(Network, Vec<EpochStats>)> {
    let mut model = Network::build(&setup.spec, &setup.build, rng)?;
    let config = TrainConfig {
        seed,
        ..setup.train.clone()
    };
    let history = train(&mut model, samples, &config)?;
    Ok((model, history))
}
