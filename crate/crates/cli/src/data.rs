//! Prepared caches as uniform lists of network inputs.

use std::path::Path;

use dtagn_core::cache::{
    read_appearance_cache, read_geometry_cache, AppearanceCache, GeometryCache, APPEARANCE_MAGIC,
    GEOMETRY_MAGIC,
};
use dtagn_core::eval::{make_folds, FoldPlan};
use dtagn_core::geometry::vectorize;
use dtagn_core::nn::Network;
use dtagn_core::subject::SubjectId;
use dtagn_core::{Error, Result, Tensor};

pub enum Prepared {
    Geometry(GeometryCache),
    Appearance(AppearanceCache),
}

pub struct Item {
    pub id: String,
    pub subject: SubjectId,
    pub label: usize,
    pub input: Tensor,
}

impl Prepared {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        match bytes.get(..4) {
            Some(m) if m == GEOMETRY_MAGIC => Ok(Prepared::Geometry(read_geometry_cache(&bytes)?)),
            Some(m) if m == APPEARANCE_MAGIC => Ok(Prepared::Appearance(read_appearance_cache(&bytes)?)),
            _ => Err(Error::CacheFormat {
                offset: 0,
                reason: format!("{} is not a prepared cache", path.display()),
            }),
        }
    }

    pub fn geometry(path: &Path) -> Result<GeometryCache> {
        match Self::load(path)? {
            Prepared::Geometry(c) => Ok(c),
            Prepared::Appearance(_) => Err(Error::invalid(format!(
                "{} holds images, expected landmarks",
                path.display()
            ))),
        }
    }

    pub fn appearance(path: &Path) -> Result<AppearanceCache> {
        match Self::load(path)? {
            Prepared::Appearance(c) => Ok(c),
            Prepared::Geometry(_) => Err(Error::invalid(format!(
                "{} holds landmarks, expected images",
                path.display()
            ))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Prepared::Geometry(_) => "landmark",
            Prepared::Appearance(_) => "image",
        }
    }


    /// Shape of one network input; `None` for an empty cache.
    pub fn input_shape(&self) -> Option<Vec<usize>> {
        match self {
            Prepared::Geometry(c) => (!c.sequences.is_empty()).then(|| vec![c.layout.dimension()]),
            Prepared::Appearance(c) => c.sequences.first().map(|s| s.frames.shape().to_vec()),
        }
    }

    /// Frame count to use when parsing an architecture for this data.
    pub fn frames(&self) -> usize {
        match self {
            Prepared::Geometry(_) => 1,
            Prepared::Appearance(c) => c.sequences.first().map_or(1, |s| s.len()),
        }
    }

    pub fn items(&self) -> Result<Vec<Item>> {
        match self {
            Prepared::Geometry(c) => c
                .sequences
                .iter()
                .map(|s| {
                    Ok(Item {
                        id: s.sequence_id.clone(),
                        subject: s.subject.clone(),
                        label: s.label,
                        input: vectorize(s).to_tensor()?,
                    })
                })
                .collect(),
            Prepared::Appearance(c) => Ok(c
                .sequences
                .iter()
                .map(|s| Item {
                    id: s.sequence_id.clone(),
                    subject: s.subject.clone(),
                    label: s.label,
                    input: s.frames.clone(),
                })
                .collect()),
        }
    }
}

/// Rejects a model whose input or class count does not fit the items.
pub fn check_model(model: &Network, items: &[Item], what: &str) -> Result<()> {
    let expected = model.input_shape();
    if let Some(item) = items.iter().find(|i| i.input.shape() != expected.as_slice()) {
        return Err(Error::invalid(format!(
            "{what}: model {} expects inputs {expected:?} but {} has {:?}",
            model.spec(),
            item.id,
            item.input.shape()
        )));
    }
    if let Some(item) = items.iter().find(|i| i.label >= model.classes()) {
        return Err(Error::invalid(format!(
            "{what}: {} has label {} but the model has {} classes",
            item.id,
            item.label,
            model.classes()
        )));
    }
    Ok(())
}

pub fn fold_plan<'a>(subjects: impl IntoIterator<Item = &'a SubjectId>, folds: usize, fold: usize) -> Result<FoldPlan> {
    let plan = make_folds(subjects, folds)?;
    if fold >= plan.len() {
        return Err(Error::invalid(format!("fold {fold} out of range 0..{}", plan.len())));
    }
    Ok(plan)
}

/// Keeps entries whose subject is (`inside`) or is not in fold `fold`.
pub fn filter_fold<T>(
    entries: Vec<T>,
    subject: impl Fn(&T) -> &SubjectId,
    folds: usize,
    fold: Option<usize>,
    inside: bool,
) -> Result<Vec<T>> {
    let Some(fold) = fold else {
        return Ok(entries);
    };
    let plan = fold_plan(entries.iter().map(&subject), folds, fold)?;
    Ok(entries
        .into_iter()
        .filter(|e| (plan.fold_of(subject(e)) == Some(fold)) == inside)
        .collect())
}
