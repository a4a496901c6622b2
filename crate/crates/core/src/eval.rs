//! Score fusion, subject-grouped folds and confusion matrices.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::nn::argmax;
use crate::subject::SubjectId;
use crate::tensor::{Real, Tensor};

const SUM_TOLERANCE: Real = 1e-6;

/// Per-class probabilities from a softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<Real>);

impl ScoreVector {
    pub fn new(values: Vec<Real>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("score vector is empty"));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("score vector has a negative or NaN entry"));
        }
        let sum: Real = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("score vector sums to {sum}, not 1")));
        }
        Ok(ScoreVector(values))
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        Self::new(t.data().to_vec())
    }

    pub fn values(&self) -> &[Real] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    /// Most probable class; ties go to the smallest index.
    pub fn prediction(&self) -> usize {
        argmax(&self.0)
    }
}

/// `o_i = α·p_i + (1 − α)·q_i`.
pub fn fuse(p: &ScoreVector, q: &ScoreVector, alpha: Real) -> Result<ScoreVector> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("fusion weight must lie in [0, 1], got {alpha}")));
    }
    if p.classes() != q.classes() {
        return Err(Error::invalid(format!(
            "cannot fuse {} classes with {}",
            p.classes(),
            q.classes()
        )));
    }
    let beta = 1.0 - alpha;
    Ok(ScoreVector(
        p.0.iter().zip(&q.0).map(|(&a, &b)| alpha * a + beta * b).collect(),
    ))
}

/// Assignment of subjects to folds. Fold `k` holds a contiguous run of the
/// naturally sorted subject list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    folds: Vec<Vec<SubjectId>>,
    index: HashMap<SubjectId, usize>,
}

impl FoldPlan {
    pub fn folds(&self) -> &[Vec<SubjectId>] {
        &self.folds
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    pub fn fold_of(&self, subject: &SubjectId) -> Option<usize> {
        self.index.get(subject).copied()
    }
}

/// Sorts the distinct subjects and cuts them into `k` contiguous groups whose
/// sizes differ by at most one; the first groups take the remainder.
pub fn make_folds<'a>(subjects: impl IntoIterator<Item = &'a SubjectId>, k: usize) -> Result<FoldPlan> {
    let distinct: BTreeSet<&SubjectId> = subjects.into_iter().collect();
    if k == 0 {
        return Err(Error::invalid("fold count must be >= 1"));
    }
    if distinct.len() < k {
        return Err(Error::invalid(format!(
            "{} subjects cannot fill {k} folds",
            distinct.len()
        )));
    }
    let (base, extra) = (distinct.len() / k, distinct.len() % k);
    let mut sorted = distinct.into_iter();
    let mut folds = Vec::with_capacity(k);
    let mut index = HashMap::new();
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let group: Vec<SubjectId> = sorted.by_ref().take(size).cloned().collect();
        for s in &group {
            index.insert(s.clone(), f);
        }
        folds.push(group);
    }
    Ok(FoldPlan { folds, index })
}

/// Counts of (truth, prediction) pairs; rows are ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn row_total(&self, class: usize) -> usize {
        self.counts[class].iter().sum()
    }

    /// Row-normalized percentages. Rows without samples are all zero.
    pub fn percentages(&self) -> Vec<Vec<Real>> {
        self.counts
            .iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter()
                    .map(|&n| if total == 0 { 0.0 } else { 100.0 * n as Real / total as Real })
                    .collect()
            })
            .collect()
    }

    /// Classes with no ground-truth samples.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.classes()).filter(|&c| self.row_total(c) == 0).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn accuracy(&self) -> Real {
        match self.total() {
            0 => 0.0,
            n => self.correct() as Real / n as Real,
        }
    }
}

pub fn confusion_matrix(truths: &[usize], predictions: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if truths.len() != predictions.len() {
        return Err(Error::invalid(format!(
            "{} truths but {} predictions",
            truths.len(),
            predictions.len()
        )));
    }
    let mut counts = vec![vec![0; classes]; classes];
    for (&t, &p) in truths.iter().zip(predictions) {
        if t >= classes || p >= classes {
            return Err(Error::invalid(format!(
                "class index {} out of range for {classes} classes",
                t.max(p)
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[Real]) -> ScoreVector {
        ScoreVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fusion_examples() {
        let o = fuse(&sv(&[0.8, 0.2]), &sv(&[0.2, 0.8]), 0.5).unwrap();
        assert_eq!(o.values(), &[0.5, 0.5]);
        assert_eq!(o.prediction(), 0);
        let p = sv(&[0.1, 0.6, 0.3]);
        let q = sv(&[0.7, 0.2, 0.1]);
        assert_eq!(fuse(&p, &q, 1.0).unwrap(), p);
        assert_eq!(fuse(&p, &q, 0.0).unwrap(), q);
        let mmi = fuse(&p, &q, 0.42).unwrap();
        assert!((mmi.values()[0] - (0.42 * 0.1 + 0.58 * 0.7)).abs() < 1e-15);
        assert!(fuse(&p, &q, 1.5).is_err());
        assert!(fuse(&p, &q, -0.1).is_err());
        assert!(fuse(&p, &sv(&[1.0, 0.0]), 0.5).is_err());
        assert!(ScoreVector::new(vec![0.5, 0.6]).is_err());
    }

    fn subjects(n: usize) -> Vec<SubjectId> {
        (1..=n).map(|i| SubjectId::new(format!("S{i}"))).collect()
    }

    #[test]
    fn fold_sizes() {
        let plan = make_folds(&subjects(20), 10).unwrap();
        assert!(plan.folds().iter().all(|f| f.len() == 2));
        assert_eq!(plan.folds()[0], vec![SubjectId::new("S1"), SubjectId::new("S2")]);

        let plan = make_folds(&subjects(118), 10).unwrap();
        let sizes: Vec<usize> = plan.folds().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![12, 12, 12, 12, 12, 12, 12, 12, 11, 11]);

        assert!(make_folds(&subjects(5), 10).is_err());
    }

    #[test]
    fn folds_follow_natural_order() {
        let ids: Vec<SubjectId> = ["S10", "S2", "S1", "S2"].into_iter().map(SubjectId::from).collect();
        let plan = make_folds(&ids, 3).unwrap();
        assert_eq!(plan.fold_of(&"S1".into()), Some(0));
        assert_eq!(plan.fold_of(&"S2".into()), Some(1));
        assert_eq!(plan.fold_of(&"S10".into()), Some(2));
    }

    #[test]
    fn confusion_rows() {
        // A 25-sample row: 21 right, 2 to class 1, 2 to class 2.
        let truths = vec![0; 25];
        let mut preds = vec![0; 21];
        preds.extend([1, 1, 2, 2]);
        let m = confusion_matrix(&truths, &preds, 3).unwrap();
        assert_eq!(m.percentages()[0], vec![84.0, 8.0, 8.0]);
        assert_eq!(m.empty_rows(), vec![1, 2]);
        assert_eq!(m.percentages()[1], vec![0.0; 3]);

        let perfect = confusion_matrix(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(perfect.percentages()[2], vec![0.0, 0.0, 100.0]);
        assert_eq!(perfect.accuracy(), 1.0);
        assert!(confusion_matrix(&[3], &[0], 3).is_err());
        assert!(confusion_matrix(&[0], &[], 3).is_err());
    }

    fn score_strategy(c: usize) -> impl Strategy<Value = ScoreVector> {
        proptest::collection::vec(0.0..1.0 as Real, c).prop_filter_map("zero mass", |v| {
            let s: Real = v.iter().sum();
            (s > 1e-3).then(|| ScoreVector(v.iter().map(|x| x / s).collect()))
        })
    }

    proptest! {
        #[test]
        fn fusion_relabeling_consistency(
            (p, q, perm) in (2usize..6).prop_flat_map(|c| (
                score_strategy(c),
                score_strategy(c),
                Just((0..c).collect::<Vec<_>>()).prop_shuffle(),
            )),
            alpha in 0.0..=1.0 as Real,
        ) {
            let permute = |s: &ScoreVector| ScoreVector(perm.iter().map(|&i| s.0[i]).collect());
            let direct = fuse(&p, &q, alpha).unwrap();
            let relabeled = fuse(&permute(&p), &permute(&q), alpha).unwrap();
            let mut back = vec![0.0; p.classes()];
            for (k, &i) in perm.iter().enumerate() {
                back[i] = relabeled.0[k];
            }
            prop_assert_eq!(back, direct.0.clone());
        }

        #[test]
        fn half_weight_is_symmetric(p in score_strategy(4), q in score_strategy(4)) {
            prop_assert_eq!(fuse(&p, &q, 0.5).unwrap(), fuse(&q, &p, 0.5).unwrap());
        }

        #[test]
        fn folds_partition_subjects(n in 1usize..200, k in 1usize..12) {
            prop_assume!(n >= k);
            let ids = subjects(n);
            let plan = make_folds(&ids, k).unwrap();
            let mut seen: Vec<&SubjectId> = plan.folds().iter().flatten().collect();
            prop_assert_eq!(seen.len(), n);
            seen.sort();
            seen.dedup();
            prop_assert_eq!(seen.len(), n);
            let sizes: Vec<usize> = plan.folds().iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            prop_assert_eq!(&plan, &make_folds(&ids, k).unwrap());
        }
    }
}
