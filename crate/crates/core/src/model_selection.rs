//! Cross-validation splits, per-fold evaluation and grid search over the
//! loss parameter.
//!
//! Test predictions from every fold are pooled record by record into one
//! confusion matrix, and metrics are computed from the pooled counts. This
//! keeps leave-one-out style plans meaningful, where a single test record
//! cannot define precision or recall on its own.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::booster::{train, BoostedModel, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::LossParams;
use crate::metrics::{confusion_from_predictions, ConfusionCounts, MetricMode, MetricScores};

/// How instances are partitioned into train/test folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitPlan {
    /// `k` folds; with a seed the instances are shuffled before being dealt.
    KFold {
        k: usize,
        shuffle_seed: Option<u64>,
    },
    LeaveOneOut,
    /// One fold per distinct group id, in order of first appearance.
    LeaveOneGroupOut,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn complement(m: usize, test: &[usize]) -> Vec<usize> {
    let mut in_test = vec![false; m];
    for &i in test {
        in_test[i] = true;
    }
    (0..m).filter(|&i| !in_test[i]).collect()
}

/// Train/test index pairs for `plan`. Test sets are disjoint and cover every
/// instance exactly once; indices within each side are ascending.
pub fn make_splits(data: &Dataset, plan: &SplitPlan) -> Result<Vec<Fold>> {
    let m = data.n_instances();
    let tests: Vec<Vec<usize>> = match *plan {
        SplitPlan::KFold { k, shuffle_seed } => {
            if k == 0 || k > m {
                return Err(Error::InvalidPlan(format!(
                    "k-fold needs 1 <= k <= {m} instances, got k = {k}"
                )));
            }
            let mut order: Vec<usize> = (0..m).collect();
            if let Some(seed) = shuffle_seed {
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            }
            let (base, extra) = (m / k, m % k);
            let mut start = 0;
            (0..k)
                .map(|f| {
                    let len = base + usize::from(f < extra);
                    let mut test = order[start..start + len].to_vec();
                    start += len;
                    test.sort_unstable();
                    test
                })
                .collect()
        }
        SplitPlan::LeaveOneOut => (0..m).map(|i| vec![i]).collect(),
        SplitPlan::LeaveOneGroupOut => {
            let groups = data
                .group_ids()
                .ok_or_else(|| Error::InvalidPlan("leave-one-group-out needs group ids".into()))?;
            let mut slot: HashMap<&str, usize> = HashMap::new();
            let mut tests: Vec<Vec<usize>> = Vec::new();
            for (i, g) in groups.iter().enumerate() {
                let at = *slot.entry(g.as_str()).or_insert_with(|| {
                    tests.push(Vec::new());
                    tests.len() - 1
                });
                tests[at].push(i);
            }
            tests
        }
    };
    Ok(tests
        .into_iter()
        .map(|test| Fold {
            train: complement(m, &test),
            test,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub train_size: usize,
    pub test_size: usize,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub loss: LossParams,
    pub folds: Vec<FoldReport>,
    pub pooled: ConfusionCounts,
    pub scores: MetricScores,
}

/// Trains one model per fold (fold `i` uses seed `config.seed + i`) and pools
/// the test-side confusion counts.
pub fn cross_validate(data: &Dataset, config: &TrainConfig, plan: &SplitPlan) -> Result<CvReport> {
    config.validate()?;
    let folds = make_splits(data, plan)?;
    if let Some(i) = folds.iter().position(|f| f.train.is_empty()) {
        return Err(Error::InvalidPlan(format!(
            "fold {i} has an empty training side"
        )));
    }
    let reports = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let fold_config = TrainConfig {
                seed: config.seed.wrapping_add(i as u64),
                ..*config
            };
            let model = train(&data.subset(&fold.train)?, &fold_config)?;
            let test = data.subset(&fold.test)?;
            let raw = model.predict_raw(test.features())?;
            Ok(FoldReport {
                train_size: fold.train.len(),
                test_size: fold.test.len(),
                counts: confusion_from_predictions(test.labels(), &raw)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pooled: ConfusionCounts = reports.iter().map(|r| r.counts).sum();
    Ok(CvReport {
        loss: config.loss,
        folds: reports,
        pooled,
        scores: pooled.scores()?,
    })
}

/// Candidate loss parameters for a search. Which list is used follows the
/// loss kind of `base_config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub alpha_candidates: Vec<f64>,
    pub gamma_candidates: Vec<f64>,
    pub base_config: TrainConfig,
}

impl SearchGrid {
    /// α values searched for the weighted loss.
    pub const DEFAULT_ALPHAS: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
    /// γ values searched for the focal loss.
    pub const DEFAULT_GAMMAS: [f64; 7] = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];

    pub fn new(base_config: TrainConfig) -> Self {
        SearchGrid {
            alpha_candidates: Self::DEFAULT_ALPHAS.to_vec(),
            gamma_candidates: Self::DEFAULT_GAMMAS.to_vec(),
            base_config,
        }
    }

    pub fn candidates(&self) -> Vec<LossParams> {
        match self.base_config.loss {
            LossParams::Plain => vec![LossParams::Plain],
            LossParams::Weighted { .. } => self
                .alpha_candidates
                .iter()
                .map(|&alpha| LossParams::Weighted { alpha })
                .collect(),
            LossParams::Focal { .. } => self
                .gamma_candidates
                .iter()
                .map(|&gamma| LossParams::Focal { gamma })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: LossParams,
    pub selection_metric: MetricMode,
    pub candidates: Vec<CvReport>,
}

impl GridResult {
    pub fn best_report(&self) -> &CvReport {
        self.candidates
            .iter()
            .find(|r| r.loss == self.best)
            .expect("best candidate is always among the reports")
    }
}

/// Cross-validates every candidate and keeps the one with the highest pooled
/// `selection_metric`; ties go to the earliest candidate.
pub fn grid_search(
    data: &Dataset,
    grid: &SearchGrid,
    plan: &SplitPlan,
    selection_metric: MetricMode,
) -> Result<GridResult> {
    let candidates = grid.candidates();
    if candidates.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no {} candidates in the search grid",
            grid.base_config.loss.kind_name()
        )));
    }
    let reports = candidates
        .par_iter()
        .map(|&loss| cross_validate(data, &grid.base_config.with_loss(loss), plan))
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, r) in reports.iter().enumerate().skip(1) {
        if r.scores.get(selection_metric) > reports[best].scores.get(selection_metric) {
            best = i;
        }
    }
    Ok(GridResult {
        best: candidates[best],
        selection_metric,
        candidates: reports,
    })
}

/// Trains a fresh model on all of `data` with the selected loss parameters.
pub fn refit(data: &Dataset, base_config: &TrainConfig, best: LossParams) -> Result<BoostedModel> {
    train(data, &base_config.with_loss(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn dataset(m: usize, groups: Option<Vec<&str>>) -> Dataset {
        let x = Array2::from_shape_fn((m, 1), |(i, _)| i as f64);
        let y = (0..m).map(|i| (i % 2 == 0).into()).collect();
        Dataset::with_groups(
            x,
            y,
            groups.map(|g| g.into_iter().map(String::from).collect()),
        )
        .unwrap()
    }

    fn test_sizes(folds: &[Fold]) -> Vec<usize> {
        folds.iter().map(|f| f.test.len()).collect()
    }

    #[test]
    fn kfold_with_k_equal_m_is_leave_one_out() {
        let d = dataset(4, None);
        let kfold = make_splits(
            &d,
            &SplitPlan::KFold {
                k: 4,
                shuffle_seed: None,
            },
        )
        .unwrap();
        let loo = make_splits(&d, &SplitPlan::LeaveOneOut).unwrap();
        assert_eq!(kfold, loo);
        let mut shuffled: Vec<Vec<usize>> = make_splits(
            &d,
            &SplitPlan::KFold {
                k: 4,
                shuffle_seed: Some(9),
            },
        )
        .unwrap()
        .into_iter()
        .map(|f| f.test)
        .collect();
        shuffled.sort();
        assert_eq!(shuffled, vec![vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn kfold_remainder_goes_to_first_folds() {
        let d = dataset(5, None);
        let folds = make_splits(
            &d,
            &SplitPlan::KFold {
                k: 2,
                shuffle_seed: None,
            },
        )
        .unwrap();
        assert_eq!(test_sizes(&folds), vec![3, 2]);
        assert_eq!(folds[0].train, vec![3, 4]);
    }

    #[test]
    fn leave_one_group_out() {
        let d = dataset(6, Some(vec!["a", "a", "a", "b", "b", "b"]));
        let folds = make_splits(&d, &SplitPlan::LeaveOneGroupOut).unwrap();
        assert_eq!(test_sizes(&folds), vec![3, 3]);
        assert_eq!(folds[0].test, vec![0, 1, 2]);
        assert_eq!(folds[0].train, vec![3, 4, 5]);
    }

    #[test]
    fn invalid_plans() {
        let d = dataset(3, None);
        assert!(matches!(
            make_splits(
                &d,
                &SplitPlan::KFold {
                    k: 4,
                    shuffle_seed: None
                }
            ),
            Err(Error::InvalidPlan(_))
        ));
        assert!(matches!(
            make_splits(&d, &SplitPlan::LeaveOneGroupOut),
            Err(Error::InvalidPlan(_))
        ));
        let one = dataset(1, None);
        assert!(matches!(
            cross_validate(&one, &TrainConfig::default(), &SplitPlan::LeaveOneOut),
            Err(Error::InvalidPlan(_))
        ));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let d = dataset(4, None);
        let grid = SearchGrid {
            alpha_candidates: vec![],
            gamma_candidates: vec![1.0],
            base_config: TrainConfig::default().with_loss(LossParams::Weighted { alpha: 1.0 }),
        };
        assert!(matches!(
            grid_search(&d, &grid, &SplitPlan::LeaveOneOut, MetricMode::Accuracy),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn candidate_lists_follow_loss_kind() {
        let base = TrainConfig::default();
        assert_eq!(SearchGrid::new(base).candidates(), vec![LossParams::Plain]);
        let w = SearchGrid::new(base.with_loss(LossParams::Weighted { alpha: 1.0 }));
        assert_eq!(w.candidates().len(), 5);
        let f = SearchGrid::new(base.with_loss(LossParams::Focal { gamma: 1.0 }));
        assert_eq!(f.candidates().len(), 7);
    }
}
