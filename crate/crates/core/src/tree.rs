//! Regression trees fitted to per-instance gradients and hessians.
//!
//! A tree is grown depth-wise with exact greedy split search: every midpoint
//! between consecutive distinct values of every feature is a candidate, and
//! the candidate with the largest reduction of the second-order objective
//! wins. Ties go to the lowest feature index, then the lowest threshold.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::loss::GradHess;

/// Denominators `H + lambda` below this produce a zero leaf weight.
pub const DENOMINATOR_FLOOR: f64 = 1e-16;

/// Gains within this relative distance of each other count as tied, so that
/// rounding in the prefix sums cannot override the tie-break order.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-12;

#[inline]
fn beats(gain: f64, best: f64) -> bool {
    gain > best + GAIN_TIE_TOLERANCE * best.abs()
}

/// One node of a regression tree. Instances with `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum TreeNode {
    Split {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        leaf_weight: f64,
    },
}

impl TreeNode {
    pub fn leaf(weight: f64) -> Self {
        TreeNode::Leaf {
            leaf_weight: weight,
        }
    }

    /// Output of this tree for a single row.
    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { leaf_weight } => return *leaf_weight,
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature_index] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

/// Tree-growing hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub reg_lambda: f64,
    pub min_split_gain: f64,
    pub min_child_hessian: f64,
    pub learning_rate: f64,
}

/// Decrease of the second-order objective when a node with sums
/// `(G_L + G_R, H_L + H_R)` is split into the two given children, minus
/// `min_split_gain`.
pub fn split_gain(
    grad_left: f64,
    hess_left: f64,
    grad_right: f64,
    hess_right: f64,
    reg_lambda: f64,
    min_split_gain: f64,
) -> f64 {
    let score = |g: f64, h: f64| {
        let denom = h + reg_lambda;
        if denom < DENOMINATOR_FLOOR {
            0.0
        } else {
            g * g / denom
        }
    };
    0.5 * (score(grad_left, hess_left) + score(grad_right, hess_right)
        - score(grad_left + grad_right, hess_left + hess_right))
        - min_split_gain
}

/// Optimal unshrunk leaf weight `-G / (H + lambda)`.
pub fn leaf_weight(grad_sum: f64, hess_sum: f64, reg_lambda: f64) -> f64 {
    let denom = hess_sum + reg_lambda;
    if denom < DENOMINATOR_FLOOR {
        0.0
    } else {
        -grad_sum / denom
    }
}

/// Midpoint of two consecutive distinct sorted values, kept strictly below `hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature_index: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Sums of gradients and hessians over `indices`, in the order given.
pub fn sum_grad_hess(grad_hess: &[GradHess], indices: &[usize]) -> (f64, f64) {
    indices.iter().fold((0.0, 0.0), |(g, h), &i| {
        (g + grad_hess[i].grad, h + grad_hess[i].hess)
    })
}

fn best_split_for_feature(
    column: ArrayView1<'_, f64>,
    feature_index: usize,
    grad_hess: &[GradHess],
    indices: &[usize],
    totals: (f64, f64),
    params: &TreeParams,
) -> Option<SplitCandidate> {
    let mut order: Vec<usize> = indices.to_vec();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]).then(a.cmp(&b)));

    let (grad_total, hess_total) = totals;
    let mut grad_left = 0.0;
    let mut hess_left = 0.0;
    let mut best: Option<SplitCandidate> = None;
    for pair in order.windows(2) {
        let (cur, next) = (pair[0], pair[1]);
        grad_left += grad_hess[cur].grad;
        hess_left += grad_hess[cur].hess;
        let (lo, hi) = (column[cur], column[next]);
        if lo == hi {
            continue;
        }
        let grad_right = grad_total - grad_left;
        let hess_right = hess_total - hess_left;
        if hess_left < params.min_child_hessian || hess_right < params.min_child_hessian {
            continue;
        }
        let gain = split_gain(
            grad_left,
            hess_left,
            grad_right,
            hess_right,
            params.reg_lambda,
            params.min_split_gain,
        );
        if best.is_none_or(|b| beats(gain, b.gain)) {
            best = Some(SplitCandidate {
                feature_index,
                threshold: midpoint(lo, hi),
                gain,
            });
        }
    }
    best
}

/// Best split of the node covering `indices`, or `None` when no candidate has
/// positive gain.
pub fn find_best_split(
    features: ArrayView2<'_, f64>,
    grad_hess: &[GradHess],
    indices: &[usize],
    params: &TreeParams,
) -> Option<SplitCandidate> {
    let totals = sum_grad_hess(grad_hess, indices);
    let per_feature: Vec<Option<SplitCandidate>> = (0..features.ncols())
        .into_par_iter()
        .map(|j| best_split_for_feature(features.column(j), j, grad_hess, indices, totals, params))
        .collect();

    let mut best: Option<SplitCandidate> = None;
    for cand in per_feature.into_iter().flatten() {
        if best.is_none_or(|b| beats(cand.gain, b.gain)) {
            best = Some(cand);
        }
    }
    best.filter(|b| b.gain > 0.0)
}

enum Slot {
    Pending,
    Leaf(f64),
    Split {
        feature_index: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Grows one tree on the given gradients. Leaf weights include the shrinkage
/// factor `params.learning_rate`.
pub fn grow_tree(
    features: ArrayView2<'_, f64>,
    grad_hess: &[GradHess],
    params: &TreeParams,
) -> TreeNode {
    let mut slots = vec![Slot::Pending];
    let mut frontier: Vec<(usize, Vec<usize>)> = vec![(0, (0..features.nrows()).collect())];

    for depth in 0..=params.max_depth {
        let mut next = Vec::new();
        for (slot, indices) in frontier {
            let split = if depth < params.max_depth {
                find_best_split(features, grad_hess, &indices, params)
            } else {
                None
            };
            match split {
                Some(cand) => {
                    let column = features.column(cand.feature_index);
                    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                        .iter()
                        .copied()
                        .partition(|&i| column[i] <= cand.threshold);
                    let left = slots.len();
                    slots.push(Slot::Pending);
                    slots.push(Slot::Pending);
                    slots[slot] = Slot::Split {
                        feature_index: cand.feature_index,
                        threshold: cand.threshold,
                        left,
                        right: left + 1,
                    };
                    next.push((left, left_idx));
                    next.push((left + 1, right_idx));
                }
                None => {
                    let (g, h) = sum_grad_hess(grad_hess, &indices);
                    slots[slot] =
                        Slot::Leaf(leaf_weight(g, h, params.reg_lambda) * params.learning_rate);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    assemble(&slots, 0)
}

fn assemble(slots: &[Slot], at: usize) -> TreeNode {
    match slots[at] {
        Slot::Leaf(w) => TreeNode::leaf(w),
        Slot::Split {
            feature_index,
            threshold,
            left,
            right,
        } => TreeNode::Split {
            feature_index,
            threshold,
            left: Box::new(assemble(slots, left)),
            right: Box::new(assemble(slots, right)),
        },
        Slot::Pending => unreachable!("every slot is resolved by the last level"),
    }
}
