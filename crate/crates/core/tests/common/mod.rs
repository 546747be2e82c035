//! Seeded fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use imboost::{ConfusionCounts, Dataset, Label};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FIXTURE_SEED: u64 = 20_190_826;

/// 200 x 5, labels from a fixed linear rule plus uniform noise.
pub fn linear_fixture() -> Dataset {
    linear_dataset(200, FIXTURE_SEED)
}

pub fn linear_dataset(m: usize, seed: u64) -> Dataset {
    let w = [1.0, -2.0, 0.5, 1.5, -1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((m, 5));
    let mut y = Vec::with_capacity(m);
    for i in 0..m {
        let mut s = 0.0;
        for j in 0..5 {
            let v: f64 = rng.gen_range(-1.0..1.0);
            x[[i, j]] = v;
            s += w[j] * v;
        }
        let noise: f64 = rng.gen_range(-0.3..0.3);
        y.push(Label::from(s + noise > 0.0));
    }
    Dataset::new(x, y).unwrap()
}

/// The linear fixture's first `groups * 3` rows, three records per subject.
pub fn grouped_fixture(groups: usize) -> Dataset {
    let d = linear_dataset(groups * 3, FIXTURE_SEED + 1);
    let ids = (0..groups * 3).map(|i| format!("s{:02}", i / 3)).collect();
    Dataset::with_groups(d.features().to_owned(), d.labels().to_vec(), Some(ids)).unwrap()
}

/// 9:1 imbalanced, minority = label 1, overlapping classes.
pub fn imbalanced_fixture(m: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives = m / 10;
    let mut x = Array2::zeros((m, 5));
    let mut y = Vec::with_capacity(m);
    for i in 0..m {
        let positive = i % 10 == 9;
        for j in 0..5 {
            let shift = if positive && j < 2 { 0.6 } else { 0.0 };
            x[[i, j]] = rng.gen_range(-1.0..1.0) + shift;
        }
        y.push(Label::from(positive));
    }
    assert_eq!(y.iter().filter(|l| l.is_positive()).count(), positives);
    Dataset::new(x, y).unwrap()
}

// ---------------------------------------------------------------------------
// Loss oracles, written from the loss definitions only.

pub fn oracle_sigmoid(z: f64) -> f64 {
    (1.0 / (1.0 + (-z).exp())).clamp(1e-15, 1.0 - 1e-15)
}

#[derive(Clone, Copy, Debug)]
pub enum OracleLoss {
    Plain,
    Weighted(f64),
    Focal(f64),
}

impl OracleLoss {
    pub fn value(self, y: f64, z: f64) -> f64 {
        let p = oracle_sigmoid(z);
        match self {
            OracleLoss::Plain => -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()),
            OracleLoss::Weighted(a) => -(a * y * p.ln() + (1.0 - y) * (1.0 - p).ln()),
            OracleLoss::Focal(g) => {
                -(y * (1.0 - p).powf(g) * p.ln() + (1.0 - y) * p.powf(g) * (1.0 - p).ln())
            }
        }
    }

    pub fn params(self) -> imboost::LossParams {
        match self {
            OracleLoss::Plain => imboost::LossParams::Plain,
            OracleLoss::Weighted(alpha) => imboost::LossParams::Weighted { alpha },
            OracleLoss::Focal(gamma) => imboost::LossParams::Focal { gamma },
        }
    }
}

pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

// ---------------------------------------------------------------------------
// Split oracle: enumerate every candidate, sums taken in instance order.

pub struct OracleSplit {
    pub feature_index: usize,
    pub threshold: f64,
    pub gain: f64,
}

pub fn oracle_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, min_gain: f64) -> f64 {
    let term = |g: f64, h: f64| {
        if h + lambda < 1e-16 {
            0.0
        } else {
            g * g / (h + lambda)
        }
    };
    0.5 * (term(gl, hl) + term(gr, hr) - term(gl + gr, hl + hr)) - min_gain
}

pub fn oracle_midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// All candidates (feature, threshold, gain) passing the child-hessian rule.
pub fn enumerate_splits(
    x: &Array2<f64>,
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    lambda: f64,
    min_gain: f64,
    min_child_hessian: f64,
) -> Vec<OracleSplit> {
    let mut out = Vec::new();
    for j in 0..x.ncols() {
        let mut values: Vec<f64> = rows.iter().map(|&i| x[[i, j]]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = oracle_midpoint(w[0], w[1]);
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for &i in rows {
                if x[[i, j]] <= t {
                    gl += grad[i];
                    hl += hess[i];
                } else {
                    gr += grad[i];
                    hr += hess[i];
                }
            }
            if hl < min_child_hessian || hr < min_child_hessian {
                continue;
            }
            out.push(OracleSplit {
                feature_index: j,
                threshold: t,
                gain: oracle_gain(gl, hl, gr, hr, lambda, min_gain),
            });
        }
    }
    out
}

/// The maximum-gain candidate; near-equal gains go to the lowest
/// (feature, threshold). `None` if no candidate has positive gain.
pub fn oracle_best_split(candidates: &[OracleSplit]) -> Option<(usize, f64)> {
    let max = candidates
        .iter()
        .map(|c| c.gain)
        .fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return None;
    }
    let tol = 1e-12 * max.abs();
    candidates
        .iter()
        .filter(|c| c.gain >= max - tol)
        .map(|c| (c.feature_index, c.threshold))
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
}

// ---------------------------------------------------------------------------
// Metric oracle: materialize the instances and compute from first principles.

pub fn materialize(c: &ConfusionCounts) -> (Vec<u8>, Vec<u8>) {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (n, t, p) in [(c.tp, 1, 1), (c.fp, 0, 1), (c.tn, 0, 0), (c.fn_, 1, 0)] {
        for _ in 0..n {
            truth.push(t);
            pred.push(p);
        }
    }
    (truth, pred)
}

pub struct BruteMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
}

pub fn brute_metrics(truth: &[u8], pred: &[u8]) -> BruteMetrics {
    let n = truth.len() as f64;
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64;
    let predicted_pos: Vec<usize> = (0..truth.len()).filter(|&i| pred[i] == 1).collect();
    let actual_pos: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == 1).collect();
    let hits_p = predicted_pos.iter().filter(|&&i| truth[i] == 1).count() as f64;
    let hits_r = actual_pos.iter().filter(|&&i| pred[i] == 1).count() as f64;
    let precision = if predicted_pos.is_empty() {
        0.0
    } else {
        hits_p / predicted_pos.len() as f64
    };
    let recall = if actual_pos.is_empty() {
        0.0
    } else {
        hits_r / actual_pos.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };

    // Pearson correlation of the two 0/1 vectors.
    let mt = truth.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mp = pred.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut cov, mut vt, mut vp) = (0.0, 0.0, 0.0);
    for (&t, &p) in truth.iter().zip(pred) {
        let (dt, dp) = (t as f64 - mt, p as f64 - mp);
        cov += dt * dp;
        vt += dt * dt;
        vp += dp * dp;
    }
    let mcc = if vt == 0.0 || vp == 0.0 {
        0.0
    } else {
        cov / (vt * vp).sqrt()
    };
    BruteMetrics {
        accuracy: correct / n,
        precision,
        recall,
        f1,
        mcc,
    }
}
