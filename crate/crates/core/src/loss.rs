//! Per-instance loss kernels.
//!
//! Every kernel works in raw-score space: the booster holds a logit `z` per
//! instance and the kernels return the loss together with its first and
//! second derivatives with respect to `z`. The probability `y_hat = sigmoid(z)`
//! is clamped to `[PROB_EPS, 1 - PROB_EPS]` before any logarithm is taken.
//!
//! Three kernels are provided:
//!
//! * [`Plain`]: ordinary binary cross-entropy.
//! * [`Weighted`]: cross-entropy with the positive-label term scaled by `alpha`.
//! * [`Focal`]: focal loss with focusing exponent `gamma`.
//!
//! [`LossParams`] is the serializable selector used by configurations and
//! model files; it dispatches to the kernels above.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp for predicted probabilities; the upper clamp is `1 - PROB_EPS`.
pub const PROB_EPS: f64 = 1e-15;

/// A binary class label. The positive class is label 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    #[inline]
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Negative => 0.0,
            Label::Positive => 1.0,
        }
    }

    /// `(-1)^y`.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => 1.0,
            Label::Positive => -1.0,
        }
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    #[inline]
    pub fn flipped(self) -> Label {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

impl From<bool> for Label {
    fn from(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

impl From<Label> for u8 {
    fn from(label: Label) -> u8 {
        match label {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            0 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(Error::InvalidInput(format!(
                "label must be 0 or 1, got {other}"
            ))),
        }
    }
}

/// First and second derivative of a per-instance loss with respect to the raw score.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GradHess {
    pub grad: f64,
    pub hess: f64,
}

/// Logistic function clamped to `[PROB_EPS, 1 - PROB_EPS]`.
///
/// Fails on non-finite input.
pub fn sigmoid(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::InvalidInput(format!(
            "raw score must be finite, got {z}"
        )));
    }
    Ok(sigmoid_clamped(z))
}

/// Unchecked variant of [`sigmoid`]; NaN maps to NaN.
#[inline]
pub fn sigmoid_clamped(z: f64) -> f64 {
    clamp_probability(1.0 / (1.0 + (-z).exp()))
}

#[inline]
pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Shorthand quantities shared by the focal-loss derivatives.
///
/// `eta2` and `eta5` are the same expression, `y + (-1)^y * y_hat`; both are
/// kept so the derivative formulas read term for term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaTerms {
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eta4: f64,
    pub eta5: f64,
}

impl EtaTerms {
    pub fn new(y: Label, y_hat: f64) -> Self {
        let p = clamp_probability(y_hat);
        let yf = y.as_f64();
        let s = y.sign();
        let eta2 = yf + s * p;
        EtaTerms {
            eta1: p * (1.0 - p),
            eta2,
            eta3: p + yf - 1.0,
            eta4: 1.0 - yf - s * p,
            eta5: eta2,
        }
    }
}

/// A per-instance loss evaluated at a (clamped) probability.
pub trait LossKernel {
    fn loss(&self, y: Label, y_hat: f64) -> f64;
    fn grad_hess(&self, y: Label, y_hat: f64) -> GradHess;
}

/// Ordinary binary cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Plain;

/// Cross-entropy with the positive-label term scaled by `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weighted {
    pub alpha: f64,
}

/// Focal loss with focusing exponent `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Focal {
    pub gamma: f64,
}

impl LossKernel for Plain {
    fn loss(&self, y: Label, y_hat: f64) -> f64 {
        let p = clamp_probability(y_hat);
        match y {
            Label::Positive => -p.ln(),
            Label::Negative => -(1.0 - p).ln(),
        }
    }

    fn grad_hess(&self, y: Label, y_hat: f64) -> GradHess {
        let p = clamp_probability(y_hat);
        GradHess {
            grad: p - y.as_f64(),
            hess: (1.0 - p) * p,
        }
    }
}

impl Weighted {
    #[inline]
    fn weight(&self, y: Label) -> f64 {
        match y {
            Label::Positive => self.alpha,
            Label::Negative => 1.0,
        }
    }
}

impl LossKernel for Weighted {
    fn loss(&self, y: Label, y_hat: f64) -> f64 {
        let p = clamp_probability(y_hat);
        match y {
            Label::Positive => -(self.alpha * p.ln()),
            Label::Negative => -(1.0 - p).ln(),
        }
    }

    fn grad_hess(&self, y: Label, y_hat: f64) -> GradHess {
        let p = clamp_probability(y_hat);
        let w = self.weight(y);
        GradHess {
            grad: w * (p - y.as_f64()),
            hess: w * ((1.0 - p) * p),
        }
    }
}

impl LossKernel for Focal {
    fn loss(&self, y: Label, y_hat: f64) -> f64 {
        let p = clamp_probability(y_hat);
        let g = self.gamma;
        match y {
            Label::Positive => -((1.0 - p).powf(g) * p.ln()),
            Label::Negative => -(p.powf(g) * (1.0 - p).ln()),
        }
    }

    fn grad_hess(&self, y: Label, y_hat: f64) -> GradHess {
        let g = self.gamma;
        let s = y.sign();
        let EtaTerms {
            eta1,
            eta2,
            eta3,
            eta4,
            eta5,
        } = EtaTerms::new(y, y_hat);

        let log_eta4 = eta4.ln();
        let eta2_g = eta2.powf(g);
        // eta2 > 0 on the clamped domain, so this stays finite for gamma < 1.
        let eta2_gm1 = ((g - 1.0) * eta2.ln()).exp();

        let grad = g * eta3 * eta2_g * log_eta4 + s * eta5.powf(g + 1.0);
        let bracket = (eta2_g + g * s * eta3 * eta2_gm1) * log_eta4 - s * eta3 * eta2_g / eta4;
        let hess = eta1 * (g * bracket + (g + 1.0) * eta5.powf(g));
        GradHess { grad, hess }
    }
}

/// Serializable loss selector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossParams {
    #[default]
    Plain,
    Weighted {
        alpha: f64,
    },
    Focal {
        gamma: f64,
    },
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossParams::Plain => Ok(()),
            LossParams::Weighted { alpha } if alpha.is_finite() && alpha > 0.0 => Ok(()),
            LossParams::Weighted { alpha } => Err(Error::InvalidInput(format!(
                "weighted loss needs a finite alpha > 0, got {alpha}"
            ))),
            LossParams::Focal { gamma } if gamma.is_finite() && gamma >= 0.0 => Ok(()),
            LossParams::Focal { gamma } => Err(Error::InvalidInput(format!(
                "focal loss needs a finite gamma >= 0, got {gamma}"
            ))),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LossParams::Plain => "plain",
            LossParams::Weighted { .. } => "weighted",
            LossParams::Focal { .. } => "focal",
        }
    }
}

impl LossKernel for LossParams {
    #[inline]
    fn loss(&self, y: Label, y_hat: f64) -> f64 {
        match *self {
            LossParams::Plain => Plain.loss(y, y_hat),
            LossParams::Weighted { alpha } => Weighted { alpha }.loss(y, y_hat),
            LossParams::Focal { gamma } => Focal { gamma }.loss(y, y_hat),
        }
    }

    #[inline]
    fn grad_hess(&self, y: Label, y_hat: f64) -> GradHess {
        match *self {
            LossParams::Plain => Plain.grad_hess(y, y_hat),
            LossParams::Weighted { alpha } => Weighted { alpha }.grad_hess(y, y_hat),
            LossParams::Focal { gamma } => Focal { gamma }.grad_hess(y, y_hat),
        }
    }
}

pub fn weighted_loss_value(y: Label, y_hat: f64, alpha: f64) -> f64 {
    Weighted { alpha }.loss(y, y_hat)
}

pub fn weighted_grad_hess(y: Label, y_hat: f64, alpha: f64) -> GradHess {
    Weighted { alpha }.grad_hess(y, y_hat)
}

pub fn focal_loss_value(y: Label, y_hat: f64, gamma: f64) -> f64 {
    Focal { gamma }.loss(y, y_hat)
}

pub fn focal_grad_hess(y: Label, y_hat: f64, gamma: f64) -> GradHess {
    Focal { gamma }.grad_hess(y, y_hat)
}

/// Gradient and hessian for every instance, evaluated at `sigmoid(raw_scores[i])`.
pub fn batch_grad_hess(
    labels: &[Label],
    raw_scores: &[f64],
    params: &LossParams,
) -> Result<Vec<GradHess>> {
    if labels.len() != raw_scores.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: raw_scores.len(),
        });
    }
    params.validate()?;
    labels
        .par_iter()
        .zip(raw_scores.par_iter())
        .map(|(&y, &z)| Ok(params.grad_hess(y, sigmoid(z)?)))
        .collect()
}

/// Mean per-instance loss at the given raw scores.
pub fn mean_loss(labels: &[Label], raw_scores: &[f64], params: &LossParams) -> Result<f64> {
    if labels.len() != raw_scores.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: raw_scores.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("mean loss of an empty set".into()));
    }
    let mut total = 0.0;
    for (&y, &z) in labels.iter().zip(raw_scores) {
        total += params.loss(y, sigmoid(z)?);
    }
    Ok(total / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use Label::{Negative, Positive};

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0).unwrap(), 0.5);
        assert_eq!(sigmoid(1000.0).unwrap(), 1.0 - PROB_EPS);
        assert_eq!(sigmoid(-1000.0).unwrap(), PROB_EPS);
        assert_abs_diff_eq!(sigmoid(4f64.ln()).unwrap(), 0.8, epsilon = 1e-15);
        assert!(sigmoid(f64::NAN).is_err());
        assert!(sigmoid(f64::INFINITY).is_err());
    }

    #[test]
    fn weighted_examples() {
        let ln2 = 2f64.ln();
        assert_abs_diff_eq!(
            weighted_loss_value(Positive, 0.5, 1.0),
            ln2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            weighted_loss_value(Negative, 0.5, 5.0),
            ln2,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            weighted_loss_value(Positive, 0.8, 2.0),
            0.446287102628,
            epsilon = 1e-11
        );

        let gh = weighted_grad_hess(Positive, 0.5, 1.0);
        assert_eq!((gh.grad, gh.hess), (-0.5, 0.25));
        let gh = weighted_grad_hess(Negative, 0.5, 3.0);
        assert_eq!((gh.grad, gh.hess), (0.5, 0.25));
        let gh = weighted_grad_hess(Positive, 0.8, 2.0);
        assert_abs_diff_eq!(gh.grad, -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.hess, 0.32, epsilon = 1e-12);
    }

    #[test]
    fn focal_examples() {
        assert_abs_diff_eq!(
            focal_loss_value(Positive, 0.5, 0.0),
            2f64.ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            focal_loss_value(Positive, 0.8, 2.0),
            0.00892574205257,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            focal_loss_value(Negative, 0.2, 2.0),
            0.00892574205257,
            epsilon = 1e-12
        );

        let gh = focal_grad_hess(Positive, 0.7, 0.0);
        assert_abs_diff_eq!(gh.grad, -0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(gh.hess, 0.21, epsilon = 1e-15);

        // Frozen from a 40-digit numerical differentiation of the focal loss in z.
        let gh = focal_grad_hess(Positive, 0.8, 2.0);
        assert_abs_diff_eq!(gh.grad, -0.0222811872841, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.hess, 0.0519936621978, epsilon = 1e-12);
        let gh = focal_grad_hess(Negative, 0.2, 2.0);
        assert_abs_diff_eq!(gh.grad, 0.0222811872841, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.hess, 0.0519936621978, epsilon = 1e-12);
    }

    #[test]
    fn eta_terms() {
        for &y in &[Negative, Positive] {
            for &p in &[PROB_EPS, 0.1, 0.5, 0.9, 1.0 - PROB_EPS] {
                let eta = EtaTerms::new(y, p);
                assert_eq!(eta.eta2, eta.eta5);
                assert!(eta.eta1 > 0.0 && eta.eta1 <= 0.25);
                assert!(eta.eta2 > 0.0 && eta.eta2 < 1.0);
                assert!(eta.eta4 > 0.0 && eta.eta4 < 1.0);
            }
        }
    }

    #[test]
    fn finite_at_clamp_boundaries() {
        for &y in &[Negative, Positive] {
            for &p in &[0.0, PROB_EPS, 1e-9, 0.5, 1.0 - 1e-9, 1.0 - PROB_EPS, 1.0] {
                for &gamma in &[0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 4.0] {
                    let gh = focal_grad_hess(y, p, gamma);
                    assert!(
                        gh.grad.is_finite() && gh.hess.is_finite(),
                        "{y:?} {p} {gamma}"
                    );
                    assert!(focal_loss_value(y, p, gamma).is_finite());
                }
                let gh = weighted_grad_hess(y, p, 5.0);
                assert!(gh.hess > 0.0);
            }
        }
    }

    #[test]
    fn batch_matches_scalar_calls() {
        assert!(batch_grad_hess(&[], &[], &LossParams::Plain)
            .unwrap()
            .is_empty());
        let out = batch_grad_hess(&[Positive, Negative], &[0.0, 0.0], &LossParams::Plain).unwrap();
        assert_eq!(
            out[0],
            GradHess {
                grad: -0.5,
                hess: 0.25
            }
        );
        assert_eq!(
            out[1],
            GradHess {
                grad: 0.5,
                hess: 0.25
            }
        );
        assert!(matches!(
            batch_grad_hess(&[Positive], &[0.0, 1.0], &LossParams::Plain),
            Err(Error::Dimension { .. })
        ));
        assert!(
            batch_grad_hess(&[Positive], &[0.0], &LossParams::Weighted { alpha: 0.0 }).is_err()
        );
    }

    #[test]
    fn params_serde_shape() {
        let json = serde_json::to_string(&LossParams::Focal { gamma: 2.0 }).unwrap();
        assert_eq!(json, r#"{"kind":"focal","gamma":2.0}"#);
        let back: LossParams = serde_json::from_str(r#"{"kind":"weighted","alpha":0.4}"#).unwrap();
        assert_eq!(back, LossParams::Weighted { alpha: 0.4 });
    }
}
