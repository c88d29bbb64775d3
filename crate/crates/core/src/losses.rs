//! Cross-entropy SSL-GAN objectives with `φ(y) = -ln y`.
//!
//! Expectations are batch means. Probabilities are clamped to
//! `[PROB_EPS, 1 - PROB_EPS]` before any logarithm; gradients are taken at
//! the clamped value.

use alloc::vec::Vec;

use crate::{Error, Matrix, Result};

pub const PROB_EPS: f64 = 1e-7;

#[inline]
fn clamp(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossReport {
    pub l_g: f64,
    pub l_d_sup: f64,
    pub l_d_unsup: f64,
    pub l_d_total: f64,
}

impl LossReport {
    pub fn new(l_g: f64, l_d_sup: f64, l_d_unsup: f64) -> Self {
        Self {
            l_g,
            l_d_sup,
            l_d_unsup,
            l_d_total: discriminator_total_loss(l_d_sup, l_d_unsup),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l_g.is_finite() && self.l_d_sup.is_finite() && self.l_d_unsup.is_finite() && self.l_d_total.is_finite()
    }

    /// Component-wise mean; the total is re-derived from the mean parts.
    pub fn mean(reports: &[LossReport]) -> Option<LossReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let sum = |f: fn(&LossReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(LossReport::new(sum(|r| r.l_g), sum(|r| r.l_d_sup), sum(|r| r.l_d_unsup)))
    }
}

/// `mean(-ln D_real(G(z)))` and its gradient w.r.t. each probability.
pub fn generator_loss(real_probs_on_fake: &[f64]) -> Result<(f64, Vec<f64>)> {
    if real_probs_on_fake.is_empty() {
        return Err(Error::Argument("generator loss needs a non-empty batch"));
    }
    let n = real_probs_on_fake.len() as f64;
    let mut loss = 0.0;
    let grad = real_probs_on_fake
        .iter()
        .map(|&p| {
            let p = clamp(p);
            loss -= libm::log(p);
            -1.0 / (n * p)
        })
        .collect();
    Ok((loss / n, grad))
}

/// Unsupervised discriminator loss
/// `mean(-ln(1 - D_real(G(z)))) + mean(-ln D_real(x_unlabeled))`, with
/// gradients w.r.t. the fake and the unlabeled probabilities.
pub fn discriminator_unsupervised_loss(
    real_probs_on_fake: &[f64],
    real_probs_on_unlabeled: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if real_probs_on_fake.is_empty() || real_probs_on_unlabeled.is_empty() {
        return Err(Error::Argument("unsupervised loss needs fake and unlabeled samples"));
    }
    let nf = real_probs_on_fake.len() as f64;
    let mut fake_loss = 0.0;
    let d_fake = real_probs_on_fake
        .iter()
        .map(|&p| {
            let q = clamp(1.0 - p);
            fake_loss -= libm::log(q);
            1.0 / (nf * q)
        })
        .collect();
    let (real_loss, d_real) = generator_loss(real_probs_on_unlabeled)?;
    Ok((fake_loss / nf + real_loss, d_fake, d_real))
}

/// `mean(-ln p_true)` over labelled rows and its gradient w.r.t. `class_probs`.
pub fn discriminator_supervised_loss(class_probs: &Matrix, labels_onehot: &Matrix) -> Result<(f64, Matrix)> {
    if class_probs.shape() != labels_onehot.shape() {
        return Err(Error::Shape {
            op: "supervised_loss",
            left: class_probs.shape(),
            right: labels_onehot.shape(),
        });
    }
    if class_probs.rows() == 0 {
        return Err(Error::Argument("supervised loss needs labelled samples"));
    }
    let n = class_probs.rows() as f64;
    let mut grad = Matrix::zeros(class_probs.rows(), class_probs.cols());
    let mut loss = 0.0;
    for r in 0..class_probs.rows() {
        let label = onehot_index(labels_onehot.row(r)).ok_or(Error::Argument("label row is not one-hot"))?;
        let p = clamp(class_probs.get(r, label));
        loss -= libm::log(p);
        grad.set(r, label, -1.0 / (n * p));
    }
    Ok((loss / n, grad))
}

/// Position of the single 1 in an exact one-hot row.
pub fn onehot_index(row: &[f64]) -> Option<usize> {
    let mut hit = None;
    for (i, &v) in row.iter().enumerate() {
        if v == 1.0 {
            if hit.is_some() {
                return None;
            }
            hit = Some(i);
        } else if v != 0.0 {
            return None;
        }
    }
    hit
}

#[inline]
pub fn discriminator_total_loss(sup: f64, unsup: f64) -> f64 {
    sup + unsup
}
