//! Discriminator accuracy, empirical 1-Wasserstein distance, Fréchet distance.

use alloc::vec;
use alloc::vec::Vec;

use crate::assignment;
use crate::data::Pool;
use crate::linalg::{from_eigen, symmetric_eigen};
use crate::nn::{DiscriminatorNet, GeneratorNet};
use crate::rng::{sample_standard_normal, RngStream};
use crate::{Error, Matrix, Result};

/// Tolerance below zero tolerated on covariance eigenvalues before clamping.
pub const PSD_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricRecord {
    pub epoch: usize,
    pub accuracy: f64,
    /// Absent on rows skipped by [`MetricsConfig::w1_every`].
    pub w1: Option<f64>,
    pub fid: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsConfig {
    /// Points per side in the W1 estimate (`min(n, w1_points)`).
    pub w1_points: usize,
    /// W1 is computed on every `w1_every`-th trace row and always on the
    /// last one; 0 means the last row only.
    pub w1_every: usize,
}

impl MetricsConfig {
    /// Whether trace row `index` (1-based) gets a W1 value.
    pub fn w1_due(&self, index: usize, last: bool) -> bool {
        last || (self.w1_every > 0 && index.is_multiple_of(self.w1_every))
    }
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            w1_points: 512,
            w1_every: 1,
        }
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of `test` whose class-head argmax equals the true class.
pub fn classification_accuracy(d: &DiscriminatorNet, test: &Pool) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Argument("accuracy needs test samples"));
    }
    let (_, probs) = d.predict(&test.x)?;
    let hits = probs
        .iter_rows()
        .zip(&test.classes)
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    Ok(hits as f64 / test.len() as f64)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Exact 1-Wasserstein distance between two uniform empirical measures of
/// equal size under the Euclidean ground metric.
pub fn wasserstein1(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::Argument("wasserstein1 needs non-empty samples"));
    }
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op: "wasserstein1",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let n = a.rows();
    let mut cost = Matrix::zeros(n, n);
    for i in 0..n {
        let ai = a.row(i);
        for (j, c) in cost.row_mut(i).iter_mut().enumerate() {
            *c = euclidean(ai, b.row(j));
        }
    }
    let matching = assignment::solve(&cost)?;
    // Summing in sorted order makes the result independent of argument order.
    let mut matched: Vec<f64> = matching
        .row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost.get(i, j))
        .collect();
    matched.sort_by(f64::total_cmp);
    Ok(matched.iter().sum::<f64>() / n as f64)
}

/// Subsamples both sides uniformly to `min(|a|, |b|, max_points)` points and
/// returns their exact W1.
pub fn wasserstein1_subsampled(a: &Matrix, b: &Matrix, max_points: usize, rng: &mut RngStream) -> Result<f64> {
    let n = a.rows().min(b.rows()).min(max_points);
    if n == 0 {
        return Err(Error::Argument("wasserstein1 needs non-empty samples"));
    }
    let pick = |m: &Matrix, rng: &mut RngStream| {
        if m.rows() == n {
            m.clone()
        } else {
            m.select_rows(&rng.sample_distinct(m.rows(), n))
        }
    };
    let sa = pick(a, rng);
    let sb = pick(b, rng);
    wasserstein1(&sa, &sb)
}

/// W1 between `min(|reference|, points)` generated samples and as many
/// reference points.
pub fn generator_w1(g: &GeneratorNet, reference: &Matrix, points: usize, rng: &mut RngStream) -> Result<f64> {
    let n = reference.rows().min(points);
    if n == 0 {
        return Err(Error::Argument("wasserstein1 needs non-empty samples"));
    }
    let z = sample_standard_normal(rng, n, g.latent_dim());
    let fake = g.generate(&z)?;
    wasserstein1_subsampled(&fake, reference, n, rng)
}

/// Symmetrises, checks PSD up to [`PSD_TOLERANCE`], and returns the
/// eigen-decomposition with negative eigenvalues clamped to zero.
fn psd_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let (mut vals, vecs) = symmetric_eigen(m)?;
    for v in &mut vals {
        if *v < -PSD_TOLERANCE {
            return Err(Error::Argument("covariance is not positive semidefinite"));
        }
        *v = v.max(0.0);
    }
    Ok((vals, vecs))
}

/// `‖μ_P − μ_Q‖² + Tr(Σ_P + Σ_Q − 2 (Σ_P Σ_Q)^{1/2})`.
///
/// The trace of the product square root is taken from the eigenvalues of
/// the symmetric form `Σ_P^{1/2} Σ_Q Σ_P^{1/2}`, which shares them.
pub fn frechet_distance(mu_p: &[f64], cov_p: &Matrix, mu_q: &[f64], cov_q: &Matrix) -> Result<f64> {
    let d = mu_p.len();
    if mu_q.len() != d || cov_p.shape() != (d, d) || cov_q.shape() != (d, d) {
        return Err(Error::Shape {
            op: "frechet_distance",
            left: cov_p.shape(),
            right: cov_q.shape(),
        });
    }
    let cov_p = cov_p.symmetrized()?;
    let cov_q = cov_q.symmetrized()?;
    let (vals_p, vecs_p) = psd_eigen(&cov_p)?;
    psd_eigen(&cov_q)?;
    let sqrt_p = from_eigen(&vals_p, &vecs_p, libm::sqrt);
    let middle = sqrt_p.matmul(&cov_q)?.matmul(&sqrt_p)?;
    let (vals_m, _) = symmetric_eigen(&middle)?;
    let tr_sqrt: f64 = vals_m.iter().map(|&l| libm::sqrt(l.max(0.0))).sum();
    let mean_term: f64 = mu_p.iter().zip(mu_q).map(|(a, b)| (a - b) * (a - b)).sum();
    let value = mean_term + cov_p.trace() + cov_q.trace() - 2.0 * tr_sqrt;
    // Rounding can leave a tiny negative residue for identical inputs.
    Ok(value.max(0.0))
}

/// Sample mean and unbiased covariance (one-pass co-moment updates).
pub fn fit_gaussian_summary(samples: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let (n, d) = samples.shape();
    if n < 2 {
        return Err(Error::Argument("a Gaussian summary needs at least two samples"));
    }
    let mut mean = vec![0.0; d];
    let mut comoment = Matrix::zeros(d, d);
    let mut delta = vec![0.0; d];
    for (k, row) in samples.iter_rows().enumerate() {
        let count = (k + 1) as f64;
        for j in 0..d {
            delta[j] = row[j] - mean[j];
            mean[j] += delta[j] / count;
        }
        for i in 0..d {
            for j in 0..d {
                let c = comoment.get(i, j) + delta[i] * (row[j] - mean[j]);
                comoment.set(i, j, c);
            }
        }
    }
    let cov = comoment.scale(1.0 / (n as f64 - 1.0))?.symmetrized()?;
    Ok((mean, cov))
}

/// Accuracy of `d`, W1 of `g`, and the Fréchet distance between Gaussian
/// fits of generated and test points, using the data coordinates as
/// features.
pub fn evaluate_networks(
    g: &GeneratorNet,
    d: &DiscriminatorNet,
    test: &Pool,
    epoch: usize,
    config: &MetricsConfig,
    rng: &mut RngStream,
) -> Result<MetricRecord> {
    let accuracy = classification_accuracy(d, test)?;
    let w1 = generator_w1(g, &test.x, config.w1_points, rng)?;
    let z = sample_standard_normal(rng, test.len().max(2), g.latent_dim());
    let fake = g.generate(&z)?;
    let (mu_f, cov_f) = fit_gaussian_summary(&fake)?;
    let (mu_t, cov_t) = fit_gaussian_summary(&test.x)?;
    let fid = frechet_distance(&mu_t, &cov_t, &mu_f, &cov_f)?;
    Ok(MetricRecord {
        epoch,
        accuracy,
        w1: Some(w1),
        fid: Some(fid),
    })
}
