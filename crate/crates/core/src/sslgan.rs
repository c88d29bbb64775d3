//! Single generator/discriminator SSL-GAN training.
//!
//! Each step draws fresh latent noise for the discriminator update and again
//! for the generator update; the discriminator sees the whole labelled set
//! (or a cycled slice of it when it exceeds the batch size) next to every
//! unlabelled batch. An epoch is one shuffled pass over the unlabelled pool.

use alloc::vec::Vec;

use crate::data::{BatchIterator, LabeledCycler, Pool, SslDataset};
use crate::losses::{
    discriminator_supervised_loss, discriminator_unsupervised_loss, generator_loss, LossReport,
};
use crate::coevo::{initial_discriminator, initial_generator, metrics_stream, train_stream};
use crate::metrics::{classification_accuracy, generator_w1, MetricsConfig};
use crate::nn::{AdamConfig, Architecture, DiscriminatorNet, Gradients, GeneratorNet};
use crate::rng::{sample_standard_normal, RngStream};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainBudget {
    pub epochs: usize,
    pub batch_size: usize,
}

impl TrainBudget {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Argument("at least one training epoch is required"));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be at least one"));
        }
        Ok(())
    }
}

/// Snapshot handed to the per-epoch observer of [`train_pair_with`].
pub struct EpochEnd<'a> {
    /// 1-based.
    pub epoch: usize,
    pub report: LossReport,
    pub generator: &'a GeneratorNet,
    pub discriminator: &'a DiscriminatorNet,
}

fn check_compatible(g: &GeneratorNet, d: &DiscriminatorNet, data: &SslDataset) -> Result<()> {
    if g.output_dim() != data.dim() || d.input_dim() != data.dim() {
        return Err(Error::Argument("network widths do not match the data dimension"));
    }
    if d.classes() != data.classes {
        return Err(Error::Argument("class head width differs from the number of classes"));
    }
    if data.labeled.is_empty() {
        return Err(Error::Argument("training needs labelled samples"));
    }
    if data.unlabeled.is_empty() {
        return Err(Error::Argument("training needs unlabelled samples"));
    }
    Ok(())
}

fn labeled_batch(data: &SslDataset, pick: Option<Vec<usize>>) -> (Matrix, Matrix) {
    match pick {
        None => (data.labeled_x().clone(), data.labeled_onehot().clone()),
        Some(rows) => (data.labeled_x().select_rows(&rows), data.labeled_onehot().select_rows(&rows)),
    }
}

/// Which terms of the discriminator objective to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscriminatorTerms {
    Supervised,
    Unsupervised,
    Total,
}

/// Discriminator losses on one batch and the parameter gradient of the
/// selected terms. Returns `(report_without_l_g, grads)`; `l_g` is the
/// generator loss on `fake` as seen by this discriminator.
pub fn discriminator_gradients(
    d: &DiscriminatorNet,
    fake: &Matrix,
    unlabeled: &Matrix,
    labeled: &Matrix,
    labeled_onehot: &Matrix,
    terms: DiscriminatorTerms,
) -> Result<(LossReport, Gradients)> {
    let c_lab = d.forward(labeled)?;
    let c_unl = d.forward(unlabeled)?;
    let c_fake = d.forward(fake)?;
    let (sup, d_class) = discriminator_supervised_loss(c_lab.class_probs(), labeled_onehot)?;
    let (unsup, d_fake, d_unl) = discriminator_unsupervised_loss(c_fake.real_probs(), c_unl.real_probs())?;
    let l_g = generator_loss(c_fake.real_probs())?.0;
    let mut grads = Gradients::zeros_like(&d.params);
    if terms != DiscriminatorTerms::Unsupervised {
        d.accumulate_gradients(&c_lab, None, Some(&d_class), &mut grads)?;
    }
    if terms != DiscriminatorTerms::Supervised {
        d.accumulate_gradients(&c_unl, Some(&d_unl), None, &mut grads)?;
        d.accumulate_gradients(&c_fake, Some(&d_fake), None, &mut grads)?;
    }
    Ok((LossReport::new(l_g, sup, unsup), grads))
}

/// Generator loss against a frozen discriminator and its gradient with
/// respect to the generator parameters.
pub fn generator_gradients(g: &GeneratorNet, d: &DiscriminatorNet, z: &Matrix) -> Result<(f64, Gradients)> {
    let gc = g.forward(z)?;
    let dc = d.forward(gc.output())?;
    let (loss, d_real) = generator_loss(dc.real_probs())?;
    let dx = d.input_gradient(&dc, Some(&d_real), None)?;
    Ok((loss, g.backward(&gc, &dx)?))
}

/// Discriminator update on one batch; returns `(sup, unsup)`.
fn discriminator_step(
    d: &mut DiscriminatorNet,
    fake: &Matrix,
    unlabeled: &Matrix,
    labeled: &(Matrix, Matrix),
    adam: &AdamConfig,
) -> Result<(f64, f64)> {
    let (report, grads) =
        discriminator_gradients(d, fake, unlabeled, &labeled.0, &labeled.1, DiscriminatorTerms::Total)?;
    d.params.apply_adam(&grads, adam)?;
    Ok((report.l_d_sup, report.l_d_unsup))
}

/// Generator update against a frozen discriminator; returns the loss.
fn generator_step(g: &mut GeneratorNet, d: &DiscriminatorNet, z: &Matrix, adam: &AdamConfig) -> Result<f64> {
    let (loss, grads) = generator_gradients(g, d, z)?;
    g.params.apply_adam(&grads, adam)?;
    Ok(loss)
}

/// Trains a couple for `budget.epochs` epochs and returns the updated nets
/// with one mean [`LossReport`] per epoch.
pub fn train_pair(
    mut g: GeneratorNet,
    mut d: DiscriminatorNet,
    data: &SslDataset,
    budget: &TrainBudget,
    adam: &AdamConfig,
    rng: &mut RngStream,
) -> Result<(GeneratorNet, DiscriminatorNet, Vec<LossReport>)> {
    let trace = train_pair_with(&mut g, &mut d, data, budget, adam, rng, |_| {})?;
    Ok((g, d, trace))
}

/// In-place variant of [`train_pair`] calling `on_epoch` after every epoch.
///
/// On divergence the nets keep the last parameters whose update was finite.
pub fn train_pair_with(
    g: &mut GeneratorNet,
    d: &mut DiscriminatorNet,
    data: &SslDataset,
    budget: &TrainBudget,
    adam: &AdamConfig,
    rng: &mut RngStream,
    mut on_epoch: impl FnMut(&EpochEnd<'_>),
) -> Result<Vec<LossReport>> {
    budget.validate()?;
    adam.validate()?;
    check_compatible(g, d, data)?;
    let latent = g.latent_dim();
    let mut batches = BatchIterator::new(data.unlabeled.len(), budget.batch_size)?;
    let mut labeled = LabeledCycler::new(data.labeled.len(), budget.batch_size);
    let mut trace = Vec::with_capacity(budget.epochs);
    let mut last_finite: Option<LossReport> = None;

    for epoch in 1..=budget.epochs {
        let epoch_batches: Vec<Vec<usize>> = batches.next_epoch(rng).map(<[usize]>::to_vec).collect();
        let mut reports = Vec::with_capacity(epoch_batches.len());
        for (bi, idx) in epoch_batches.iter().enumerate() {
            let diverged = |last: Option<LossReport>| Error::TrainingDiverged {
                epoch,
                batch: bi,
                last_finite: last,
            };
            let unl = data.unlabeled_x().select_rows(idx);
            let lab = labeled_batch(data, labeled.next_batch(rng));
            let z = sample_standard_normal(rng, idx.len(), latent);
            let fake = g.generate(&z)?;
            let (sup, unsup) =
                discriminator_step(d, &fake, &unl, &lab, adam).map_err(|_| diverged(last_finite))?;
            let z = sample_standard_normal(rng, idx.len(), latent);
            let l_g = generator_step(g, d, &z, adam).map_err(|_| diverged(last_finite))?;
            let report = LossReport::new(l_g, sup, unsup);
            if !report.is_finite() {
                return Err(diverged(last_finite));
            }
            last_finite = Some(report);
            reports.push(report);
        }
        let report = LossReport::mean(&reports).expect("an epoch has at least one batch");
        on_epoch(&EpochEnd {
            epoch,
            report,
            generator: g,
            discriminator: d,
        });
        trace.push(report);
    }
    Ok(trace)
}

/// Fixed noise and data for one evaluation batch. Sharing a set of these
/// across many pairs turns fitness into a paired comparison.
#[derive(Debug, Clone)]
pub struct EvalBatch {
    pub z: Matrix,
    pub unlabeled: Matrix,
    pub labeled: Matrix,
    pub labeled_onehot: Matrix,
}

pub fn draw_eval_batches(
    data: &SslDataset,
    n_batches: usize,
    batch_size: usize,
    latent_dim: usize,
    rng: &mut RngStream,
) -> Result<Vec<EvalBatch>> {
    if n_batches == 0 || batch_size == 0 {
        return Err(Error::Argument("evaluation needs at least one non-empty batch"));
    }
    if data.unlabeled.is_empty() || data.labeled.is_empty() {
        return Err(Error::Argument("evaluation needs labelled and unlabelled samples"));
    }
    let b = batch_size.min(data.unlabeled.len());
    let mut labeled = LabeledCycler::new(data.labeled.len(), batch_size);
    Ok((0..n_batches)
        .map(|_| {
            let idx = rng.sample_distinct(data.unlabeled.len(), b);
            let unlabeled = data.unlabeled_x().select_rows(&idx);
            let (labeled, labeled_onehot) = labeled_batch(data, labeled.next_batch(rng));
            let z = sample_standard_normal(rng, b, latent_dim);
            EvalBatch {
                z,
                unlabeled,
                labeled,
                labeled_onehot,
            }
        })
        .collect())
}

/// Mean losses of a pair over prepared batches, without touching parameters.
pub fn evaluate_on(g: &GeneratorNet, d: &DiscriminatorNet, batches: &[EvalBatch]) -> Result<LossReport> {
    let mut reports = Vec::with_capacity(batches.len());
    for b in batches {
        let fake = g.generate(&b.z)?;
        let (real_fake, _) = d.predict(&fake)?;
        let (real_unl, _) = d.predict(&b.unlabeled)?;
        let (_, class_lab) = d.predict(&b.labeled)?;
        let l_g = generator_loss(&real_fake)?.0;
        let unsup = discriminator_unsupervised_loss(&real_fake, &real_unl)?.0;
        let sup = discriminator_supervised_loss(&class_lab, &b.labeled_onehot)?.0;
        reports.push(LossReport::new(l_g, sup, unsup));
    }
    LossReport::mean(&reports).ok_or(Error::Argument("evaluation needs at least one batch"))
}

/// Mean losses over `n_batches` freshly drawn batches.
pub fn evaluate_pair(
    g: &GeneratorNet,
    d: &DiscriminatorNet,
    data: &SslDataset,
    n_batches: usize,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<LossReport> {
    let batches = draw_eval_batches(data, n_batches, batch_size, g.latent_dim(), rng)?;
    evaluate_on(g, d, &batches)
}

/// Trains only the trunk and class head on a fully labelled pool with
/// cross-entropy; the resulting test accuracy is the supervised reference
/// ("ceiling") for a dataset.
pub fn train_classifier(
    d: &mut DiscriminatorNet,
    pool: &Pool,
    budget: &TrainBudget,
    adam: &AdamConfig,
    rng: &mut RngStream,
) -> Result<()> {
    budget.validate()?;
    if pool.is_empty() {
        return Err(Error::Argument("classifier training needs samples"));
    }
    let k = d.classes();
    let mut onehot = Matrix::zeros(pool.len(), k);
    for (r, &c) in pool.classes.iter().enumerate() {
        if c >= k {
            return Err(Error::Argument("class index out of range"));
        }
        onehot.set(r, c, 1.0);
    }
    let mut batches = BatchIterator::new(pool.len(), budget.batch_size)?;
    for _ in 0..budget.epochs {
        let idx: Vec<Vec<usize>> = batches.next_epoch(rng).map(<[usize]>::to_vec).collect();
        for rows in &idx {
            let x = pool.x.select_rows(rows);
            let y = onehot.select_rows(rows);
            let c = d.forward(&x)?;
            let (_, d_class) = discriminator_supervised_loss(c.class_probs(), &y)?;
            d.backward_and_step(&c, None, Some(&d_class), adam)?;
        }
    }
    Ok(())
}

/// One row of a baseline trace.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub report: LossReport,
    pub accuracy: f64,
    pub w1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub generator: GeneratorNet,
    pub discriminator: DiscriminatorNet,
    pub trace: Vec<EpochRecord>,
}

/// Single-pair SSL-GAN run for `budget.epochs` epochs, with test accuracy
/// and W1 recorded after every epoch.
///
/// Initial networks and the training stream are those of individual 0 and
/// couple 0 of a co-evolutionary run with the same seed, so the two methods
/// start from the same point.
pub fn run_sslgan(
    arch: &Architecture,
    budget: &TrainBudget,
    adam: &AdamConfig,
    metrics: &MetricsConfig,
    data: &SslDataset,
    seed: u64,
) -> Result<BaselineOutcome> {
    let mut g = initial_generator(arch, seed, 0);
    let mut d = initial_discriminator(arch, seed, 0);
    let mut rng = train_stream(seed, 1, 0);
    let mut trace = Vec::with_capacity(budget.epochs);
    let mut failure = None;
    train_pair_with(&mut g, &mut d, data, budget, adam, &mut rng, |end| {
        if failure.is_some() {
            return;
        }
        let row = (|| {
            let accuracy = classification_accuracy(end.discriminator, &data.test)?;
            let w1 = if metrics.w1_due(end.epoch, end.epoch == budget.epochs) {
                let mut mrng = metrics_stream(seed, end.epoch);
                Some(generator_w1(end.generator, &data.test.x, metrics.w1_points, &mut mrng)?)
            } else {
                None
            };
            Ok(EpochRecord {
                epoch: end.epoch,
                report: end.report,
                accuracy,
                w1,
            })
        })();
        match row {
            Ok(r) => trace.push(r),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(BaselineOutcome {
        generator: g,
        discriminator: d,
        trace,
    })
}
