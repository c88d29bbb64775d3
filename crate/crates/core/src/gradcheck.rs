//! Central finite-difference checks of the analytic loss gradients.
//!
//! The numeric side only runs forward passes ([`evaluate_on`]), so it shares
//! no code with back-propagation.

use alloc::vec::Vec;

use crate::losses::LossReport;
use crate::nn::{DiscriminatorNet, GeneratorNet, NetworkParams};
use crate::sslgan::{discriminator_gradients, evaluate_on, generator_gradients, DiscriminatorTerms, EvalBatch};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `L_G` w.r.t. generator parameters.
    Generator,
    /// `L_D^sup` w.r.t. discriminator parameters.
    Supervised,
    /// `L_D^unsup` w.r.t. discriminator parameters.
    Unsupervised,
    /// `L_D` w.r.t. discriminator parameters.
    Discriminator,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::Generator,
        Objective::Supervised,
        Objective::Unsupervised,
        Objective::Discriminator,
    ];

    fn pick(self, r: &LossReport) -> f64 {
        match self {
            Objective::Generator => r.l_g,
            Objective::Supervised => r.l_d_sup,
            Objective::Unsupervised => r.l_d_unsup,
            Objective::Discriminator => r.l_d_total,
        }
    }

    fn terms(self) -> DiscriminatorTerms {
        match self {
            Objective::Supervised => DiscriminatorTerms::Supervised,
            Objective::Unsupervised => DiscriminatorTerms::Unsupervised,
            _ => DiscriminatorTerms::Total,
        }
    }

    /// Parameter count of the network this objective differentiates.
    pub fn param_count(self, g: &GeneratorNet, d: &DiscriminatorNet) -> usize {
        match self {
            Objective::Generator => g.params.param_count(),
            _ => d.params.param_count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub objective: Objective,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl Probe {
    /// `|a − n| / max(|a|, |n|, floor)`.
    pub fn relative_error(&self, floor: f64) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(floor);
        (self.analytic - self.numeric).abs() / scale
    }
}

fn loss(objective: Objective, g: &GeneratorNet, d: &DiscriminatorNet, batch: &EvalBatch) -> Result<f64> {
    let r = evaluate_on(g, d, core::slice::from_ref(batch))?;
    Ok(objective.pick(&r))
}

/// Compares analytic and central-difference derivatives at the given flat
/// parameter indices.
pub fn check(
    objective: Objective,
    g: &GeneratorNet,
    d: &DiscriminatorNet,
    batch: &EvalBatch,
    indices: &[usize],
    h: f64,
) -> Result<Vec<Probe>> {
    let grads = match objective {
        Objective::Generator => generator_gradients(g, d, &batch.z)?.1,
        _ => {
            let fake = g.generate(&batch.z)?;
            discriminator_gradients(d, &fake, &batch.unlabeled, &batch.labeled, &batch.labeled_onehot, objective.terms())?.1
        }
    };
    let shifted = |index: usize, delta: f64| -> Result<f64> {
        let nudge = |p: &mut NetworkParams| p.set_param(index, p.param(index) + delta);
        match objective {
            Objective::Generator => {
                let mut g2 = g.clone();
                nudge(&mut g2.params);
                loss(objective, &g2, d, batch)
            }
            _ => {
                let mut d2 = d.clone();
                nudge(&mut d2.params);
                loss(objective, g, &d2, batch)
            }
        }
    };
    indices
        .iter()
        .map(|&index| {
            let numeric = (shifted(index, h)? - shifted(index, -h)?) / (2.0 * h);
            Ok(Probe {
                objective,
                index,
                analytic: grads.flat(index),
                numeric,
            })
        })
        .collect()
}
