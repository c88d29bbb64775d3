//! (μ+λ) competitive co-evolution of a generator and a discriminator
//! population.
//!
//! Each generation: λ tournaments per side pick parents, their clones are
//! paired at random and trained together for `n_t` epochs, the offspring
//! join their populations, everyone is re-evaluated all-vs-all on shared
//! batches, and the best μ of each side survive.
//!
//! All randomness is drawn from sub-streams of the run seed keyed by
//! `(purpose, generation, index)`, so the outcome does not depend on how many
//! workers an [`Executor`] uses.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::data::SslDataset;
use crate::losses::LossReport;
use crate::metrics::{classification_accuracy, generator_w1, MetricsConfig};
use crate::nn::{AdamConfig, Architecture, DiscriminatorNet, GeneratorNet};
use crate::rng::RngStream;
use crate::sslgan::{draw_eval_batches, evaluate_on, train_pair_with, TrainBudget};
use crate::{Error, Result};

pub const STREAM_INIT_GENERATOR: u64 = 1;
pub const STREAM_INIT_DISCRIMINATOR: u64 = 2;
pub const STREAM_EVAL: u64 = 3;
pub const STREAM_SELECT_GENERATOR: u64 = 4;
pub const STREAM_SELECT_DISCRIMINATOR: u64 = 5;
pub const STREAM_PAIR: u64 = 6;
pub const STREAM_TRAIN: u64 = 7;
pub const STREAM_METRICS: u64 = 8;

/// Runs independent jobs, possibly in parallel. Results come back in input
/// order.
pub trait Executor: Sync {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}

/// How the `τ` contestants of one tournament are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TournamentDraw {
    /// `τ` distinct members.
    #[default]
    Distinct,
    /// `τ` independent uniform draws; a member may face itself.
    Replacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoevoConfig {
    /// μ
    pub population: usize,
    /// λ
    pub offspring: usize,
    /// τ
    pub tournament: usize,
    pub tournament_draw: TournamentDraw,
    /// n_t: training epochs per couple per generation.
    pub train_epochs: usize,
    /// n_e: evaluation batches per fitness computation.
    pub eval_batches: usize,
    /// T_B: total training-epoch budget.
    pub budget: usize,
    pub batch_size: usize,
}

impl CoevoConfig {
    /// `⌊T_B / (n_t λ)⌋`.
    pub fn generations(&self) -> usize {
        self.budget / (self.train_epochs * self.offspring).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self;
        if c.offspring == 0 || c.offspring > c.population {
            return Err(Error::Argument("offspring size must satisfy 1 <= lambda <= mu"));
        }
        if c.tournament == 0 || c.tournament > c.population {
            return Err(Error::Argument("tournament size must satisfy 1 <= tau <= mu"));
        }
        if c.train_epochs == 0 || c.eval_batches == 0 || c.batch_size == 0 {
            return Err(Error::Argument("n_t, n_e and the batch size must be positive"));
        }
        if c.budget < c.train_epochs * c.offspring {
            return Err(Error::Argument("budget must cover at least one generation"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual<N> {
    pub id: u64,
    /// Generation in which the individual was created (0 = initial).
    pub born: usize,
    /// Set when the training that produced it diverged.
    pub diverged: bool,
    pub net: N,
}

#[derive(Debug, Clone)]
pub struct Population<N> {
    members: Vec<Individual<N>>,
    generation: usize,
    next_id: u64,
}

impl<N: Clone> Population<N> {
    pub fn new(nets: Vec<N>) -> Self {
        let members: Vec<_> = nets
            .into_iter()
            .enumerate()
            .map(|(i, net)| Individual {
                id: i as u64,
                born: 0,
                diverged: false,
                net,
            })
            .collect();
        let next_id = members.len() as u64;
        Self {
            members,
            generation: 0,
            next_id,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Individual<N>] {
        &self.members
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn ids(&self) -> Vec<u64> {
        self.members.iter().map(|m| m.id).collect()
    }

    /// Deep copy of member `index` under a fresh id, born in the next
    /// generation.
    pub fn spawn(&mut self, index: usize) -> Individual<N> {
        let parent = &self.members[index];
        let child = Individual {
            id: self.next_id,
            born: self.generation + 1,
            diverged: false,
            net: parent.net.clone(),
        };
        self.next_id += 1;
        child
    }

    /// Adds trained offspring and opens the next generation, which
    /// invalidates every earlier fitness table.
    pub fn insert_offspring(&mut self, offspring: Vec<Individual<N>>) {
        self.generation += 1;
        self.members.extend(offspring);
    }
}

/// Fitness of one side, stamped with the population state it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct SideFitness {
    pub generation: usize,
    pub ids: Vec<u64>,
    pub values: Vec<f64>,
}

impl SideFitness {
    /// Fitness per current member, or [`Error::StaleFitness`] if the table
    /// predates the population or lacks a member.
    pub fn for_population<N>(&self, pop: &Population<N>) -> Result<Vec<f64>> {
        if self.generation != pop.generation {
            return Err(Error::StaleFitness);
        }
        pop.members
            .iter()
            .map(|m| {
                self.ids
                    .iter()
                    .position(|&id| id == m.id)
                    .map(|k| self.values[k])
                    .ok_or(Error::StaleFitness)
            })
            .collect()
    }
}

/// Lower is better on both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessTable {
    pub generators: SideFitness,
    pub discriminators: SideFitness,
}

/// Pair losses of every generator against every discriminator on one shared
/// set of batches; `None` where either side is a diverged individual.
pub fn pairwise_losses<E: Executor>(
    gens: &Population<GeneratorNet>,
    discs: &Population<DiscriminatorNet>,
    data: &SslDataset,
    n_e: usize,
    batch_size: usize,
    rng: &mut RngStream,
    exec: &E,
) -> Result<Vec<Vec<Option<LossReport>>>> {
    if gens.is_empty() || discs.is_empty() {
        return Err(Error::Argument("both populations must be non-empty"));
    }
    let latent = gens.members[0].net.latent_dim();
    let batches = draw_eval_batches(data, n_e, batch_size, latent, rng)?;
    let rows = exec.map(gens.members.iter().collect(), |g| {
        discs
            .members
            .iter()
            .map(|d| {
                if g.diverged || d.diverged {
                    return Ok(None);
                }
                evaluate_on(&g.net, &d.net, &batches).map(Some)
            })
            .collect::<Result<Vec<_>>>()
    });
    rows.into_iter().collect()
}

fn mean_or_worst(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        if !v.is_finite() {
            return f64::INFINITY;
        }
        sum += v;
        n += 1;
    }
    if n == 0 {
        f64::INFINITY
    } else {
        sum / n as f64
    }
}

/// Generator fitness is its mean `L_G` against all discriminators;
/// discriminator fitness is its mean `L_D` against all generators. Diverged
/// individuals get `+∞` and are left out of their adversaries' means.
pub fn evaluate_populations<E: Executor>(
    gens: &Population<GeneratorNet>,
    discs: &Population<DiscriminatorNet>,
    data: &SslDataset,
    n_e: usize,
    batch_size: usize,
    rng: &mut RngStream,
    exec: &E,
) -> Result<FitnessTable> {
    let losses = pairwise_losses(gens, discs, data, n_e, batch_size, rng, exec)?;
    let gen_values = gens
        .members
        .iter()
        .zip(&losses)
        .map(|(g, row)| {
            if g.diverged {
                f64::INFINITY
            } else {
                mean_or_worst(row.iter().flatten().map(|r| r.l_g))
            }
        })
        .collect();
    let disc_values = discs
        .members
        .iter()
        .enumerate()
        .map(|(j, d)| {
            if d.diverged {
                f64::INFINITY
            } else {
                mean_or_worst(losses.iter().filter_map(|row| row[j]).map(|r| r.l_d_total))
            }
        })
        .collect();
    Ok(FitnessTable {
        generators: SideFitness {
            generation: gens.generation,
            ids: gens.ids(),
            values: gen_values,
        },
        discriminators: SideFitness {
            generation: discs.generation,
            ids: discs.ids(),
            values: disc_values,
        },
    })
}

/// NaN counts as worst.
fn fitness_cmp(a: f64, b: f64) -> Ordering {
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    key(a).total_cmp(&key(b))
}

fn member_cmp<N>(pop: &Population<N>, fitness: &[f64], i: usize, j: usize) -> Ordering {
    let (a, b) = (&pop.members[i], &pop.members[j]);
    fitness_cmp(fitness[i], fitness[j])
        .then(a.born.cmp(&b.born))
        .then(a.id.cmp(&b.id))
}

/// Runs `lambda` independent tournaments of `tau` contestants and returns
/// the winners' indices. The same parent may win repeatedly.
pub fn tournament_select<N: Clone>(
    pop: &Population<N>,
    fitness: &SideFitness,
    lambda: usize,
    tau: usize,
    draw: TournamentDraw,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if tau == 0 || tau > pop.len() {
        return Err(Error::Argument("tournament size must satisfy 1 <= tau <= population"));
    }
    let values = fitness.for_population(pop)?;
    Ok((0..lambda)
        .map(|_| {
            let contestants = match draw {
                TournamentDraw::Distinct => rng.sample_distinct(pop.len(), tau),
                TournamentDraw::Replacement => (0..tau).map(|_| rng.below(pop.len())).collect(),
            };
            contestants
                .into_iter()
                .min_by(|&i, &j| member_cmp(pop, &values, i, j))
                .expect("tau >= 1")
        })
        .collect())
}

/// Uniformly random perfect matching between two equally long lists.
pub fn pair_offspring<A, B>(gens: Vec<A>, mut discs: Vec<B>, rng: &mut RngStream) -> Result<Vec<(A, B)>> {
    if gens.len() != discs.len() {
        return Err(Error::Argument("offspring lists must have equal length"));
    }
    rng.shuffle(&mut discs);
    Ok(gens.into_iter().zip(discs).collect())
}

/// Keeps the `mu` fittest members; ties go to the older, then lower id.
pub fn elitist_replacement<N: Clone>(pop: &mut Population<N>, fitness: &SideFitness, mu: usize) -> Result<()> {
    let values = fitness.for_population(pop)?;
    if mu > pop.len() {
        return Err(Error::Argument("cannot keep more members than exist"));
    }
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&i, &j| member_cmp(pop, &values, i, j));
    order.truncate(mu);
    let mut slots: Vec<Option<Individual<N>>> = core::mem::take(&mut pop.members).into_iter().map(Some).collect();
    pop.members = order
        .into_iter()
        .map(|i| slots[i].take().expect("indices are distinct"))
        .collect();
    Ok(())
}

fn best_and_median<N>(pop: &Population<N>, side: &SideFitness) -> Result<(usize, f64, f64)> {
    let values = side.for_population(pop)?;
    let best = (0..values.len())
        .min_by(|&i, &j| member_cmp(pop, &values, i, j))
        .ok_or(Error::Argument("empty population"))?;
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| fitness_cmp(*a, *b));
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    Ok((best, values[best], median))
}

/// One row of the per-generation trace, taken after truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenerationRecord {
    pub generation: usize,
    /// Cumulative training epochs handed to couples so far.
    pub epochs_consumed: usize,
    pub best_generator_fitness: f64,
    pub median_generator_fitness: f64,
    pub best_discriminator_fitness: f64,
    pub median_discriminator_fitness: f64,
    /// Test accuracy of the fittest discriminator.
    pub accuracy: f64,
    /// W1 of the fittest generator against the test split, when due.
    pub w1: Option<f64>,
    /// Offspring couples whose training diverged this generation.
    pub diverged: usize,
}

#[derive(Debug, Clone)]
pub struct CoevoOutcome {
    pub best_generator: GeneratorNet,
    pub best_discriminator: DiscriminatorNet,
    pub trace: Vec<GenerationRecord>,
    pub generations: usize,
    pub epochs_consumed: usize,
    pub train_calls: usize,
}

/// Initial individual `index` of a run, shared with the single-pair baseline.
pub fn initial_generator(arch: &Architecture, seed: u64, index: usize) -> GeneratorNet {
    let mut rng = RngStream::new(seed, 0).substream(STREAM_INIT_GENERATOR, index as u64, 0);
    GeneratorNet::new(arch, &mut rng)
}

pub fn initial_discriminator(arch: &Architecture, seed: u64, index: usize) -> DiscriminatorNet {
    let mut rng = RngStream::new(seed, 0).substream(STREAM_INIT_DISCRIMINATOR, index as u64, 0);
    DiscriminatorNet::new(arch, &mut rng)
}

/// Training stream of couple `couple` in generation `generation`.
pub fn train_stream(seed: u64, generation: usize, couple: usize) -> RngStream {
    RngStream::new(seed, 0).substream(STREAM_TRAIN, generation as u64, couple as u64)
}

pub fn metrics_stream(seed: u64, generation: usize) -> RngStream {
    RngStream::new(seed, 0).substream(STREAM_METRICS, generation as u64, 0)
}

type Couple = (Individual<GeneratorNet>, Individual<DiscriminatorNet>);

/// Everything a run needs besides the data.
#[derive(Debug, Clone, Copy)]
pub struct RunSettings<'a> {
    pub config: &'a CoevoConfig,
    pub arch: &'a Architecture,
    pub adam: &'a AdamConfig,
    pub metrics: &'a MetricsConfig,
    pub seed: u64,
}

/// Full co-evolutionary run. `on_generation` sees the populations right
/// after insertion (sizes μ+λ) and after truncation (sizes μ).
pub fn run_cesslgan<E: Executor>(
    settings: RunSettings<'_>,
    data: &SslDataset,
    exec: &E,
    mut on_generation: impl FnMut(GenerationSizes),
) -> Result<CoevoOutcome> {
    let RunSettings {
        config,
        arch,
        adam,
        metrics,
        seed,
    } = settings;
    config.validate()?;
    adam.validate()?;
    let mu = config.population;
    let lambda = config.offspring;
    let iota = config.generations();
    let root = RngStream::new(seed, 0);

    let mut gens = Population::new((0..mu).map(|i| initial_generator(arch, seed, i)).collect());
    let mut discs = Population::new((0..mu).map(|i| initial_discriminator(arch, seed, i)).collect());
    let evaluate = |gens: &Population<GeneratorNet>, discs: &Population<DiscriminatorNet>, generation: usize| {
        let mut rng = root.substream(STREAM_EVAL, generation as u64, 0);
        evaluate_populations(gens, discs, data, config.eval_batches, config.batch_size, &mut rng, exec)
    };
    let mut table = evaluate(&gens, &discs, 0)?;

    let budget = TrainBudget {
        epochs: config.train_epochs,
        batch_size: config.batch_size,
    };
    let mut trace = Vec::with_capacity(iota);
    let mut epochs_consumed = 0;
    let mut train_calls = 0;

    for generation in 1..=iota {
        let mut sel_g = root.substream(STREAM_SELECT_GENERATOR, generation as u64, 0);
        let mut sel_d = root.substream(STREAM_SELECT_DISCRIMINATOR, generation as u64, 0);
        let winners_g = tournament_select(&gens, &table.generators, lambda, config.tournament, config.tournament_draw, &mut sel_g)?;
        let winners_d = tournament_select(&discs, &table.discriminators, lambda, config.tournament, config.tournament_draw, &mut sel_d)?;
        let kids_g: Vec<_> = winners_g.into_iter().map(|i| gens.spawn(i)).collect();
        let kids_d: Vec<_> = winners_d.into_iter().map(|i| discs.spawn(i)).collect();
        let mut pair_rng = root.substream(STREAM_PAIR, generation as u64, 0);
        let couples: Vec<(usize, Couple)> = pair_offspring(kids_g, kids_d, &mut pair_rng)?
            .into_iter()
            .enumerate()
            .collect();

        let trained: Vec<Couple> = exec.map(couples, |(k, (mut g, mut d))| {
            let mut rng = train_stream(seed, generation, k);
            if train_pair_with(&mut g.net, &mut d.net, data, &budget, adam, &mut rng, |_| {}).is_err() {
                g.diverged = true;
                d.diverged = true;
            }
            (g, d)
        });
        train_calls += trained.len();
        epochs_consumed += trained.len() * config.train_epochs;
        let diverged = trained.iter().filter(|(g, _)| g.diverged).count();
        let (kids_g, kids_d): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
        gens.insert_offspring(kids_g);
        discs.insert_offspring(kids_d);
        let inserted = (gens.len(), discs.len());

        table = evaluate(&gens, &discs, generation)?;
        elitist_replacement(&mut gens, &table.generators, mu)?;
        elitist_replacement(&mut discs, &table.discriminators, mu)?;
        on_generation(GenerationSizes {
            generation,
            after_insertion: inserted,
            after_truncation: (gens.len(), discs.len()),
        });

        let (bg, best_g, median_g) = best_and_median(&gens, &table.generators)?;
        let (bd, best_d, median_d) = best_and_median(&discs, &table.discriminators)?;
        let accuracy = classification_accuracy(&discs.members[bd].net, &data.test)?;
        let w1 = if metrics.w1_due(generation, generation == iota) {
            let mut mrng = metrics_stream(seed, generation);
            Some(generator_w1(&gens.members[bg].net, &data.test.x, metrics.w1_points, &mut mrng)?)
        } else {
            None
        };
        trace.push(GenerationRecord {
            generation,
            epochs_consumed,
            best_generator_fitness: best_g,
            median_generator_fitness: median_g,
            best_discriminator_fitness: best_d,
            median_discriminator_fitness: median_d,
            accuracy,
            w1,
            diverged,
        });
    }

    let (bg, _, _) = best_and_median(&gens, &table.generators)?;
    let (bd, _, _) = best_and_median(&discs, &table.discriminators)?;
    Ok(CoevoOutcome {
        best_generator: gens.members[bg].net.clone(),
        best_discriminator: discs.members[bd].net.clone(),
        trace,
        generations: iota,
        epochs_consumed,
        train_calls,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationSizes {
    pub generation: usize,
    pub after_insertion: (usize, usize),
    pub after_truncation: (usize, usize),
}
