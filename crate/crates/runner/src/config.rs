//! Experiment configuration in TOML, one section per module.
//!
//! Every field has a default, so a config file only lists what it changes.
//! [`RunConfig::resolved`] materialises the derived values and is what
//! gets echoed into each result directory.

use std::path::{Path, PathBuf};

use cesslgan_core::coevo::{CoevoConfig, TournamentDraw};
use cesslgan_core::data::{BlobParams, RingParams, CANONICAL_BLOB_SEED};
use cesslgan_core::metrics::MetricsConfig;
use cesslgan_core::nn::{AdamConfig, Architecture};
use cesslgan_core::sslgan::TrainBudget;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Result, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sslgan,
    Cesslgan,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sslgan => "sslgan",
            Method::Cesslgan => "cesslgan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 30 repetitions, 300 epochs per offspring slot.
    Paper,
    /// 5 repetitions, 100 epochs per offspring slot.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub method: Method,
    pub repetitions: usize,
    /// Master seed; repetition `r` runs with `derive_seed(seed, r)`.
    pub seed: u64,
    /// Parallel workers for repetitions and couple training. 0 = all cores.
    pub workers: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            method: Method::Cesslgan,
            repetitions: 5,
            seed: 1,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Ring,
    Blob,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    /// Seed of the sampled points (and of the BLOB centres). The labelled
    /// subset is drawn per repetition instead.
    pub seed: Option<u64>,
    /// Labelled samples per class.
    pub n_s: usize,
    pub classes: Option<usize>,
    pub sigma: Option<f64>,
    pub radius: f64,
    pub spread: f64,
    pub train_n: usize,
    pub test_n: usize,
    /// For `kind = "csv"`.
    pub train_csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        let ring = RingParams::default();
        Self {
            kind: DatasetKind::Ring,
            seed: None,
            n_s: 1,
            classes: None,
            sigma: None,
            radius: ring.radius,
            spread: BlobParams::default().spread,
            train_n: ring.train_n,
            test_n: ring.test_n,
            train_csv: None,
            test_csv: None,
        }
    }
}

impl DatasetSection {
    pub fn ring_params(&self) -> RingParams {
        let d = RingParams::default();
        RingParams {
            classes: self.classes.unwrap_or(d.classes),
            radius: self.radius,
            sigma: self.sigma.unwrap_or(d.sigma),
            train_n: self.train_n,
            test_n: self.test_n,
        }
    }

    pub fn blob_params(&self) -> BlobParams {
        let d = BlobParams::default();
        BlobParams {
            classes: self.classes.unwrap_or(d.classes),
            sigma: self.sigma.unwrap_or(d.sigma),
            spread: self.spread,
            train_n: self.train_n,
            test_n: self.test_n,
        }
    }

    fn resolve(&mut self) {
        match self.kind {
            DatasetKind::Ring => {
                let p = self.ring_params();
                self.seed.get_or_insert(1);
                self.classes = Some(p.classes);
                self.sigma = Some(p.sigma);
            }
            DatasetKind::Blob => {
                let p = self.blob_params();
                self.seed.get_or_insert(CANONICAL_BLOB_SEED);
                self.classes = Some(p.classes);
                self.sigma = Some(p.sigma);
            }
            DatasetKind::Csv => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub latent_dim: usize,
    pub hidden: usize,
    pub leaky_slope: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let a = Architecture::default();
        Self {
            latent_dim: a.latent_dim,
            hidden: a.hidden,
            leaky_slope: a.leaky_slope,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Epochs per offspring slot: the baseline's `T`, and `T_B / λ` for
    /// co-evolution unless `coevo.budget` is set.
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoevoSection {
    pub population: usize,
    pub offspring: usize,
    pub tournament: usize,
    pub tournament_draw: TournamentDraw,
    pub train_epochs: usize,
    pub eval_batches: usize,
    /// `T_B`; defaults to `train.epochs × offspring`.
    pub budget: Option<usize>,
}

impl Default for CoevoSection {
    fn default() -> Self {
        Self {
            population: 5,
            offspring: 2,
            tournament: 2,
            tournament_draw: TournamentDraw::Distinct,
            train_epochs: 10,
            eval_batches: 4,
            budget: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub w1_points: usize,
    pub w1_every: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let m = MetricsConfig::default();
        Self {
            w1_points: m.w1_points,
            w1_every: m.w1_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentSection,
    pub dataset: DatasetSection,
    pub network: NetworkSection,
    pub adam: AdamConfig,
    pub train: TrainSection,
    pub coevo: CoevoSection,
    pub metrics: MetricsSection,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let mut c = Self::default();
        c.apply_preset(preset);
        c
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        let (reps, epochs) = match preset {
            Preset::Paper => (30, 300),
            Preset::Desk => (5, 100),
        };
        self.experiment.repetitions = reps;
        self.train.epochs = epochs;
        self.coevo.budget = None;
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Copy with every derived value written out, so the echo alone is
    /// enough to re-run.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.dataset.resolve();
        c.coevo.budget = Some(self.budget());
        c
    }

    /// `T_B`.
    pub fn budget(&self) -> usize {
        self.coevo
            .budget
            .unwrap_or(self.train.epochs * self.coevo.offspring)
    }

    pub fn coevo_config(&self) -> CoevoConfig {
        CoevoConfig {
            population: self.coevo.population,
            offspring: self.coevo.offspring,
            tournament: self.coevo.tournament,
            tournament_draw: self.coevo.tournament_draw,
            train_epochs: self.coevo.train_epochs,
            eval_batches: self.coevo.eval_batches,
            budget: self.budget(),
            batch_size: self.train.batch_size,
        }
    }

    pub fn train_budget(&self) -> TrainBudget {
        TrainBudget {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
        }
    }

    pub fn architecture(&self, classes: usize, data_dim: usize) -> Architecture {
        Architecture {
            latent_dim: self.network.latent_dim,
            hidden: self.network.hidden,
            data_dim,
            classes,
            leaky_slope: self.network.leaky_slope,
        }
    }

    pub fn metrics_config(&self) -> MetricsConfig {
        MetricsConfig {
            w1_points: self.metrics.w1_points,
            w1_every: self.metrics.w1_every,
        }
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RunError::Config(m.to_owned()));
        if self.experiment.repetitions == 0 {
            return bad("experiment.repetitions must be at least 1");
        }
        if self.dataset.n_s == 0 {
            return bad("dataset.n_s must be at least 1");
        }
        if self.network.latent_dim == 0 || self.network.hidden == 0 {
            return bad("network widths must be positive");
        }
        if self.metrics.w1_points == 0 {
            return bad("metrics.w1_points must be positive");
        }
        if self.dataset.kind == DatasetKind::Csv && self.dataset.train_csv.is_none() {
            return bad("dataset.train_csv is required for kind = \"csv\"");
        }
        self.adam.validate()?;
        match self.experiment.method {
            Method::Sslgan => self.train_budget().validate()?,
            Method::Cesslgan => self.coevo_config().validate()?,
        }
        Ok(())
    }
}
