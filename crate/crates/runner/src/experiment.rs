//! Multi-repetition experiments and their result files.
//!
//! Layout of an experiment directory:
//!
//! ```text
//! config.toml           fully resolved configuration
//! runs.csv              one row per repetition
//! summary.csv           Min/Median/IQR/Max of the final metrics
//! rep-000/metrics.csv   per-epoch (sslgan) or per-generation (cesslgan) trace
//! rep-000/generator.json, rep-000/discriminator.json
//! ```

use std::path::{Path, PathBuf};

use cesslgan_core::coevo::{run_cesslgan, CoevoOutcome, GenerationRecord, RunSettings};
use cesslgan_core::data::SslDataset;
use cesslgan_core::rng::derive_seed;
use cesslgan_core::sslgan::{run_sslgan, BaselineOutcome, EpochRecord};
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::config::{Method, RunConfig};
use crate::dataset::{self, LoadedData};
use crate::error::{csv_err, io_err, Result, RunError};
use crate::exec::{pool, Rayon};
use crate::format::{sig9, sig9_opt, through_sig9};
use crate::stats::{summarize, Summary};

pub const BASELINE_HEADER: [&str; 8] = [
    "epoch",
    "epochs_consumed",
    "l_g",
    "l_d_sup",
    "l_d_unsup",
    "l_d_total",
    "accuracy",
    "w1",
];

pub const COEVO_HEADER: [&str; 10] = [
    "generation",
    "epochs_per_offspring",
    "epochs_consumed",
    "best_g_fitness",
    "median_g_fitness",
    "best_d_fitness",
    "median_d_fitness",
    "accuracy",
    "w1",
    "diverged",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepResult {
    pub rep: usize,
    pub seed: u64,
    pub status: RepStatus,
    /// Trace rows written (epochs or generations).
    pub rows: usize,
    pub epochs_consumed: usize,
    /// Final values as written to the CSVs.
    pub accuracy: Option<f64>,
    pub w1: Option<f64>,
    pub message: String,
    pub dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub reps: Vec<RepResult>,
    pub accuracy: Option<Summary>,
    pub w1: Option<Summary>,
}

impl ExperimentReport {
    pub fn completed(&self) -> impl Iterator<Item = &RepResult> {
        self.reps.iter().filter(|r| r.status == RepStatus::Ok)
    }
}

pub fn rep_dir(out: &Path, rep: usize) -> PathBuf {
    out.join(format!("rep-{rep:03}"))
}

/// Runs every repetition of `config` into `out`. Per-repetition failures
/// are recorded in `runs.csv`; only setup and summary I/O abort.
pub fn run_experiment(config: &RunConfig, out: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    let config = config.resolved();
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let cfg_path = out.join("config.toml");
    std::fs::write(&cfg_path, config.to_toml()).map_err(io_err(&cfg_path))?;
    let data = dataset::load(&config.dataset)?;

    let workers = pool(config.experiment.workers)?;
    let reps: Vec<RepResult> = workers.install(|| {
        (0..config.experiment.repetitions)
            .into_par_iter()
            .map(|rep| run_rep(&config, &data, out, rep))
            .collect()
    });

    write_runs(&out.join("runs.csv"), &reps)?;
    let acc: Vec<f64> = reps.iter().filter_map(|r| r.accuracy).collect();
    let w1: Vec<f64> = reps.iter().filter_map(|r| r.w1).collect();
    let report = ExperimentReport {
        dir: out.to_owned(),
        config,
        accuracy: summarize(&acc),
        w1: summarize(&w1),
        reps,
    };
    write_summary(&out.join("summary.csv"), &[("accuracy", report.accuracy), ("w1", report.w1)])?;
    Ok(report)
}

fn run_rep(config: &RunConfig, data: &LoadedData, out: &Path, rep: usize) -> RepResult {
    let seed = derive_seed(config.experiment.seed, rep as u64);
    let dir = rep_dir(out, rep);
    let mut result = RepResult {
        rep,
        seed,
        status: RepStatus::Failed,
        rows: 0,
        epochs_consumed: 0,
        accuracy: None,
        w1: None,
        message: String::new(),
        dir: dir.clone(),
    };
    log::info!("rep {rep}: seed {seed}, {}", config.experiment.method.name());
    match try_rep(config, data, &dir, seed, &mut result) {
        Ok(()) => result.status = RepStatus::Ok,
        Err(e) => {
            log::warn!("rep {rep} failed: {e}");
            result.message = e.to_string();
        }
    }
    result
}

fn try_rep(config: &RunConfig, data: &LoadedData, dir: &Path, seed: u64, result: &mut RepResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let ssl = data.ssl(config.dataset.n_s, seed)?;
    let arch = config.architecture(ssl.classes, ssl.dim());
    let metrics_path = dir.join("metrics.csv");
    let (g, d) = match config.experiment.method {
        Method::Sslgan => {
            let out = run_sslgan(
                &arch,
                &config.train_budget(),
                &config.adam,
                &config.metrics_config(),
                &ssl,
                seed,
            )?;
            write_baseline_trace(&metrics_path, &out.trace)?;
            record_final(result, out.trace.len(), out.trace.len(), out.trace.last().map(|r| (r.accuracy, r.w1)));
            let BaselineOutcome {
                generator,
                discriminator,
                ..
            } = out;
            (generator, discriminator)
        }
        Method::Cesslgan => {
            let out = run_coevo(config, &ssl, seed)?;
            write_coevo_trace(&metrics_path, &out.trace, config.coevo.train_epochs)?;
            record_final(result, out.trace.len(), out.epochs_consumed, out.trace.last().map(|r| (r.accuracy, r.w1)));
            (out.best_generator, out.best_discriminator)
        }
    };
    Checkpoint::generator(&g, &arch, seed).save(&dir.join("generator.json"))?;
    Checkpoint::discriminator(&d, &arch, seed).save(&dir.join("discriminator.json"))?;
    Ok(())
}

/// Co-evolutionary run with the population sizes checked every generation.
pub fn run_coevo(config: &RunConfig, ssl: &SslDataset, seed: u64) -> Result<CoevoOutcome> {
    let arch = config.architecture(ssl.classes, ssl.dim());
    let coevo = config.coevo_config();
    let metrics = config.metrics_config();
    let (mu, lambda) = (coevo.population, coevo.offspring);
    let mut bad_sizes = None;
    let out = run_cesslgan(
        RunSettings {
            config: &coevo,
            arch: &arch,
            adam: &config.adam,
            metrics: &metrics,
            seed,
        },
        ssl,
        &Rayon,
        |s| {
            if s.after_insertion != (mu + lambda, mu + lambda) || s.after_truncation != (mu, mu) {
                bad_sizes.get_or_insert(s.generation);
            }
        },
    )?;
    if let Some(g) = bad_sizes {
        return Err(RunError::Config(format!("population size invariant broken in generation {g}")));
    }
    Ok(out)
}

fn record_final(result: &mut RepResult, rows: usize, epochs: usize, last: Option<(f64, Option<f64>)>) {
    result.rows = rows;
    result.epochs_consumed = epochs;
    if let Some((acc, w1)) = last {
        result.accuracy = Some(through_sig9(acc));
        result.w1 = w1.map(through_sig9);
    }
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_baseline_trace(path: &Path, trace: &[EpochRecord]) -> Result<()> {
    write_rows(
        path,
        &BASELINE_HEADER,
        trace.iter().map(|r| {
            vec![
                r.epoch.to_string(),
                r.epoch.to_string(),
                sig9(r.report.l_g),
                sig9(r.report.l_d_sup),
                sig9(r.report.l_d_unsup),
                sig9(r.report.l_d_total),
                sig9(r.accuracy),
                sig9_opt(r.w1),
            ]
        }),
    )
}

pub fn write_coevo_trace(path: &Path, trace: &[GenerationRecord], n_t: usize) -> Result<()> {
    write_rows(
        path,
        &COEVO_HEADER,
        trace.iter().map(|r| {
            vec![
                r.generation.to_string(),
                (r.generation * n_t).to_string(),
                r.epochs_consumed.to_string(),
                sig9(r.best_generator_fitness),
                sig9(r.median_generator_fitness),
                sig9(r.best_discriminator_fitness),
                sig9(r.median_discriminator_fitness),
                sig9(r.accuracy),
                sig9_opt(r.w1),
                r.diverged.to_string(),
            ]
        }),
    )
}

fn write_runs(path: &Path, reps: &[RepResult]) -> Result<()> {
    write_rows(
        path,
        &["rep", "seed", "status", "rows", "epochs_consumed", "accuracy", "w1", "message"],
        reps.iter().map(|r| {
            vec![
                r.rep.to_string(),
                r.seed.to_string(),
                match r.status {
                    RepStatus::Ok => "ok",
                    RepStatus::Failed => "failed",
                }
                .into(),
                r.rows.to_string(),
                r.epochs_consumed.to_string(),
                sig9_opt(r.accuracy),
                sig9_opt(r.w1),
                r.message.clone(),
            ]
        }),
    )
}

pub const SUMMARY_HEADER: [&str; 6] = ["metric", "n", "min", "median", "iqr", "max"];

pub fn summary_row(metric: &str, s: Option<Summary>) -> Vec<String> {
    match s {
        Some(s) => vec![
            metric.into(),
            s.n.to_string(),
            sig9(s.min),
            sig9(s.median),
            sig9(s.iqr),
            sig9(s.max),
        ],
        None => vec![metric.into(), "0".into(), String::new(), String::new(), String::new(), String::new()],
    }
}

fn write_summary(path: &Path, rows: &[(&str, Option<Summary>)]) -> Result<()> {
    write_rows(path, &SUMMARY_HEADER, rows.iter().map(|(m, s)| summary_row(m, *s)))
}
