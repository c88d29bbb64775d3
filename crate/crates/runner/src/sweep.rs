//! Parameter sweeps over `μ`, `λ`, `n_t` and `n_s`.
//!
//! A sweep file is an ordinary run config plus a `[sweep]` section:
//!
//! ```toml
//! [sweep]
//! population = [3, 5]
//! train_epochs = [10]
//! n_s = [1]
//! # offspring = [1, 2]   default: 1 ..= ceil(population / 2)
//! # baseline = true      also run SSL-GAN once per n_s
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::error::{csv_err, io_err, Result, RunError};
use crate::experiment::{run_experiment, summary_row, ExperimentReport, SUMMARY_HEADER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub population: Vec<usize>,
    /// Explicit `λ` values; entries above `⌈μ/2⌉` are skipped.
    #[serde(default)]
    pub offspring: Option<Vec<usize>>,
    pub train_epochs: Vec<usize>,
    pub n_s: Vec<usize>,
    #[serde(default = "yes")]
    pub baseline: bool,
}

fn yes() -> bool {
    true
}

/// One cell of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Combo {
    pub method: Method,
    pub population: usize,
    pub offspring: usize,
    pub train_epochs: usize,
    pub n_s: usize,
}

impl Combo {
    pub fn label(&self) -> String {
        match self.method {
            Method::Sslgan => format!("sslgan_ns{}", self.n_s),
            Method::Cesslgan => format!(
                "cesslgan_mu{}_lambda{}_nt{}_ns{}",
                self.population, self.offspring, self.train_epochs, self.n_s
            ),
        }
    }

    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut c = base.clone();
        c.experiment.method = self.method;
        c.dataset.n_s = self.n_s;
        if self.method == Method::Cesslgan {
            c.coevo.population = self.population;
            c.coevo.offspring = self.offspring;
            c.coevo.train_epochs = self.train_epochs;
            c.coevo.tournament = c.coevo.tournament.min(self.population);
        }
        c
    }
}

/// Largest offspring size the sweep rule allows for `mu`.
pub fn max_offspring(mu: usize) -> usize {
    mu.div_ceil(2)
}

/// Legal combinations in sweep order, and the skipped ones with a reason.
pub fn expand(spec: &SweepSpec) -> Result<(Vec<Combo>, Vec<(Combo, String)>)> {
    let empty = spec.population.is_empty()
        || spec.train_epochs.is_empty()
        || spec.n_s.is_empty()
        || spec.offspring.as_ref().is_some_and(Vec::is_empty);
    if empty {
        return Err(RunError::Config("sweep lists must be non-empty".into()));
    }
    let mut legal = Vec::new();
    let mut skipped = Vec::new();
    for &n_s in &spec.n_s {
        if spec.baseline {
            legal.push(Combo {
                method: Method::Sslgan,
                population: 1,
                offspring: 1,
                train_epochs: 0,
                n_s,
            });
        }
        for &mu in &spec.population {
            let lambdas: Vec<usize> = match &spec.offspring {
                Some(l) => l.clone(),
                None => (1..=max_offspring(mu)).collect(),
            };
            for &lambda in &lambdas {
                for &n_t in &spec.train_epochs {
                    let combo = Combo {
                        method: Method::Cesslgan,
                        population: mu,
                        offspring: lambda,
                        train_epochs: n_t,
                        n_s,
                    };
                    if lambda == 0 || lambda > max_offspring(mu) {
                        skipped.push((combo, format!("offspring {lambda} outside 1..={}", max_offspring(mu))));
                    } else {
                        legal.push(combo);
                    }
                }
            }
        }
    }
    Ok((legal, skipped))
}

/// Reads a sweep file: the `[sweep]` table plus base config sections.
pub fn load_sweep_file(path: &Path) -> Result<(SweepSpec, RunConfig)> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_sweep(&text)
}

pub fn parse_sweep(text: &str) -> Result<(SweepSpec, RunConfig)> {
    let bad = |e: &dyn std::fmt::Display| RunError::Config(e.to_string());
    let mut table: toml::Table = toml::from_str(text).map_err(|e| bad(&e))?;
    let sweep = table
        .remove("sweep")
        .ok_or_else(|| RunError::Config("missing [sweep] section".into()))?;
    let spec: SweepSpec = sweep.try_into().map_err(|e| bad(&e))?;
    let base: RunConfig = toml::Value::Table(table).try_into().map_err(|e| bad(&e))?;
    Ok((spec, base))
}

#[derive(Debug)]
pub struct SweepEntry {
    pub combo: Combo,
    pub dir: PathBuf,
    pub outcome: std::result::Result<ExperimentReport, String>,
}

/// One experiment per legal combination under `out/<label>/`, then
/// `index.csv` and `comparison.csv`. A failing combination is logged and
/// recorded without stopping the others.
pub fn run_sweep(spec: &SweepSpec, base: &RunConfig, out: &Path) -> Result<Vec<SweepEntry>> {
    let (legal, skipped) = expand(spec)?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    for (combo, why) in &skipped {
        log::warn!("skipping {}: {why}", combo.label());
    }
    let mut entries = Vec::with_capacity(legal.len());
    for combo in legal {
        let dir = out.join(combo.label());
        log::info!("sweep: {}", combo.label());
        let outcome = run_experiment(&combo.apply(base), &dir).map_err(|e| {
            log::error!("{} failed: {e}", combo.label());
            e.to_string()
        });
        entries.push(SweepEntry { combo, dir, outcome });
    }
    write_index(&out.join("index.csv"), &entries, &skipped)?;
    write_comparison(&out.join("comparison.csv"), &entries)?;
    Ok(entries)
}

fn combo_cells(c: &Combo) -> Vec<String> {
    let (mu, lambda, n_t) = match c.method {
        Method::Sslgan => (String::new(), String::new(), String::new()),
        Method::Cesslgan => (c.population.to_string(), c.offspring.to_string(), c.train_epochs.to_string()),
    };
    vec![c.label(), c.method.name().into(), mu, lambda, n_t, c.n_s.to_string()]
}

fn write_index(path: &Path, entries: &[SweepEntry], skipped: &[(Combo, String)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record([
        "combo", "method", "mu", "lambda", "n_t", "n_s", "budget", "generations", "status", "directory", "message",
    ])
    .map_err(csv_err(path))?;
    for e in entries {
        let mut row = combo_cells(&e.combo);
        match &e.outcome {
            Ok(r) => {
                let gens = match e.combo.method {
                    Method::Sslgan => String::new(),
                    Method::Cesslgan => r.config.coevo_config().generations().to_string(),
                };
                let budget = match e.combo.method {
                    Method::Sslgan => r.config.train.epochs,
                    Method::Cesslgan => r.config.budget(),
                };
                row.extend([budget.to_string(), gens, "ok".into()]);
                row.push(e.combo.label());
                row.push(String::new());
            }
            Err(m) => {
                row.extend([String::new(), String::new(), "failed".into(), e.combo.label(), m.clone()]);
            }
        }
        w.write_record(&row).map_err(csv_err(path))?;
    }
    for (c, why) in skipped {
        let mut row = combo_cells(c);
        row.extend([String::new(), String::new(), "skipped".into(), String::new(), why.clone()]);
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_comparison(path: &Path, entries: &[SweepEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["combo", "method", "mu", "lambda", "n_t", "n_s"];
    header.extend(SUMMARY_HEADER);
    w.write_record(&header).map_err(csv_err(path))?;
    for e in entries {
        if let Ok(r) = &e.outcome {
            for (metric, s) in [("accuracy", r.accuracy), ("w1", r.w1)] {
                let mut row = combo_cells(&e.combo);
                row.extend(summary_row(metric, s));
                w.write_record(&row).map_err(csv_err(path))?;
            }
        }
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(population: Vec<usize>) -> SweepSpec {
        SweepSpec {
            population,
            offspring: None,
            train_epochs: vec![10],
            n_s: vec![1],
            baseline: false,
        }
    }

    #[test]
    fn offspring_rule_grid() {
        let (legal, skipped) = expand(&spec(vec![3, 5])).unwrap();
        let pairs: Vec<_> = legal.iter().map(|c| (c.population, c.offspring)).collect();
        assert_eq!(pairs, [(3, 1), (3, 2), (5, 1), (5, 2), (5, 3)]);
        assert!(skipped.is_empty());
    }

    #[test]
    fn illegal_offspring_are_skipped() {
        let mut s = spec(vec![3]);
        s.offspring = Some(vec![1, 2, 3]);
        let (legal, skipped) = expand(&s).unwrap();
        assert_eq!(legal.len(), 2);
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped[0].0.offspring, 3);
    }

    #[test]
    fn empty_lists_are_errors() {
        assert!(expand(&spec(vec![])).is_err());
        let mut s = spec(vec![3]);
        s.n_s.clear();
        assert!(expand(&s).is_err());
    }

    #[test]
    fn baseline_runs_once_per_label_budget() {
        let mut s = spec(vec![3, 5]);
        s.baseline = true;
        s.n_s = vec![1, 2];
        let (legal, _) = expand(&s).unwrap();
        assert_eq!(legal.iter().filter(|c| c.method == Method::Sslgan).count(), 2);
    }

    #[test]
    fn sweep_file_splits_into_spec_and_base() {
        let text = "[sweep]\npopulation = [3]\ntrain_epochs = [1, 5, 10]\nn_s = [1]\n\n[coevo]\neval_batches = 2\n";
        let (s, base) = parse_sweep(text).unwrap();
        assert_eq!(s.train_epochs, [1, 5, 10]);
        assert!(s.baseline);
        assert_eq!(base.coevo.eval_batches, 2);
        assert!(parse_sweep("[coevo]\neval_batches = 2\n").is_err());
    }

    #[test]
    fn generations_scale_with_training_epochs() {
        let mut s = spec(vec![3]);
        s.offspring = Some(vec![1]);
        s.train_epochs = vec![1, 5, 10];
        let (legal, _) = expand(&s).unwrap();
        let base = RunConfig::default();
        let gens: Vec<usize> = legal.iter().map(|c| c.apply(&base).coevo_config().generations()).collect();
        assert_eq!(gens, [300, 60, 30]);
    }
}
