use std::path::PathBuf;

use anyhow::{bail, Context};
use cesslgan::checkpoint::Checkpoint;
use cesslgan::config::{Method, Preset, RunConfig};
use cesslgan::dataset;
use cesslgan::experiment::run_experiment;
use cesslgan::format::sig9;
use cesslgan::sweep::{load_sweep_file, run_sweep};
use cesslgan_core::metrics::evaluate_networks;
use cesslgan_core::RngStream;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cesslgan", version, about = "CE-SSLGAN and SSL-GAN experiments on 2-D mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Applied on top of the config file.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Master seed (split seed for eval and gen-data).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads, 0 = one per core.
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        self.apply(&mut c);
        Ok(c)
    }

    fn apply(&self, c: &mut RunConfig) {
        if let Some(p) = self.preset {
            c.apply_preset(p);
        }
        if let Some(s) = self.seed {
            c.experiment.seed = s;
        }
        if let Some(r) = self.reps {
            c.experiment.repetitions = r;
        }
        if let Some(w) = self.workers {
            c.experiment.workers = w;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every repetition of one config.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sweep file (`[sweep]` plus base config sections).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score saved networks on the config's test split; prints one CSV row.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        generator: PathBuf,
        #[arg(long)]
        discriminator: PathBuf,
        /// Value for the epoch column.
        #[arg(long, default_value_t = 0)]
        epoch: usize,
    },
    /// Write train.csv and test.csv for the config's dataset.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "sslgan" => Ok(Method::Sslgan),
        "cesslgan" => Ok(Method::Cesslgan),
        _ => Err(format!("unknown method {s:?}")),
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train { common, method, out } => {
            let mut config = common.load()?;
            if let Some(m) = method {
                config.experiment.method = m;
            }
            let report = run_experiment(&config, &out)?;
            let failed = report.reps.len() - report.completed().count();
            if let Some(s) = report.accuracy {
                println!("accuracy median {} iqr {}", sig9(s.median), sig9(s.iqr));
            }
            if let Some(s) = report.w1 {
                println!("w1 median {} iqr {}", sig9(s.median), sig9(s.iqr));
            }
            if failed > 0 {
                bail!("{failed} repetition(s) failed, see {}", out.join("runs.csv").display());
            }
        }
        Command::Sweep { common, out } => {
            let path = common.config.as_ref().context("sweep needs --config")?;
            let (spec, mut base) = load_sweep_file(path)?;
            common.apply(&mut base);
            let entries = run_sweep(&spec, &base, &out)?;
            let failed = entries.iter().filter(|e| e.outcome.is_err()).count();
            println!("{} combination(s), index at {}", entries.len(), out.join("index.csv").display());
            if failed > 0 {
                bail!("{failed} combination(s) failed");
            }
        }
        Command::Eval {
            common,
            generator,
            discriminator,
            epoch,
        } => {
            let config = common.load()?.resolved();
            let data = dataset::load(&config.dataset)?;
            let ssl = data.ssl(config.dataset.n_s, config.experiment.seed)?;
            let g = Checkpoint::load(&generator)?
                .into_generator()
                .map_err(|_| anyhow::anyhow!("{} is not a generator", generator.display()))?;
            let d = Checkpoint::load(&discriminator)?
                .into_discriminator()
                .map_err(|_| anyhow::anyhow!("{} is not a discriminator", discriminator.display()))?;
            let mut rng = RngStream::new(config.experiment.seed, 0);
            let r = evaluate_networks(&g, &d, &ssl.test, epoch, &config.metrics_config(), &mut rng)?;
            println!("epoch,accuracy,w1,fid");
            println!(
                "{},{},{},{}",
                r.epoch,
                sig9(r.accuracy),
                r.w1.map(sig9).unwrap_or_default(),
                r.fid.map(sig9).unwrap_or_default()
            );
        }
        Command::GenData { common, out } => {
            let config = common.load()?.resolved();
            let data = dataset::load(&config.dataset)?;
            let ssl = data.ssl(config.dataset.n_s, config.experiment.seed)?;
            dataset::export(&out, &ssl)?;
            println!("wrote {} and {}", out.join("train.csv").display(), out.join("test.csv").display());
        }
    }
    Ok(())
}
