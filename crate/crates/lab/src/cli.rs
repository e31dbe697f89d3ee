//! Command-line interface.
//!
//! Exit status: 0 on success, 2 for usage or configuration errors, 3 for a
//! numerical abort the config did not expect, 1 for anything else
//! (including oracle violations and failed scenario checks).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use infovae_core::diagnostics::run_battery;
use infovae_core::models::ModelPair;
use infovae_core::sampling::{ancestral_sample, markov_chain_sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{OutputFormat, RunConfig};
use crate::error::{LabError, Result};
use crate::oracle::run_oracle;
use crate::run::{load_checkpoint, metrics_csv, read_checkpoint, run_experiment, samples_csv};
use crate::scenarios::{run_scenario, run_sweep, DEFAULT_SEEDS, SCENARIOS, SWEEP_SIZES};

#[derive(Debug, Parser)]
#[command(
    name = "infovae",
    version,
    about = "Train and diagnose InfoVAE-family objectives"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleMethod {
    Ancestral,
    Chain,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a TOML config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// Draw samples from a checkpoint as CSV.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Run config whose data provides the chain's starting point.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ancestral")]
        method: SampleMethod,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        burn_in: usize,
        #[arg(long, default_value_t = 1)]
        thin: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the diagnostics battery on a checkpoint.
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Check the tabular identities on a corpus of random joints.
    Oracle {
        #[arg(long, default_value_t = 1000)]
        corpus_size: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Named experiments.
    Scenarios {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScenarioAction {
    /// Print the named scenarios.
    List,
    /// Run one scenario over several seeds.
    Run {
        name: String,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS)]
        seeds: Vec<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// The logdet-vs-training-set-size sweep.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = SWEEP_SIZES)]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS)]
        seeds: Vec<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 2;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn write_out(out: &mut dyn Write, s: &str) -> Result<()> {
    out.write_all(s.as_bytes())
        .map_err(LabError::io("<stdout>"))
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Train {
            config,
            seed,
            out: dir,
            format,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(d) = dir {
                cfg.out_dir = d;
            }
            if let Some(f) = format {
                cfg.format = f;
            }
            let o = run_experiment(&cfg)?;
            let status = match (&o.manifest.abort, o.manifest.pathology) {
                (None, _) => "completed".to_string(),
                (Some(a), true) => format!("pathology at step {}: {}", a.step, a.message),
                (Some(a), false) => format!("aborted at step {}: {}", a.step, a.message),
            };
            write_out(
                out,
                &format!(
                    "{status}; {} steps; outputs in {}; content hash {}\n",
                    o.steps_completed(),
                    o.out_dir.display(),
                    o.manifest.content_hash
                ),
            )?;
            Ok(o.exit_code())
        }
        Command::Sample {
            checkpoint,
            config,
            method,
            n,
            burn_in,
            thin,
            seed,
            out: file,
        } => {
            let model = load_checkpoint(&checkpoint)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dim = model.data_dim();
            let bytes = match method {
                SampleMethod::Ancestral => {
                    samples_csv(&ancestral_sample(&model, n, &mut rng)?, None, dim)?
                }
                SampleMethod::Chain => {
                    if thin == 0 {
                        return Err(LabError::config("--thin must be positive"));
                    }
                    let init = match config {
                        Some(p) => {
                            let cfg = RunConfig::load(&p)?;
                            cfg.data.load(&cfg.base_dir)?.x.swap_remove(0)
                        }
                        None => ancestral_sample(&model, 1, &mut rng)?.swap_remove(0),
                    };
                    let chain = markov_chain_sample(&model, &init, burn_in, thin, n, &mut rng)?;
                    let (steps, rows): (Vec<u64>, Vec<Vec<f64>>) = chain.into_iter().unzip();
                    samples_csv(&rows, Some(&steps), dim)?
                }
            };
            match file {
                Some(p) => std::fs::write(&p, bytes).map_err(LabError::io(&p))?,
                None => out.write_all(&bytes).map_err(LabError::io("<stdout>"))?,
            }
            Ok(0)
        }
        Command::Diagnose {
            checkpoint,
            config,
            seed,
            format,
        } => {
            let cfg = RunConfig::load(&config)?;
            let ckpt = read_checkpoint(&checkpoint)?;
            let model = ModelPair::from_checkpoint(&ckpt)?;
            let data = cfg.data.load(&cfg.base_dir)?;
            if data.dim() != model.data_dim() {
                return Err(LabError::config(format!(
                    "checkpoint expects {}-D data, config gives {}-D",
                    model.data_dim(),
                    data.dim()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(cfg.seeds().diagnostics));
            let step = ckpt.train_state.as_ref().map_or(0, |t| t.step);
            let rec = run_battery(
                &model,
                &data.x,
                data.labels.as_deref(),
                step,
                &cfg.diagnostics,
                &mut rng,
            )?;
            match format {
                OutputFormat::Csv => out
                    .write_all(&metrics_csv(&[rec])?)
                    .map_err(LabError::io("<stdout>"))?,
                OutputFormat::Json => {
                    write_out(out, &(serde_json::to_string_pretty(&rec)? + "\n"))?
                }
            }
            Ok(0)
        }
        Command::Oracle {
            corpus_size,
            tol,
            seed,
            format,
        } => {
            if corpus_size == 0 || !(tol >= 0.0) {
                return Err(LabError::config(
                    "--corpus-size must be positive and --tol non-negative",
                ));
            }
            let r = run_oracle(corpus_size, tol, seed)?;
            match format {
                OutputFormat::Csv => write_out(out, &r.to_csv())?,
                OutputFormat::Json => write_out(out, &(serde_json::to_string_pretty(&r)? + "\n"))?,
            }
            Ok(if r.violations == 0 { 0 } else { 1 })
        }
        Command::Scenarios { action } => match action {
            ScenarioAction::List => {
                for s in SCENARIOS {
                    write_out(out, &format!("{s}\n"))?;
                }
                Ok(0)
            }
            ScenarioAction::Run {
                name,
                seeds,
                out: dir,
            } => {
                check_seeds(&seeds)?;
                let r = run_scenario(&name, &seeds, &dir)?;
                for s in &r.seeds {
                    let verdict = if s.pass { "pass" } else { "fail" };
                    write_out(
                        out,
                        &format!("{name} seed {}: {verdict} ({})\n", s.seed, s.detail),
                    )?;
                }
                let verdict = if r.pass { "PASS" } else { "FAIL" };
                write_out(
                    out,
                    &format!("{name}: {verdict} ({}/{} seeds)\n", r.passes(), seeds.len()),
                )?;
                Ok(if r.pass { 0 } else { 1 })
            }
            ScenarioAction::Sweep {
                sizes,
                seeds,
                out: dir,
            } => {
                check_seeds(&seeds)?;
                if sizes.is_empty() || sizes.contains(&0) {
                    return Err(LabError::config("--sizes must be positive"));
                }
                let r = run_sweep(&sizes, &seeds, &dir)?;
                write_out(out, &r.to_csv())?;
                Ok(if r.pass() { 0 } else { 1 })
            }
        },
    }
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() || seeds.contains(&0) {
        return Err(LabError::config("--seeds must be positive"));
    }
    Ok(())
}
