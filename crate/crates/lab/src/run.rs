//! Training runs and their on-disk artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use infovae_core::data::Dataset;
use infovae_core::diagnostics::{run_battery, MetricsRecord};
use infovae_core::error::Error as CoreError;
use infovae_core::models::{Checkpoint, ModelPair};
use infovae_core::objectives::ObjectiveSpec;
use infovae_core::sampling::{ancestral_sample, markov_chain_sample};
use infovae_core::train::Trainer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{OutputFormat, RunConfig};
use crate::error::{LabError, Result};

pub const METRICS_CSV: &str = "metrics.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const ANCESTRAL_SAMPLES: &str = "samples_ancestral.csv";
pub const CHAIN_SAMPLES: &str = "samples_chain.csv";
pub const EFFECTIVE_CONFIG: &str = "config.toml";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    /// The step whose loss or gradient was not finite.
    pub step: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub rows: usize,
    pub dim: usize,
    pub labeled: bool,
    pub binarized: bool,
}

impl DatasetSummary {
    fn of(d: &Dataset) -> Self {
        DatasetSummary {
            name: d.name.clone(),
            rows: d.len(),
            dim: d.dim(),
            labeled: d.labels.is_some(),
            binarized: d.binarized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub objective: ObjectiveSpec,
    pub dataset: DatasetSummary,
    pub steps_completed: u64,
    pub abort: Option<Abort>,
    /// Set when the run aborted and the config expected it to.
    pub pathology: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_error: Option<String>,
    /// File name → git-style SHA-256 object id.
    pub outputs: BTreeMap<String, String>,
    /// SHA-256 over the sorted `<id>  <name>` lines of `outputs`.
    pub content_hash: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub model: ModelPair,
    pub metrics: Vec<MetricsRecord>,
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn steps_completed(&self) -> u64 {
        self.manifest.steps_completed
    }

    pub fn aborted(&self) -> bool {
        self.manifest.abort.is_some()
    }

    /// Exit status for the CLI: a numerical abort that was not expected is 3.
    pub fn exit_code(&self) -> i32 {
        if self.aborted() && !self.manifest.pathology {
            3
        } else {
            0
        }
    }

    /// `(step, value)` of one metric over the logged records.
    pub fn series(&self, metric: &str) -> Vec<(u64, f64)> {
        self.metrics
            .iter()
            .filter_map(|r| r.get(metric).map(|v| (r.step, v.to_f64())))
            .collect()
    }

    pub fn final_metric(&self, metric: &str) -> Option<f64> {
        self.series(metric).last().map(|&(_, v)| v)
    }
}

/// `sha256("blob <len>\0" ‖ bytes)`, the object id git uses in SHA-256 repositories.
pub fn git_object_id(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn content_hash(outputs: &BTreeMap<String, String>) -> String {
    let mut h = Sha256::new();
    for (name, id) in outputs {
        h.update(format!("{id}  {name}\n").as_bytes());
    }
    hex(&h.finalize())
}

fn is_numerical(e: &CoreError) -> bool {
    matches!(e, CoreError::NonFinite(_))
}

fn write_file(
    dir: &Path,
    name: &str,
    bytes: &[u8],
    outputs: &mut BTreeMap<String, String>,
) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(LabError::io(&path))?;
    outputs.insert(name.to_string(), git_object_id(bytes));
    Ok(())
}

/// Long-format `step,metric,value` table.
pub fn metrics_csv(records: &[MetricsRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "metric", "value"])?;
    for r in records {
        for (name, v) in &r.values {
            w.write_record([r.step.to_string(), name.clone(), v.to_string()])?;
        }
    }
    w.into_inner().map_err(|e| LabError::Io {
        path: METRICS_CSV.into(),
        source: e.into_error(),
    })
}

pub fn samples_csv(rows: &[Vec<f64>], steps: Option<&[u64]>, dim: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = Vec::new();
    if steps.is_some() {
        header.push("step".into());
    }
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec: Vec<String> = Vec::with_capacity(row.len() + 1);
        if let Some(s) = steps {
            rec.push(s[i].to_string());
        }
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| LabError::Io {
        path: "samples".into(),
        source: e.into_error(),
    })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let s = fs::read_to_string(path).map_err(LabError::io(path))?;
    serde_json::from_str(&s).map_err(|e| LabError::format(path, e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelPair> {
    Ok(ModelPair::from_checkpoint(&read_checkpoint(path)?)?)
}

/// Trains per `cfg`, logging the diagnostics battery at step 0 and every
/// `eval_every` steps, then writes metrics, checkpoint, samples and a
/// manifest into `cfg.out_dir`.
///
/// A non-finite loss, gradient or metric stops training; the model keeps
/// its last good parameters and the artifacts are still written.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let data = cfg.data.load(&cfg.base_dir)?;
    cfg.check_data(&data)?;
    let spec = cfg.objective.resolve(cfg.model.decoder)?;
    let seeds = cfg.seeds();
    let model = ModelPair::new(cfg.model.to_model_config(data.dim()), seeds.model)?;
    let mut trainer = Trainer::new(model, spec, &cfg.train_config())?;
    let labels = data.labels.as_deref();
    let mut diag_rng = ChaCha8Rng::seed_from_u64(seeds.diagnostics);
    let mut records: Vec<MetricsRecord> = Vec::new();
    let mut abort: Option<Abort> = None;
    let mut completed = 0u64;

    match run_battery(
        trainer.model(),
        &data.x,
        labels,
        0,
        &cfg.diagnostics,
        &mut diag_rng,
    ) {
        Ok(r) => records.push(r),
        Err(e) if is_numerical(&e) => {
            abort = Some(Abort {
                step: 0,
                message: e.to_string(),
            })
        }
        Err(e) => return Err(e.into()),
    }
    if abort.is_none() {
        for step in 1..=cfg.steps {
            trainer.set_learning_rate(cfg.learning_rate_at(step))?;
            match trainer.step(&data.x) {
                Ok(_) => completed = step,
                Err(e) if is_numerical(&e) => {
                    abort = Some(Abort {
                        step,
                        message: e.to_string(),
                    });
                    break;
                }
                Err(e) => return Err(e.into()),
            }
            if step % cfg.eval_every == 0 {
                match run_battery(
                    trainer.model(),
                    &data.x,
                    labels,
                    step,
                    &cfg.diagnostics,
                    &mut diag_rng,
                ) {
                    Ok(r) => records.push(r),
                    Err(e) if is_numerical(&e) => {
                        abort = Some(Abort {
                            step,
                            message: format!("diagnostics: {e}"),
                        });
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    if abort.is_some() && records.last().map(|r| r.step) != Some(completed) {
        if let Ok(r) = run_battery(
            trainer.model(),
            &data.x,
            labels,
            completed,
            &cfg.diagnostics,
            &mut diag_rng,
        ) {
            records.push(r);
        }
    }

    let out = cfg.out_dir.clone();
    fs::create_dir_all(&out).map_err(LabError::io(&out))?;
    let mut outputs = BTreeMap::new();
    write_file(&out, METRICS_CSV, &metrics_csv(&records)?, &mut outputs)?;
    if cfg.format == OutputFormat::Json {
        write_file(
            &out,
            METRICS_JSON,
            &serde_json::to_vec_pretty(&records)?,
            &mut outputs,
        )?;
    }
    let ckpt = trainer.model().checkpoint(Some(trainer.state()));
    write_file(&out, CHECKPOINT, &serde_json::to_vec(&ckpt)?, &mut outputs)?;
    write_file(
        &out,
        EFFECTIVE_CONFIG,
        cfg.to_toml().as_bytes(),
        &mut outputs,
    )?;

    let mut sample_rng = ChaCha8Rng::seed_from_u64(seeds.samples);
    let model = trainer.model();
    let mut sample_error = None;
    let ancestral = if cfg.samples.ancestral > 0 {
        ancestral_sample(model, cfg.samples.ancestral, &mut sample_rng)
    } else {
        Ok(Vec::new())
    };
    let chain = if cfg.samples.chain > 0 {
        markov_chain_sample(
            model,
            &data.x[0],
            cfg.samples.burn_in,
            cfg.samples.thin,
            cfg.samples.chain,
            &mut sample_rng,
        )
    } else {
        Ok(Vec::new())
    };
    let ancestral = ancestral.unwrap_or_else(|e| {
        sample_error = Some(format!("ancestral: {e}"));
        Vec::new()
    });
    let chain = chain.unwrap_or_else(|e| {
        sample_error = Some(format!("chain: {e}"));
        Vec::new()
    });
    write_file(
        &out,
        ANCESTRAL_SAMPLES,
        &samples_csv(&ancestral, None, data.dim())?,
        &mut outputs,
    )?;
    let (steps, rows): (Vec<u64>, Vec<Vec<f64>>) = chain.into_iter().unzip();
    write_file(
        &out,
        CHAIN_SAMPLES,
        &samples_csv(&rows, Some(&steps), data.dim())?,
        &mut outputs,
    )?;

    let pathology = abort.is_some() && cfg.expect_pathology;
    let content_hash = content_hash(&outputs);
    let manifest = Manifest {
        config: cfg.clone(),
        objective: spec,
        dataset: DatasetSummary::of(&data),
        steps_completed: completed,
        abort,
        pathology,
        sample_error,
        outputs,
        content_hash,
    };
    let path = out.join(MANIFEST);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(LabError::io(&path))?;
    Ok(RunOutcome {
        out_dir: out,
        model: trainer.into_model(),
        metrics: records,
        manifest,
    })
}
