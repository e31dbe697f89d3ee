//! TOML run configuration.
//!
//! Every section rejects unknown keys. Missing keys take the defaults
//! below, and [`RunConfig::to_toml`] writes the complete effective
//! configuration back out.
//!
//! ```toml
//! seed = 1
//! steps = 2000
//! eval_every = 500
//! out_dir = "runs/mixture"
//!
//! [objective]
//! name = "infovae_mmd(1000)"    # or: alpha = 0.0, lambda = 500.0, divergence = "mmd"
//!
//! [model]
//! latent_dim = 2
//! decoder = "gaussian"
//!
//! [data]
//! source = "mixture"
//! k = 4
//! n = 1000
//! sep = 5.0
//! seed = 3
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use infovae_core::data::{self, Dataset};
use infovae_core::diagnostics::BatteryConfig;
use infovae_core::distributions::{PositivityMap, ScaleMap};
use infovae_core::models::{DecoderKind, ModelConfig};
use infovae_core::nn::AdamConfig;
use infovae_core::objectives::{
    make_named_objective, DivergenceKind, NamedObjective, ObjectiveSpec,
};
use infovae_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::datasets;
use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; model, training, diagnostics and sampling streams are
    /// derived from it.
    #[serde(default = "one")]
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    /// A non-finite loss is the expected outcome of this run.
    #[serde(default)]
    pub expect_pathology: bool,
    pub objective: ObjectiveConfig,
    pub model: ModelSection,
    pub data: DataConfig,
    #[serde(default)]
    pub optim: OptimConfig,
    #[serde(default)]
    pub diagnostics: BatteryConfig,
    #[serde(default)]
    pub samples: SampleConfig,
    /// Directory that relative data paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> u64 {
    1
}

fn default_steps() -> u64 {
    1000
}

fn default_eval_every() -> u64 {
    100
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

/// Either a named objective or explicit `alpha`, `lambda`, `divergence`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceKind>,
}

impl ObjectiveConfig {
    pub fn named(name: &str) -> Self {
        ObjectiveConfig {
            name: Some(name.into()),
            ..Default::default()
        }
    }

    pub fn explicit(alpha: f64, lambda: f64, divergence: DivergenceKind) -> Self {
        ObjectiveConfig {
            name: None,
            alpha: Some(alpha),
            lambda: Some(lambda),
            divergence: Some(divergence),
        }
    }

    pub fn resolve(&self, likelihood: DecoderKind) -> Result<ObjectiveSpec> {
        let explicit = (self.alpha, self.lambda, self.divergence);
        match (&self.name, explicit) {
            (Some(name), (None, None, None)) => {
                let named =
                    NamedObjective::parse(name).map_err(|e| LabError::config(e.to_string()))?;
                make_named_objective(named, likelihood).map_err(|e| LabError::config(e.to_string()))
            }
            (None, (Some(a), Some(l), Some(d))) => {
                ObjectiveSpec::new(a, l, d, likelihood).map_err(|e| LabError::config(e.to_string()))
            }
            (Some(_), _) => Err(LabError::config(
                "objective: give either `name` or `alpha`/`lambda`/`divergence`, not both",
            )),
            (None, _) => Err(LabError::config(
                "objective: needs `name` or all of `alpha`, `lambda`, `divergence`",
            )),
        }
    }

    pub fn label(&self) -> String {
        match (&self.name, self.alpha, self.lambda, self.divergence) {
            (Some(n), ..) => n.clone(),
            (None, Some(a), Some(l), Some(d)) => format!("alpha={a},lambda={l},divergence={d:?}"),
            _ => "invalid".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub latent_dim: usize,
    pub decoder: DecoderKind,
    #[serde(default = "default_hidden")]
    pub encoder_hidden: Vec<usize>,
    #[serde(default = "default_hidden")]
    pub decoder_hidden: Vec<usize>,
    /// Lower clamp on every standard deviation; 0 lets scales collapse.
    #[serde(default = "default_scale_floor")]
    pub scale_floor: f64,
    #[serde(default = "default_positivity")]
    pub positivity: PositivityMap,
    #[serde(default)]
    pub zero_init_encoder_output: bool,
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn default_scale_floor() -> f64 {
    ScaleMap::default().floor
}

fn default_positivity() -> PositivityMap {
    PositivityMap::Softplus
}

impl ModelSection {
    pub fn new(latent_dim: usize, decoder: DecoderKind) -> Self {
        ModelSection {
            latent_dim,
            decoder,
            encoder_hidden: default_hidden(),
            decoder_hidden: default_hidden(),
            scale_floor: default_scale_floor(),
            positivity: default_positivity(),
            zero_init_encoder_output: false,
        }
    }

    pub fn to_model_config(&self, data_dim: usize) -> ModelConfig {
        let mut c = ModelConfig::new(data_dim, self.latent_dim, self.decoder);
        c.encoder_hidden = self.encoder_hidden.clone();
        c.decoder_hidden = self.decoder_hidden.clone();
        c.scale = ScaleMap {
            map: self.positivity,
            floor: self.scale_floor,
        };
        c.zero_init_encoder_output = self.zero_init_encoder_output;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// The points `{−1, 1}`.
    TwoPoint,
    /// Labeled 2-D Gaussian clusters on a circle.
    Mixture {
        k: usize,
        n: usize,
        sep: f64,
        seed: u64,
    },
    /// Labeled noisy copies of random binary prototypes.
    Prototypes {
        k: usize,
        dim: usize,
        n: usize,
        flip: f64,
        seed: u64,
    },
    /// Synthetic 8×8 digits, stochastically binarized unless `binarize = false`.
    /// `size` keeps the first rows, so smaller sizes are nested subsets.
    Digits {
        n: usize,
        seed: u64,
        #[serde(default)]
        size: Option<usize>,
        #[serde(default = "yes")]
        binarize: bool,
    },
    Idx {
        images: PathBuf,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default)]
        size: Option<usize>,
        #[serde(default = "yes")]
        binarize: bool,
        #[serde(default = "one")]
        seed: u64,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        size: Option<usize>,
        #[serde(default = "yes")]
        binarize: bool,
        #[serde(default = "one")]
        seed: u64,
    },
}

fn yes() -> bool {
    true
}

impl DataConfig {
    fn check(&self) -> Result<()> {
        let positive = |v: usize, what: &str| {
            if v == 0 {
                Err(LabError::config(format!("data.{what} must be positive")))
            } else {
                Ok(())
            }
        };
        let seed_ok = |s: u64| {
            if s == 0 {
                Err(LabError::config("data.seed must be positive"))
            } else {
                Ok(())
            }
        };
        match *self {
            DataConfig::TwoPoint => Ok(()),
            DataConfig::Mixture { k, n, seed, .. } => {
                positive(k, "k")?;
                positive(n, "n")?;
                seed_ok(seed)
            }
            DataConfig::Prototypes {
                k, dim, n, seed, ..
            } => {
                positive(k, "k")?;
                positive(dim, "dim")?;
                positive(n, "n")?;
                seed_ok(seed)
            }
            DataConfig::Digits { n, seed, size, .. } => {
                positive(n, "n")?;
                if let Some(s) = size {
                    positive(s, "size")?;
                }
                seed_ok(seed)
            }
            DataConfig::Idx { size, seed, .. } | DataConfig::Csv { size, seed, .. } => {
                if let Some(s) = size {
                    positive(s, "size")?;
                }
                seed_ok(seed)
            }
        }
    }

    /// Builds the dataset; file paths are resolved against `base`.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        let bad = |e: infovae_core::error::Error| LabError::config(format!("data: {e}"));
        let finish =
            |d: Dataset, size: Option<usize>, binarize: bool, seed: u64| -> Result<Dataset> {
                let d = match size {
                    Some(s) => d.take(s).map_err(bad)?,
                    None => d,
                };
                if binarize {
                    Ok(data::binarize_stochastic(&d, seed)?)
                } else {
                    Ok(d)
                }
            };
        match self {
            DataConfig::TwoPoint => Ok(data::two_point_dataset()),
            DataConfig::Mixture { k, n, sep, seed } => {
                data::synthetic_mixture(*k, *n, *sep, *seed).map_err(bad)
            }
            DataConfig::Prototypes {
                k,
                dim,
                n,
                flip,
                seed,
            } => data::binary_prototypes(*k, *dim, *n, *flip, *seed).map_err(bad),
            DataConfig::Digits {
                n,
                seed,
                size,
                binarize,
            } => {
                let d = data::synthetic_digits(*n, *seed).map_err(bad)?;
                finish(d, *size, *binarize, seed.wrapping_add(1))
            }
            DataConfig::Idx {
                images,
                labels,
                size,
                binarize,
                seed,
            } => {
                let labels = labels.as_ref().map(|l| base.join(l));
                let d = datasets::load_digits_idx(&base.join(images), labels.as_deref())?;
                finish(d, *size, *binarize, *seed)
            }
            DataConfig::Csv {
                path,
                size,
                binarize,
                seed,
            } => finish(
                datasets::load_csv(&base.join(path))?,
                *size,
                *binarize,
                *seed,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    /// Learning-rate multiplier reached at the last step, applied
    /// geometrically; 1 keeps the rate constant.
    pub lr_decay: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        let a = AdamConfig::default();
        OptimConfig {
            learning_rate: a.learning_rate,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
            batch_size: 100,
            lr_decay: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub ancestral: usize,
    pub chain: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            ancestral: 100,
            chain: 100,
            burn_in: 100,
            thin: 1,
        }
    }
}

/// Independent stream seeds derived from the master seed.
#[derive(Debug, Clone, Copy)]
pub struct Seeds {
    pub model: u64,
    pub train: u64,
    pub diagnostics: u64,
    pub samples: u64,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| LabError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path)
            .map_err(|e| LabError::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&s)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// The full effective configuration, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed == 0 {
            return Err(LabError::config("seed must be positive"));
        }
        if self.steps == 0 || self.eval_every == 0 {
            return Err(LabError::config("steps and eval_every must be positive"));
        }
        if self.optim.batch_size == 0 {
            return Err(LabError::config("optim.batch_size must be positive"));
        }
        if !(self.optim.learning_rate > 0.0 && self.optim.learning_rate.is_finite()) {
            return Err(LabError::config("optim.learning_rate must be positive"));
        }
        if !(self.optim.lr_decay > 0.0 && self.optim.lr_decay <= 1.0) {
            return Err(LabError::config("optim.lr_decay must be in (0, 1]"));
        }
        if self.samples.thin == 0 {
            return Err(LabError::config("samples.thin must be positive"));
        }
        if self.model.latent_dim == 0 {
            return Err(LabError::config("model.latent_dim must be positive"));
        }
        let d = &self.diagnostics;
        if d.max_points == 0
            || d.samples_per_x == 0
            || d.mi_mixture == 0
            || d.mi_samples == 0
            || d.ll_samples == 0
        {
            return Err(LabError::config("diagnostics sizes must be positive"));
        }
        if !(d.probe_fraction > 0.0 && d.probe_fraction < 1.0) {
            return Err(LabError::config(
                "diagnostics.probe_fraction must be in (0, 1)",
            ));
        }
        self.data.check()?;
        if matches!(self.data, DataConfig::TwoPoint) && self.model.decoder != DecoderKind::Gaussian
        {
            return Err(LabError::config(
                "two_point data needs the gaussian decoder",
            ));
        }
        self.objective.resolve(self.model.decoder)?;
        let m = &self.model;
        if m.encoder_hidden.contains(&0) || m.decoder_hidden.contains(&0) {
            return Err(LabError::config("model: hidden sizes must be positive"));
        }
        if !(m.scale_floor >= 0.0 && m.scale_floor.is_finite()) {
            return Err(LabError::config(
                "model.scale_floor must be finite and >= 0",
            ));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Seeds {
        let s = self.seed;
        Seeds {
            model: s,
            train: s.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1),
            diagnostics: s.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(2),
            samples: s.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(3),
        }
    }

    /// Learning rate for training step `step` (1-based).
    pub fn learning_rate_at(&self, step: u64) -> f64 {
        let o = &self.optim;
        if o.lr_decay == 1.0 {
            return o.learning_rate;
        }
        let t = (step - 1) as f64 / self.steps.max(2).saturating_sub(1) as f64;
        o.learning_rate * o.lr_decay.powf(t.min(1.0))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.optim.batch_size,
            adam: AdamConfig {
                learning_rate: self.optim.learning_rate,
                beta1: self.optim.beta1,
                beta2: self.optim.beta2,
                eps: self.optim.eps,
            },
            seed: self.seeds().train,
        }
    }

    /// Checks the loaded data against the decoder.
    pub fn check_data(&self, d: &Dataset) -> Result<()> {
        if self.model.decoder != DecoderKind::Gaussian && !d.binarized {
            return Err(LabError::config(format!(
                "{:?} decoder needs binary data; `{}` is not binarized",
                self.model.decoder, d.name
            )));
        }
        self.model
            .to_model_config(d.dim())
            .validate()
            .map_err(|e| LabError::config(format!("model: {e}")))
    }
}
