//! The loss family `recon − (1−α)·KL(q(z|x)‖p(z)) − (α+λ−1)·D(q(z)‖p(z))`
//! and its named special cases.
//!
//! Losses follow the maximization convention: `total` is the quantity to
//! increase, and the trainer descends on `−total`.

use alloc::string::String;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::distributions::{kl_to_standard_batch, rsample_batch};
use crate::divergences::{
    adversarial_divergence, mmd_vstat, standard_normal_score, stein_phi_star, stein_surrogate_loss,
    Discriminator, KernelSpec,
};
use crate::error::{Error, Result};
use crate::models::{BoundModel, DecoderKind};
use crate::nn::AdamConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    None,
    Mmd,
    Stein,
    Adversarial,
}

/// Weights of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub alpha: f64,
    pub lambda: f64,
    pub divergence: DivergenceKind,
    pub likelihood: DecoderKind,
    kl_coef: f64,
    div_coef: f64,
}

impl ObjectiveSpec {
    pub fn new(
        alpha: f64,
        lambda: f64,
        divergence: DivergenceKind,
        likelihood: DecoderKind,
    ) -> Result<Self> {
        if !alpha.is_finite() || !lambda.is_finite() {
            return Err(Error::invalid("alpha and lambda must be finite"));
        }
        if divergence != DivergenceKind::None && lambda <= 0.0 {
            return Err(Error::invalid(alloc::format!(
                "lambda must be positive with a divergence, got {lambda}"
            )));
        }
        Ok(ObjectiveSpec {
            alpha,
            lambda,
            divergence,
            likelihood,
            kl_coef: 1.0 - alpha,
            div_coef: alpha + lambda - 1.0,
        })
    }

    /// Weight `1 − α` of the per-sample KL.
    pub fn kl_coefficient(&self) -> f64 {
        self.kl_coef
    }

    /// Weight `α + λ − 1` of the marginal divergence.
    pub fn divergence_coefficient(&self) -> f64 {
        self.div_coef
    }

    /// True outside `α < 1, λ > 0`, where the global-optimum guarantee for
    /// this family does not apply.
    pub fn outside_guarantee(&self) -> bool {
        !(self.alpha < 1.0 && self.lambda > 0.0)
    }

    /// Errors when the marginal term has weight but no estimator.
    pub fn validate(&self) -> Result<()> {
        if self.divergence == DivergenceKind::None && self.div_coef != 0.0 {
            return Err(Error::invalid(alloc::format!(
                "divergence `none` with marginal coefficient {} (alpha + lambda - 1 must be 0)",
                self.div_coef
            )));
        }
        Ok(())
    }
}

/// The named members of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedObjective {
    Elbo,
    BetaVae(f64),
    Aae,
    InfovaeMmd(f64),
    InfovaeStein(f64),
    Unregularized,
}

impl NamedObjective {
    /// Parses `elbo`, `beta_vae(4)`, `aae`, `infovae_mmd(1000)`,
    /// `infovae_stein(10)` or `unregularized`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(i) if s.ends_with(')') => (&s[..i], Some(&s[i + 1..s.len() - 1])),
            Some(_) => return Err(Error::invalid(alloc::format!("malformed objective `{s}`"))),
            None => (s, None),
        };
        let num = |arg: Option<&str>| -> Result<f64> {
            arg.ok_or_else(|| {
                Error::invalid(alloc::format!("objective `{name}` needs a parameter"))
            })?
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::invalid(alloc::format!("bad parameter in `{s}`")))
        };
        let none = |v: Self| -> Result<Self> {
            match arg {
                None => Ok(v),
                Some(_) => Err(Error::invalid(alloc::format!(
                    "objective `{name}` takes no parameter"
                ))),
            }
        };
        match name {
            "elbo" => none(NamedObjective::Elbo),
            "aae" => none(NamedObjective::Aae),
            "unregularized" | "autoencoder" => none(NamedObjective::Unregularized),
            "beta_vae" => Ok(NamedObjective::BetaVae(num(arg)?)),
            "infovae_mmd" => Ok(NamedObjective::InfovaeMmd(num(arg)?)),
            "infovae_stein" => Ok(NamedObjective::InfovaeStein(num(arg)?)),
            _ => Err(Error::invalid(alloc::format!("unknown objective `{s}`"))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            NamedObjective::Elbo => "elbo".into(),
            NamedObjective::BetaVae(b) => alloc::format!("beta_vae({b})"),
            NamedObjective::Aae => "aae".into(),
            NamedObjective::InfovaeMmd(l) => alloc::format!("infovae_mmd({l})"),
            NamedObjective::InfovaeStein(l) => alloc::format!("infovae_stein({l})"),
            NamedObjective::Unregularized => "unregularized".into(),
        }
    }
}

pub fn make_named_objective(
    name: NamedObjective,
    likelihood: DecoderKind,
) -> Result<ObjectiveSpec> {
    let positive = |v: f64, what: &str| {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::invalid(alloc::format!(
                "{what} must be positive, got {v}"
            )))
        }
    };
    use DivergenceKind as D;
    match name {
        NamedObjective::Elbo => ObjectiveSpec::new(0.0, 1.0, D::None, likelihood),
        NamedObjective::BetaVae(b) => {
            let b = positive(b, "beta")?;
            ObjectiveSpec::new(1.0 - b, b, D::None, likelihood)
        }
        NamedObjective::Aae => ObjectiveSpec::new(1.0, 1.0, D::Adversarial, likelihood),
        NamedObjective::InfovaeMmd(l) => {
            ObjectiveSpec::new(1.0, positive(l, "lambda")?, D::Mmd, likelihood)
        }
        NamedObjective::InfovaeStein(l) => {
            ObjectiveSpec::new(1.0, positive(l, "lambda")?, D::Stein, likelihood)
        }
        NamedObjective::Unregularized => {
            let mut s = ObjectiveSpec::new(1.0, 1.0, D::None, likelihood)?;
            s.kl_coef = 0.0;
            s.div_coef = 0.0;
            Ok(s)
        }
    }
}

/// Scalar values of the loss terms, in nats per sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub per_sample_kl: f64,
    pub marginal_divergence: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `|reconstruction| / |marginal term|`, a guide for choosing λ so the
    /// data-space and latent-space losses have similar size.
    pub fn loss_scale_ratio(&self) -> f64 {
        libm::fabs(self.reconstruction) / libm::fabs(self.marginal_divergence)
    }
}

/// Loss terms as scalar tensors on the tape, plus the latent draws.
#[derive(Debug, Clone)]
pub struct LossTerms {
    pub reconstruction: Tensor,
    pub per_sample_kl: Tensor,
    pub marginal_divergence: Tensor,
    pub total: Tensor,
    /// Reparameterized `z ~ q(z|x)`, one row per batch row.
    pub z: Tensor,
}

impl LossTerms {
    pub fn breakdown(&self) -> LossBreakdown {
        LossBreakdown {
            reconstruction: self.reconstruction.item(),
            per_sample_kl: self.per_sample_kl.item(),
            marginal_divergence: self.marginal_divergence.item(),
            total: self.total.item(),
        }
    }
}

/// Per-run state of the marginal-divergence estimator.
#[derive(Debug, Clone)]
pub struct DivergenceState {
    pub kernel: KernelSpec,
    pub discriminator: Option<Discriminator>,
}

impl DivergenceState {
    pub fn new(
        spec: &ObjectiveSpec,
        latent_dim: usize,
        adam: AdamConfig,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let discriminator = match spec.divergence {
            DivergenceKind::Adversarial => Some(Discriminator::standard(latent_dim, adam, rng)?),
            _ => None,
        };
        Ok(DivergenceState {
            kernel: KernelSpec::default_for_dim(latent_dim),
            discriminator,
        })
    }

    /// One discriminator step on detached samples; a no-op for the other
    /// estimators.
    pub fn update(&mut self, z_q: &Tensor, z_p: &Tensor) -> Result<Option<f64>> {
        match &mut self.discriminator {
            Some(d) => d.train_step(z_q, z_p).map(Some),
            None => Ok(None),
        }
    }
}

struct Parts {
    recon: Tensor,
    kl: Tensor,
    z: Tensor,
}

fn parts(batch: &Tensor, model: &BoundModel<'_>, noise: &Tensor) -> Result<Parts> {
    if noise.rows() != batch.rows() {
        return Err(Error::ShapeMismatch {
            op: "noise rows",
            lhs: batch.shape().to_vec(),
            rhs: noise.shape().to_vec(),
        });
    }
    let (mean, std) = model.encode(batch)?;
    let z = rsample_batch(&mean, &std, noise)?;
    let recon = model.decoder_log_prob(&z, batch)?.mean()?;
    let kl = kl_to_standard_batch(&mean, &std)?.mean()?;
    Ok(Parts { recon, kl, z })
}

/// One-sample reparameterized ELBO with analytic KL.
pub fn elbo_loss(batch: &Tensor, model: &BoundModel<'_>, noise: &Tensor) -> Result<LossTerms> {
    let p = parts(batch, model, noise)?;
    let total = p.recon.sub(&p.kl)?;
    Ok(LossTerms {
        reconstruction: p.recon,
        per_sample_kl: p.kl,
        marginal_divergence: Tensor::scalar(0.0),
        total,
        z: p.z,
    })
}

/// Reconstruction only; the KL is reported but carries no weight.
pub fn autoencoder_loss(
    batch: &Tensor,
    model: &BoundModel<'_>,
    noise: &Tensor,
) -> Result<LossTerms> {
    let p = parts(batch, model, noise)?;
    Ok(LossTerms {
        total: p.recon.clone(),
        reconstruction: p.recon,
        per_sample_kl: p.kl,
        marginal_divergence: Tensor::scalar(0.0),
        z: p.z,
    })
}

/// Estimate of the marginal divergence term between encoder draws `z_q`
/// and prior draws `z_p`. For Stein this is the surrogate whose gradient is
/// the variational direction; for the adversarial estimator it is the
/// generator loss.
pub fn marginal_term(
    z_q: &Tensor,
    z_p: &Tensor,
    divergence: DivergenceKind,
    state: &DivergenceState,
) -> Result<Tensor> {
    match divergence {
        DivergenceKind::None => Ok(Tensor::scalar(0.0)),
        DivergenceKind::Mmd => mmd_vstat(z_q, z_p, &state.kernel),
        DivergenceKind::Stein => {
            let phi = stein_phi_star(z_q, standard_normal_score, &state.kernel)?;
            stein_surrogate_loss(z_q, &phi)
        }
        DivergenceKind::Adversarial => {
            let d = state
                .discriminator
                .as_ref()
                .ok_or_else(|| Error::invalid("adversarial divergence without a discriminator"))?;
            Ok(adversarial_divergence(z_q, z_p, d)?.1)
        }
    }
}

/// The general objective. `prior_samples` are draws from `p(z)`, one per
/// batch row.
pub fn infovae_loss(
    batch: &Tensor,
    model: &BoundModel<'_>,
    prior_samples: &Tensor,
    noise: &Tensor,
    spec: &ObjectiveSpec,
    state: &DivergenceState,
) -> Result<LossTerms> {
    spec.validate()?;
    if spec.likelihood != model.model.decoder_kind() {
        return Err(Error::invalid(alloc::format!(
            "objective likelihood {:?} does not match decoder {:?}",
            spec.likelihood,
            model.model.decoder_kind()
        )));
    }
    if prior_samples.rows() != batch.rows() {
        return Err(Error::ShapeMismatch {
            op: "prior samples",
            lhs: batch.shape().to_vec(),
            rhs: prior_samples.shape().to_vec(),
        });
    }
    let p = parts(batch, model, noise)?;
    let div = if spec.div_coef == 0.0 {
        Tensor::scalar(0.0)
    } else {
        marginal_term(&p.z, prior_samples, spec.divergence, state)?
    };
    let mut total = p.recon.clone();
    if spec.kl_coef != 0.0 {
        total = total.sub(&p.kl.scale(spec.kl_coef)?)?;
    }
    if spec.div_coef != 0.0 {
        total = total.sub(&div.scale(spec.div_coef)?)?;
    }
    Ok(LossTerms {
        reconstruction: p.recon,
        per_sample_kl: p.kl,
        marginal_divergence: div,
        total,
        z: p.z,
    })
}

/// Runs the loss selected by `spec`; unregularized specs use
/// [`autoencoder_loss`].
pub fn objective_loss(
    batch: &Tensor,
    model: &BoundModel<'_>,
    prior_samples: &Tensor,
    noise: &Tensor,
    spec: &ObjectiveSpec,
    state: &DivergenceState,
) -> Result<LossTerms> {
    if spec.kl_coef == 0.0 && spec.div_coef == 0.0 && spec.divergence == DivergenceKind::None {
        return autoencoder_loss(batch, model, noise);
    }
    infovae_loss(batch, model, prior_samples, noise, spec, state)
}

/// Reassembles `total` from a breakdown; used to check the invariant.
pub fn assemble_total(spec: &ObjectiveSpec, b: &LossBreakdown) -> f64 {
    b.reconstruction - spec.kl_coef * b.per_sample_kl - spec.div_coef * b.marginal_divergence
}
