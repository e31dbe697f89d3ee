//! Generation and evaluation samplers over any [`LatentModel`]: ancestral
//! sampling, the encode/decode Markov chain, importance-sampled marginal
//! likelihood, and lattice posteriors for latent dimension ≤ 2.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::distributions::{
    gaussian_log_prob, standard_normal_log_prob, standard_normal_vec, uniform01, DiagGaussian,
};
use crate::error::{Error, Result};
use crate::models::ModelPair;
use crate::numeric::{log_sum_exp, CompensatedSum};

/// An encoder distribution `q(z|x)` for one `x`.
pub trait Posterior {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn log_prob(&self, z: &[f64]) -> Result<f64>;
}

impl Posterior for DiagGaussian {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        DiagGaussian::sample(self, rng)
    }

    fn log_prob(&self, z: &[f64]) -> Result<f64> {
        gaussian_log_prob(self, z)
    }
}

/// A latent-variable model `p(z) p(x|z)` with an encoder `q(z|x)`.
///
/// Discrete models encode category indices as one-element vectors.
pub trait LatentModel {
    type Posterior: Posterior;

    fn data_dim(&self) -> usize;
    fn latent_dim(&self) -> usize;
    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn prior_log_prob(&self, z: &[f64]) -> f64;
    fn posterior(&self, x: &[f64]) -> Result<Self::Posterior>;
    fn log_likelihood(&self, x: &[f64], z: &[f64]) -> Result<f64>;
    fn sample_likelihood(&self, z: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>>;
    /// `KL(q(z|x) ‖ p(z))`.
    fn kl_to_prior(&self, x: &[f64]) -> Result<f64>;

    /// `log p(x|z_j)` for many latents; override for batched evaluation.
    fn log_likelihood_many(&self, x: &[f64], zs: &[Vec<f64>]) -> Result<Vec<f64>> {
        zs.iter().map(|z| self.log_likelihood(x, z)).collect()
    }

    /// `q(z|x_i)` for many inputs; override for batched evaluation.
    fn posteriors(&self, xs: &[Vec<f64>]) -> Result<Vec<Self::Posterior>> {
        xs.iter().map(|x| self.posterior(x)).collect()
    }
}

impl LatentModel for ModelPair {
    type Posterior = DiagGaussian;

    fn data_dim(&self) -> usize {
        ModelPair::data_dim(self)
    }

    fn latent_dim(&self) -> usize {
        ModelPair::latent_dim(self)
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        standard_normal_vec(rng, ModelPair::latent_dim(self))
    }

    fn prior_log_prob(&self, z: &[f64]) -> f64 {
        standard_normal_log_prob(z)
    }

    fn posterior(&self, x: &[f64]) -> Result<DiagGaussian> {
        self.encode(x)
    }

    fn log_likelihood(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.decode(z)?.log_prob(x)
    }

    fn sample_likelihood(&self, z: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.decode(z)?.sample(rng)
    }

    fn kl_to_prior(&self, x: &[f64]) -> Result<f64> {
        Ok(crate::distributions::kl_diag_gaussian_to_standard(
            &self.encode(x)?,
        ))
    }

    fn log_likelihood_many(&self, x: &[f64], zs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if zs.is_empty() {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(zs.len());
        for chunk in zs.chunks(4096) {
            let zt = Tensor::from_rows(chunk)?;
            let mut xs = Vec::with_capacity(chunk.len() * x.len());
            for _ in chunk {
                xs.extend_from_slice(x);
            }
            let xt = Tensor::matrix(chunk.len(), x.len(), xs)?;
            out.extend_from_slice(self.bind(None).decoder_log_prob(&zt, &xt)?.values());
        }
        Ok(out)
    }

    fn posteriors(&self, xs: &[Vec<f64>]) -> Result<Vec<DiagGaussian>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(4096) {
            out.extend(self.encode_rows(&Tensor::from_rows(chunk)?)?);
        }
        Ok(out)
    }
}

/// `n` i.i.d. draws of `z ~ p(z)`, `x ~ p(x|z)`.
pub fn ancestral_sample<M: LatentModel>(
    model: &M,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::invalid("ancestral_sample needs n >= 1"));
    }
    (0..n)
        .map(|_| {
            let z = model.sample_prior(rng);
            model.sample_likelihood(&z, rng)
        })
        .collect()
}

/// State of the chain `z ~ q(z|x)`, `x ~ p(x|z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub t: u64,
}

impl ChainState {
    pub fn new<M: LatentModel>(model: &M, init_x: Vec<f64>) -> Result<Self> {
        if init_x.len() != model.data_dim() {
            return Err(Error::DimensionMismatch {
                what: "chain init_x",
                expected: model.data_dim(),
                got: init_x.len(),
            });
        }
        Ok(ChainState {
            x: init_x,
            z: vec![0.0; model.latent_dim()],
            t: 0,
        })
    }

    /// One full transition: encode, then decode.
    pub fn step<M: LatentModel>(&mut self, model: &M, rng: &mut dyn RngCore) -> Result<()> {
        self.z = model.posterior(&self.x)?.sample(rng);
        self.x = model.sample_likelihood(&self.z, rng)?;
        self.t += 1;
        Ok(())
    }
}

/// Runs the chain from `init_x`, discards `burn_in` transitions, then keeps
/// every `thin`-th state until `n` are collected. Each returned state is
/// paired with its transition count.
pub fn markov_chain_sample<M: LatentModel>(
    model: &M,
    init_x: &[f64],
    burn_in: usize,
    thin: usize,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<(u64, Vec<f64>)>> {
    if thin == 0 {
        return Err(Error::invalid("markov_chain_sample needs thin >= 1"));
    }
    let mut state = ChainState::new(model, init_x.to_vec())?;
    for _ in 0..burn_in {
        state.step(model, rng)?;
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..thin {
            state.step(model, rng)?;
        }
        out.push((state.t, state.x.clone()));
    }
    Ok(out)
}

/// `log (1/k) Σ_j p(x|z_j) p(z_j) / q(z_j|x)` with `z_j ~ q(z|x)`.
pub fn importance_log_likelihood<M: LatentModel>(
    model: &M,
    x: &[f64],
    k: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("importance_log_likelihood needs k >= 1"));
    }
    let q = model.posterior(x)?;
    let zs: Vec<Vec<f64>> = (0..k).map(|_| q.sample(rng)).collect();
    let ll = model.log_likelihood_many(x, &zs)?;
    let mut w = Vec::with_capacity(k);
    for (z, l) in zs.iter().zip(ll) {
        w.push(l + model.prior_log_prob(z) - q.log_prob(z)?);
    }
    Ok(log_sum_exp(&w) - libm::log(k as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorMethod {
    Grid,
    SelfNormalizedImportance,
}

/// Half-width of the posterior lattice `[−8, 8]^d`.
pub const LATTICE_HALF_WIDTH: f64 = 8.0;
/// Cells per axis of the posterior lattice.
pub const LATTICE_CELLS: usize = 400;

/// Normalized `p(z|x)` on a regular lattice of cell centers.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    pub dim: usize,
    pub cells: usize,
    pub half_width: f64,
    /// Cell probabilities, first coordinate varying slowest.
    pub probs: Vec<f64>,
    /// `log Σ_cells p(z)p(x|z)·volume`, an estimate of `log p(x)`.
    pub log_evidence: f64,
}

impl GridPosterior {
    pub fn cell_width(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        lattice_point(self.dim, self.cells, self.half_width, index)
    }

    /// Probability mass in the outermost ring of cells.
    pub fn border_mass(&self) -> f64 {
        let c = self.cells;
        self.probs
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let mut r = *i;
                (0..self.dim).any(|_| {
                    let k = r % c;
                    r /= c;
                    k == 0 || k == c - 1
                })
            })
            .map(|(_, p)| p)
            .sum()
    }
}

fn lattice_point(dim: usize, cells: usize, half_width: f64, index: usize) -> Vec<f64> {
    let h = 2.0 * half_width / cells as f64;
    let mut z = vec![0.0; dim];
    let mut r = index;
    for t in (0..dim).rev() {
        z[t] = -half_width + (r % cells) as f64 * h + 0.5 * h;
        r /= cells;
    }
    z
}

/// Evaluates `p(z) p(x|z)` at every lattice cell center and normalizes.
pub fn grid_posterior<M: LatentModel>(
    model: &M,
    x: &[f64],
    cells: usize,
    half_width: f64,
) -> Result<GridPosterior> {
    grid_posterior_with_likelihoods(model, x, cells, half_width).map(|(g, _)| g)
}

/// [`grid_posterior`] plus `log p(x|z)` at every cell center.
pub(crate) fn grid_posterior_with_likelihoods<M: LatentModel>(
    model: &M,
    x: &[f64],
    cells: usize,
    half_width: f64,
) -> Result<(GridPosterior, Vec<f64>)> {
    let dim = model.latent_dim();
    if dim > 2 {
        return Err(Error::Unsupported(alloc::format!(
            "grid posterior needs latent_dim <= 2, got {dim}"
        )));
    }
    let total = cells.pow(dim as u32);
    let zs: Vec<Vec<f64>> = (0..total)
        .map(|i| lattice_point(dim, cells, half_width, i))
        .collect();
    let ll = model.log_likelihood_many(x, &zs)?;
    let logs: Vec<f64> = zs
        .iter()
        .zip(&ll)
        .map(|(z, l)| model.prior_log_prob(z) + l)
        .collect();
    let norm = log_sum_exp(&logs);
    if !norm.is_finite() {
        return Err(Error::NonFinite("grid posterior normalizer".into()));
    }
    let probs = logs.iter().map(|l| libm::exp(l - norm)).collect();
    let vol = libm::pow(2.0 * half_width / cells as f64, dim as f64);
    let g = GridPosterior {
        dim,
        cells,
        half_width,
        probs,
        log_evidence: norm + libm::log(vol),
    };
    Ok((g, ll))
}

/// Approximate draws from `p(z|x) ∝ p(z) p(x|z)`.
///
/// `Grid` samples cell centers of the default lattice; `latent_dim > 2` is
/// an error. `SelfNormalizedImportance` resamples `max(1000, 10n)` encoder
/// proposals by their importance weights.
pub fn true_posterior_samples<M: LatentModel>(
    model: &M,
    x: &[f64],
    n: usize,
    method: PosteriorMethod,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::invalid("true_posterior_samples needs n >= 1"));
    }
    match method {
        PosteriorMethod::Grid => {
            let g = grid_posterior(model, x, LATTICE_CELLS, LATTICE_HALF_WIDTH)?;
            let idx = categorical_many(&g.probs, n, rng);
            Ok(idx.into_iter().map(|i| g.center(i)).collect())
        }
        PosteriorMethod::SelfNormalizedImportance => {
            let q = model.posterior(x)?;
            let m = (10 * n).max(1000);
            let zs: Vec<Vec<f64>> = (0..m).map(|_| q.sample(rng)).collect();
            let ll = model.log_likelihood_many(x, &zs)?;
            let mut lw = Vec::with_capacity(m);
            for (z, l) in zs.iter().zip(ll) {
                lw.push(l + model.prior_log_prob(z) - q.log_prob(z)?);
            }
            let norm = log_sum_exp(&lw);
            let w: Vec<f64> = lw.iter().map(|l| libm::exp(l - norm)).collect();
            Ok(categorical_many(&w, n, rng)
                .into_iter()
                .map(|i| zs[i].clone())
                .collect())
        }
    }
}

/// `n` draws from unnormalized nonnegative weights by inverse CDF.
pub(crate) fn categorical_many(weights: &[f64], n: usize, rng: &mut dyn RngCore) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = CompensatedSum::new();
    for w in weights {
        acc.add(*w);
        cdf.push(acc.value());
    }
    let total = acc.value();
    (0..n)
        .map(|_| {
            let u = uniform01(rng) * total;
            cdf.partition_point(|c| *c <= u).min(weights.len() - 1)
        })
        .collect()
}
