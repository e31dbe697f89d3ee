//! Encoder/decoder pairs: a Gaussian MLP encoder with a Gaussian MLP,
//! Bernoulli MLP or masked autoregressive (MADE-style) Bernoulli decoder.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor};
use crate::distributions::{
    bernoulli_log_prob, bernoulli_log_prob_batch, gaussian_log_prob, gaussian_log_prob_batch,
    uniform01, BernoulliVector, DiagGaussian, ScaleMap, LOGIT_CLAMP,
};
use crate::error::{Error, Result};
use crate::nn::{Linear, Mlp, ParamId, ParamRecord, ParamSet, TrainState};
use crate::numeric::sigmoid;

/// Version written into every checkpoint.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Gaussian,
    Bernoulli,
    Autoregressive,
}

/// Architecture of a [`ModelPair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub data_dim: usize,
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub decoder: DecoderKind,
    /// Standard-deviation map for the encoder and the Gaussian decoder.
    pub scale: ScaleMap,
    /// Start the encoder's output layer at zero, so `q(z|x)` is initially
    /// the same for every `x`.
    #[serde(default)]
    pub zero_init_encoder_output: bool,
}

impl ModelConfig {
    /// Two tanh layers of 64 units on both sides.
    pub fn new(data_dim: usize, latent_dim: usize, decoder: DecoderKind) -> Self {
        ModelConfig {
            data_dim,
            latent_dim,
            encoder_hidden: vec![64, 64],
            decoder_hidden: vec![64, 64],
            decoder,
            scale: ScaleMap::default(),
            zero_init_encoder_output: false,
        }
    }

    pub fn with_hidden(mut self, hidden: &[usize]) -> Self {
        self.encoder_hidden = hidden.to_vec();
        self.decoder_hidden = hidden.to_vec();
        self
    }

    pub fn with_scale(mut self, scale: ScaleMap) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_dim == 0 || self.latent_dim == 0 {
            return Err(Error::invalid("data_dim and latent_dim must be positive"));
        }
        if self.encoder_hidden.contains(&0) || self.decoder_hidden.contains(&0) {
            return Err(Error::invalid("hidden sizes must be positive"));
        }
        if self.decoder == DecoderKind::Autoregressive && self.data_dim < 2 {
            return Err(Error::invalid("autoregressive decoder needs data_dim >= 2"));
        }
        if !(self.scale.floor >= 0.0 && self.scale.floor.is_finite()) {
            return Err(Error::invalid("scale floor must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Masked autoregressive decoder over binary vectors, conditioned on `z`.
///
/// Coordinates use the natural order. Hidden unit `k` carries degree
/// `(k mod (D−1)) + 1`; masks let output `i` see `x_j` only for `j < i`.
/// The latent input is unmasked.
#[derive(Debug, Clone)]
pub struct Made {
    data_dim: usize,
    hidden: Vec<Linear>,
    hidden_masks: Vec<Tensor>,
    z_in: ParamId,
    out: Linear,
    out_mask: Tensor,
    direct: ParamId,
    direct_mask: Tensor,
    z_out: ParamId,
}

fn masked_init(params: &mut ParamSet, id: ParamId, mask: &Tensor) {
    let v = params
        .get(id)
        .values()
        .iter()
        .zip(mask.values())
        .map(|(w, m)| w * m)
        .collect();
    let shape = params.get(id).shape().to_vec();
    params
        .set(id, Tensor::from_parts(shape, v))
        .expect("same shape");
}

fn mask(rows: &[usize], cols: &[usize], allow: impl Fn(usize, usize) -> bool) -> Tensor {
    let v = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
        .map(|(r, c)| if allow(r, c) { 1.0 } else { 0.0 })
        .collect();
    Tensor::from_parts(vec![rows.len(), cols.len()], v)
}

impl Made {
    fn new(
        params: &mut ParamSet,
        data_dim: usize,
        latent_dim: usize,
        hidden: &[usize],
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let d = data_dim;
        let input_deg: Vec<usize> = (1..=d).collect();
        let mut prev_deg = input_deg.clone();
        let mut prev_width = d;
        let mut layers = Vec::new();
        let mut masks = Vec::new();
        for (i, &h) in hidden.iter().enumerate() {
            let deg: Vec<usize> = (0..h).map(|k| (k % (d - 1)) + 1).collect();
            let layer = Linear::new(
                params,
                &alloc::format!("dec.{i}"),
                prev_width,
                h,
                false,
                rng,
            );
            let m = mask(&prev_deg, &deg, |a, b| b >= a);
            masked_init(params, layer.weight, &m);
            layers.push(layer);
            masks.push(m);
            prev_deg = deg;
            prev_width = h;
        }
        let first_width = hidden.first().copied().unwrap_or(d);
        let z_in = Linear::new(params, "dec.z_in", latent_dim, first_width, false, rng).weight;
        let out = Linear::new(params, "dec.out", prev_width, d, false, rng);
        // With no hidden layers the output layer reads x directly, which the
        // strictly-lower direct connection already covers.
        let out_mask = if hidden.is_empty() {
            mask(&prev_deg, &input_deg, |_, _| false)
        } else {
            mask(&prev_deg, &input_deg, |a, b| b > a)
        };
        masked_init(params, out.weight, &out_mask);
        let direct = Linear::new(params, "dec.direct", d, d, false, rng).weight;
        let direct_mask = mask(&input_deg, &input_deg, |a, b| a < b);
        masked_init(params, direct, &direct_mask);
        let z_out = Linear::new(params, "dec.z_out", latent_dim, d, false, rng).weight;
        Ok(Made {
            data_dim: d,
            hidden: layers,
            hidden_masks: masks,
            z_in,
            out,
            out_mask,
            direct,
            direct_mask,
            z_out,
        })
    }

    /// Conditional logits `[B, D]`; column `i` depends on `x[:, ..i]` and `z`.
    pub fn logits(&self, p: &[Tensor], x: &Tensor, z: &Tensor) -> Result<Tensor> {
        let zc = z.matmul(&p[self.z_in.0])?;
        let mut h: Option<Tensor> = None;
        for (i, (layer, m)) in self.hidden.iter().zip(&self.hidden_masks).enumerate() {
            let input = h.as_ref().unwrap_or(x);
            let w = p[layer.weight.0].mul(m)?;
            let mut pre = input.matmul(&w)?.add(&p[layer.bias.0])?;
            if i == 0 {
                pre = pre.add(&zc)?;
            }
            h = Some(pre.tanh()?);
        }
        let direct = x.matmul(&p[self.direct.0].mul(&self.direct_mask)?)?;
        let mut out = direct
            .add(&z.matmul(&p[self.z_out.0])?)?
            .add(&p[self.out.bias.0])?;
        if let Some(h) = h {
            out = out.add(&h.matmul(&p[self.out.weight.0].mul(&self.out_mask)?)?)?;
        }
        Ok(out)
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }
}

#[derive(Debug, Clone)]
enum Decoder {
    Gaussian(Mlp),
    Bernoulli(Mlp),
    Made(Made),
}

/// Encoder parameters φ and decoder parameters θ in one parameter set.
#[derive(Debug, Clone)]
pub struct ModelPair {
    config: ModelConfig,
    params: ParamSet,
    encoder: Mlp,
    decoder: Decoder,
}

/// A model's parameters bound for one forward pass.
pub struct BoundModel<'a> {
    pub model: &'a ModelPair,
    pub params: Vec<Tensor>,
}

/// Versioned snapshot of a model and, optionally, its optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: ModelConfig,
    pub params: Vec<ParamRecord>,
    pub train_state: Option<TrainState>,
    #[serde(default)]
    pub note: String,
}

impl ModelPair {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let (d, l) = (config.data_dim, config.latent_dim);
        let mut enc_sizes = vec![d];
        enc_sizes.extend_from_slice(&config.encoder_hidden);
        enc_sizes.push(2 * l);
        let encoder = Mlp::new(
            &mut params,
            "enc",
            &enc_sizes,
            config.zero_init_encoder_output,
            &mut rng,
        )?;
        let mut dec_sizes = vec![l];
        dec_sizes.extend_from_slice(&config.decoder_hidden);
        let decoder = match config.decoder {
            DecoderKind::Gaussian => {
                dec_sizes.push(2 * d);
                Decoder::Gaussian(Mlp::new(&mut params, "dec", &dec_sizes, false, &mut rng)?)
            }
            DecoderKind::Bernoulli => {
                dec_sizes.push(d);
                Decoder::Bernoulli(Mlp::new(&mut params, "dec", &dec_sizes, false, &mut rng)?)
            }
            DecoderKind::Autoregressive => Decoder::Made(Made::new(
                &mut params,
                d,
                l,
                &config.decoder_hidden,
                &mut rng,
            )?),
        };
        Ok(ModelPair {
            config,
            params,
            encoder,
            decoder,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn data_dim(&self) -> usize {
        self.config.data_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn decoder_kind(&self) -> DecoderKind {
        self.config.decoder
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn bind(&self, tape: Option<&Tape>) -> BoundModel<'_> {
        BoundModel {
            model: self,
            params: self.params.bind(tape),
        }
    }

    fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected != got {
            return Err(Error::DimensionMismatch {
                what,
                expected,
                got,
            });
        }
        Ok(())
    }

    /// `q_φ(z|x)` for one data vector.
    pub fn encode(&self, x: &[f64]) -> Result<DiagGaussian> {
        Self::check_dim("encode input", self.data_dim(), x.len())?;
        let rows = self.encode_rows(&Tensor::matrix(1, x.len(), x.to_vec())?)?;
        Ok(rows.into_iter().next().expect("one row"))
    }

    /// `q_φ(z|x)` for every row of `x`.
    pub fn encode_rows(&self, x: &Tensor) -> Result<Vec<DiagGaussian>> {
        let (mean, std) = self.bind(None).encode(x)?;
        mean.iter_rows()
            .zip(std.iter_rows())
            .map(|(m, s)| DiagGaussian::new(m.to_vec(), s.to_vec()))
            .collect()
    }

    /// `p_θ(x|z)` for one latent vector.
    pub fn decode(&self, z: &[f64]) -> Result<Likelihood<'_>> {
        Self::check_dim("decode input", self.latent_dim(), z.len())?;
        let zt = Tensor::matrix(1, z.len(), z.to_vec())?;
        let p = self.params.bind(None);
        match &self.decoder {
            Decoder::Gaussian(mlp) => {
                let out = mlp.forward(&p, &zt)?;
                let d = self.data_dim();
                let raw = &out.values()[d..];
                Ok(Likelihood::Gaussian(DiagGaussian::from_raw(
                    out.values()[..d].to_vec(),
                    raw,
                    &self.config.scale,
                )?))
            }
            Decoder::Bernoulli(mlp) => Ok(Likelihood::Bernoulli(BernoulliVector::new(
                mlp.forward(&p, &zt)?.into_values(),
            ))),
            Decoder::Made(_) => Ok(Likelihood::Autoregressive(AutoregressiveHandle {
                model: self,
                z: z.to_vec(),
            })),
        }
    }

    /// MADE logits for data rows `x` given latent rows `z`.
    pub fn made_logits(&self, x: &Tensor, z: &Tensor) -> Result<Tensor> {
        match &self.decoder {
            Decoder::Made(m) => m.logits(&self.params.bind(None), x, z),
            _ => Err(Error::Unsupported(
                "made_logits on a non-autoregressive decoder".into(),
            )),
        }
    }

    pub fn checkpoint(&self, state: Option<&TrainState>) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            model: self.config.clone(),
            params: self.params.to_records(),
            train_state: state.cloned(),
            note: String::new(),
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        if c.format_version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: c.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let mut m = ModelPair::new(c.model.clone(), 0)?;
        m.params.load_records(&c.params)?;
        Ok(m)
    }
}

impl BoundModel<'_> {
    /// Encoder mean and standard deviation, each `[B, latent_dim]`.
    pub fn encode(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let m = self.model;
        ModelPair::check_dim("encode input", m.data_dim(), x.cols())?;
        let out = m.encoder.forward(&self.params, x)?;
        let l = m.latent_dim();
        let mean = out.slice_cols(0, l)?;
        let std = m.config.scale.apply_tensor(&out.slice_cols(l, 2 * l)?)?;
        Ok((mean, std))
    }

    /// Per-row `log p_θ(x|z)` as a `[B]` tensor.
    pub fn decoder_log_prob(&self, z: &Tensor, x: &Tensor) -> Result<Tensor> {
        let m = self.model;
        ModelPair::check_dim("decode input", m.latent_dim(), z.cols())?;
        ModelPair::check_dim("decoder target", m.data_dim(), x.cols())?;
        match &m.decoder {
            Decoder::Gaussian(mlp) => {
                let out = mlp.forward(&self.params, z)?;
                let d = m.data_dim();
                let mean = out.slice_cols(0, d)?;
                let std = m.config.scale.apply_tensor(&out.slice_cols(d, 2 * d)?)?;
                gaussian_log_prob_batch(&mean, &std, x)
            }
            Decoder::Bernoulli(mlp) => bernoulli_log_prob_batch(&mlp.forward(&self.params, z)?, x),
            Decoder::Made(made) => bernoulli_log_prob_batch(&made.logits(&self.params, x, z)?, x),
        }
    }
}

/// `p_θ(·|z)` for the autoregressive decoder.
pub struct AutoregressiveHandle<'a> {
    model: &'a ModelPair,
    z: Vec<f64>,
}

impl AutoregressiveHandle<'_> {
    /// Sum of the `D` conditional Bernoulli log-probabilities.
    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        ModelPair::check_dim("autoregressive log_prob", self.model.data_dim(), x.len())?;
        let logits = self.conditional_logits(x)?;
        bernoulli_log_prob(&BernoulliVector::new(logits), x)
    }

    /// Logit of `x_i` given `x_{<i}`, for every `i`.
    pub fn conditional_logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xt = Tensor::matrix(1, x.len(), x.to_vec())?;
        let zt = Tensor::matrix(1, self.z.len(), self.z.clone())?;
        Ok(self.model.made_logits(&xt, &zt)?.into_values())
    }

    /// Draws coordinates in order, one forward pass each.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let d = self.model.data_dim();
        let mut x = vec![0.0; d];
        for i in 0..d {
            let l = self.conditional_logits(&x)?[i].clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
            x[i] = if uniform01(rng) < sigmoid(l) {
                1.0
            } else {
                0.0
            };
        }
        Ok(x)
    }
}

/// The decoder's distribution over `x` for a fixed `z`.
pub enum Likelihood<'a> {
    Gaussian(DiagGaussian),
    Bernoulli(BernoulliVector),
    Autoregressive(AutoregressiveHandle<'a>),
}

impl Likelihood<'_> {
    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        match self {
            Likelihood::Gaussian(g) => gaussian_log_prob(g, x),
            Likelihood::Bernoulli(b) => bernoulli_log_prob(b, x),
            Likelihood::Autoregressive(a) => a.log_prob(x),
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        match self {
            Likelihood::Gaussian(g) => Ok(g.sample(rng)),
            Likelihood::Bernoulli(b) => Ok(b.sample(rng)),
            Likelihood::Autoregressive(a) => a.sample(rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::softplus;

    fn small(kind: DecoderKind, d: usize) -> ModelPair {
        ModelPair::new(ModelConfig::new(d, 2, kind).with_hidden(&[8, 8]), 42).unwrap()
    }

    #[test]
    fn zero_output_encoder_is_constant() {
        let mut cfg = ModelConfig::new(3, 2, DecoderKind::Gaussian);
        cfg.zero_init_encoder_output = true;
        cfg.scale = ScaleMap::softplus(0.0);
        let m = ModelPair::new(cfg, 1).unwrap();
        let a = m.encode(&[1.0, -2.0, 0.3]).unwrap();
        let b = m.encode(&[-5.0, 7.0, 0.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean(), &[0.0, 0.0]);
        assert!((a.std()[0] - softplus(0.0)).abs() < 1e-15);
    }

    #[test]
    fn encoder_output_is_finite_on_bounded_inputs() {
        let m = small(DecoderKind::Gaussian, 3);
        for x in [[10.0, -10.0, 10.0], [-10.0, -10.0, -10.0], [0.0, 0.0, 0.0]] {
            let g = m.encode(&x).unwrap();
            assert!(g.mean().iter().chain(g.std()).all(|v| v.is_finite()));
        }
        assert!(matches!(
            m.encode(&[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(m.decode(&[0.0; 3]).is_err());
    }

    #[test]
    fn zero_gaussian_decoder_is_softplus_scaled() {
        let mut m = small(DecoderKind::Gaussian, 2);
        let n = m.params().num_values();
        m.params_mut().unflatten(&vec![0.0; n]).unwrap();
        let Likelihood::Gaussian(g) = m.decode(&[0.4, -1.0]).unwrap() else {
            panic!("expected gaussian")
        };
        assert_eq!(g.mean(), &[0.0, 0.0]);
        let s = softplus(0.0) + ScaleMap::default().floor;
        assert!(g.std().iter().all(|v| (v - s).abs() < 1e-15));
    }

    #[test]
    fn value_and_batch_decoders_agree() {
        for kind in [
            DecoderKind::Gaussian,
            DecoderKind::Bernoulli,
            DecoderKind::Autoregressive,
        ] {
            let m = small(kind, 4);
            let z = [0.3, -0.7];
            let x = [1.0, 0.0, 1.0, 1.0];
            let v = m.decode(&z).unwrap().log_prob(&x).unwrap();
            let b = m
                .bind(None)
                .decoder_log_prob(
                    &Tensor::matrix(1, 2, z.to_vec()).unwrap(),
                    &Tensor::matrix(1, 4, x.to_vec()).unwrap(),
                )
                .unwrap()
                .item();
            assert!((v - b).abs() < 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn autoregressive_logits_ignore_current_and_later_inputs() {
        let m = ModelPair::new(
            ModelConfig::new(6, 2, DecoderKind::Autoregressive).with_hidden(&[16, 16]),
            3,
        )
        .unwrap();
        let z = Tensor::matrix(1, 2, vec![0.5, -0.2]).unwrap();
        let base = vec![1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let l0 = m
            .made_logits(&Tensor::matrix(1, 6, base.clone()).unwrap(), &z)
            .unwrap();
        for j in 0..6 {
            let mut x = base.clone();
            x[j] += 0.7;
            let l = m
                .made_logits(&Tensor::matrix(1, 6, x).unwrap(), &z)
                .unwrap();
            for i in 0..6 {
                let diff = l.values()[i] - l0.values()[i];
                if j >= i {
                    assert_eq!(diff, 0.0, "logit {i} moved with x_{j}");
                } else if i == j + 1 {
                    // The direct connection guarantees some dependence.
                    assert!(diff != 0.0, "logit {i} ignores x_{j}");
                }
            }
        }
    }

    #[test]
    fn autoregressive_jacobian_is_strictly_lower_triangular() {
        let m = small(DecoderKind::Autoregressive, 5);
        let z = Tensor::matrix(1, 2, vec![0.1, 0.9]).unwrap();
        let x0 = vec![0.2, 0.8, 0.5, 0.1, 0.4];
        let h = 1e-5;
        for j in 0..5 {
            let mut up = x0.clone();
            let mut dn = x0.clone();
            up[j] += h;
            dn[j] -= h;
            let lu = m
                .made_logits(&Tensor::matrix(1, 5, up).unwrap(), &z)
                .unwrap();
            let ld = m
                .made_logits(&Tensor::matrix(1, 5, dn).unwrap(), &z)
                .unwrap();
            for i in 0..5 {
                let jac = (lu.values()[i] - ld.values()[i]) / (2.0 * h);
                if i <= j {
                    assert_eq!(jac, 0.0);
                } else {
                    assert!(jac.abs() > 1e-8);
                }
            }
        }
    }

    #[test]
    fn autoregressive_probabilities_normalize() {
        let m = small(DecoderKind::Autoregressive, 4);
        let Likelihood::Autoregressive(h) = m.decode(&[0.2, -0.1]).unwrap() else {
            panic!()
        };
        let mut total = 0.0;
        for code in 0..16u32 {
            let x: Vec<f64> = (0..4).map(|i| ((code >> i) & 1) as f64).collect();
            total += libm::exp(h.log_prob(&x).unwrap());
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn autoregressive_sampling_matches_probabilities() {
        let m = small(DecoderKind::Autoregressive, 3);
        let lik = m.decode(&[1.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let mut counts = [0usize; 8];
        for _ in 0..n {
            let x = lik.sample(&mut rng).unwrap();
            counts[(x[0] + 2.0 * x[1] + 4.0 * x[2]) as usize] += 1;
        }
        for (code, &c) in counts.iter().enumerate() {
            let x: Vec<f64> = (0..3).map(|i| ((code >> i) & 1) as f64).collect();
            let p = libm::exp(lik.log_prob(&x).unwrap());
            let se = libm::sqrt(p * (1.0 - p) / n as f64);
            assert!(
                (c as f64 / n as f64 - p).abs() < 4.0 * se + 1e-9,
                "atom {code}"
            );
        }
    }

    #[test]
    fn checkpoint_round_trip_and_version_check() {
        let m = small(DecoderKind::Bernoulli, 3);
        let c = m.checkpoint(None);
        let back = ModelPair::from_checkpoint(&c).unwrap();
        assert_eq!(back.params().flatten(), m.params().flatten());
        let mut bad = c.clone();
        bad.format_version = 99;
        assert!(matches!(
            ModelPair::from_checkpoint(&bad),
            Err(Error::CheckpointVersion { found: 99, .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(ModelPair::new(ModelConfig::new(1, 1, DecoderKind::Autoregressive), 0).is_err());
        assert!(ModelPair::new(ModelConfig::new(0, 1, DecoderKind::Gaussian), 0).is_err());
        let mut c = ModelConfig::new(2, 1, DecoderKind::Gaussian);
        c.scale.floor = -1.0;
        assert!(ModelPair::new(c, 0).is_err());
    }

    #[test]
    fn construction_is_seed_deterministic() {
        let a = ModelPair::new(ModelConfig::new(4, 2, DecoderKind::Autoregressive), 5).unwrap();
        let b = ModelPair::new(ModelConfig::new(4, 2, DecoderKind::Autoregressive), 5).unwrap();
        let c = ModelPair::new(ModelConfig::new(4, 2, DecoderKind::Autoregressive), 6).unwrap();
        assert_eq!(a.params().flatten(), b.params().flatten());
        assert_ne!(a.params().flatten(), c.params().flatten());
    }
}
