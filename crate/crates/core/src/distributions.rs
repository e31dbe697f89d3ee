//! Diagonal Gaussians, Bernoulli vectors and the standard-normal prior.
//!
//! Each family has a value form (plain `Vec<f64>`, used by samplers and
//! diagnostics) and a batched tensor form (used inside losses so gradients
//! flow through the tape). The two forms are tested against each other.

use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, softplus, HALF_LN_2PI};

/// Bernoulli logits are clamped into `[-LOGIT_CLAMP, LOGIT_CLAMP]`.
pub const LOGIT_CLAMP: f64 = 15.0;

/// Map from an unconstrained network output to a standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityMap {
    Softplus,
    Exp,
}

/// `std = map(raw) + floor`. A floor of 0 lets the scale collapse, which the
/// pathology experiments rely on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleMap {
    pub map: PositivityMap,
    pub floor: f64,
}

impl Default for ScaleMap {
    fn default() -> Self {
        ScaleMap {
            map: PositivityMap::Softplus,
            floor: 1e-4,
        }
    }
}

impl ScaleMap {
    pub fn softplus(floor: f64) -> Self {
        ScaleMap {
            map: PositivityMap::Softplus,
            floor,
        }
    }

    pub fn apply(&self, raw: f64) -> f64 {
        let s = match self.map {
            PositivityMap::Softplus => softplus(raw),
            PositivityMap::Exp => libm::exp(raw),
        };
        s + self.floor
    }

    pub fn apply_tensor(&self, raw: &Tensor) -> Result<Tensor> {
        let s = match self.map {
            PositivityMap::Softplus => raw.softplus()?,
            PositivityMap::Exp => raw.exp()?,
        };
        if self.floor == 0.0 {
            Ok(s)
        } else {
            s.add_scalar(self.floor)
        }
    }
}

/// Factorized Gaussian `N(mean, diag(std²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::DimensionMismatch {
                what: "gaussian std",
                expected: mean.len(),
                got: std.len(),
            });
        }
        if let Some(s) = std.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::NonFinite(alloc::format!("gaussian std {s}")));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("gaussian mean".into()));
        }
        Ok(DiagGaussian { mean, std })
    }

    /// Builds from an unconstrained scale parameter through `scale`.
    pub fn from_raw(mean: Vec<f64>, raw_scale: &[f64], scale: &ScaleMap) -> Result<Self> {
        let std = raw_scale.iter().map(|&r| scale.apply(r)).collect();
        Self::new(mean, std)
    }

    pub fn standard(dim: usize) -> Self {
        DiagGaussian {
            mean: alloc::vec![0.0; dim],
            std: alloc::vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn log_std(&self) -> Vec<f64> {
        self.std.iter().map(|s| libm::log(*s)).collect()
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let noise: Vec<f64> = (0..self.dim())
            .map(|_| StandardNormal.sample(rng))
            .collect();
        rsample(self, &noise).expect("noise has the right dimension")
    }
}

/// Independent Bernoulli coordinates parameterized by logits.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliVector {
    logits: Vec<f64>,
}

impl BernoulliVector {
    /// Logits are clamped into `[-15, 15]` on construction.
    pub fn new(logits: Vec<f64>) -> Self {
        BernoulliVector {
            logits: logits
                .into_iter()
                .map(|l| l.clamp(-LOGIT_CLAMP, LOGIT_CLAMP))
                .collect(),
        }
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.logits.iter().map(|&l| sigmoid(l)).collect()
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.logits
            .iter()
            .map(|&l| {
                if uniform01(rng) < sigmoid(l) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

pub(crate) fn uniform01(rng: &mut dyn RngCore) -> f64 {
    // 53 random bits into [0, 1).
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub(crate) fn standard_normal_vec(rng: &mut dyn RngCore, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// `Σ_i [−½log 2π − log σ_i − (x_i − μ_i)²/(2σ_i²)]`.
pub fn gaussian_log_prob(g: &DiagGaussian, x: &[f64]) -> Result<f64> {
    if x.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            what: "gaussian_log_prob",
            expected: g.dim(),
            got: x.len(),
        });
    }
    Ok(g.mean
        .iter()
        .zip(&g.std)
        .zip(x)
        .map(|((m, s), xi)| {
            let z = (xi - m) / s;
            -HALF_LN_2PI - libm::log(*s) - 0.5 * z * z
        })
        .sum())
}

/// Reparameterized draw `μ + σ ⊙ noise`.
pub fn rsample(g: &DiagGaussian, noise: &[f64]) -> Result<Vec<f64>> {
    if noise.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            what: "rsample noise",
            expected: g.dim(),
            got: noise.len(),
        });
    }
    Ok(g.mean
        .iter()
        .zip(&g.std)
        .zip(noise)
        .map(|((m, s), e)| m + s * e)
        .collect())
}

/// Closed-form `KL(N(μ, σ²) ‖ N(0, I)) = ½ Σ (μ² + σ² − 1 − 2 log σ)`.
pub fn kl_diag_gaussian_to_standard(g: &DiagGaussian) -> f64 {
    0.5 * g
        .mean
        .iter()
        .zip(&g.std)
        .map(|(m, s)| m * m + s * s - 1.0 - 2.0 * libm::log(*s))
        .sum::<f64>()
}

/// `Σ_i [x_i log p_i + (1 − x_i) log(1 − p_i)]` for binary `x`.
pub fn bernoulli_log_prob(b: &BernoulliVector, x: &[f64]) -> Result<f64> {
    if x.len() != b.logits.len() {
        return Err(Error::DimensionMismatch {
            what: "bernoulli_log_prob",
            expected: b.logits.len(),
            got: x.len(),
        });
    }
    if x.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("bernoulli_log_prob needs x in {0, 1}"));
    }
    // x·l − softplus(l) == x log σ(l) + (1 − x) log(1 − σ(l))
    Ok(b.logits
        .iter()
        .zip(x)
        .map(|(&l, &xi)| xi * l - softplus(l))
        .sum())
}

/// Log density of the standard-normal prior.
pub fn standard_normal_log_prob(z: &[f64]) -> f64 {
    z.iter().map(|v| -HALF_LN_2PI - 0.5 * v * v).sum()
}

/// Per-row Gaussian log density of `x` (`[B, D]`), as a `[B]` tensor.
pub fn gaussian_log_prob_batch(mean: &Tensor, std: &Tensor, x: &Tensor) -> Result<Tensor> {
    let z = x.sub(mean)?.div(std)?;
    let quad = z.square()?.scale(-0.5)?;
    let terms = quad.sub(&std.log()?)?.add_scalar(-HALF_LN_2PI)?;
    terms.sum_last()
}

/// `μ + σ ⊙ ε` on tensors; differentiable in `μ` and `σ`.
pub fn rsample_batch(mean: &Tensor, std: &Tensor, noise: &Tensor) -> Result<Tensor> {
    mean.add(&std.mul(noise)?)
}

/// Per-row analytic `KL(q(z|x) ‖ N(0, I))` as a `[B]` tensor.
pub fn kl_to_standard_batch(mean: &Tensor, std: &Tensor) -> Result<Tensor> {
    let inner = mean
        .square()?
        .add(&std.square()?)?
        .sub(&std.log()?.scale(2.0)?)?
        .add_scalar(-1.0)?;
    inner.sum_last()?.scale(0.5)
}

/// Per-row Bernoulli log-likelihood of binary `x` under clamped `logits`.
pub fn bernoulli_log_prob_batch(logits: &Tensor, x: &Tensor) -> Result<Tensor> {
    let l = logits.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)?;
    x.mul(&l)?.sub(&l.softplus()?)?.sum_last()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{backward, Tape};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_normal_at_zero() {
        let g = DiagGaussian::standard(1);
        assert!((gaussian_log_prob(&g, &[0.0]).unwrap() + 0.918_938_5).abs() < 1e-7);
    }

    #[test]
    fn shifted_gaussian_log_prob() {
        let g = DiagGaussian::new(vec![1.0], vec![2.0]).unwrap();
        let expected = -0.5 * libm::log(2.0 * core::f64::consts::PI) - libm::log(2.0);
        assert!((gaussian_log_prob(&g, &[1.0]).unwrap() - expected).abs() < 1e-12);
        assert!((expected + 1.612_085).abs() < 1e-6);
    }

    #[test]
    fn log_prob_is_translation_invariant() {
        let g = DiagGaussian::new(vec![0.3, -1.0], vec![0.5, 1.7]).unwrap();
        let h = DiagGaussian::new(vec![5.3, 2.0], vec![0.5, 1.7]).unwrap();
        let a = gaussian_log_prob(&g, &[1.0, 0.2]).unwrap();
        let b = gaussian_log_prob(&h, &[6.0, 3.2]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = DiagGaussian::standard(2);
        assert!(matches!(
            gaussian_log_prob(&g, &[0.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1,
                ..
            })
        ));
        assert!(rsample(&g, &[0.0; 3]).is_err());
        assert!(DiagGaussian::new(vec![0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn rsample_with_zero_noise_is_mean() {
        let g = DiagGaussian::new(vec![0.5, -2.0], vec![3.0, 0.1]).unwrap();
        assert_eq!(rsample(&g, &[0.0, 0.0]).unwrap(), vec![0.5, -2.0]);
        let tiny = DiagGaussian::new(vec![0.5, -2.0], vec![1e-300, 1e-300]).unwrap();
        assert_eq!(rsample(&tiny, &[3.0, -4.0]).unwrap(), vec![0.5, -2.0]);
    }

    #[test]
    fn rsample_gradient_wrt_mean_is_identity() {
        let tape = Tape::new();
        let mean = tape.leaf(&Tensor::matrix(1, 2, vec![0.5, -1.0]).unwrap());
        let std = Tensor::matrix(1, 2, vec![0.7, 1.3]).unwrap();
        let noise = Tensor::matrix(1, 2, vec![0.2, -0.4]).unwrap();
        for i in 0..2 {
            let z = rsample_batch(&mean, &std, &noise).unwrap();
            let pick = Tensor::matrix(
                1,
                2,
                if i == 0 {
                    vec![1.0, 0.0]
                } else {
                    vec![0.0, 1.0]
                },
            )
            .unwrap();
            let g = backward(&z.mul(&pick).unwrap().sum().unwrap())
                .unwrap()
                .wrt(&mean);
            // Finite differences of a linear map are exact up to rounding.
            let h = 1e-6;
            for j in 0..2 {
                let mut up = vec![0.5, -1.0];
                let mut dn = up.clone();
                up[j] += h;
                dn[j] -= h;
                let s = DiagGaussian::new(vec![0.0; 2], vec![0.7, 1.3]).unwrap();
                let f = |m: Vec<f64>| {
                    let shifted = DiagGaussian::new(m, s.std().to_vec()).unwrap();
                    rsample(&shifted, &[0.2, -0.4]).unwrap()[i]
                };
                let fd = (f(up) - f(dn)) / (2.0 * h);
                assert!((g.values()[j] - fd).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn kl_examples() {
        assert_eq!(
            kl_diag_gaussian_to_standard(&DiagGaussian::standard(3)),
            0.0
        );
        let g = DiagGaussian::new(vec![1.0; 10], vec![1.0; 10]).unwrap();
        assert!((kl_diag_gaussian_to_standard(&g) - 5.0).abs() < 1e-12);
        let g = DiagGaussian::new(vec![2.0], vec![0.5]).unwrap();
        let expected = 0.5 * (4.0 + 0.25 - 1.0 - 2.0 * libm::log(0.5));
        assert!((kl_diag_gaussian_to_standard(&g) - expected).abs() < 1e-12);
        assert!((expected - 2.318_147).abs() < 1e-6);
    }

    #[test]
    fn kl_matches_one_dimensional_closed_form() {
        // −(log λ − λ²/2 − c²/2 + 1/2) with μ = c, σ = λ.
        for &(c, lam) in &[(0.0, 1.0), (3.0, 0.5), (-1.2, 2.5), (7.0, 1e-3)] {
            let g = DiagGaussian::new(vec![c], vec![lam]).unwrap();
            let closed = -(libm::log(lam) - lam * lam / 2.0 - c * c / 2.0 + 0.5);
            assert!((kl_diag_gaussian_to_standard(&g) - closed).abs() < 1e-10);
        }
    }

    #[test]
    fn bernoulli_examples() {
        let b = BernoulliVector::new(vec![0.0; 4]);
        let v = bernoulli_log_prob(&b, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((v - 4.0 * libm::log(0.5)).abs() < 1e-12);
        assert!((v + 2.7726).abs() < 1e-4);

        let b = BernoulliVector::new(vec![15.0]);
        assert!(bernoulli_log_prob(&b, &[1.0]).unwrap().abs() < 1e-6);
        let b = BernoulliVector::new(vec![40.0]);
        assert_eq!(b.logits(), &[15.0]);

        let logit = |p: f64| libm::log(p / (1.0 - p));
        let b = BernoulliVector::new(vec![logit(0.9), logit(0.2)]);
        let v = bernoulli_log_prob(&b, &[1.0, 0.0]).unwrap();
        assert!((v - (libm::log(0.9) + libm::log(0.8))).abs() < 1e-12);
        assert!((v + 0.328_504).abs() < 1e-6);

        assert!(bernoulli_log_prob(&b, &[0.5, 0.0]).is_err());
    }

    #[test]
    fn batch_forms_match_value_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows = 4;
        let d = 3;
        let mut m = vec![];
        let mut s = vec![];
        let mut x = vec![];
        let mut l = vec![];
        let mut bits = vec![];
        for _ in 0..rows * d {
            m.push(rng.random_range(-2.0..2.0));
            s.push(rng.random_range(0.1..3.0));
            x.push(rng.random_range(-3.0..3.0));
            l.push(rng.random_range(-20.0..20.0));
            bits.push(if rng.random_bool(0.5) { 1.0 } else { 0.0 });
        }
        let mt = Tensor::matrix(rows, d, m.clone()).unwrap();
        let st = Tensor::matrix(rows, d, s.clone()).unwrap();
        let xt = Tensor::matrix(rows, d, x.clone()).unwrap();
        let lp = gaussian_log_prob_batch(&mt, &st, &xt).unwrap();
        let kl = kl_to_standard_batch(&mt, &st).unwrap();
        let bl = bernoulli_log_prob_batch(
            &Tensor::matrix(rows, d, l.clone()).unwrap(),
            &Tensor::matrix(rows, d, bits.clone()).unwrap(),
        )
        .unwrap();
        for r in 0..rows {
            let span = r * d..(r + 1) * d;
            let g = DiagGaussian::new(m[span.clone()].to_vec(), s[span.clone()].to_vec()).unwrap();
            assert!(
                (lp.values()[r] - gaussian_log_prob(&g, &x[span.clone()]).unwrap()).abs() < 1e-12
            );
            assert!((kl.values()[r] - kl_diag_gaussian_to_standard(&g)).abs() < 1e-12);
            let b = BernoulliVector::new(l[span.clone()].to_vec());
            assert!((bl.values()[r] - bernoulli_log_prob(&b, &bits[span]).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mu = rng.random_range(-3.0..3.0);
            let sigma = rng.random_range(0.05..4.0);
            let g = DiagGaussian::new(vec![mu], vec![sigma]).unwrap();
            let n = 20_000;
            let (a, b) = (mu - 10.0 * sigma, mu + 10.0 * sigma);
            let h = (b - a) / n as f64;
            let total: f64 = (0..n)
                .map(|i| libm::exp(gaussian_log_prob(&g, &[a + (i as f64 + 0.5) * h]).unwrap()) * h)
                .sum();
            assert!((total - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn kl_is_nonnegative_and_zero_only_at_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let m: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..5.0)).collect();
            let kl = kl_diag_gaussian_to_standard(&DiagGaussian::new(m, s).unwrap());
            assert!(kl > 1e-12);
        }
        assert!(kl_diag_gaussian_to_standard(&DiagGaussian::standard(4)).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_kl_agrees_with_closed_form() {
        let g = DiagGaussian::new(vec![0.8, -0.3], vec![0.6, 1.4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                let z = g.sample(&mut rng);
                gaussian_log_prob(&g, &z).unwrap() - standard_normal_log_prob(&z)
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
        let se = libm::sqrt(var / n as f64);
        assert!((mean - kl_diag_gaussian_to_standard(&g)).abs() < 3.0 * se);
    }

    #[test]
    fn scale_map_floor() {
        let m = ScaleMap::softplus(0.0);
        assert!((m.apply(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!(ScaleMap::softplus(0.5).apply(-5.0) > 0.5);
        assert!(m.apply(-50.0) < 1e-20);
    }
}
