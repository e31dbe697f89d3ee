//! Sample-based estimators of a divergence between the aggregate posterior
//! and the prior: kernel MMD, the Stein variational direction, and an
//! adversarial discriminator.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::autodiff::{backward, Tape, Tensor};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, Mlp, ParamSet, TrainState};

/// Base bandwidths of the default kernel, before dimension scaling.
pub const DEFAULT_BANDWIDTHS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];

/// Sum of RBF kernels `Σ_h exp(−‖a − b‖² / (2h²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub bandwidths: Vec<f64>,
}

impl KernelSpec {
    pub fn rbf(bandwidths: Vec<f64>) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(Error::Empty("kernel bandwidths"));
        }
        if bandwidths.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::invalid(alloc::format!(
                "bandwidths must be positive, got {bandwidths:?}"
            )));
        }
        Ok(KernelSpec { bandwidths })
    }

    /// Default bandwidths multiplied by `√dim`, so `2h²` grows linearly with
    /// the latent dimension like typical squared distances do.
    pub fn default_for_dim(dim: usize) -> Self {
        let s = libm::sqrt(dim.max(1) as f64);
        KernelSpec {
            bandwidths: DEFAULT_BANDWIDTHS.iter().map(|h| h * s).collect(),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.bandwidths
            .iter()
            .map(|h| libm::exp(-d2 / (2.0 * h * h)))
            .sum()
    }

    /// Kernel matrix between the rows of `a` and `b`, on the tape.
    pub fn matrix(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let d2 = a.pairwise_sq_dist(b)?;
        let mut total: Option<Tensor> = None;
        for h in &self.bandwidths {
            let k = d2.scale(-1.0 / (2.0 * h * h))?.exp()?;
            total = Some(match total {
                None => k,
                Some(t) => t.add(&k)?,
            });
        }
        Ok(total.expect("bandwidths are nonempty"))
    }
}

fn check_samples(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape().len() != 2 || b.shape().len() != 2 || a.cols() != b.cols() {
        return Err(Error::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Biased (V-statistic) MMD² between the rows of `z_q` and `z_p`, self-pairs
/// included. Differentiable in both arguments.
pub fn mmd_vstat(z_q: &Tensor, z_p: &Tensor, k: &KernelSpec) -> Result<Tensor> {
    check_samples("mmd_vstat", z_q, z_p)?;
    let pp = k.matrix(z_p, z_p)?.mean()?;
    let qp = k.matrix(z_q, z_p)?.mean()?;
    let qq = k.matrix(z_q, z_q)?.mean()?;
    pp.sub(&qp.scale(2.0)?)?.add(&qq)
}

/// Value of [`mmd_vstat`] without building kernel matrices or a tape.
/// Used for full-dataset diagnostics.
pub fn mmd_vstat_value(z_q: &Tensor, z_p: &Tensor, k: &KernelSpec) -> Result<f64> {
    check_samples("mmd_vstat", z_q, z_p)?;
    let coef: Vec<f64> = k.bandwidths.iter().map(|h| -1.0 / (2.0 * h * h)).collect();
    let pair = |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        coef.iter().map(|c| libm::exp(c * d2)).sum::<f64>()
    };
    let within = |z: &Tensor| {
        let n = z.rows();
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += pair(z.row(i), z.row(j));
            }
        }
        (2.0 * off + n as f64 * coef.len() as f64) / (n * n) as f64
    };
    let mut cross = 0.0;
    for a in z_q.iter_rows() {
        for b in z_p.iter_rows() {
            cross += pair(a, b);
        }
    }
    cross /= (z_q.rows() * z_p.rows()) as f64;
    Ok(within(z_p) - 2.0 * cross + within(z_q))
}

/// Step size and kernel of the Stein variational update `z ← z + εφ*(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteinConfig {
    pub kernel: KernelSpec,
    pub step_size: f64,
}

impl SteinConfig {
    pub fn new(kernel: KernelSpec, step_size: f64) -> Result<Self> {
        if !(step_size.is_finite() && step_size > 0.0) {
            return Err(Error::invalid(alloc::format!(
                "stein step size must be positive, got {step_size}"
            )));
        }
        Ok(SteinConfig { kernel, step_size })
    }
}

/// Score of the standard normal, `∇ log N(z; 0, I) = −z`.
pub fn standard_normal_score(z: &[f64]) -> Vec<f64> {
    z.iter().map(|v| -v).collect()
}

/// `φ*(z_i) = (1/n) Σ_j [k(z_j, z_i) ∇log p(z_j) + ∇_{z_j} k(z_j, z_i)]`
/// over all particles, the `j = i` term included. The result is a constant.
pub fn stein_phi_star<F>(particles: &Tensor, score: F, k: &KernelSpec) -> Result<Tensor>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if particles.shape().len() != 2 {
        return Err(Error::ShapeMismatch {
            op: "stein_phi_star",
            lhs: particles.shape().to_vec(),
            rhs: Vec::new(),
        });
    }
    let (n, d) = (particles.rows(), particles.cols());
    let scores: Vec<Vec<f64>> = particles.iter_rows().map(&score).collect();
    for (j, s) in scores.iter().enumerate() {
        if s.len() != d || s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("score at particle {j}")));
        }
    }
    let mut phi = vec![0.0; n * d];
    for i in 0..n {
        let zi = particles.row(i);
        let out = &mut phi[i * d..(i + 1) * d];
        for j in 0..n {
            let zj = particles.row(j);
            let d2: f64 = zi.iter().zip(zj).map(|(a, b)| (a - b) * (a - b)).sum();
            for h in &k.bandwidths {
                let kv = libm::exp(-d2 / (2.0 * h * h));
                let pull = kv / (h * h);
                for t in 0..d {
                    out[t] += kv * scores[j][t] + pull * (zi[t] - zj[t]);
                }
            }
        }
        for v in out.iter_mut() {
            *v /= n as f64;
        }
    }
    Tensor::new(vec![n, d], phi)
}

/// `mean_i ⟨z_i, −φ_i⟩` with `φ` held constant, so the gradient with respect
/// to each particle is `−φ_i / n` and descent moves particles along `+φ`.
pub fn stein_surrogate_loss(particles: &Tensor, phi: &Tensor) -> Result<Tensor> {
    if particles.shape() != phi.shape() {
        return Err(Error::ShapeMismatch {
            op: "stein_surrogate_loss",
            lhs: particles.shape().to_vec(),
            rhs: phi.shape().to_vec(),
        });
    }
    let n = particles.rows() as f64;
    particles.mul(&phi.detach().neg()?)?.sum()?.scale(1.0 / n)
}

/// One explicit step `z + εφ*(z)`.
pub fn svgd_step<F>(particles: &Tensor, score: F, cfg: &SteinConfig) -> Result<Tensor>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let phi = stein_phi_star(particles, score, &cfg.kernel)?;
    particles.detach().add(&phi.scale(cfg.step_size)?)
}

/// Logit clamp for the discriminator output.
pub const DISC_LOGIT_CLAMP: f64 = 15.0;

/// Tanh MLP classifier from latent vectors to a logit, with its own Adam
/// state. Prior samples are labeled 1, encoder samples 0.
#[derive(Debug, Clone)]
pub struct Discriminator {
    params: ParamSet,
    mlp: Mlp,
    state: TrainState,
}

impl Discriminator {
    pub fn new(
        latent_dim: usize,
        hidden: &[usize],
        adam: AdamConfig,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let mut params = ParamSet::new();
        let mut sizes = vec![latent_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mlp = Mlp::new(&mut params, "disc", &sizes, false, rng)?;
        let state = TrainState::new(&params, adam, 0);
        Ok(Discriminator { params, mlp, state })
    }

    /// Two tanh layers of 64 units.
    pub fn standard(latent_dim: usize, adam: AdamConfig, rng: &mut dyn RngCore) -> Result<Self> {
        Self::new(latent_dim, &[64, 64], adam, rng)
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Clamped logits, shape `[n]`.
    pub fn logits(&self, bound: &[Tensor], z: &Tensor) -> Result<Tensor> {
        self.mlp
            .forward(bound, z)?
            .sum_last()?
            .clamp(-DISC_LOGIT_CLAMP, DISC_LOGIT_CLAMP)
    }

    fn disc_loss(&self, bound: &[Tensor], z_q: &Tensor, z_p: &Tensor) -> Result<Tensor> {
        let lp = self.logits(bound, z_p)?;
        let lq = self.logits(bound, z_q)?;
        lp.neg()?
            .softplus()?
            .mean()?
            .add(&lq.softplus()?.mean()?)?
            .scale(0.5)
    }

    /// Fraction of rows classified correctly (prior as 1, encoder as 0).
    pub fn accuracy(&self, z_q: &Tensor, z_p: &Tensor) -> Result<f64> {
        let bound = self.params.bind(None);
        let lp = self.logits(&bound, &z_p.detach())?;
        let lq = self.logits(&bound, &z_q.detach())?;
        let hits = lp.values().iter().filter(|&&l| l > 0.0).count()
            + lq.values().iter().filter(|&&l| l <= 0.0).count();
        Ok(hits as f64 / (lp.len() + lq.len()) as f64)
    }

    /// One Adam step on the classification loss; returns the loss before
    /// the step.
    pub fn train_step(&mut self, z_q: &Tensor, z_p: &Tensor) -> Result<f64> {
        check_samples("discriminator", z_q, z_p)?;
        let tape = Tape::new();
        let bound = self.params.bind(Some(&tape));
        let loss = self.disc_loss(&bound, &z_q.detach(), &z_p.detach())?;
        let grads = ParamSet::gradients(&bound, &backward(&loss)?);
        self.state.adam_step(&mut self.params, &grads)?;
        Ok(loss.item())
    }
}

/// `(disc_loss, gen_loss)`. The discriminator loss is the mean of the two
/// per-class cross-entropies, a constant. The generator loss is the
/// non-saturating `mean_q softplus(−l)`, differentiable in `z_q` only.
pub fn adversarial_divergence(
    z_q: &Tensor,
    z_p: &Tensor,
    d: &Discriminator,
) -> Result<(Tensor, Tensor)> {
    check_samples("adversarial_divergence", z_q, z_p)?;
    let bound = d.params.bind(None);
    let disc = d.disc_loss(&bound, &z_q.detach(), &z_p.detach())?;
    let gen = d.logits(&bound, z_q)?.neg()?.softplus()?.mean()?;
    Ok((disc, gen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::standard_normal_vec;
    use crate::nn::ParamId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normal_samples(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: f64) -> Tensor {
        let v = standard_normal_vec(rng, n * d)
            .into_iter()
            .map(|x| x + shift)
            .collect();
        Tensor::matrix(n, d, v).unwrap()
    }

    fn unit() -> KernelSpec {
        KernelSpec::rbf(vec![1.0]).unwrap()
    }

    #[test]
    fn identical_sets_have_zero_mmd() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = normal_samples(&mut rng, 30, 3, 0.0);
        assert!(
            mmd_vstat(&z, &z, &KernelSpec::default_for_dim(3))
                .unwrap()
                .item()
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn single_point_mmd() {
        let q = Tensor::matrix(1, 1, vec![0.0]).unwrap();
        let p = Tensor::matrix(1, 1, vec![2.0]).unwrap();
        let v = mmd_vstat(&q, &p, &unit()).unwrap().item();
        assert!((mmd_vstat_value(&q, &p, &unit()).unwrap() - v).abs() < 1e-15);
        let expected = 2.0 - 2.0 * libm::exp(-2.0);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 1.729_329).abs() < 1e-6);
    }

    #[test]
    fn same_distribution_mmd_is_small() {
        let mut vals: Vec<f64> = (0..100)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = normal_samples(&mut rng, 500, 1, 0.0);
                let b = normal_samples(&mut rng, 500, 1, 0.0);
                mmd_vstat_value(&a, &b, &unit()).unwrap()
            })
            .collect();
        vals.sort_by(f64::total_cmp);
        assert!(vals[94] < 0.02, "95th percentile {}", vals[94]);
    }

    #[test]
    fn mmd_errors() {
        let a = Tensor::matrix(2, 2, vec![0.0; 4]).unwrap();
        let b = Tensor::matrix(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(
            mmd_vstat(&a, &b, &unit()),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(KernelSpec::rbf(vec![]).is_err());
        assert!(KernelSpec::rbf(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn mmd_nonnegative_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = KernelSpec::default_for_dim(2);
        for i in 0..1000 {
            let n = 1 + i % 7;
            let m = 1 + (i / 7) % 5;
            let a = normal_samples(&mut rng, n, 2, 0.0);
            let b = normal_samples(&mut rng, m, 2, (i % 3) as f64);
            let ab = mmd_vstat(&a, &b, &k).unwrap().item();
            let ba = mmd_vstat(&b, &a, &k).unwrap().item();
            assert!((mmd_vstat_value(&a, &b, &k).unwrap() - ab).abs() < 1e-12);
            assert!(ab >= -1e-12);
            assert!((ab - ba).abs() < 1e-12);
        }
    }

    #[test]
    fn mmd_grows_with_mean_shift() {
        let shifts = [0.0, 0.5, 1.0, 2.0, 4.0];
        let means: Vec<f64> = shifts
            .iter()
            .map(|&m| {
                (0..20)
                    .map(|seed| {
                        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
                        let a = normal_samples(&mut rng, 2000, 1, 0.0);
                        let b = normal_samples(&mut rng, 2000, 1, m);
                        mmd_vstat_value(&a, &b, &unit()).unwrap()
                    })
                    .sum::<f64>()
                    / 20.0
            })
            .collect();
        assert!(means.windows(2).all(|w| w[1] >= w[0]), "{means:?}");
    }

    #[test]
    fn mmd_gradient_passes_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = normal_samples(&mut rng, 6, 2, 0.0);
        let q = normal_samples(&mut rng, 5, 2, 1.0);
        let k = KernelSpec::default_for_dim(2);
        let err = crate::autodiff::grad_check(|z| mmd_vstat(z, &p, &k), &q, 1e-5).unwrap();
        assert!(err < 1e-4);
    }

    #[test]
    fn phi_star_hand_values() {
        let k = unit();
        let at = |v: f64| {
            stein_phi_star(
                &Tensor::matrix(1, 1, vec![v]).unwrap(),
                standard_normal_score,
                &k,
            )
            .unwrap()
        };
        assert_eq!(at(0.0).item(), 0.0);
        assert!((at(2.0).item() + 2.0).abs() < 1e-15);

        let a = 0.8;
        let pair = Tensor::matrix(2, 1, vec![a, -a]).unwrap();
        let phi = stein_phi_star(&pair, standard_normal_score, &k).unwrap();
        assert!((phi.values()[0] + phi.values()[1]).abs() < 1e-15);
    }

    #[test]
    fn phi_star_matches_brute_force() {
        // Independent evaluation through the kernel's closed-form gradient.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let z = normal_samples(&mut rng, 6, 2, 0.5);
        let k = KernelSpec::rbf(vec![0.7, 2.0]).unwrap();
        let phi = stein_phi_star(&z, standard_normal_score, &k).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            for t in 0..2 {
                let mut acc = 0.0;
                for j in 0..6 {
                    let zj = z.row(j).to_vec();
                    let mut up = zj.clone();
                    let mut dn = zj.clone();
                    up[t] += h;
                    dn[t] -= h;
                    let dk = (k.eval(&up, z.row(i)) - k.eval(&dn, z.row(i))) / (2.0 * h);
                    acc += k.eval(&zj, z.row(i)) * (-zj[t]) + dk;
                }
                assert!((phi.row(i)[t] - acc / 6.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn non_finite_score_is_rejected() {
        let z = Tensor::matrix(1, 1, vec![1.0]).unwrap();
        let r = stein_phi_star(&z, |_| vec![f64::NAN], &unit());
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn surrogate_gradient_is_minus_phi_over_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let z0 = normal_samples(&mut rng, 7, 3, 1.0);
        let tape = Tape::new();
        let z = tape.leaf(&z0);
        let k = KernelSpec::default_for_dim(3);
        let phi = stein_phi_star(&z, standard_normal_score, &k).unwrap();
        let loss = stein_surrogate_loss(&z, &phi).unwrap();
        let g = backward(&loss).unwrap().wrt(&z);
        for (gi, pi) in g.values().iter().zip(phi.values()) {
            assert!((gi + pi / 7.0).abs() < 1e-10);
        }
        assert!(stein_surrogate_loss(&z, &Tensor::matrix(1, 3, vec![0.0; 3]).unwrap()).is_err());
    }

    #[test]
    fn one_descent_step_moves_toward_mode() {
        let tape = Tape::new();
        let z = tape.leaf(&Tensor::matrix(1, 1, vec![2.0]).unwrap());
        let phi = stein_phi_star(&z, standard_normal_score, &unit()).unwrap();
        let g = backward(&stein_surrogate_loss(&z, &phi).unwrap())
            .unwrap()
            .wrt(&z);
        let next = 2.0 - 0.1 * g.item();
        assert!((next - 1.8).abs() < 1e-12);
    }

    #[test]
    fn symmetric_configuration_has_zero_net_gradient() {
        let tape = Tape::new();
        let z = tape.leaf(&Tensor::matrix(2, 1, vec![0.9, -0.9]).unwrap());
        let phi = stein_phi_star(&z, standard_normal_score, &unit()).unwrap();
        let g = backward(&stein_surrogate_loss(&z, &phi).unwrap())
            .unwrap()
            .wrt(&z);
        assert!((g.values()[0] + g.values()[1]).abs() < 1e-15);
    }

    #[test]
    fn svgd_transports_particles_to_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut z = normal_samples(&mut rng, 50, 1, 5.0);
        let cfg = SteinConfig::new(unit(), 0.05).unwrap();
        for _ in 0..500 {
            z = svgd_step(&z, standard_normal_score, &cfg).unwrap();
        }
        let n = 50.0;
        let mean = z.values().iter().sum::<f64>() / n;
        let var = z
            .values()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n - 1.0);
        assert!(mean.abs() < 0.2, "mean {mean}");
        assert!((var - 1.0).abs() < 0.3, "var {var}");
        assert!(SteinConfig::new(unit(), 0.0).is_err());
    }

    #[test]
    fn zero_discriminator_is_uninformative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = Discriminator::standard(2, AdamConfig::default(), &mut rng).unwrap();
        let zeros: Vec<f64> = vec![0.0; d.params().num_values()];
        d.params_mut().unflatten(&zeros).unwrap();
        let q = normal_samples(&mut rng, 10, 2, 3.0);
        let p = normal_samples(&mut rng, 10, 2, 0.0);
        let (disc, gen) = adversarial_divergence(&q, &p, &d).unwrap();
        assert!((disc.item() - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((gen.item() - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn separating_discriminator_gives_large_generator_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = Discriminator::standard(1, AdamConfig::default(), &mut rng).unwrap();
        let p = d.params_mut();
        // h1 = tanh(z), h2 = tanh(mean(h1)), logit = 100 h2: sign of z decides.
        let set = |p: &mut ParamSet, i: usize, v: f64| {
            let shape = p.get(ParamId(i)).shape().to_vec();
            let n = shape.iter().product();
            p.set(ParamId(i), Tensor::new(shape, vec![v; n]).unwrap())
                .unwrap();
        };
        set(p, 0, 1.0);
        set(p, 1, 0.0);
        set(p, 2, 1.0 / 64.0);
        set(p, 3, 0.0);
        set(p, 4, 100.0);
        set(p, 5, 0.0);
        let q = Tensor::matrix(3, 1, vec![-3.0, -4.0, -5.0]).unwrap();
        let z = Tensor::matrix(3, 1, vec![3.0, 4.0, 5.0]).unwrap();
        let (_, gen) = adversarial_divergence(&q, &z, &d).unwrap();
        assert!(gen.item() > 5.0);
        assert_eq!(d.accuracy(&q, &z).unwrap(), 1.0);
    }

    #[test]
    fn generator_loss_flows_to_encoder_samples_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Discriminator::standard(2, AdamConfig::default(), &mut rng).unwrap();
        let tape = Tape::new();
        let q = tape.leaf(&normal_samples(&mut rng, 4, 2, 1.0));
        let p = tape.leaf(&normal_samples(&mut rng, 4, 2, 0.0));
        let (disc, gen) = adversarial_divergence(&q, &p, &d).unwrap();
        assert!(!disc.is_attached());
        let g = backward(&gen).unwrap();
        assert!(g.wrt(&q).values().iter().any(|v| *v != 0.0));
        assert!(g.wrt(&p).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn discriminator_cannot_separate_identical_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut d = Discriminator::standard(2, AdamConfig::default(), &mut rng).unwrap();
        for _ in 0..200 {
            let q = normal_samples(&mut rng, 64, 2, 0.0);
            let p = normal_samples(&mut rng, 64, 2, 0.0);
            d.train_step(&q, &p).unwrap();
        }
        let q = normal_samples(&mut rng, 1000, 2, 0.0);
        let p = normal_samples(&mut rng, 1000, 2, 0.0);
        let acc = d.accuracy(&q, &p).unwrap();
        assert!((acc - 0.5).abs() < 0.05, "accuracy {acc}");
    }

    #[test]
    fn discriminator_learns_to_separate_shifted_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut d = Discriminator::standard(2, AdamConfig::default(), &mut rng).unwrap();
        let first = {
            let q = normal_samples(&mut rng, 64, 2, 3.0);
            let p = normal_samples(&mut rng, 64, 2, 0.0);
            d.train_step(&q, &p).unwrap()
        };
        let mut last = first;
        for _ in 0..300 {
            let q = normal_samples(&mut rng, 64, 2, 3.0);
            let p = normal_samples(&mut rng, 64, 2, 0.0);
            last = d.train_step(&q, &p).unwrap();
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
    }
}
