//! Exact computations on finite `X × Z` models.
//!
//! A [`TabularJoint`] holds `p(z)`, `p(x|z)`, `q(z|x)` and `p_D(x)` as
//! dense tables. Every quantity here is a direct sum over the tables, so the
//! functions double as oracles for the Monte-Carlo estimators elsewhere in
//! the crate. Divergences that are infinite because of a support mismatch
//! come back as [`ExtReal`] markers.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::distributions::{
    kl_diag_gaussian_to_standard, standard_normal_log_prob, standard_normal_vec, uniform01,
    DiagGaussian,
};
use crate::error::{Error, Result};
use crate::numeric::{
    golden_section_max, log_normal_cdf, log_sum_exp, normal_cdf, CompensatedSum, ExtReal,
    HALF_LN_2PI,
};
use crate::sampling::{categorical_many, LatentModel, Posterior};

const NORMALIZATION_TOL: f64 = 1e-12;

/// A finite latent-variable model together with its encoder and data
/// distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularJoint {
    pub nx: usize,
    pub nz: usize,
    pub p_z: Vec<f64>,
    /// `nz × nx`, row `z` is `p(·|z)`.
    pub p_x_given_z: Vec<Vec<f64>>,
    /// `nx × nz`, row `x` is `q(·|x)`.
    pub q_z_given_x: Vec<Vec<f64>>,
    pub p_data: Vec<f64>,
}

fn check_distribution(what: &str, p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::invalid(alloc::format!(
            "{what}: expected {n} entries, got {}",
            p.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid(alloc::format!(
            "{what}: entries must be finite and >= 0"
        )));
    }
    let s: CompensatedSum = p.iter().copied().collect();
    if (s.value() - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::invalid(alloc::format!(
            "{what}: sums to {}",
            s.value()
        )));
    }
    Ok(())
}

fn random_simplex(n: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// `a · log(a / b)` with `0 · log(0/b) = 0` and `a · log(a/0) = +∞`.
fn kl_term(a: f64, b: f64) -> ExtReal {
    if a == 0.0 {
        ExtReal::ZERO
    } else if b == 0.0 {
        ExtReal::PosInf
    } else {
        ExtReal::Finite(a * (libm::log(a) - libm::log(b)))
    }
}

/// `a · log b` with `0 · log b = 0` and `a · log 0 = −∞`.
fn xlogy(a: f64, b: f64) -> ExtReal {
    if a == 0.0 {
        ExtReal::ZERO
    } else if b == 0.0 {
        ExtReal::NegInf
    } else {
        ExtReal::Finite(a * libm::log(b))
    }
}

/// Compensated sum of terms that are finite or share one infinite sign.
#[derive(Default)]
struct ExtSum {
    sum: CompensatedSum,
    pos_inf: bool,
    neg_inf: bool,
}

impl ExtSum {
    fn add(&mut self, v: ExtReal) {
        match v {
            ExtReal::Finite(x) => self.sum.add(x),
            ExtReal::PosInf => self.pos_inf = true,
            ExtReal::NegInf => self.neg_inf = true,
        }
    }

    fn value(&self) -> ExtReal {
        debug_assert!(!(self.pos_inf && self.neg_inf));
        if self.pos_inf {
            ExtReal::PosInf
        } else if self.neg_inf {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(self.sum.value())
        }
    }
}

/// `KL(p ‖ q)` for two probability vectors.
pub fn kl_discrete(p: &[f64], q: &[f64]) -> ExtReal {
    let mut s = ExtSum::default();
    for (a, b) in p.iter().zip(q) {
        s.add(kl_term(*a, *b));
    }
    s.value()
}

fn ext_sum(terms: &[ExtReal]) -> Result<ExtReal> {
    terms
        .iter()
        .try_fold(ExtReal::ZERO, |acc, t| acc.checked_add(*t))
        .ok_or_else(|| Error::NonFinite("indeterminate sum of opposite infinities".into()))
}

impl TabularJoint {
    pub fn new(
        p_z: Vec<f64>,
        p_x_given_z: Vec<Vec<f64>>,
        q_z_given_x: Vec<Vec<f64>>,
        p_data: Vec<f64>,
    ) -> Result<Self> {
        let j = TabularJoint {
            nx: p_data.len(),
            nz: p_z.len(),
            p_z,
            p_x_given_z,
            q_z_given_x,
            p_data,
        };
        j.validate()?;
        Ok(j)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.nz == 0 {
            return Err(Error::Empty("tabular joint"));
        }
        check_distribution("p_z", &self.p_z, self.nz)?;
        check_distribution("p_data", &self.p_data, self.nx)?;
        if self.p_x_given_z.len() != self.nz {
            return Err(Error::DimensionMismatch {
                what: "p_x_given_z rows",
                expected: self.nz,
                got: self.p_x_given_z.len(),
            });
        }
        if self.q_z_given_x.len() != self.nx {
            return Err(Error::DimensionMismatch {
                what: "q_z_given_x rows",
                expected: self.nx,
                got: self.q_z_given_x.len(),
            });
        }
        for row in &self.p_x_given_z {
            check_distribution("p_x_given_z row", row, self.nx)?;
        }
        for row in &self.q_z_given_x {
            check_distribution("q_z_given_x row", row, self.nz)?;
        }
        Ok(())
    }

    /// Every table drawn uniformly from its simplex.
    pub fn random(nx: usize, nz: usize, rng: &mut dyn RngCore) -> Result<Self> {
        if nx == 0 || nz == 0 {
            return Err(Error::Empty("tabular joint"));
        }
        let p_z = random_simplex(nz, rng);
        let p_x_given_z = (0..nz).map(|_| random_simplex(nx, rng)).collect();
        let q_z_given_x = (0..nx).map(|_| random_simplex(nz, rng)).collect();
        let p_data = random_simplex(nx, rng);
        TabularJoint::new(p_z, p_x_given_z, q_z_given_x, p_data)
    }

    /// Aggregate posterior `q(z) = Σ_x p_D(x) q(z|x)`.
    pub fn q_z(&self) -> Vec<f64> {
        (0..self.nz)
            .map(|z| {
                (0..self.nx)
                    .map(|x| self.p_data[x] * self.q_z_given_x[x][z])
                    .collect::<CompensatedSum>()
                    .value()
            })
            .collect()
    }

    /// Model marginal `p(x) = Σ_z p(z) p(x|z)`.
    pub fn p_x(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|x| {
                (0..self.nz)
                    .map(|z| self.p_z[z] * self.p_x_given_z[z][x])
                    .collect::<CompensatedSum>()
                    .value()
            })
            .collect()
    }

    /// Model posterior `p(z|x)`; `None` where `p(x) = 0`.
    pub fn p_z_given_x(&self, x: usize) -> Option<Vec<f64>> {
        let px = self.p_x()[x];
        (px > 0.0).then(|| {
            (0..self.nz)
                .map(|z| self.p_z[z] * self.p_x_given_z[z][x] / px)
                .collect()
        })
    }

    /// Moves every encoder row toward the model posterior:
    /// `q ← w·p(z|x) + (1−w)·q`. Rows with `p(x) = 0` are left alone.
    pub fn blend_encoder_toward_posterior(&self, w: f64) -> Result<TabularJoint> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::invalid("blend weight must be in [0, 1]"));
        }
        let mut out = self.clone();
        for x in 0..self.nx {
            if let Some(post) = self.p_z_given_x(x) {
                for (q, p) in out.q_z_given_x[x].iter_mut().zip(post) {
                    *q = w * p + (1.0 - w) * *q;
                }
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Encoder-side posterior `q(x|z) ∝ p_D(x) q(z|x)`; `None` where `q(z) = 0`.
    pub fn q_x_given_z(&self, z: usize) -> Option<Vec<f64>> {
        let qz = self.q_z()[z];
        (qz > 0.0).then(|| {
            (0..self.nx)
                .map(|x| self.p_data[x] * self.q_z_given_x[x][z] / qz)
                .collect()
        })
    }
}

/// The four ELBO forms and the data entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboForms {
    /// `E log p(x|z) − E_{p_D} KL(q(z|x) ‖ p(z))`.
    pub form0: ExtReal,
    /// `−KL(q(x,z) ‖ p(x,z))`.
    pub form1: ExtReal,
    /// `−KL(p_D ‖ p(x)) − E_{p_D} KL(q(z|x) ‖ p(z|x))`.
    pub form2: ExtReal,
    /// `−KL(q(z) ‖ p(z)) − E_{q(z)} KL(q(x|z) ‖ p(x|z))`.
    pub form3: ExtReal,
    pub h_data: f64,
}

/// `E_{p_D} E_q [log p(x|z)]`.
pub fn reconstruction(j: &TabularJoint) -> ExtReal {
    let mut s = ExtSum::default();
    for x in 0..j.nx {
        for z in 0..j.nz {
            let w = j.p_data[x] * j.q_z_given_x[x][z];
            s.add(xlogy(w, j.p_x_given_z[z][x]));
        }
    }
    s.value()
}

/// `E_{p_D} KL(q(z|x) ‖ p(z))`.
pub fn mean_kl_to_prior(j: &TabularJoint) -> ExtReal {
    let mut s = ExtSum::default();
    for x in 0..j.nx {
        if j.p_data[x] > 0.0 {
            s.add(kl_discrete(&j.q_z_given_x[x], &j.p_z).scale(j.p_data[x]));
        }
    }
    s.value()
}

/// `KL(p_D ‖ p(x))`.
pub fn data_kl(j: &TabularJoint) -> ExtReal {
    kl_discrete(&j.p_data, &j.p_x())
}

/// `E_{p_D} KL(q(z|x) ‖ p(z|x))`, the expected variational gap.
pub fn posterior_gap(j: &TabularJoint) -> ExtReal {
    let px = j.p_x();
    let mut s = ExtSum::default();
    for x in 0..j.nx {
        if j.p_data[x] == 0.0 {
            continue;
        }
        for z in 0..j.nz {
            let post = if px[x] > 0.0 {
                j.p_z[z] * j.p_x_given_z[z][x] / px[x]
            } else {
                0.0
            };
            s.add(kl_term(j.q_z_given_x[x][z], post).scale(j.p_data[x]));
        }
    }
    s.value()
}

/// `E_{q(z)} KL(q(x|z) ‖ p(x|z))`.
fn conditional_data_kl(j: &TabularJoint) -> ExtReal {
    let qz = j.q_z();
    let mut s = ExtSum::default();
    for z in 0..j.nz {
        if qz[z] == 0.0 {
            continue;
        }
        for x in 0..j.nx {
            let qxz = j.p_data[x] * j.q_z_given_x[x][z] / qz[z];
            s.add(kl_term(qxz, j.p_x_given_z[z][x]).scale(qz[z]));
        }
    }
    s.value()
}

pub fn elbo_forms(j: &TabularJoint) -> ElboForms {
    let form0 = reconstruction(j) - mean_kl_to_prior(j);

    let mut f1 = ExtSum::default();
    for x in 0..j.nx {
        for z in 0..j.nz {
            let q = j.p_data[x] * j.q_z_given_x[x][z];
            let p = j.p_z[z] * j.p_x_given_z[z][x];
            f1.add(kl_term(q, p));
        }
    }
    let form1 = -f1.value();
    let form2 = -data_kl(j) - posterior_gap(j);
    let form3 = -kl_discrete(&j.q_z(), &j.p_z) - conditional_data_kl(j);
    ElboForms {
        form0,
        form1,
        form2,
        form3,
        h_data: entropy_data(j),
    }
}

/// The InfoVAE objective in its intractable and tractable forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfovaeForms {
    /// `−λ KL(q(z)‖p(z)) − E_{q(z)} KL(q(x|z)‖p(x|z)) + α I_q(x;z)`.
    pub eq5: ExtReal,
    /// `E log p(x|z) − (1−α) E_{p_D} KL(q(z|x)‖p(z)) − (α+λ−1) KL(q(z)‖p(z))`.
    pub eq6: ExtReal,
    pub h_data: f64,
}

/// Errors when `alpha` or `lambda` is not finite, or when a form is an
/// indeterminate `∞ − ∞`.
pub fn infovae_forms(j: &TabularJoint, alpha: f64, lambda: f64) -> Result<InfovaeForms> {
    if !alpha.is_finite() || !lambda.is_finite() {
        return Err(Error::invalid(
            "infovae_forms needs finite alpha and lambda",
        ));
    }
    let klz = kl_discrete(&j.q_z(), &j.p_z);
    let mi = mutual_information_exact(j);
    let eq5 = ext_sum(&[
        klz.scale(-lambda),
        -conditional_data_kl(j),
        ExtReal::Finite(alpha * mi),
    ])?;
    let recon = reconstruction(j);
    let eq6 = if klz.is_finite() {
        ext_sum(&[
            recon,
            mean_kl_to_prior(j).scale(-(1.0 - alpha)),
            klz.scale(-(alpha + lambda - 1.0)),
        ])?
    } else {
        // E KL(q(z|x)‖p(z)) = I + KL(q(z)‖p(z)); collect the infinite part
        // into a single coefficient so the limit is well defined.
        ext_sum(&[
            recon,
            ExtReal::Finite(-(1.0 - alpha) * mi),
            klz.scale(-lambda),
        ])?
    };
    Ok(InfovaeForms {
        eq5,
        eq6,
        h_data: entropy_data(j),
    })
}

/// `I_q(x;z)` under `q(x,z) = p_D(x) q(z|x)`, in nats.
pub fn mutual_information_exact(j: &TabularJoint) -> f64 {
    let qz = j.q_z();
    let mut s = CompensatedSum::new();
    for x in 0..j.nx {
        for z in 0..j.nz {
            let q = j.q_z_given_x[x][z];
            if q > 0.0 && j.p_data[x] > 0.0 {
                s.add(j.p_data[x] * q * (libm::log(q) - libm::log(qz[z])));
            }
        }
    }
    s.value()
}

/// `H(p_D)`, in nats.
pub fn entropy_data(j: &TabularJoint) -> f64 {
    -j.p_data
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * libm::log(*p))
        .collect::<CompensatedSum>()
        .value()
}

/// Replaces the decoder with `q(x|z)`. Latents with `q(z) = 0` get a
/// uniform decoder row.
pub fn optimal_decoder_for_q(j: &TabularJoint) -> TabularJoint {
    let mut out = j.clone();
    for z in 0..j.nz {
        out.p_x_given_z[z] = j
            .q_x_given_z(z)
            .unwrap_or_else(|| vec![1.0 / j.nx as f64; j.nx]);
    }
    out
}

/// `T[x][x'] = Σ_z q(z|x) p(x'|z)` for the encode/decode chain.
pub fn chain_transition_matrix(j: &TabularJoint) -> Vec<Vec<f64>> {
    (0..j.nx)
        .map(|x| {
            (0..j.nx)
                .map(|x2| {
                    (0..j.nz)
                        .map(|z| j.q_z_given_x[x][z] * j.p_x_given_z[z][x2])
                        .collect::<CompensatedSum>()
                        .value()
                })
                .collect()
        })
        .collect()
}

/// Outcome of the stationary-distribution search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stationary {
    Ergodic(Vec<f64>),
    /// More than one closed class, or a periodic one.
    NonErgodic {
        closed_classes: usize,
        period: usize,
    },
}

impl Stationary {
    pub fn distribution(&self) -> Option<&[f64]> {
        match self {
            Stationary::Ergodic(p) => Some(p),
            Stationary::NonErgodic { .. } => None,
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    (0..n)
                        .map(|m| a[i][m] * b[m][k])
                        .collect::<CompensatedSum>()
                        .value()
                })
                .collect()
        })
        .collect()
}

/// Stationary distribution of a row-stochastic matrix, or a non-ergodic
/// flag when it is not unique or the chain is periodic.
///
/// Transient states are allowed; they get zero mass.
pub fn stationary_of(t: &[Vec<f64>]) -> Stationary {
    let n = t.len();
    let mut reach: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|k| t[i][k] > 0.0 || i == k).collect())
        .collect();
    for m in 0..n {
        for i in 0..n {
            if reach[i][m] {
                for k in 0..n {
                    if reach[m][k] {
                        reach[i][k] = true;
                    }
                }
            }
        }
    }
    // A state is recurrent iff everything it reaches reaches it back.
    let recurrent: Vec<bool> = (0..n)
        .map(|i| (0..n).all(|k| !reach[i][k] || reach[k][i]))
        .collect();
    let mut class_of = vec![usize::MAX; n];
    let mut classes = Vec::new();
    for i in 0..n {
        if recurrent[i] && class_of[i] == usize::MAX {
            let members: Vec<usize> = (0..n).filter(|&k| reach[i][k]).collect();
            for &k in &members {
                class_of[k] = classes.len();
            }
            classes.push(members);
        }
    }
    let period = {
        let members = &classes[0];
        let mut level = vec![usize::MAX; n];
        level[members[0]] = 0;
        let mut queue = alloc::collections::VecDeque::from([members[0]]);
        let mut g = 0;
        while let Some(u) = queue.pop_front() {
            for &v in members {
                if t[u][v] > 0.0 {
                    if level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    } else {
                        g = gcd(g, (level[u] + 1).abs_diff(level[v]));
                    }
                }
            }
        }
        g
    };
    if classes.len() != 1 || period != 1 {
        return Stationary::NonErgodic {
            closed_classes: classes.len(),
            period,
        };
    }

    let mut m = t.to_vec();
    for _ in 0..64 {
        let spread = (0..n)
            .map(|k| {
                let col = m.iter().map(|r| r[k]);
                col.clone().fold(f64::MIN, f64::max) - col.fold(f64::MAX, f64::min)
            })
            .fold(0.0, f64::max);
        if spread < 1e-15 {
            break;
        }
        m = mat_mul(&m, &m);
    }
    let mut pi: Vec<f64> = m[0].clone();
    for _ in 0..10_000 {
        let next: Vec<f64> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| pi[i] * t[i][k])
                    .collect::<CompensatedSum>()
                    .value()
            })
            .collect();
        let s: f64 = next.iter().sum();
        let next: Vec<f64> = next.iter().map(|v| v / s).collect();
        let delta: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if delta < 1e-15 {
            break;
        }
    }
    Stationary::Ergodic(pi)
}

pub fn stationary(j: &TabularJoint) -> Stationary {
    stationary_of(&chain_transition_matrix(j))
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Closed forms for the two-point Gaussian pathology with encoder
/// `N(±c, λ²)` and decoder `N(±1, σ²)` switched on the sign of `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathologyForms {
    /// `log q(z < 0 | x = 1) = log Φ(−c/λ)`.
    pub log_tail: f64,
    pub sigma_star: f64,
    /// Optimal reconstruction term `E_q[log p(x=1|z)]` at `σ*`.
    pub l_ae_star: f64,
    /// `−KL(q(z|x=1) ‖ N(0,1))`.
    pub l_reg: f64,
}

impl PathologyForms {
    pub fn elbo(&self) -> f64 {
        self.l_ae_star + self.l_reg
    }
}

/// Reconstruction term of the pathology family at decoder scale `sigma`:
/// `−log σ − 2 q(z<0|x=1)/σ² − ½ log 2π`.
pub fn pathology_l_ae(c: f64, lam: f64, sigma: f64) -> f64 {
    let tail = normal_cdf(-c / lam);
    -libm::log(sigma) - 2.0 * tail / (sigma * sigma) - HALF_LN_2PI
}

pub fn pathology_closed_forms(c: f64, lam: f64) -> Result<PathologyForms> {
    if !(lam > 0.0) || !lam.is_finite() || !c.is_finite() {
        return Err(Error::invalid(
            "pathology_closed_forms needs finite c and lam > 0",
        ));
    }
    let log_tail = log_normal_cdf(-c / lam);
    let sigma_star = 2.0 * libm::exp(0.5 * log_tail);
    // Substituting σ² = 4·tail gives −½ log tail − log 2 − ½ − ½ log 2π.
    let l_ae_star = -0.5 * log_tail - core::f64::consts::LN_2 - 0.5 - HALF_LN_2PI;
    let l_reg = libm::log(lam) - 0.5 * lam * lam - 0.5 * c * c + 0.5;
    Ok(PathologyForms {
        log_tail,
        sigma_star,
        l_ae_star,
        l_reg,
    })
}

/// Deterministic block code: `n_blocks` groups of `x_per_block` data
/// atoms, each sent uniformly onto its own group of `z_per_block` latents.
/// `p_D` and `p(z)` are uniform and the decoder is the Bayes inverse.
pub fn partition_code(
    n_blocks: usize,
    x_per_block: usize,
    z_per_block: usize,
) -> Result<TabularJoint> {
    if n_blocks == 0 || x_per_block == 0 || z_per_block == 0 {
        return Err(Error::Empty("partition code"));
    }
    let nx = n_blocks * x_per_block;
    let nz = n_blocks * z_per_block;
    let q_z_given_x = (0..nx)
        .map(|x| {
            let b = x / x_per_block;
            (0..nz)
                .map(|z| {
                    if z / z_per_block == b {
                        1.0 / z_per_block as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let j = TabularJoint::new(
        vec![1.0 / nz as f64; nz],
        vec![vec![1.0 / nx as f64; nx]; nz],
        q_z_given_x,
        vec![1.0 / nx as f64; nx],
    )?;
    Ok(optimal_decoder_for_q(&j))
}

/// Result of maximizing the tractable InfoVAE objective over the encoder
/// and decoder tables with `p(z)` and `p_D` held fixed.
#[derive(Debug, Clone)]
pub struct InfovaeOptimum {
    pub joint: TabularJoint,
    pub eq6: f64,
    pub sweeps: usize,
}

fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| libm::exp(l - lse)).collect()
}

/// Coordinate ascent on eq6 over per-row logits (first logit of each row
/// pinned at 0), one golden-section line search on `[−30, 30]` per logit.
pub fn maximize_infovae(
    p_data: &[f64],
    p_z: &[f64],
    alpha: f64,
    lambda: f64,
    rng: &mut dyn RngCore,
) -> Result<InfovaeOptimum> {
    let (nx, nz) = (p_data.len(), p_z.len());
    let enc = nx * (nz - 1);
    let n = enc + nz * (nx - 1);
    let mut theta: Vec<f64> = (0..n).map(|_| 2.0 * uniform01(rng) - 1.0).collect();
    let build = |theta: &[f64]| -> Result<TabularJoint> {
        let row = |off: usize, len: usize| {
            let mut l = vec![0.0];
            l.extend_from_slice(&theta[off..off + len - 1]);
            softmax_row(&l)
        };
        let q = (0..nx).map(|x| row(x * (nz - 1), nz)).collect();
        let p = (0..nz).map(|z| row(enc + z * (nx - 1), nx)).collect();
        TabularJoint::new(p_z.to_vec(), p, q, p_data.to_vec())
    };
    let objective = |theta: &[f64]| -> f64 {
        build(theta)
            .ok()
            .and_then(|j| infovae_forms(&j, alpha, lambda).ok())
            .and_then(|f| f.eq6.finite())
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut best = objective(&theta);
    let mut sweeps = 0;
    for _ in 0..500 {
        sweeps += 1;
        let before = best;
        for i in 0..n {
            let mut trial = theta.clone();
            let (xi, fx) = golden_section_max(
                |v| {
                    trial[i] = v;
                    objective(&trial)
                },
                -30.0,
                30.0,
                1e-9,
            );
            if fx >= best {
                theta[i] = xi;
                best = fx;
            }
        }
        if best - before < 1e-15 {
            break;
        }
    }
    Ok(InfovaeOptimum {
        joint: build(&theta)?,
        eq6: best,
        sweeps,
    })
}

/// Categorical encoder row of a [`TabularModel`].
#[derive(Debug, Clone)]
pub struct CategoricalPosterior {
    pub probs: Vec<f64>,
}

impl Posterior for CategoricalPosterior {
    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![categorical_many(&self.probs, 1, rng)[0] as f64]
    }

    fn log_prob(&self, z: &[f64]) -> Result<f64> {
        let i = index(z, self.probs.len(), "latent")?;
        Ok(libm::log(self.probs[i]))
    }
}

fn index(v: &[f64], n: usize, what: &'static str) -> Result<usize> {
    if v.len() != 1 {
        return Err(Error::DimensionMismatch {
            what,
            expected: 1,
            got: v.len(),
        });
    }
    let i = v[0] as usize;
    if v[0] < 0.0 || v[0].fract() != 0.0 || i >= n {
        return Err(Error::invalid(alloc::format!(
            "{what} index {} out of range 0..{n}",
            v[0]
        )));
    }
    Ok(i)
}

/// A [`TabularJoint`] viewed as a sampleable model. Data and latents are
/// one-element vectors holding the category index.
#[derive(Debug, Clone)]
pub struct TabularModel {
    pub joint: TabularJoint,
}

impl TabularModel {
    pub fn new(joint: TabularJoint) -> Result<Self> {
        joint.validate()?;
        Ok(TabularModel { joint })
    }

    /// Exact `log p(x)`.
    pub fn log_marginal(&self, x: usize) -> f64 {
        libm::log(self.joint.p_x()[x])
    }
}

impl LatentModel for TabularModel {
    type Posterior = CategoricalPosterior;

    fn data_dim(&self) -> usize {
        1
    }

    fn latent_dim(&self) -> usize {
        1
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![categorical_many(&self.joint.p_z, 1, rng)[0] as f64]
    }

    fn prior_log_prob(&self, z: &[f64]) -> f64 {
        index(z, self.joint.nz, "latent")
            .map_or(f64::NEG_INFINITY, |i| libm::log(self.joint.p_z[i]))
    }

    fn posterior(&self, x: &[f64]) -> Result<CategoricalPosterior> {
        let i = index(x, self.joint.nx, "data")?;
        Ok(CategoricalPosterior {
            probs: self.joint.q_z_given_x[i].clone(),
        })
    }

    fn log_likelihood(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        let (xi, zi) = (
            index(x, self.joint.nx, "data")?,
            index(z, self.joint.nz, "latent")?,
        );
        Ok(libm::log(self.joint.p_x_given_z[zi][xi]))
    }

    fn sample_likelihood(&self, z: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let zi = index(z, self.joint.nz, "latent")?;
        Ok(vec![
            categorical_many(&self.joint.p_x_given_z[zi], 1, rng)[0] as f64,
        ])
    }

    fn kl_to_prior(&self, x: &[f64]) -> Result<f64> {
        let i = index(x, self.joint.nx, "data")?;
        Ok(kl_discrete(&self.joint.q_z_given_x[i], &self.joint.p_z).to_f64())
    }
}

/// Continuous 1-D latent with an `N(0,1)` prior, a Gaussian encoder per
/// data atom, and a decoder that is constant on each bin of `z`.
///
/// The bin structure makes `p(x)`, `p(z|x)` and the variational gap exact
/// one-dimensional sums, so it serves as the oracle for lattice and
/// quadrature estimators.
#[derive(Debug, Clone)]
pub struct BinnedLatentModel {
    /// Sorted interior bin edges; `edges.len() + 1` bins.
    pub edges: Vec<f64>,
    /// `n_bins × nx`.
    pub p_x_given_bin: Vec<Vec<f64>>,
    /// `(mean, std)` of `q(z|x)` for each data atom.
    pub encoder: Vec<(f64, f64)>,
}

impl BinnedLatentModel {
    pub fn new(
        edges: Vec<f64>,
        p_x_given_bin: Vec<Vec<f64>>,
        encoder: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("bin edges must be strictly increasing"));
        }
        if p_x_given_bin.len() != edges.len() + 1 {
            return Err(Error::DimensionMismatch {
                what: "decoder bins",
                expected: edges.len() + 1,
                got: p_x_given_bin.len(),
            });
        }
        let nx = encoder.len();
        for row in &p_x_given_bin {
            check_distribution("p_x_given_bin row", row, nx)?;
        }
        if encoder.iter().any(|(m, s)| !m.is_finite() || !(*s > 0.0)) {
            return Err(Error::invalid(
                "encoder needs finite means and positive stds",
            ));
        }
        Ok(BinnedLatentModel {
            edges,
            p_x_given_bin,
            encoder,
        })
    }

    pub fn nx(&self) -> usize {
        self.encoder.len()
    }

    pub fn bin_of(&self, z: f64) -> usize {
        self.edges.partition_point(|e| *e <= z)
    }

    /// Mass of each bin under `N(mean, std²)`.
    pub fn bin_masses(&self, mean: f64, std: f64) -> Vec<f64> {
        let mut cdf = vec![0.0];
        cdf.extend(self.edges.iter().map(|e| normal_cdf((e - mean) / std)));
        cdf.push(1.0);
        cdf.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Exact `log p(x)`.
    pub fn log_marginal(&self, x: usize) -> f64 {
        let s: CompensatedSum = self
            .bin_masses(0.0, 1.0)
            .iter()
            .zip(&self.p_x_given_bin)
            .map(|(m, row)| m * row[x])
            .collect();
        libm::log(s.value())
    }

    /// Exact posterior density `p(z|x)`.
    pub fn posterior_density(&self, x: usize, z: f64) -> f64 {
        libm::exp(
            standard_normal_log_prob(&[z]) + libm::log(self.p_x_given_bin[self.bin_of(z)][x])
                - self.log_marginal(x),
        )
    }

    /// Exact `KL(q(z|x) ‖ p(z|x))`.
    pub fn exact_gap(&self, x: usize) -> f64 {
        let (m, s) = self.encoder[x];
        let q = DiagGaussian::new(vec![m], vec![s]).expect("validated encoder");
        let cross: CompensatedSum = self
            .bin_masses(m, s)
            .iter()
            .zip(&self.p_x_given_bin)
            .map(|(w, row)| xlogy(*w, row[x]).to_f64())
            .collect();
        kl_diag_gaussian_to_standard(&q) - cross.value() + self.log_marginal(x)
    }
}

impl LatentModel for BinnedLatentModel {
    type Posterior = DiagGaussian;

    fn data_dim(&self) -> usize {
        1
    }

    fn latent_dim(&self) -> usize {
        1
    }

    fn sample_prior(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        standard_normal_vec(rng, 1)
    }

    fn prior_log_prob(&self, z: &[f64]) -> f64 {
        standard_normal_log_prob(z)
    }

    fn posterior(&self, x: &[f64]) -> Result<DiagGaussian> {
        let (m, s) = self.encoder[index(x, self.nx(), "data")?];
        DiagGaussian::new(vec![m], vec![s])
    }

    fn log_likelihood(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        let xi = index(x, self.nx(), "data")?;
        if z.len() != 1 {
            return Err(Error::DimensionMismatch {
                what: "latent",
                expected: 1,
                got: z.len(),
            });
        }
        Ok(libm::log(self.p_x_given_bin[self.bin_of(z[0])][xi]))
    }

    fn sample_likelihood(&self, z: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let row = &self.p_x_given_bin[self.bin_of(z[0])];
        Ok(vec![categorical_many(row, 1, rng)[0] as f64])
    }

    fn kl_to_prior(&self, x: &[f64]) -> Result<f64> {
        Ok(kl_diag_gaussian_to_standard(&self.posterior(x)?))
    }
}
