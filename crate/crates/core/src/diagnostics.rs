//! Measurement battery for trained models: aggregate-posterior covariance,
//! mutual information, class-distribution cross-entropy, linear probe,
//! variational gap and full-batch MMD.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::distributions::DiagGaussian;
use crate::divergences::{mmd_vstat_value, KernelSpec};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, normal_cdf, CompensatedSum, ExtReal};
use crate::sampling::{
    ancestral_sample, grid_posterior_with_likelihoods, importance_log_likelihood, LatentModel,
    Posterior, LATTICE_CELLS, LATTICE_HALF_WIDTH,
};

/// Metric values logged at one training step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub values: BTreeMap<String, ExtReal>,
}

impl MetricsRecord {
    pub fn new(step: u64) -> Self {
        MetricsRecord {
            step,
            values: BTreeMap::new(),
        }
    }

    /// Stores `v`; NaN is rejected, IEEE infinities become markers.
    pub fn insert(&mut self, name: &str, v: impl Into<ExtReal>) -> Result<()> {
        let v = v.into();
        if let ExtReal::Finite(x) = v {
            if x.is_nan() {
                return Err(Error::NonFinite(alloc::format!("metric {name}")));
            }
        }
        self.values.insert(name.into(), v);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<ExtReal> {
        self.values.get(name).copied()
    }
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Log-determinant of a symmetric positive-definite matrix via Cholesky;
/// `None` if a pivot falls below `1e-12` of its diagonal entry.
pub fn logdet_spd(a: &[Vec<f64>]) -> Option<f64> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    let mut logdet = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 1e-12 * a[i][i].abs()) || d <= 0.0 {
                    return None;
                }
                l[i][i] = libm::sqrt(d);
                logdet += libm::log(d);
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(logdet)
}

/// Unbiased sample covariance of the rows.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::invalid("covariance needs at least two rows"));
    }
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in 0..=i {
                cov[i][j] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    Ok(cov)
}

/// Draws `samples_per_x` latents from `q(z|x)` for every row of `data`
/// and returns the log-determinant of their sample covariance
/// (not divided by the latent dimension). A singular covariance is `−∞`.
pub fn logdet_cov_aggregate<M: LatentModel>(
    model: &M,
    data: &[Vec<f64>],
    samples_per_x: usize,
    rng: &mut dyn RngCore,
) -> Result<ExtReal> {
    let total = data.len() * samples_per_x;
    if total < model.latent_dim() + 1 {
        return Err(Error::invalid(alloc::format!(
            "logdet_cov_aggregate needs at least {} samples, got {total}",
            model.latent_dim() + 1
        )));
    }
    let posts = model.posteriors(data)?;
    let mut zs = Vec::with_capacity(total);
    for q in &posts {
        for _ in 0..samples_per_x {
            zs.push(q.sample(rng));
        }
    }
    let cov = sample_covariance(&zs)?;
    Ok(logdet_spd(&cov).map_or(ExtReal::NegInf, ExtReal::Finite))
}

/// `Î = (1/N) Σ_i E_{z~q(z|x_i)} [log q(z|x_i) − log q̂(z)]` with
/// `q̂ = (1/m) Σ_{j<m} q(z|x_j)` over the first `m_mixture` rows and
/// `n_mc` draws per row.
pub fn mi_estimate<M: LatentModel>(
    model: &M,
    data: &[Vec<f64>],
    m_mixture: usize,
    n_mc: usize,
    rng: &mut dyn RngCore,
) -> Result<Estimate> {
    if data.is_empty() {
        return Err(Error::Empty("mi_estimate data"));
    }
    if m_mixture == 0 || m_mixture > data.len() {
        return Err(Error::invalid(alloc::format!(
            "m_mixture must be in 1..={}, got {m_mixture}",
            data.len()
        )));
    }
    if n_mc == 0 {
        return Err(Error::invalid("mi_estimate needs n_mc >= 1"));
    }
    let posts = model.posteriors(data)?;
    let mixture = &posts[..m_mixture];
    let log_m = libm::log(m_mixture as f64);
    let mut total = CompensatedSum::new();
    let mut var_sum = 0.0;
    let mut comp = vec![0.0; m_mixture];
    for q in &posts {
        let mut vals = Vec::with_capacity(n_mc);
        for _ in 0..n_mc {
            let z = q.sample(rng);
            for (c, qj) in comp.iter_mut().zip(mixture) {
                *c = qj.log_prob(&z)?;
            }
            vals.push(q.log_prob(&z)? - (log_sum_exp(&comp) - log_m));
        }
        let mean = vals.iter().sum::<f64>() / n_mc as f64;
        total.add(mean);
        if n_mc > 1 {
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n_mc - 1) as f64;
            var_sum += var / n_mc as f64;
        }
    }
    let n = posts.len() as f64;
    Ok(Estimate {
        value: total.value() / n,
        se: libm::sqrt(var_sum) / n,
    })
}

/// Mean of `KL(q(z|x) ‖ p(z))` over the rows.
pub fn mean_kl_qzx_pz<M: LatentModel>(model: &M, data: &[Vec<f64>]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("mean_kl_qzx_pz data"));
    }
    let mut s = CompensatedSum::new();
    for x in data {
        s.add(model.kl_to_prior(x)?);
    }
    Ok(s.value() / data.len() as f64)
}

/// `−Σ c_i (log ĉ_i − log c_i) = KL(c ‖ ĉ)` with add-one smoothed
/// empirical frequencies `ĉ`.
pub fn class_distribution_ce(true_dist: &[f64], sample_labels: &[usize]) -> Result<f64> {
    if sample_labels.is_empty() {
        return Err(Error::Empty("class_distribution_ce labels"));
    }
    let k = true_dist.len();
    let s: f64 = true_dist.iter().sum();
    if k == 0 || (s - 1.0).abs() > 1e-9 || true_dist.iter().any(|c| !(*c >= 0.0)) {
        return Err(Error::invalid("true_dist must be a probability vector"));
    }
    let mut counts = vec![1.0; k];
    for &l in sample_labels {
        if l >= k {
            return Err(Error::invalid(alloc::format!(
                "label {l} out of range 0..{k}"
            )));
        }
        counts[l] += 1.0;
    }
    let denom = (sample_labels.len() + k) as f64;
    let mut ce = CompensatedSum::new();
    for (c, n) in true_dist.iter().zip(&counts) {
        if *c > 0.0 {
            ce.add(-c * (libm::log(n / denom) - libm::log(*c)));
        }
    }
    Ok(ce.value())
}

/// Iterations of the probe's full-batch gradient descent.
pub const PROBE_ITERATIONS: usize = 500;
const PROBE_STEP: f64 = 0.5;
const PROBE_L2: f64 = 1e-4;

/// Multinomial logistic regression on the first `n_labeled` rows
/// (features standardized on that subset), returning the error rate on
/// the remaining rows.
pub fn linear_probe(latents: &[Vec<f64>], labels: &[usize], n_labeled: usize) -> Result<f64> {
    if latents.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "probe labels",
            expected: latents.len(),
            got: labels.len(),
        });
    }
    if n_labeled == 0 || n_labeled >= latents.len() {
        return Err(Error::invalid(alloc::format!(
            "n_labeled must leave a held-out set: {n_labeled} of {}",
            latents.len()
        )));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let train = &latents[..n_labeled];
    let train_y = &labels[..n_labeled];
    if train_y.iter().all(|l| *l == train_y[0]) {
        return Err(Error::invalid("labeled subset contains a single class"));
    }
    let d = train[0].len();
    let mut mu = vec![0.0; d];
    let mut sd = vec![0.0; d];
    for r in train {
        for t in 0..d {
            mu[t] += r[t] / n_labeled as f64;
        }
    }
    for r in train {
        for t in 0..d {
            sd[t] += (r[t] - mu[t]) * (r[t] - mu[t]) / n_labeled as f64;
        }
    }
    for s in sd.iter_mut() {
        *s = if *s > 1e-24 { libm::sqrt(*s) } else { 1.0 };
    }
    let feats = |r: &[f64]| -> Vec<f64> { (0..d).map(|t| (r[t] - mu[t]) / sd[t]).collect() };
    let xs: Vec<Vec<f64>> = train.iter().map(|r| feats(r)).collect();

    // w is k × (d + 1), last column the bias.
    let mut w = vec![vec![0.0; d + 1]; k];
    let scores = |w: &[Vec<f64>], x: &[f64]| -> Vec<f64> {
        w.iter()
            .map(|row| row[d] + row[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    };
    for _ in 0..PROBE_ITERATIONS {
        let mut grad = vec![vec![0.0; d + 1]; k];
        for (x, &y) in xs.iter().zip(train_y) {
            let s = scores(&w, x);
            let lse = log_sum_exp(&s);
            for c in 0..k {
                let g = libm::exp(s[c] - lse) - if c == y { 1.0 } else { 0.0 };
                for t in 0..d {
                    grad[c][t] += g * x[t];
                }
                grad[c][d] += g;
            }
        }
        for c in 0..k {
            for t in 0..=d {
                let reg = if t < d { PROBE_L2 * w[c][t] } else { 0.0 };
                w[c][t] -= PROBE_STEP * (grad[c][t] / n_labeled as f64 + reg);
            }
        }
    }
    let held = &latents[n_labeled..];
    let wrong = held
        .iter()
        .zip(&labels[n_labeled..])
        .filter(|(r, y)| {
            let s = scores(&w, &feats(r));
            let pred = (0..k).fold(0, |b, c| if s[c] > s[b] { c } else { b });
            pred != **y
        })
        .count();
    Ok(wrong as f64 / held.len() as f64)
}

/// Mass a diagonal Gaussian puts on each cell of the lattice, with the
/// mass that falls outside it.
fn gaussian_cell_masses(q: &DiagGaussian, cells: usize, half_width: f64) -> (Vec<f64>, f64) {
    let h = 2.0 * half_width / cells as f64;
    let axis: Vec<Vec<f64>> = (0..q.dim())
        .map(|t| {
            let (m, s) = (q.mean()[t], q.std()[t]);
            (0..cells)
                .map(|i| {
                    let a = -half_width + i as f64 * h;
                    normal_cdf((a + h - m) / s) - normal_cdf((a - m) / s)
                })
                .collect()
        })
        .collect();
    let total = cells.pow(q.dim() as u32);
    let masses: Vec<f64> = (0..total)
        .map(|idx| {
            let mut r = idx;
            let mut p = 1.0;
            for t in (0..q.dim()).rev() {
                p *= axis[t][r % cells];
                r /= cells;
            }
            p
        })
        .collect();
    let inside: f64 = masses.iter().sum();
    (masses, (1.0 - inside).max(0.0))
}

/// Lattice mass allowed outside `[−8, 8]^d` before the gap is refused.
pub const TRUNCATION_TOL: f64 = 1e-4;

/// `KL(q(z|x) ‖ p(z)p(x|z)/Z)` with the normalizer `Z` and the expected
/// log-likelihood taken by quadrature on the sampling lattice; the
/// prior part uses the analytic `KL(q(z|x) ‖ p(z))`.
pub fn variational_gap<M>(model: &M, x: &[f64]) -> Result<f64>
where
    M: LatentModel<Posterior = DiagGaussian>,
{
    let (g, ll) = grid_posterior_with_likelihoods(model, x, LATTICE_CELLS, LATTICE_HALF_WIDTH)?;
    let border = g.border_mass();
    if border > TRUNCATION_TOL {
        return Err(Error::LatticeTruncation { mass: border });
    }
    let q = model.posterior(x)?;
    let (masses, outside) = gaussian_cell_masses(&q, LATTICE_CELLS, LATTICE_HALF_WIDTH);
    if outside > TRUNCATION_TOL {
        return Err(Error::LatticeTruncation { mass: outside });
    }
    let mut expected = CompensatedSum::new();
    let mut used = 0.0;
    for (m, l) in masses.iter().zip(&ll) {
        if *m > 0.0 {
            expected.add(m * l);
            used += m;
        }
    }
    Ok(model.kl_to_prior(x)? - expected.value() / used + g.log_evidence)
}

/// Full-batch MMD between one `q(z|x)` draw per row and as many prior draws.
pub fn full_mmd<M: LatentModel>(
    model: &M,
    data: &[Vec<f64>],
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("full_mmd data"));
    }
    let posts = model.posteriors(data)?;
    let zq: Vec<Vec<f64>> = posts.iter().map(|q| q.sample(rng)).collect();
    let zp: Vec<Vec<f64>> = (0..data.len()).map(|_| model.sample_prior(rng)).collect();
    mmd_vstat_value(
        &Tensor::from_rows(&zq)?,
        &Tensor::from_rows(&zp)?,
        &KernelSpec::default_for_dim(model.latent_dim()),
    )
}

/// Label of the nearest centroid (squared Euclidean).
pub fn nearest_centroid(centroids: &[Vec<f64>], x: &[f64]) -> usize {
    let dist = |c: &Vec<f64>| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    (0..centroids.len()).fold(0, |b, i| {
        if dist(&centroids[i]) < dist(&centroids[b]) {
            i
        } else {
            b
        }
    })
}

/// Per-class mean of the rows.
pub fn class_centroids(data: &[Vec<f64>], labels: &[usize]) -> Vec<Vec<f64>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let d = data.first().map_or(0, |r| r.len());
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0.0; k];
    for (r, &l) in data.iter().zip(labels) {
        counts[l] += 1.0;
        for (s, v) in sums[l].iter_mut().zip(r) {
            *s += v;
        }
    }
    for (s, c) in sums.iter_mut().zip(&counts) {
        if *c > 0.0 {
            s.iter_mut().for_each(|v| *v /= c);
        }
    }
    sums
}

/// Sizes for the full diagnostics battery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryConfig {
    /// Rows of the data used by every metric (the first ones).
    pub max_points: usize,
    pub samples_per_x: usize,
    pub mi_mixture: usize,
    pub mi_samples: usize,
    pub ll_points: usize,
    pub ll_samples: usize,
    pub class_samples: usize,
    /// Fraction of the evaluated rows the probe trains on.
    pub probe_fraction: f64,
    /// Rows for the variational gap (latent_dim ≤ 2 only).
    pub gap_points: usize,
    /// Report `logdet_cov` divided by the latent dimension.
    pub logdet_per_dim: bool,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            max_points: 500,
            samples_per_x: 4,
            mi_mixture: 500,
            mi_samples: 4,
            ll_points: 20,
            ll_samples: 500,
            class_samples: 500,
            probe_fraction: 0.5,
            gap_points: 2,
            logdet_per_dim: false,
        }
    }
}

/// Runs every metric that applies to `model` on `data`.
///
/// Label-based metrics need `labels`; `var_gap` needs a Gaussian encoder
/// and `latent_dim ≤ 2`. The probe uses one posterior sample per row as
/// features.
pub fn run_battery<M>(
    model: &M,
    data: &[Vec<f64>],
    labels: Option<&[usize]>,
    step: u64,
    cfg: &BatteryConfig,
    rng: &mut dyn RngCore,
) -> Result<MetricsRecord>
where
    M: LatentModel<Posterior = DiagGaussian>,
{
    let n = data.len().min(cfg.max_points);
    if n == 0 {
        return Err(Error::Empty("battery data"));
    }
    let data = &data[..n];
    let mut rec = MetricsRecord::new(step);
    let mut logdet = logdet_cov_aggregate(model, data, cfg.samples_per_x, rng)?;
    if cfg.logdet_per_dim {
        logdet = logdet.scale(1.0 / model.latent_dim() as f64);
    }
    rec.insert("logdet_cov", logdet)?;
    let mi = mi_estimate(model, data, cfg.mi_mixture.min(n), cfg.mi_samples, rng)?;
    rec.insert("mi_estimate", mi.value)?;
    rec.insert("full_mmd", full_mmd(model, data, rng)?)?;
    rec.insert("mean_kl_qzx_pz", mean_kl_qzx_pz(model, data)?)?;
    let mut ll = CompensatedSum::new();
    let ll_n = cfg.ll_points.min(n);
    for x in &data[..ll_n] {
        ll.add(importance_log_likelihood(model, x, cfg.ll_samples, rng)?);
    }
    rec.insert("ll_estimate", ll.value() / ll_n as f64)?;
    if let Some(labels) = labels {
        let labels = &labels[..n];
        let centroids = class_centroids(data, labels);
        let mut freq = vec![0.0; centroids.len()];
        for &l in labels {
            freq[l] += 1.0 / n as f64;
        }
        let samples = ancestral_sample(model, cfg.class_samples, rng)?;
        let assigned: Vec<usize> = samples
            .iter()
            .map(|s| nearest_centroid(&centroids, s))
            .collect();
        rec.insert("class_ce", class_distribution_ce(&freq, &assigned)?)?;
        let posts = model.posteriors(data)?;
        let feats: Vec<Vec<f64>> = posts.iter().map(|q| q.sample(rng)).collect();
        let n_lab = ((n as f64 * cfg.probe_fraction) as usize).clamp(1, n - 1);
        if n >= 2 && labels[..n_lab].iter().any(|l| *l != labels[0]) {
            rec.insert("probe_error", linear_probe(&feats, labels, n_lab)?)?;
        }
    }
    if model.latent_dim() <= 2 && cfg.gap_points > 0 {
        let mut gap = CompensatedSum::new();
        let k = cfg.gap_points.min(n);
        let mut ok = true;
        for x in &data[..k] {
            match variational_gap(model, x) {
                Ok(v) => gap.add(v),
                Err(Error::LatticeTruncation { .. }) => ok = false,
                Err(e) => return Err(e),
            }
        }
        if ok {
            rec.insert("var_gap", gap.value() / k as f64)?;
        }
    }
    Ok(rec)
}

#[cfg(test)]
mod tests;
