//! Named parameter storage, dense layers and the Adam optimizer.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Tape, Tensor};
use crate::error::{Error, Result};

/// Index of a parameter inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Ordered collection of named parameter tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

/// Serializable form of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value.detach());
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let old = &self.tensors[id.0];
        if old.shape() != value.shape() {
            return Err(Error::ShapeMismatch {
                op: "param set",
                lhs: old.shape().to_vec(),
                rhs: value.shape().to_vec(),
            });
        }
        self.tensors[id.0] = value.detach();
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Parameters as tensors for one forward pass: tape leaves when `tape` is
    /// given, constants otherwise.
    pub fn bind(&self, tape: Option<&Tape>) -> Vec<Tensor> {
        match tape {
            Some(t) => self.tensors.iter().map(|p| t.leaf(p)).collect(),
            None => self.tensors.clone(),
        }
    }

    /// Gradient arrays for every parameter, in order.
    pub fn gradients(bound: &[Tensor], grads: &Gradients) -> Vec<Vec<f64>> {
        bound.iter().map(|t| grads.wrt(t).into_values()).collect()
    }

    /// All parameter values concatenated in order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|t| t.values().iter().copied())
            .collect()
    }

    /// Inverse of [`ParamSet::flatten`].
    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_values() {
            return Err(Error::DimensionMismatch {
                what: "flat parameters",
                expected: self.num_values(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for t in &mut self.tensors {
            let n = t.len();
            *t = Tensor::new(t.shape().to_vec(), flat[offset..offset + n].to_vec())?;
            offset += n;
        }
        Ok(())
    }

    pub fn to_records(&self) -> Vec<ParamRecord> {
        self.iter()
            .map(|(name, t)| ParamRecord {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                values: t.values().to_vec(),
            })
            .collect()
    }

    /// Overwrites values from records; names and shapes must match exactly.
    pub fn load_records(&mut self, records: &[ParamRecord]) -> Result<()> {
        if records.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter count",
                expected: self.len(),
                got: records.len(),
            });
        }
        for (i, r) in records.iter().enumerate() {
            if r.name != self.names[i] {
                return Err(Error::invalid(alloc::format!(
                    "parameter {i} is `{}`, expected `{}`",
                    r.name,
                    self.names[i]
                )));
            }
            self.set(ParamId(i), Tensor::new(r.shape.clone(), r.values.clone())?)?;
        }
        Ok(())
    }
}

/// Fully connected layer `x W + b`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    /// Weights drawn from `U(-1/√fan_in, 1/√fan_in)`, zero bias. With
    /// `zero` the weights are zero too.
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        zero: bool,
        rng: &mut dyn RngCore,
    ) -> Self {
        let bound = 1.0 / libm::sqrt(fan_in as f64);
        let w = (0..fan_in * fan_out)
            .map(|_| {
                if zero {
                    0.0
                } else {
                    rng.random_range(-bound..bound)
                }
            })
            .collect();
        let weight = params.push(
            alloc::format!("{name}.weight"),
            Tensor::from_parts(vec![fan_in, fan_out], w),
        );
        let bias = params.push(
            alloc::format!("{name}.bias"),
            Tensor::from_parts(vec![fan_out], vec![0.0; fan_out]),
        );
        Linear {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward(&self, p: &[Tensor], x: &Tensor) -> Result<Tensor> {
        x.matmul(&p[self.weight.0])?.add(&p[self.bias.0])
    }
}

/// Tanh MLP with a linear output layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    /// `sizes = [input, hidden.., output]`. The output layer starts at zero
    /// when `zero_output` is set.
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        sizes: &[usize],
        zero_output: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(alloc::format!(
                "mlp `{name}` needs positive sizes, got {sizes:?}"
            )));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                Linear::new(
                    params,
                    &alloc::format!("{name}.{i}"),
                    w[0],
                    w[1],
                    zero_output && i == last,
                    rng,
                )
            })
            .collect();
        Ok(Mlp { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    pub fn forward(&self, p: &[Tensor], x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(p, &h)?;
            if i + 1 < self.layers.len() {
                h = h.tanh()?;
            }
        }
        Ok(h)
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state: step counter and per-parameter moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub step: u64,
    pub config: AdamConfig,
    pub rng_seed: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl TrainState {
    pub fn new(params: &ParamSet, config: AdamConfig, rng_seed: u64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        TrainState {
            step: 0,
            config,
            rng_seed,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// One bias-corrected Adam update. Nothing changes if any gradient
    /// entry is non-finite; the error names the offending parameter.
    pub fn adam_step(&mut self, params: &mut ParamSet, grads: &[Vec<f64>]) -> Result<()> {
        if grads.len() != params.len() || self.first_moment.len() != params.len() {
            return Err(Error::DimensionMismatch {
                what: "adam gradients",
                expected: params.len(),
                got: grads.len(),
            });
        }
        for (i, g) in grads.iter().enumerate() {
            if g.len() != params.tensors[i].len() {
                return Err(Error::DimensionMismatch {
                    what: "adam gradient length",
                    expected: params.tensors[i].len(),
                    got: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(alloc::format!(
                    "gradient of {}",
                    params.names[i]
                )));
            }
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(beta1, t as f64);
        let c2 = 1.0 - libm::pow(beta2, t as f64);
        for (i, g) in grads.iter().enumerate() {
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            let values = params.tensors[i].values_mut();
            let step = learning_rate / c1;
            let inv_c2 = 1.0 / c2;
            for (((p, m), v), &g) in values.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= step * *m / ((*v * inv_c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::backward;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bowl() -> (ParamSet, ParamId) {
        let mut p = ParamSet::new();
        let id = p.push("x", Tensor::vector(vec![3.0, -2.0, 0.5]));
        (p, id)
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut p, id) = bowl();
        let mut st = TrainState::new(&p, AdamConfig::default(), 0);
        for _ in 0..10 {
            st.adam_step(&mut p, &[vec![0.0; 3]]).unwrap();
        }
        assert_eq!(p.get(id).values(), &[3.0, -2.0, 0.5]);
    }

    #[test]
    fn constant_gradient_gives_lr_sized_steps() {
        let (mut p, id) = bowl();
        let mut st = TrainState::new(&p, AdamConfig::default(), 0);
        let mut prev = p.get(id).values().to_vec();
        for step in 0..200 {
            st.adam_step(&mut p, &[vec![0.5, -4.0, 1e-3]]).unwrap();
            let now = p.get(id).values().to_vec();
            if step > 100 {
                let expected = [-1e-3, 1e-3, -1e-3];
                for k in 0..3 {
                    assert!((now[k] - prev[k] - expected[k]).abs() < 1e-6);
                }
            }
            prev = now;
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        let (mut p, id) = bowl();
        let cfg = AdamConfig {
            learning_rate: 1e-2,
            ..AdamConfig::default()
        };
        let target = Tensor::vector(vec![1.0, 2.0, -1.0]);
        let mut st = TrainState::new(&p, cfg, 0);
        for _ in 0..2000 {
            let tape = Tape::new();
            let bound = p.bind(Some(&tape));
            let loss = bound[0]
                .sub(&target)
                .unwrap()
                .square()
                .unwrap()
                .sum()
                .unwrap();
            let g = ParamSet::gradients(&bound, &backward(&loss).unwrap());
            st.adam_step(&mut p, &g).unwrap();
        }
        for (a, b) in p.get(id).values().iter().zip(target.values()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = ParamSet::new();
        p.push("enc.0.weight", Tensor::vector(vec![1.0]));
        p.push("enc.0.bias", Tensor::vector(vec![1.0]));
        let mut st = TrainState::new(&p, AdamConfig::default(), 0);
        let err = st
            .adam_step(&mut p, &[vec![0.0], vec![f64::NAN]])
            .unwrap_err();
        assert!(alloc::format!("{err}").contains("enc.0.bias"));
        assert_eq!(st.step, 0);
        assert_eq!(p.get(ParamId(0)).values(), &[1.0]);
    }

    #[test]
    fn mlp_shapes_and_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = ParamSet::new();
        let mlp = Mlp::new(&mut p, "m", &[3, 5, 5, 2], true, &mut rng).unwrap();
        assert_eq!(p.len(), 6);
        let x = Tensor::matrix(4, 3, (0..12).map(|i| i as f64).collect()).unwrap();
        let y = mlp.forward(&p.bind(None), &x).unwrap();
        assert_eq!(y.shape(), &[4, 2]);
        assert!(y.values().iter().all(|&v| v == 0.0));
        assert!(Mlp::new(&mut p, "bad", &[3], false, &mut rng).is_err());
    }

    #[test]
    fn flatten_round_trip_and_records() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = ParamSet::new();
        Mlp::new(&mut p, "m", &[2, 3, 1], false, &mut rng).unwrap();
        let flat = p.flatten();
        let mut q = p.clone();
        q.unflatten(&vec![0.0; flat.len()]).unwrap();
        q.load_records(&p.to_records()).unwrap();
        assert_eq!(q.flatten(), flat);
        let mut recs = p.to_records();
        recs[0].name = "other".into();
        assert!(q.load_records(&recs).is_err());
    }
}
