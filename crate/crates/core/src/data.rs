//! In-memory datasets and the synthetic generators used by the experiments.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{standard_normal_vec, uniform01};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub x: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub binarized: bool,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        x: Vec<Vec<f64>>,
        labels: Option<Vec<usize>>,
        binarized: bool,
    ) -> Result<Self> {
        let d = Dataset {
            name: name.into(),
            x,
            labels,
            binarized,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let dim = self.x[0].len();
        if dim == 0 {
            return Err(Error::Empty("dataset rows"));
        }
        for r in &self.x {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "dataset row",
                    expected: dim,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("dataset entry".into()));
            }
            if self.binarized && r.iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::invalid(
                    "binarized dataset has entries outside {0, 1}",
                ));
            }
        }
        if let Some(l) = &self.labels {
            if l.len() != self.x.len() {
                return Err(Error::DimensionMismatch {
                    what: "labels",
                    expected: self.x.len(),
                    got: l.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    /// The first `n` rows.
    pub fn take(&self, n: usize) -> Result<Dataset> {
        if n == 0 || n > self.len() {
            return Err(Error::invalid(alloc::format!(
                "cannot take {n} of {} rows",
                self.len()
            )));
        }
        Ok(Dataset {
            name: self.name.clone(),
            x: self.x[..n].to_vec(),
            labels: self.labels.as_ref().map(|l| l[..n].to_vec()),
            binarized: self.binarized,
        })
    }

    /// Rows in a seeded random order.
    pub fn shuffled(&self, seed: u64) -> Dataset {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Dataset {
            name: self.name.clone(),
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
            binarized: self.binarized,
        }
    }
}

/// The two one-dimensional points `{−1, 1}`.
pub fn two_point_dataset() -> Dataset {
    Dataset {
        name: "two_point".into(),
        x: vec![vec![-1.0], vec![1.0]],
        labels: None,
        binarized: false,
    }
}

/// `k` unit-variance Gaussian clusters centered on a circle of radius
/// `sep` in 2-D, with labels balanced to within one.
pub fn synthetic_mixture(k: usize, n: usize, sep: f64, seed: u64) -> Result<Dataset> {
    if k < 2 || n < k {
        return Err(Error::invalid(alloc::format!(
            "synthetic_mixture needs k >= 2 and n >= k, got k={k}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut rng);
    let x = labels
        .iter()
        .map(|&c| {
            let a = 2.0 * core::f64::consts::PI * c as f64 / k as f64;
            let e = standard_normal_vec(&mut rng, 2);
            vec![sep * libm::cos(a) + e[0], sep * libm::sin(a) + e[1]]
        })
        .collect();
    Dataset::new("synthetic_mixture", x, Some(labels), false)
}

/// Binary vectors: `k` random prototypes of `dim` bits, each sample a
/// prototype with every bit flipped independently with probability `flip`.
/// Labels are prototype indices, balanced to within one.
pub fn binary_prototypes(k: usize, dim: usize, n: usize, flip: f64, seed: u64) -> Result<Dataset> {
    if k < 2 || dim == 0 || n < k || !(0.0..0.5).contains(&flip) {
        return Err(Error::invalid(
            "binary_prototypes needs k >= 2, dim >= 1, n >= k, flip in [0, 0.5)",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protos = distinct_prototypes(k, dim, &mut rng)?;
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut rng);
    let x = labels
        .iter()
        .map(|&c| {
            protos[c]
                .iter()
                .map(|b| {
                    if uniform01(&mut rng) < flip {
                        1.0 - b
                    } else {
                        *b
                    }
                })
                .collect()
        })
        .collect();
    Dataset::new("binary_prototypes", x, Some(labels), true)
}

/// Prototypes at pairwise Hamming distance at least `dim / 4`.
fn distinct_prototypes(k: usize, dim: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
    let min_dist = dim / 4;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..10_000 {
        if out.len() == k {
            break;
        }
        let p: Vec<f64> = (0..dim)
            .map(|_| if uniform01(rng) < 0.5 { 1.0 } else { 0.0 })
            .collect();
        let far = out
            .iter()
            .all(|q| q.iter().zip(&p).filter(|(a, b)| a != b).count() >= min_dist);
        if far {
            out.push(p);
        }
    }
    if out.len() < k {
        return Err(Error::invalid(alloc::format!(
            "cannot place {k} prototypes in {dim} bits"
        )));
    }
    Ok(out)
}

/// Seven-segment strokes on an 8×8 canvas: (row0, col0, row1, col1).
const SEGMENTS: [(usize, usize, usize, usize); 7] = [
    (1, 2, 1, 5), // top
    (1, 5, 3, 5), // upper right
    (4, 5, 6, 5), // lower right
    (6, 2, 6, 5), // bottom
    (4, 2, 6, 2), // lower left
    (1, 2, 3, 2), // upper left
    (3, 2, 4, 5), // middle (filled as a 2-row bar)
];

const DIGIT_SEGMENTS: [[bool; 7]; 10] = [
    [true, true, true, true, true, true, false],
    [false, true, true, false, false, false, false],
    [true, true, false, true, true, false, true],
    [true, true, true, true, false, false, true],
    [false, true, true, false, false, true, true],
    [true, false, true, true, false, true, true],
    [true, false, true, true, true, true, true],
    [true, true, true, false, false, false, false],
    [true, true, true, true, true, true, true],
    [true, true, true, true, false, true, true],
];

fn digit_template(d: usize) -> [[f64; 8]; 8] {
    let mut img = [[0.0; 8]; 8];
    for (s, on) in SEGMENTS.iter().zip(DIGIT_SEGMENTS[d]) {
        if !on {
            continue;
        }
        let &(r0, c0, r1, c1) = s;
        if r0 == 3 && r1 == 4 {
            for c in c0..=c1 {
                img[3][c] = 1.0;
                img[4][c] = 0.6;
            }
            continue;
        }
        for row in img.iter_mut().take(r1 + 1).skip(r0) {
            for v in row.iter_mut().take(c1 + 1).skip(c0) {
                *v = 1.0;
            }
        }
    }
    img
}

/// Synthetic 8×8 grayscale digits in `[0, 1]`: seven-segment templates
/// shifted by up to one pixel, with per-pixel Gaussian noise (sd 0.1),
/// clipped. Labels are balanced to within one.
pub fn synthetic_digits(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Empty("synthetic_digits"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates: Vec<_> = (0..10).map(digit_template).collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % 10).collect();
    labels.shuffle(&mut rng);
    let x = labels
        .iter()
        .map(|&c| {
            let dr = (uniform01(&mut rng) * 3.0) as isize - 1;
            let dc = (uniform01(&mut rng) * 3.0) as isize - 1;
            let noise = standard_normal_vec(&mut rng, 64);
            let mut px = Vec::with_capacity(64);
            for r in 0..8isize {
                for col in 0..8isize {
                    let (sr, sc) = (r - dr, col - dc);
                    let base = if (0..8).contains(&sr) && (0..8).contains(&sc) {
                        templates[c][sr as usize][sc as usize]
                    } else {
                        0.0
                    };
                    px.push((base + 0.1 * noise[(r * 8 + col) as usize]).clamp(0.0, 1.0));
                }
            }
            px
        })
        .collect();
    Dataset::new("synthetic_digits", x, Some(labels), false)
}

/// Replaces every pixel `p ∈ [0, 1]` by a `Bernoulli(p)` draw.
pub fn binarize_stochastic(d: &Dataset, seed: u64) -> Result<Dataset> {
    if d.x.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid(
            "binarize_stochastic needs pixel values in [0, 1]",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x =
        d.x.iter()
            .map(|r| {
                r.iter()
                    .map(|p| if uniform01(&mut rng) < *p { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
    Dataset::new(
        alloc::format!("{}_binarized", d.name),
        x,
        d.labels.clone(),
        true,
    )
}
