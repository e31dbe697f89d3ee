use super::*;
use crate::distributions::{
    kl_diag_gaussian_to_standard, standard_normal_log_prob, standard_normal_vec,
};
use crate::models::{DecoderKind, ModelConfig, ModelPair};
use crate::tabular::{mutual_information_exact, BinnedLatentModel, TabularJoint, TabularModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed Gaussian encoder per data index, decoder that ignores `z`.
struct Toy {
    enc: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Toy {
    fn data(&self) -> Vec<Vec<f64>> {
        (0..self.enc.len()).map(|i| vec![i as f64]).collect()
    }
}

impl LatentModel for Toy {
    type Posterior = DiagGaussian;
    fn data_dim(&self) -> usize {
        1
    }
    fn latent_dim(&self) -> usize {
        self.enc[0].0.len()
    }
    fn sample_prior(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        standard_normal_vec(rng, self.latent_dim())
    }
    fn prior_log_prob(&self, z: &[f64]) -> f64 {
        standard_normal_log_prob(z)
    }
    fn posterior(&self, x: &[f64]) -> Result<DiagGaussian> {
        let (m, s) = &self.enc[x[0] as usize];
        DiagGaussian::new(m.clone(), s.clone())
    }
    fn log_likelihood(&self, _x: &[f64], _z: &[f64]) -> Result<f64> {
        Ok(-(self.enc.len() as f64).ln())
    }
    fn sample_likelihood(&self, _z: &[f64], rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        Ok(vec![(crate::distributions::uniform01(rng)
            * self.enc.len() as f64)
            .floor()])
    }
    fn kl_to_prior(&self, x: &[f64]) -> Result<f64> {
        Ok(kl_diag_gaussian_to_standard(&self.posterior(x)?))
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn logdet_of_prior_encoder_is_zero() {
    let m = Toy {
        enc: vec![(vec![0.0, 0.0], vec![1.0, 1.0]); 100],
    };
    let v = logdet_cov_aggregate(&m, &m.data(), 100, &mut rng(0)).unwrap();
    assert!(v.finite().unwrap().abs() < 0.1, "{v}");
}

#[test]
fn logdet_of_wide_encoder() {
    let m = Toy {
        enc: vec![(vec![0.0, 0.0], vec![2.0, 2.0]); 100],
    };
    let v = logdet_cov_aggregate(&m, &m.data(), 100, &mut rng(1)).unwrap();
    assert!((v.finite().unwrap() - 2.0 * 4f64.ln()).abs() < 0.1, "{v}");
}

#[test]
fn logdet_of_spread_means_exceeds_zero() {
    // Two tight clusters at ±3 in 1-D: variance ≈ 9.
    let m = Toy {
        enc: vec![(vec![-3.0], vec![0.1]), (vec![3.0], vec![0.1])],
    };
    let v = logdet_cov_aggregate(&m, &m.data(), 5000, &mut rng(2)).unwrap();
    assert!((v.finite().unwrap() - (9.0f64 + 0.01).ln()).abs() < 0.1);
}

#[test]
fn logdet_singular_and_precondition() {
    assert_eq!(logdet_spd(&[vec![1.0, 1.0], vec![1.0, 1.0]]), None);
    assert!((logdet_spd(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap() - 36f64.ln()).abs() < 1e-12);
    let m = Toy {
        enc: vec![(vec![0.0, 0.0], vec![1.0, 1.0])],
    };
    assert!(logdet_cov_aggregate(&m, &m.data(), 2, &mut rng(0)).is_err());
    // Perfectly correlated draws: the second coordinate copies the first.
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
    assert_eq!(logdet_spd(&sample_covariance(&rows).unwrap()), None);
}

#[test]
fn mi_of_constant_encoder_is_zero() {
    let m = Toy {
        enc: vec![(vec![0.5], vec![0.7]); 20],
    };
    let e = mi_estimate(&m, &m.data(), 20, 200, &mut rng(3)).unwrap();
    assert!(e.value.abs() <= 3.0 * e.se + 1e-12, "{e:?}");
}

#[test]
fn mi_of_near_bijective_code_is_log_four() {
    let corners = [(-10.0, -10.0), (-10.0, 10.0), (10.0, -10.0), (10.0, 10.0)];
    let m = Toy {
        enc: corners
            .iter()
            .map(|(a, b)| (vec![*a, *b], vec![0.5, 0.5]))
            .collect(),
    };
    let e = mi_estimate(&m, &m.data(), 4, 500, &mut rng(4)).unwrap();
    assert!((e.value - 4f64.ln()).abs() < 0.05, "{e:?}");
}

#[test]
fn mi_matches_tabular_exact() {
    // Uniform data over the atoms, each listed once, so the mixture is q(z).
    let mut j = TabularJoint::random(5, 4, &mut rng(5)).unwrap();
    j.p_data = vec![0.2; 5];
    let exact = mutual_information_exact(&j);
    let m = TabularModel::new(j).unwrap();
    let data: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
    let e = mi_estimate(&m, &data, 5, 10_000, &mut rng(6)).unwrap();
    assert!((e.value - exact).abs() < 3.0 * e.se, "{e:?} vs {exact}");
}

#[test]
fn mi_preconditions() {
    let m = Toy {
        enc: vec![(vec![0.0], vec![1.0]); 3],
    };
    assert!(mi_estimate(&m, &m.data(), 4, 1, &mut rng(0)).is_err());
    assert!(mi_estimate(&m, &m.data(), 0, 1, &mut rng(0)).is_err());
    assert!(mi_estimate(&m, &[], 1, 1, &mut rng(0)).is_err());
}

#[test]
fn mean_kl_of_prior_encoder_is_zero() {
    let m = Toy {
        enc: vec![(vec![0.0, 0.0], vec![1.0, 1.0]); 3],
    };
    assert_eq!(mean_kl_qzx_pz(&m, &m.data()).unwrap(), 0.0);
}

#[test]
fn class_ce_examples() {
    // ĉ equal to c after smoothing: 2 classes, counts (1, 1) → ĉ = (2/4, 2/4).
    assert!(class_distribution_ce(&[0.5, 0.5], &[0, 1]).unwrap().abs() < 1e-15);
    // Counts (2, 0) with smoothing → ĉ = (0.75, 0.25).
    let v = class_distribution_ce(&[0.5, 0.5], &[0, 0]).unwrap();
    let expected = -0.5 * (0.75f64.ln() - 0.5f64.ln()) - 0.5 * (0.25f64.ln() - 0.5f64.ln());
    assert!((v - expected).abs() < 1e-15);
    assert!((v - 0.14384).abs() < 1e-5);
    assert!(class_distribution_ce(&[0.5, 0.5], &[]).is_err());
    assert!(class_distribution_ce(&[0.5, 0.5], &[2]).is_err());
    assert!(class_distribution_ce(&[0.5, 0.6], &[0]).is_err());
}

#[test]
fn class_ce_vanishes_with_many_matching_samples() {
    let c = [0.2, 0.3, 0.5];
    let labels = crate::sampling::categorical_many(&c, 100_000, &mut rng(7));
    assert!(class_distribution_ce(&c, &labels).unwrap() < 1e-3);
}

#[test]
fn probe_on_identical_latents_is_chance() {
    let latents = vec![vec![0.3, -0.1]; 400];
    let labels: Vec<usize> = (0..400).map(|i| if i % 4 == 0 { 1 } else { 0 }).collect();
    let err = linear_probe(&latents, &labels, 200).unwrap();
    assert!((err - 0.25).abs() < 1e-12);
}

#[test]
fn probe_on_separable_latents() {
    let mut r = rng(8);
    let mut latents = Vec::new();
    let mut labels = Vec::new();
    for i in 0..600 {
        let c = i % 3;
        let angle = c as f64 * 2.0 * std::f64::consts::PI / 3.0;
        let n = standard_normal_vec(&mut r, 2);
        latents.push(vec![
            5.0 * angle.cos() + 0.5 * n[0],
            5.0 * angle.sin() + 0.5 * n[1],
        ]);
        labels.push(c);
    }
    assert!(linear_probe(&latents, &labels, 300).unwrap() < 0.02);
}

#[test]
fn probe_preconditions() {
    let latents = vec![vec![0.0]; 4];
    assert!(linear_probe(&latents, &[0, 0, 1, 1], 2).is_err());
    assert!(linear_probe(&latents, &[0, 1, 0, 1], 4).is_err());
    assert!(linear_probe(&latents, &[0, 1, 0], 2).is_err());
}

#[test]
fn gap_of_prior_encoder_with_blind_decoder_is_zero() {
    let m = Toy {
        enc: vec![(vec![0.0, 0.0], vec![1.0, 1.0]); 2],
    };
    let g = variational_gap(&m, &[1.0]).unwrap();
    assert!(g.abs() < 1e-3, "{g}");
}

#[test]
fn gap_matches_binned_oracle() {
    let m = BinnedLatentModel::new(
        vec![-1.0, 0.0, 1.2],
        vec![
            vec![0.7, 0.2, 0.1],
            vec![0.2, 0.5, 0.3],
            vec![0.1, 0.1, 0.8],
            vec![0.3, 0.3, 0.4],
        ],
        vec![(-1.0, 0.6), (0.2, 0.9), (1.5, 0.05)],
    )
    .unwrap();
    for x in 0..3 {
        let g = variational_gap(&m, &[x as f64]).unwrap();
        assert!(
            (g - m.exact_gap(x)).abs() < 1e-3,
            "x={x}: {g} vs {}",
            m.exact_gap(x)
        );
    }
}

#[test]
fn gap_refuses_truncated_lattice() {
    let m = Toy {
        enc: vec![(vec![7.9], vec![1.0])],
    };
    assert!(matches!(
        variational_gap(&m, &[0.0]),
        Err(Error::LatticeTruncation { .. })
    ));
}

#[test]
fn metrics_record_rejects_nan() {
    let mut r = MetricsRecord::new(3);
    assert!(r.insert("a", f64::NAN).is_err());
    r.insert("b", f64::INFINITY).unwrap();
    assert_eq!(r.get("b"), Some(ExtReal::PosInf));
}

#[test]
fn nearest_centroid_assignment() {
    let data = vec![
        vec![0.0, 0.0],
        vec![0.2, 0.0],
        vec![5.0, 5.0],
        vec![5.2, 5.0],
    ];
    let c = class_centroids(&data, &[0, 0, 1, 1]);
    assert_eq!(c, vec![vec![0.1, 0.0], vec![5.1, 5.0]]);
    assert_eq!(nearest_centroid(&c, &[4.0, 4.0]), 1);
}

#[test]
fn battery_on_small_model() {
    let m = ModelPair::new(
        ModelConfig::new(2, 2, DecoderKind::Gaussian).with_hidden(&[8]),
        0,
    )
    .unwrap();
    let mut r = rng(9);
    let data: Vec<Vec<f64>> = (0..40)
        .map(|i| vec![(i % 2) as f64 * 4.0 - 2.0, 0.1 * i as f64])
        .collect();
    let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
    let cfg = BatteryConfig {
        ll_samples: 50,
        ..BatteryConfig::default()
    };
    let rec = run_battery(&m, &data, Some(&labels), 10, &cfg, &mut r).unwrap();
    for key in [
        "logdet_cov",
        "mi_estimate",
        "full_mmd",
        "mean_kl_qzx_pz",
        "ll_estimate",
        "class_ce",
        "probe_error",
        "var_gap",
    ] {
        assert!(rec.get(key).is_some(), "missing {key}");
    }
    let again = run_battery(&m, &data, Some(&labels), 10, &cfg, &mut rng(9)).unwrap();
    assert_eq!(rec, again);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn class_ce_is_nonnegative(weights in prop::collection::vec(0.01f64..1.0, 2..6), labels in prop::collection::vec(0usize..6, 1..50)) {
        let s: f64 = weights.iter().sum();
        let c: Vec<f64> = weights.iter().map(|w| w / s).collect();
        let labels: Vec<usize> = labels.into_iter().map(|l| l % c.len()).collect();
        prop_assert!(class_distribution_ce(&c, &labels).unwrap() >= -1e-15);
    }

    #[test]
    fn mean_kl_bounds_mi(seed in any::<u64>(), n in 2usize..6) {
        let mut r = rng(seed);
        let enc = (0..n).map(|_| {
            let m = standard_normal_vec(&mut r, 2);
            (m, vec![0.3 + crate::distributions::uniform01(&mut r), 0.5])
        }).collect();
        let t = Toy { enc };
        let e = mi_estimate(&t, &t.data(), n, 200, &mut r).unwrap();
        let kl = mean_kl_qzx_pz(&t, &t.data()).unwrap();
        prop_assert!(e.value >= -3.0 * e.se);
        prop_assert!(kl - e.value >= -3.0 * e.se);
    }
}
