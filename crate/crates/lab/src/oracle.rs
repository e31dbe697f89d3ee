//! Identity checks over a corpus of random tabular joints.

use std::collections::BTreeMap;

use infovae_core::numeric::ExtReal;
use infovae_core::tabular::{
    chain_transition_matrix, elbo_forms, entropy_data, infovae_forms, mutual_information_exact,
    optimal_decoder_for_q, reconstruction, stationary_of, total_variation, TabularJoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;

pub const MIN_SIZE: usize = 2;
pub const MAX_SIZE: usize = 8;

/// Names of the checked identities, in report order.
pub const IDENTITIES: [&str; 6] = [
    "form1_eq_form2",
    "form1_eq_form3",
    "form0_eq_form1_plus_e_log_pd",
    "eq5_eq_eq6_plus_h",
    "optimal_decoder_recon_eq_i_minus_h",
    "stationary_tv_to_pdata",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub corpus_size: usize,
    pub tol: f64,
    pub seed: u64,
    /// Largest deviation per identity.
    pub max_deviation: BTreeMap<String, f64>,
    /// Joint-identity pairs whose deviation exceeded `tol`.
    pub violations: usize,
    /// Joints whose optimal-decoder chain was not ergodic.
    pub non_ergodic: usize,
}

impl OracleReport {
    pub fn worst(&self) -> f64 {
        self.max_deviation.values().copied().fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("identity,max_deviation\n");
        for name in IDENTITIES {
            s.push_str(&format!("{name},{:e}\n", self.max_deviation[name]));
        }
        s.push_str(&format!("violations,{}\n", self.violations));
        s
    }
}

/// Per-identity deviations for one joint; `None` where a check does not
/// apply.
pub fn deviations(j: &TabularJoint, alpha: f64, lambda: f64) -> Result<[Option<f64>; 6]> {
    let f = elbo_forms(j);
    let inf = infovae_forms(j, alpha, lambda)?;
    let opt = optimal_decoder_for_q(j);
    let recon = reconstruction(&opt);
    let target = mutual_information_exact(&opt) - entropy_data(&opt);
    let tv = stationary_of(&chain_transition_matrix(&opt))
        .distribution()
        .map(|pi| total_variation(pi, &opt.p_data));
    let plus = |a: ExtReal, b: f64| a.checked_add(b.into()).unwrap_or(ExtReal::NegInf);
    Ok([
        Some(f.form1.abs_diff(f.form2)),
        Some(f.form1.abs_diff(f.form3)),
        Some(f.form0.abs_diff(plus(f.form1, -f.h_data))),
        Some(inf.eq5.abs_diff(plus(inf.eq6, inf.h_data))),
        Some(recon.abs_diff(target.into())),
        tv,
    ])
}

/// Checks every identity on `corpus_size` random joints with
/// `nx, nz ∈ [2, 8]`, `α ∈ [−1, 2]` and `λ ∈ (0, 10]`.
pub fn run_oracle(corpus_size: usize, tol: f64, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_deviation: BTreeMap<String, f64> =
        IDENTITIES.iter().map(|n| (n.to_string(), 0.0)).collect();
    let mut violations = 0;
    let mut non_ergodic = 0;
    for _ in 0..corpus_size {
        let nx = rng.random_range(MIN_SIZE..=MAX_SIZE);
        let nz = rng.random_range(MIN_SIZE..=MAX_SIZE);
        let j = TabularJoint::random(nx, nz, &mut rng)?;
        let alpha = rng.random_range(-1.0..=2.0);
        let lambda = rng.random_range(0.01..=10.0);
        for (name, dev) in IDENTITIES.iter().zip(deviations(&j, alpha, lambda)?) {
            match dev {
                Some(d) => {
                    let slot = max_deviation.get_mut(*name).expect("initialized");
                    *slot = slot.max(d);
                    if !(d <= tol) {
                        violations += 1;
                    }
                }
                None => non_ergodic += 1,
            }
        }
    }
    Ok(OracleReport {
        corpus_size,
        tol,
        seed,
        max_deviation,
        violations,
        non_ergodic,
    })
}
