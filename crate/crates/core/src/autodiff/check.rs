use alloc::format;
use alloc::vec::Vec;

use super::{backward, Tape, Tensor};
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. Returns the maximum over coordinates of
/// `|analytic − numeric| / (|numeric| + 1e-8)`.
///
/// `f` is called once on a tape-attached copy of `x` and twice per
/// coordinate on detached, perturbed copies.
pub fn grad_check<F>(f: F, x: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let tape = Tape::new();
    let leaf = tape.leaf(x);
    let y = f(&leaf)?;
    ensure_finite(&y, "grad_check base value")?;
    let analytic = backward(&y)?.wrt(&leaf);

    let base: Vec<f64> = x.values().to_vec();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let eval = |delta: f64| -> Result<f64> {
            let mut v = base.clone();
            v[i] += delta;
            let y = f(&Tensor::new(x.shape().to_vec(), v)?)?;
            ensure_finite(&y, "grad_check perturbed value")?;
            Ok(y.item())
        };
        let numeric = (eval(step)? - eval(-step)?) / (2.0 * step);
        let err = (analytic.values()[i] - numeric).abs() / (numeric.abs() + 1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

fn ensure_finite(y: &Tensor, what: &str) -> Result<()> {
    if y.len() != 1 {
        return Err(Error::NonScalarRoot(y.shape().to_vec()));
    }
    if !y.item().is_finite() {
        return Err(Error::NonFinite(format!("{what}: {}", y.item())));
    }
    Ok(())
}
