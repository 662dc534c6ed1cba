//! Random load scenarios around a base point.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// `count` loads `l0 + ε`, `ε ~ N(0, σ²)` per component, clipped to
/// `[lo, hi]`. Deterministic in `seed`.
pub fn perturb_scenarios(
    l0: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    seed: u64,
    count: usize,
    sigma: f64,
) -> Result<Vec<DVector<f64>>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::spec("sigma", "must be finite and >= 0"));
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| Error::spec("sigma", "must be finite"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            DVector::from_fn(l0.len(), |i, _| {
                let noise = if sigma == 0.0 {
                    0.0
                } else {
                    normal.sample(&mut rng)
                };
                (l0[i] + noise).clamp(lo[i], hi[i])
            })
        })
        .collect())
}
