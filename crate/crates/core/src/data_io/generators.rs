//! Synthetic datasets. Sample `i` draws from stream `i` of a generator keyed
//! by the seed, so any subset can be regenerated independently.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, DatasetKind, Normalization};
use crate::error::{Error, Result};

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    Ok(())
}

/// Standard normal points in the plane labelled by the sign of the first
/// coordinate: target `(1, 0)` when `x₀ > 0`, else `(-1, 0)`.
pub fn gen_gaussian_classification(n: usize, seed: u64) -> Result<Dataset> {
    check_n(n)?;
    let mut inputs = Array2::zeros((n, 2));
    let mut targets = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = sample_rng(seed, i);
        let x: f64 = StandardNormal.sample(&mut rng);
        let y: f64 = StandardNormal.sample(&mut rng);
        inputs[[i, 0]] = x;
        inputs[[i, 1]] = y;
        let positive = x > 0.0;
        targets[[i, 0]] = if positive { 1.0 } else { -1.0 };
        labels.push(u8::from(positive));
    }
    Dataset::new(inputs, targets, DatasetKind::Classify2d, Some(labels), Normalization::None)
}

/// Points `(x, x²)` with `x` uniform on `x_range`; targets equal inputs.
pub fn gen_parabola(n: usize, seed: u64, x_range: (f64, f64)) -> Result<Dataset> {
    check_n(n)?;
    let (lo, hi) = x_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Config(format!("invalid parabola range [{lo}, {hi}]")));
    }
    let mut inputs = Array2::zeros((n, 2));
    for i in 0..n {
        let x = lo + (hi - lo) * sample_rng(seed, i).random::<f64>();
        inputs[[i, 0]] = x;
        inputs[[i, 1]] = x * x;
    }
    let targets = inputs.clone();
    Dataset::new(inputs, targets, DatasetKind::Parabola, None, Normalization::None)
}
