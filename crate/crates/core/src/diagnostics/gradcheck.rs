//! Central finite differences of the discrete cost.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adjoint::Objective;
use crate::dynamics::ControlParams;
use crate::error::{Error, Result};

/// Central differences of `J^N` over every unmasked coefficient.
pub fn finite_diff_gradient(obj: &Objective, theta: &ControlParams, h: f64) -> Result<ControlParams> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let mut grad = ControlParams::zeros(obj.net.schedule());
    let mut probe = theta.clone();
    for p in 0..theta.param_count() {
        let orig = *probe.flat_mut(p);
        *probe.flat_mut(p) = orig + h;
        let plus = obj.cost(&probe)?.total();
        *probe.flat_mut(p) = orig - h;
        let minus = obj.cost(&probe)?.total();
        *probe.flat_mut(p) = orig;
        *grad.flat_mut(p) = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// `max_k |g_k - fd_k| / max_k |fd_k|`, with the denominator floored at `1e-12`.
pub fn max_relative_error(grad: &ControlParams, reference: &ControlParams) -> f64 {
    let scale = reference.max_abs().max(1e-12);
    grad.iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Adjoint gradient against finite differences; returns the maximum relative error.
pub fn gradient_check(obj: &Objective, theta: &ControlParams, h: f64) -> Result<f64> {
    let (_, grad) = obj.gradient(theta)?;
    let fd = finite_diff_gradient(obj, theta, h)?;
    Ok(max_relative_error(&grad, &fd))
}

/// Same comparison restricted to `n_coords` coefficients drawn without
/// replacement; every coefficient is used when `n_coords` covers them all.
pub fn gradient_check_sampled(obj: &Objective, theta: &ControlParams, h: f64, n_coords: usize, seed: u64) -> Result<f64> {
    let total = theta.param_count();
    if n_coords >= total {
        return gradient_check(obj, theta, h);
    }
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let (_, grad) = obj.gradient(theta)?;
    let adjoint = grad.to_flat();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = theta.clone();
    let mut pairs = Vec::with_capacity(n_coords);
    for p in sample(&mut rng, total, n_coords).into_iter() {
        let orig = *probe.flat_mut(p);
        *probe.flat_mut(p) = orig + h;
        let plus = obj.cost(&probe)?.total();
        *probe.flat_mut(p) = orig - h;
        let minus = obj.cost(&probe)?.total();
        *probe.flat_mut(p) = orig;
        pairs.push((adjoint[p], (plus - minus) / (2.0 * h)));
    }
    let scale = pairs.iter().map(|&(_, fd)| fd.abs()).fold(0.0, f64::max).max(1e-12);
    Ok(pairs.iter().map(|&(g, fd)| (g - fd).abs()).fold(0.0, f64::max) / scale)
}
