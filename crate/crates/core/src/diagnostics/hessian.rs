//! Extreme eigenvalues of the Hessian of `J^N`, from central differences of the
//! adjoint gradient.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::adjoint::Objective;
use crate::dynamics::ControlParams;
use crate::error::{Error, Result};

/// Largest parameter count accepted by the dense probe.
pub const DENSE_MAX_PARAMS: usize = 2000;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HessianProbe {
    DenseFd,
    PowerIteration { max_iter: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HessianEigs {
    pub min: f64,
    pub max: f64,
}

/// `H v ≈ (∇J(θ + h v) - ∇J(θ - h v)) / (2h)` in the flat coefficient layout.
pub fn hessian_vector_product(obj: &Objective, theta: &ControlParams, v: &[f64], h: f64) -> Result<Array1<f64>> {
    let mut dir = theta.clone();
    dir.set_flat(v)?;
    let mut plus = theta.clone();
    plus.axpy(h, &dir);
    let mut minus = theta.clone();
    minus.axpy(-h, &dir);
    let (_, gp) = obj.gradient(&plus)?;
    let (_, gm) = obj.gradient(&minus)?;
    Ok(gp.iter().zip(gm.iter()).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

/// Symmetrized dense Hessian.
pub fn dense_hessian(obj: &Objective, theta: &ControlParams, h: f64) -> Result<Array2<f64>> {
    let n = theta.param_count();
    if n > DENSE_MAX_PARAMS {
        return Err(Error::SizeLimit {
            size: n,
            limit: DENSE_MAX_PARAMS,
        });
    }
    let mut hess = Array2::zeros((n, n));
    let mut e = vec![0.0; n];
    for i in 0..n {
        e[i] = 1.0;
        let col = hessian_vector_product(obj, theta, &e, h)?;
        hess.column_mut(i).assign(&col);
        e[i] = 0.0;
    }
    let sym = (&hess + &hess.t()) * 0.5;
    Ok(sym)
}

pub fn hessian_extreme_eigs(obj: &Objective, theta: &ControlParams, probe: HessianProbe, tol: f64) -> Result<HessianEigs> {
    match probe {
        HessianProbe::DenseFd => {
            let h = dense_hessian(obj, theta, DEFAULT_FD_STEP)?;
            let n = h.nrows();
            let m = nalgebra::DMatrix::from_fn(n, n, |i, j| h[[i, j]]);
            let eig = nalgebra::SymmetricEigen::new(m).eigenvalues;
            Ok(HessianEigs {
                min: eig.min(),
                max: eig.max(),
            })
        }
        HessianProbe::PowerIteration { max_iter, seed } => {
            let n = theta.param_count();
            let hv = |v: &Array1<f64>| hessian_vector_product(obj, theta, v.as_slice().expect("contiguous"), DEFAULT_FD_STEP);
            let dominant = power_method(&hv, n, 0.0, tol, max_iter, seed)?;
            let other = dominant + power_method(&hv, n, dominant, tol, max_iter, seed.wrapping_add(1))?;
            Ok(HessianEigs {
                min: dominant.min(other),
                max: dominant.max(other),
            })
        }
    }
}

/// Dominant eigenvalue of `H - shift·I`, stopped when the residual
/// `‖(H - shift) v - μ v‖` falls below `tol · |μ|`.
fn power_method(
    hv: &impl Fn(&Array1<f64>) -> Result<Array1<f64>>,
    n: usize,
    shift: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Array1<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    v /= v.dot(&v).sqrt();
    let mut mu = 0.0;
    for _ in 0..max_iter {
        let mut w = hv(&v)?;
        w.scaled_add(-shift, &v);
        mu = v.dot(&w);
        let residual = (&w - &(&v * mu)).dot(&(&w - &(&v * mu))).sqrt();
        if residual <= tol * mu.abs().max(f64::MIN_POSITIVE) {
            return Ok(mu);
        }
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v = w / norm;
    }
    Err(Error::ConvergenceFailure(format!(
        "power iteration did not reach tolerance {tol:e} in {max_iter} products (last estimate {mu:e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::{LossSpec, ParticleBatch};
    use crate::architecture::{build_plain_schedule, IndexSet, TimeGrid};
    use crate::dynamics::{Activation, Network};
    use crate::test_util::{random_matrix, rng};

    fn instance(seed: u64, dim: usize) -> (Network, ParticleBatch, LossSpec) {
        let grid = TimeGrid::from_steps(0.25, 3).unwrap();
        let net = Network::new(grid, build_plain_schedule(dim, &grid).unwrap(), Activation::Tanh).unwrap();
        let batch = ParticleBatch::new(
            random_matrix(&mut rng(seed), 5, dim, 1.0),
            random_matrix(&mut rng(seed + 1), 5, dim, 1.0),
        )
        .unwrap();
        let spec = LossSpec::new(IndexSet::range(0..dim), dim).unwrap();
        (net, batch, spec)
    }

    #[test]
    fn pure_tikhonov_spectrum() {
        let (net, batch, spec) = instance(1, 2);
        let theta = ControlParams::zeros(net.schedule());
        let traj = net.forward_batch(batch.inputs(), &theta).unwrap();
        let at_target = ParticleBatch::new(batch.inputs().to_owned(), traj.final_states().to_owned()).unwrap();
        // the data-term curvature cancels against the λ = 0 objective
        let lambda = 0.4;
        let obj = Objective::new(&net, &at_target, &spec, lambda);
        let obj0 = Objective::new(&net, &at_target, &spec, 0.0);
        let h = dense_hessian(&obj, &theta, 1e-5).unwrap() - dense_hessian(&obj0, &theta, 1e-5).unwrap();
        let expected = 2.0 * lambda * net.dt();
        for ((i, j), v) in h.indexed_iter() {
            let e = if i == j { expected } else { 0.0 };
            assert!((v - e).abs() < 1e-8, "({i},{j}) {v}");
        }
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        for seed in 0..3u64 {
            let (net, batch, spec) = instance(10 + seed, 2);
            let theta = ControlParams::gaussian(net.schedule(), 0.8, seed);
            let obj = Objective::new(&net, &batch, &spec, 0.01);
            let dense = hessian_extreme_eigs(&obj, &theta, HessianProbe::DenseFd, 0.0).unwrap();
            let power = hessian_extreme_eigs(
                &obj,
                &theta,
                HessianProbe::PowerIteration {
                    max_iter: 200_000,
                    seed: 3,
                },
                1e-7,
            )
            .unwrap();
            let scale = dense.min.abs().max(dense.max.abs());
            assert!((dense.min - power.min).abs() <= 1e-4 * scale, "{dense:?} {power:?}");
            assert!((dense.max - power.max).abs() <= 1e-4 * scale, "{dense:?} {power:?}");
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let (net, batch, spec) = instance(4, 2);
        let theta = ControlParams::gaussian(net.schedule(), 0.8, 1);
        let obj = Objective::new(&net, &batch, &spec, 0.01);
        let r = hessian_extreme_eigs(
            &obj,
            &theta,
            HessianProbe::PowerIteration { max_iter: 2, seed: 0 },
            1e-12,
        );
        assert!(matches!(r, Err(Error::ConvergenceFailure(_))));
    }
}
