//! Per-node Lipschitz constants of the trained field and the step-size check
//! `Δ_j = 1 / Lip_j` against `dt`.

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use crate::dynamics::{ControlParams, Network};
use crate::error::Result;

/// Blocks up to this width use a full SVD; larger ones use power iteration.
pub const DENSE_SVD_MAX: usize = 96;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaEntry {
    pub node: usize,
    pub lipschitz: f64,
    /// `+∞` when the field is constant in `x` at this node.
    pub delta: f64,
    /// `Δ_j < dt`
    pub unstable: bool,
}

/// Largest singular value.
pub fn spectral_norm(m: ArrayView2<f64>) -> f64 {
    let (r, c) = m.dim();
    if r == 0 || c == 0 {
        return 0.0;
    }
    if r.max(c) <= DENSE_SVD_MAX {
        let dm = nalgebra::DMatrix::from_fn(r, c, |i, j| m[[i, j]]);
        return dm.singular_values().max();
    }
    power_norm(m, 1e-12, 2000)
}

fn power_norm(m: ArrayView2<f64>, tol: f64, max_iter: usize) -> f64 {
    let c = m.ncols();
    // deterministic start with no exact orthogonality to generic singular vectors
    let mut v: Array1<f64> = (0..c).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    v /= v.dot(&v).sqrt();
    let mut sigma = 0.0;
    for _ in 0..max_iter {
        let w = m.t().dot(&m.dot(&v));
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm.sqrt();
        v = w / norm;
        if (next - sigma).abs() <= tol * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// `Lip_j = max_i ‖∇_xF(t_j, X̃^i_j)‖₂` over the batch trajectories.
pub fn lipschitz_profile(net: &Network, theta: &ControlParams, inputs: ArrayView2<f64>) -> Result<Vec<DeltaEntry>> {
    let traj = net.forward_batch(inputs, theta)?;
    let dt = net.dt();
    (0..net.n_steps())
        .map(|j| {
            let mut states: Array2<f64> = traj.at_node(j).to_owned();
            net.apply_reset(j, states.view_mut())?;
            let lip = (0..states.nrows())
                .into_par_iter()
                .map(|i| net.active_jacobian(j, states.row(i), theta).map(|b| spectral_norm(b.view())))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let delta = if lip == 0.0 { f64::INFINITY } else { 1.0 / lip };
            Ok(DeltaEntry {
                node: j,
                lipschitz: lip,
                delta,
                unstable: delta < dt,
            })
        })
        .collect()
}
