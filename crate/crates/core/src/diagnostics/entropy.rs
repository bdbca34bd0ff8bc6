//! Layer-wise entropy profiles of the particle cloud.
//!
//! Shannon profile: at each node every particle counts its neighbours within
//! `ε` (itself included); `H` is the entropy of the empirical distribution of
//! those counts. Cluster profile: the fraction of particles within `ε` of a
//! fixed random subset of centre particles.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::architecture::{IndexSet, LayerSchedule};
use crate::dynamics::{gather_cols, BatchTrajectory};
use crate::error::{Error, Result};

/// Coordinates used at each node `0..=n_steps`: the active set of the step
/// leaving the node (the last step's set at the final node).
pub fn active_coordinates(schedule: &LayerSchedule) -> Vec<IndexSet> {
    let n = schedule.n_steps();
    (0..=n)
        .map(|j| schedule.active_at(j.min(n - 1)).expect("node within grid").clone())
        .collect()
}

/// Squared pairwise distances between rows.
fn pairwise_sq(points: ArrayView2<f64>) -> Array2<f64> {
    let norms: Array1<f64> = points.rows().into_iter().map(|r| r.dot(&r)).collect();
    let mut d = points.dot(&points.t());
    let n = points.nrows();
    for i in 0..n {
        for j in 0..n {
            d[[i, j]] = if i == j { 0.0 } else { (norms[i] + norms[j] - 2.0 * d[[i, j]]).max(0.0) };
        }
    }
    d
}

fn check(eps: f64, n: usize) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("entropy radius must be positive, got {eps}")));
    }
    if n < 2 {
        return Err(Error::Shape("entropy needs at least two particles".into()));
    }
    Ok(())
}

/// Entropy (natural log) of the neighbour-count distribution of a point cloud.
pub fn shannon_entropy(points: ArrayView2<f64>, eps: f64) -> Result<f64> {
    check(eps, points.nrows())?;
    let d = pairwise_sq(points);
    let eps2 = eps * eps;
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for row in d.rows() {
        let count = row.iter().filter(|&&v| v <= eps2).count();
        *hist.entry(count).or_default() += 1;
    }
    let n = points.nrows() as f64;
    Ok(hist
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0))
}

/// Fraction of points within `eps` of one of the rows listed in `centers`.
pub fn cluster_coverage(points: ArrayView2<f64>, centers: &[usize], eps: f64) -> Result<f64> {
    check(eps, points.nrows())?;
    let eps2 = eps * eps;
    let covered = points
        .rows()
        .into_iter()
        .filter(|p| {
            centers.iter().any(|&c| {
                let q = points.row(c);
                p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= eps2
            })
        })
        .count();
    Ok(covered as f64 / points.nrows() as f64)
}

/// `k` distinct particle indices drawn from a generator keyed by `seed`.
pub fn sample_centers(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::Config(format!("{k} centres requested from {n} particles")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// 5th percentile of the pairwise distances between distinct rows.
pub fn default_radius(points: ArrayView2<f64>) -> f64 {
    let d = pairwise_sq(points);
    let n = points.nrows();
    let mut dists: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| d[[i, j]].sqrt())
        .collect();
    if dists.is_empty() {
        return 0.0;
    }
    dists.sort_by(f64::total_cmp);
    let pos = ((dists.len() - 1) as f64 * 0.05).round() as usize;
    dists[pos]
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyRow {
    pub node: usize,
    pub shannon: f64,
    pub cluster: f64,
}

/// Both profiles along a batch trajectory; `coords[j]` selects the components
/// compared at node `j`.
pub fn entropy_profiles(
    traj: &BatchTrajectory,
    coords: &[IndexSet],
    eps: f64,
    centers_k: usize,
    seed: u64,
) -> Result<Vec<EntropyRow>> {
    let nodes = traj.states.len_of(Axis(0));
    if coords.len() != nodes {
        return Err(Error::Shape(format!("{} coordinate sets for {nodes} nodes", coords.len())));
    }
    let centers = sample_centers(traj.n_particles(), centers_k, seed)?;
    (0..nodes)
        .map(|j| {
            let pts = gather_cols(traj.at_node(j), &coords[j]);
            Ok(EntropyRow {
                node: j,
                shannon: shannon_entropy(pts.view(), eps)?,
                cluster: cluster_coverage(pts.view(), &centers, eps)?,
            })
        })
        .collect()
}

pub fn shannon_entropy_profile(traj: &BatchTrajectory, coords: &[IndexSet], eps: f64) -> Result<Vec<f64>> {
    (0..traj.states.len_of(Axis(0)))
        .map(|j| shannon_entropy(gather_cols(traj.at_node(j), &coords[j]).view(), eps))
        .collect()
}

pub fn cluster_entropy_profile(
    traj: &BatchTrajectory,
    coords: &[IndexSet],
    eps: f64,
    centers_k: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let centers = sample_centers(traj.n_particles(), centers_k, seed)?;
    (0..traj.states.len_of(Axis(0)))
        .map(|j| cluster_coverage(gather_cols(traj.at_node(j), &coords[j]).view(), &centers, eps))
        .collect()
}
