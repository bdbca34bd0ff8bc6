//! Exact Wasserstein-1 distance between uniform empirical measures of equal size.

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub const MAX_POINTS: usize = 512;

fn euclid(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum-cost perfect matching of a square cost matrix (Hungarian method with
/// potentials). Returns the assignment `row -> column` and its cost.
pub fn min_cost_assignment(cost: ArrayView2<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "cost matrix must be square");
    // 1-based arrays, column 0 is a virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[matched[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
    (assignment, total)
}

/// `W₁(μ, ν)` for `μ = (1/N) Σ δ_{x_i}`, `ν = (1/N) Σ δ_{y_i}`, points as rows.
pub fn wasserstein1_exact(mu: ArrayView2<f64>, nu: ArrayView2<f64>) -> Result<f64> {
    let n = mu.nrows();
    if n != nu.nrows() {
        return Err(Error::Shape(format!("measures have {} and {} atoms", n, nu.nrows())));
    }
    if mu.ncols() != nu.ncols() {
        return Err(Error::Shape(format!(
            "points have {} and {} components",
            mu.ncols(),
            nu.ncols()
        )));
    }
    if n > MAX_POINTS {
        return Err(Error::SizeLimit { size: n, limit: MAX_POINTS });
    }
    if n == 0 {
        return Err(Error::Shape("empty measure".into()));
    }
    let cost = ndarray::Array2::from_shape_fn((n, n), |(i, j)| euclid(mu.row(i), nu.row(j)));
    let (_, total) = min_cost_assignment(cost.view());
    Ok((total / n as f64).max(0.0))
}
