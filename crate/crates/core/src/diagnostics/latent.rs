//! Support of the latent (bottleneck) vectors.

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array1, ArrayView2};

use crate::architecture::IndexSet;
use crate::dynamics::{ControlParams, Network};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LatentReport {
    pub node: usize,
    /// Components active just before `node`.
    pub latent: IndexSet,
    /// Most frequent per-sample support.
    pub modal_support: IndexSet,
    /// Fraction of samples whose support equals the modal one.
    pub consistency: f64,
    /// Components nonzero in at least one sample.
    pub union_support: IndexSet,
    pub mean_support_size: f64,
    /// Class label and the mean latent vector over that class.
    pub class_means: Vec<(u8, Array1<f64>)>,
}

/// Supports `{k ∈ latent : |X_k| > zero_tol}` of the states at `node`, with
/// `latent` the active set of the step before it.
pub fn latent_sparsity_report(
    net: &Network,
    theta: &ControlParams,
    inputs: ArrayView2<f64>,
    labels: Option<&[u8]>,
    node: usize,
    zero_tol: f64,
) -> Result<LatentReport> {
    if node == 0 || node > net.n_steps() {
        return Err(Error::Index {
            index: node,
            n_steps: net.n_steps(),
        });
    }
    if let Some(l) = labels {
        if l.len() != inputs.nrows() {
            return Err(Error::Shape(format!("{} labels for {} samples", l.len(), inputs.nrows())));
        }
    }
    let latent = net.schedule().active_at(node - 1)?.clone();
    let traj = net.forward_batch(inputs, theta)?;
    let states = traj.at_node(node);

    let supports: Vec<IndexSet> = states
        .rows()
        .into_iter()
        .map(|x| latent.iter().filter(|&k| x[k].abs() > zero_tol).collect())
        .collect();
    let mut freq: HashMap<&IndexSet, usize> = HashMap::new();
    for s in &supports {
        *freq.entry(s).or_default() += 1;
    }
    // ties broken by the smaller support, then lexicographically, for determinism
    let (modal, count) = freq
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.as_slice().cmp(a.0.as_slice())))
        .expect("at least one sample");
    let modal = modal.clone();
    let union = supports.iter().fold(IndexSet::default(), |acc, s| acc.union(s));
    let n = supports.len() as f64;

    let mut class_means = Vec::new();
    if let Some(labels) = labels {
        let mut groups: BTreeMap<u8, (Array1<f64>, usize)> = BTreeMap::new();
        for (x, &l) in states.rows().into_iter().zip(labels) {
            let entry = groups.entry(l).or_insert_with(|| (Array1::zeros(latent.len()), 0));
            for (a, k) in latent.iter().enumerate() {
                entry.0[a] += x[k];
            }
            entry.1 += 1;
        }
        class_means = groups.into_iter().map(|(l, (sum, c))| (l, sum / c as f64)).collect();
    }

    Ok(LatentReport {
        node,
        latent,
        modal_support: modal,
        consistency: count as f64 / n,
        union_support: union,
        mean_support_size: supports.iter().map(IndexSet::len).sum::<usize>() as f64 / n,
        class_means,
    })
}
