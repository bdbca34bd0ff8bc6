//! Controls `θ_j = (W_j, b_j)`, stored as the dense active block of each node.
//!
//! Entries outside the active×active block of `W_j` and outside the active
//! set of `b_j` are identically zero and therefore not stored; the full
//! `d×d` view is available through [`ControlParams::full_weight`].

use ndarray::{Array1, Array2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::architecture::LayerSchedule;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NodeParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl NodeParams {
    pub fn zeros(width: usize) -> Self {
        Self {
            weight: Array2::zeros((width, width)),
            bias: Array1::zeros(width),
        }
    }

    pub fn width(&self) -> usize {
        self.bias.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.weight.iter().map(|v| v * v).sum::<f64>() + self.bias.iter().map(|v| v * v).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlParams {
    dim: usize,
    nodes: Vec<NodeParams>,
}

impl ControlParams {
    pub fn zeros(schedule: &LayerSchedule) -> Self {
        Self {
            dim: schedule.dim(),
            nodes: schedule
                .active_sizes()
                .into_iter()
                .map(NodeParams::zeros)
                .collect(),
        }
    }

    /// Gaussian entries with standard deviation `scale`; node `j` draws from
    /// stream `j` of a generator keyed by `seed`.
    pub fn gaussian(schedule: &LayerSchedule, scale: f64, seed: u64) -> Self {
        let mut params = Self::zeros(schedule);
        for (j, node) in params.nodes.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            for v in node.weight.iter_mut().chain(node.bias.iter_mut()) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = scale * z;
            }
        }
        params
    }

    pub fn from_nodes(dim: usize, nodes: Vec<NodeParams>) -> Self {
        Self { dim, nodes }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, j: usize) -> &NodeParams {
        &self.nodes[j]
    }

    pub fn node_mut(&mut self, j: usize) -> &mut NodeParams {
        &mut self.nodes[j]
    }

    pub fn nodes(&self) -> &[NodeParams] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> &mut [NodeParams] {
        &mut self.nodes
    }

    /// Check the storage layout against a schedule.
    pub fn check_schedule(&self, schedule: &LayerSchedule) -> Result<()> {
        if self.dim != schedule.dim() || self.nodes.len() != schedule.n_steps() {
            return Err(Error::Shape(format!(
                "controls are {} nodes in dimension {}, schedule is {} nodes in dimension {}",
                self.nodes.len(),
                self.dim,
                schedule.n_steps(),
                schedule.dim()
            )));
        }
        for (j, (node, width)) in self.nodes.iter().zip(schedule.active_sizes()).enumerate() {
            if node.width() != width || node.weight.dim() != (width, width) {
                return Err(Error::Shape(format!(
                    "node {j}: stored block is {:?}, active width is {width}",
                    node.weight.dim()
                )));
            }
        }
        Ok(())
    }

    /// Number of free (unmasked) scalars.
    pub fn param_count(&self) -> usize {
        self.nodes.iter().map(|n| n.width() * (n.width() + 1)).sum()
    }

    /// Dense `d×d` weight of node `j`, zero outside the active block.
    pub fn full_weight(&self, schedule: &LayerSchedule, j: usize) -> Result<Array2<f64>> {
        let active = schedule.active_at(j)?;
        let mut w = Array2::zeros((self.dim, self.dim));
        for (a, k) in active.iter().enumerate() {
            for (b, l) in active.iter().enumerate() {
                w[[k, l]] = self.nodes[j].weight[[a, b]];
            }
        }
        Ok(w)
    }

    /// Dense bias of node `j`, zero outside the active set.
    pub fn full_bias(&self, schedule: &LayerSchedule, j: usize) -> Result<Array1<f64>> {
        let active = schedule.active_at(j)?;
        let mut b = Array1::zeros(self.dim);
        for (a, k) in active.iter().enumerate() {
            b[k] = self.nodes[j].bias[a];
        }
        Ok(b)
    }

    /// `Σ_j (‖W_j‖²_F + |b_j|²)`
    pub fn sum_sq(&self) -> f64 {
        self.nodes.iter().map(NodeParams::norm_sq).sum()
    }

    /// `‖θ‖²_{L²} = dt Σ_j (‖W_j‖²_F + |b_j|²)`
    pub fn l2_norm_sq(&self, dt: f64) -> f64 {
        dt * self.sum_sq()
    }

    pub fn l2_norm(&self, dt: f64) -> f64 {
        self.l2_norm_sq(dt).sqrt()
    }

    /// `‖θ‖_{L¹} = dt Σ_j sqrt(‖W_j‖²_F + |b_j|²)`
    pub fn l1_norm(&self, dt: f64) -> f64 {
        dt * self.nodes.iter().map(|n| n.norm_sq().sqrt()).sum::<f64>()
    }

    /// L² distance to `other`.
    pub fn l2_distance(&self, other: &ControlParams, dt: f64) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.nodes.iter().zip(&other.nodes) {
            acc += Zip::from(&a.weight)
                .and(&b.weight)
                .fold(0.0, |s, x, y| s + (x - y) * (x - y));
            acc += Zip::from(&a.bias)
                .and(&b.bias)
                .fold(0.0, |s, x, y| s + (x - y) * (x - y));
        }
        (dt * acc).sqrt()
    }

    /// Euclidean inner product of the stored coefficients.
    pub fn dot(&self, other: &ControlParams) -> f64 {
        self.nodes
            .iter()
            .zip(&other.nodes)
            .map(|(a, b)| {
                (&a.weight * &b.weight).sum() + a.bias.dot(&b.bias)
            })
            .sum()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &ControlParams) {
        for (a, b) in self.nodes.iter_mut().zip(&other.nodes) {
            a.weight.scaled_add(alpha, &b.weight);
            a.bias.scaled_add(alpha, &b.bias);
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for n in &mut self.nodes {
            n.weight *= alpha;
            n.bias *= alpha;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Coefficients in node-major order, weight row-major then bias.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes
            .iter()
            .flat_map(|n| n.weight.iter().chain(n.bias.iter()).copied())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.iter().collect()
    }

    /// Inverse of [`to_flat`](Self::to_flat) onto the same layout.
    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for n in &mut self.nodes {
            for v in n.weight.iter_mut().chain(n.bias.iter_mut()) {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Mutable access to the `index`-th coefficient of the flat layout.
    pub fn flat_mut(&mut self, mut index: usize) -> &mut f64 {
        for n in &mut self.nodes {
            let w = n.width();
            if index < w * w {
                return &mut n.weight[[index / w, index % w]];
            }
            index -= w * w;
            if index < w {
                return &mut n.bias[index];
            }
            index -= w;
        }
        panic!("flat index out of range");
    }
}
