//! Terminal cost, backward co-state sweep and the exact gradient of the
//! particle cost
//!
//! `J(θ) = (1/N) Σ_i ℓ(X^i_T, Y^i) + λ dt Σ_j (‖W_j‖²_F + |b_j|²)`.
//!
//! The co-state follows the theory convention `P_T = +∇_x ℓ` and is the exact
//! adjoint of the Euler recursion: `P_j = P_{j+1} (Id + dt ∇_xF(t_j, x̃_j)) Π_j`,
//! where `x̃_j = Π_j X_j` is the state after the reset projection of node `j`.
//! Gradients are gradients of the discrete cost, so they carry the `dt` factor.

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::architecture::{IndexSet, LayerSchedule};
use crate::dynamics::{gather_cols, scatter_add_cols, ControlParams, ForwardPass, Network, NodeParams};
use crate::error::{Error, Result};

/// Squared error on a set of output components:
/// `ℓ(x, y) = Σ_{k ∈ output} (x_k - y_k)²`. Targets are indexed by state component.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSpec {
    output: IndexSet,
    target_dim: usize,
}

impl LossSpec {
    pub fn new(output: IndexSet, target_dim: usize) -> Result<Self> {
        match output.max() {
            None => Err(Error::Shape("loss needs at least one output component".into())),
            Some(m) if m >= target_dim => Err(Error::Shape(format!(
                "output component {m} has no target (target dimension {target_dim})"
            ))),
            Some(_) => Ok(Self { output, target_dim }),
        }
    }

    /// Loss on the schedule's output set.
    pub fn for_schedule(schedule: &LayerSchedule, target_dim: usize) -> Result<Self> {
        Self::new(schedule.output_set().clone(), target_dim)
    }

    pub fn output(&self) -> &IndexSet {
        &self.output
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    fn check(&self, x: usize, y: usize) -> Result<()> {
        if y != self.target_dim {
            return Err(Error::Shape(format!(
                "target has {y} components, loss expects {}",
                self.target_dim
            )));
        }
        if self.output.max().is_some_and(|m| m >= x) {
            return Err(Error::Shape(format!("state of dimension {x} lacks output components")));
        }
        Ok(())
    }

    pub fn loss(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
        self.check(x.len(), y.len())?;
        Ok(self.output.iter().map(|k| (x[k] - y[k]).powi(2)).sum())
    }

    /// `∇_x ℓ(x, y)`: `2 (x_k - y_k)` on the output set, zero elsewhere.
    pub fn terminal_costate(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check(x.len(), y.len())?;
        let mut p = Array1::zeros(x.len());
        for k in self.output.iter() {
            p[k] = 2.0 * (x[k] - y[k]);
        }
        Ok(p)
    }

    fn batch_terminal(&self, x: ArrayView2<f64>, y: ArrayView2<f64>) -> (f64, Array2<f64>) {
        let mut p = Array2::zeros(x.raw_dim());
        let mut total = 0.0;
        for k in self.output.iter() {
            for i in 0..x.nrows() {
                let r = x[[i, k]] - y[[i, k]];
                total += r * r;
                p[[i, k]] = 2.0 * r;
            }
        }
        (total, p)
    }
}

/// `N` input/target pairs, inputs embedded in the network's state space.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleBatch {
    inputs: Array2<f64>,
    targets: Array2<f64>,
}

impl ParticleBatch {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::Shape(format!(
                "{} inputs but {} targets",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        if inputs.nrows() == 0 {
            return Err(Error::Shape("batch is empty".into()));
        }
        Ok(Self { inputs, targets })
    }

    /// Pads each input with zeros up to the state dimension `dim`.
    pub fn embedded(inputs: ArrayView2<f64>, targets: Array2<f64>, dim: usize) -> Result<Self> {
        if inputs.ncols() > dim {
            return Err(Error::Shape(format!(
                "inputs have {} components, state dimension is {dim}",
                inputs.ncols()
            )));
        }
        let mut x = Array2::zeros((inputs.nrows(), dim));
        x.slice_mut(s![.., ..inputs.ncols()]).assign(&inputs);
        Self::new(x, targets)
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn targets(&self) -> ArrayView2<'_, f64> {
        self.targets.view()
    }

    /// Rows `rows` as a new batch.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            self.inputs.select(Axis(0), rows),
            self.targets.select(Axis(0), rows),
        )
    }
}

/// Co-states of a batch, indexed `[node, particle, component]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostateTrajectory {
    pub costates: Array3<f64>,
}

/// How per-chunk partial gradients are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Pairwise tree over chunks in fixed order; bitwise reproducible for any thread count.
    #[default]
    Deterministic,
    /// Whatever order the thread pool produces.
    Unordered,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CostBreakdown {
    pub data: f64,
    pub reg: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.data + self.reg
    }
}

pub const DEFAULT_CHUNK: usize = 256;

/// The particle cost `J^N` of one network on one batch.
#[derive(Clone, Copy, Debug)]
pub struct Objective<'a> {
    pub net: &'a Network,
    pub batch: &'a ParticleBatch,
    pub loss: &'a LossSpec,
    pub lambda: f64,
    pub reduction: Reduction,
    pub chunk_size: usize,
}

struct Partial {
    loss_sum: f64,
    grad: Option<ControlParams>,
}

impl<'a> Objective<'a> {
    pub fn new(net: &'a Network, batch: &'a ParticleBatch, loss: &'a LossSpec, lambda: f64) -> Self {
        Self {
            net,
            batch,
            loss,
            lambda,
            reduction: Reduction::Deterministic,
            chunk_size: DEFAULT_CHUNK,
        }
    }

    pub fn with_reduction(mut self, reduction: Reduction) -> Self {
        self.reduction = reduction;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    fn check(&self, theta: &ControlParams) -> Result<()> {
        theta.check_schedule(self.net.schedule())?;
        if self.batch.inputs.ncols() != self.net.dim() {
            return Err(Error::Shape(format!(
                "batch inputs have {} components, network dimension is {}",
                self.batch.inputs.ncols(),
                self.net.dim()
            )));
        }
        self.loss.check(self.net.dim(), self.batch.targets.ncols())
    }

    fn chunks(&self) -> Vec<std::ops::Range<usize>> {
        let n = self.batch.len();
        let size = self.chunk_size.max(1);
        (0..n.div_ceil(size)).map(|c| c * size..((c + 1) * size).min(n)).collect()
    }

    fn chunk_partial(&self, theta: &ControlParams, rows: std::ops::Range<usize>, with_grad: bool) -> Result<Partial> {
        let x0 = self.batch.inputs.slice(s![rows.clone(), ..]);
        let y = self.batch.targets.slice(s![rows, ..]);
        let fp = self.net.forward_pass(x0, theta)?;
        let last = fp.states.len_of(Axis(0)) - 1;
        let (loss_sum, terminal) = self.loss.batch_terminal(fp.states.index_axis(Axis(0), last), y);
        let grad = if with_grad {
            let mut grad = ControlParams::zeros(self.net.schedule());
            adjoint_sweep(self.net, theta, &fp, terminal, Some(&mut grad), None)?;
            Some(grad)
        } else {
            None
        };
        Ok(Partial { loss_sum, grad })
    }

    fn reduce(&self, theta: &ControlParams, with_grad: bool) -> Result<Partial> {
        let chunks = self.chunks();
        let combine = |a: Result<Partial>, b: Result<Partial>| -> Result<Partial> {
            let (mut a, b) = (a?, b?);
            a.loss_sum += b.loss_sum;
            if let (Some(ga), Some(gb)) = (a.grad.as_mut(), b.grad.as_ref()) {
                ga.axpy(1.0, gb);
            }
            Ok(a)
        };
        match self.reduction {
            Reduction::Deterministic => {
                let parts: Vec<Result<Partial>> = chunks
                    .into_par_iter()
                    .map(|rows| self.chunk_partial(theta, rows, with_grad))
                    .collect();
                pairwise(parts, &combine)
            }
            Reduction::Unordered => chunks
                .into_par_iter()
                .map(|rows| self.chunk_partial(theta, rows, with_grad))
                .reduce_with(combine)
                .expect("batch is nonempty"),
        }
    }

    fn breakdown(&self, theta: &ControlParams, loss_sum: f64) -> CostBreakdown {
        CostBreakdown {
            data: loss_sum / self.batch.len() as f64,
            reg: self.lambda * theta.l2_norm_sq(self.net.dt()),
        }
    }

    pub fn cost(&self, theta: &ControlParams) -> Result<CostBreakdown> {
        self.check(theta)?;
        let part = self.reduce(theta, false)?;
        Ok(self.breakdown(theta, part.loss_sum))
    }

    /// Cost and gradient of the data term alone (no Tikhonov contribution).
    pub fn data_gradient(&self, theta: &ControlParams) -> Result<(CostBreakdown, ControlParams)> {
        self.check(theta)?;
        let part = self.reduce(theta, true)?;
        let mut grad = part.grad.expect("gradient requested");
        grad.scale(self.net.dt() / self.batch.len() as f64);
        Ok((self.breakdown(theta, part.loss_sum), grad))
    }

    /// Cost and full gradient `∇J = ∇J_ℓ + 2 λ dt θ`.
    pub fn gradient(&self, theta: &ControlParams) -> Result<(CostBreakdown, ControlParams)> {
        let (cost, mut grad) = self.data_gradient(theta)?;
        grad.axpy(2.0 * self.lambda * self.net.dt(), theta);
        Ok((cost, grad))
    }
}

fn pairwise<T>(mut items: Vec<T>, combine: &impl Fn(T, T) -> T) -> T {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop().expect("at least one item")
}

/// Backward sweep from `terminal` (the co-state at the final node).
///
/// Accumulates the unscaled sums `Σ_i ∇_θF^T P_{j+1}` into `grad` and, when
/// `store` is given, writes every co-state into it.
fn adjoint_sweep(
    net: &Network,
    theta: &ControlParams,
    fp: &ForwardPass,
    terminal: Array2<f64>,
    mut grad: Option<&mut ControlParams>,
    mut store: Option<&mut Array3<f64>>,
) -> Result<()> {
    let schedule = net.schedule();
    let dt = net.dt();
    let steps = net.n_steps();
    let mut p = terminal;
    if let Some(store) = store.as_deref_mut() {
        store.index_axis_mut(Axis(0), steps).assign(&p);
    }
    for j in (0..steps).rev() {
        let active = schedule.active_at(j)?;
        let reset = schedule.reset_at(j)?;
        let node = theta.node(j);
        let mut g = gather_cols(p.view(), active).into_owned();
        g *= &fp.slopes[j];
        if let Some(grad) = grad.as_deref_mut() {
            let states = fp.states.index_axis(Axis(0), j);
            let mut xa = gather_cols(states, active);
            if let Some(reset) = reset {
                let mut owned = xa.into_owned();
                for k in reset.iter() {
                    let pos = active.position(k).expect("reset slots are active");
                    owned.column_mut(pos).fill(0.0);
                }
                xa = ndarray::CowArray::from(owned);
            }
            let NodeParams { weight, bias } = grad.node_mut(j);
            ndarray::linalg::general_mat_mul(1.0, &g.t(), &xa, 1.0, weight);
            *bias += &g.sum_axis(Axis(0));
        }
        let gw = g.dot(&node.weight);
        scatter_add_cols(p.view_mut(), active, &gw, dt);
        if let Some(reset) = reset {
            for k in reset.iter() {
                p.column_mut(k).fill(0.0);
            }
        }
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalBlowup { node: j });
        }
        if let Some(store) = store.as_deref_mut() {
            store.index_axis_mut(Axis(0), j).assign(&p);
        }
    }
    Ok(())
}

/// `ℓ(x_T, y)`
pub fn loss(x_final: ArrayView1<f64>, y: ArrayView1<f64>, spec: &LossSpec) -> Result<f64> {
    spec.loss(x_final, y)
}

/// `P_T = ∇_x ℓ(x_T, y)`
pub fn terminal_costate(x_final: ArrayView1<f64>, y: ArrayView1<f64>, spec: &LossSpec) -> Result<Array1<f64>> {
    spec.terminal_costate(x_final, y)
}

/// Co-states of every particle along a batch computed by the forward flow with
/// the same controls.
pub fn backward_costate(
    net: &Network,
    batch: &ParticleBatch,
    theta: &ControlParams,
    spec: &LossSpec,
) -> Result<CostateTrajectory> {
    Objective::new(net, batch, spec, 0.0).check(theta)?;
    let fp = net.forward_pass(batch.inputs(), theta)?;
    let last = net.n_steps();
    let (_, terminal) = spec.batch_terminal(fp.states.index_axis(Axis(0), last), batch.targets());
    let mut store = Array3::zeros(fp.states.raw_dim());
    adjoint_sweep(net, theta, &fp, terminal, None, Some(&mut store))?;
    Ok(CostateTrajectory { costates: store })
}

/// Exact gradient of [`discrete_cost`].
pub fn control_gradient(
    net: &Network,
    batch: &ParticleBatch,
    theta: &ControlParams,
    spec: &LossSpec,
    lambda: f64,
) -> Result<ControlParams> {
    Objective::new(net, batch, spec, lambda)
        .gradient(theta)
        .map(|(_, g)| g)
}

/// `J^N(θ)`
pub fn discrete_cost(
    net: &Network,
    batch: &ParticleBatch,
    theta: &ControlParams,
    spec: &LossSpec,
    lambda: f64,
) -> Result<f64> {
    Objective::new(net, batch, spec, lambda)
        .cost(theta)
        .map(|c| c.total())
}
