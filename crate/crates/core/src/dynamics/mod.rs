//! The masked controlled vector field `F(t, x, θ)_k = σ((W_j x + b_j)_k)` on
//! active components, its Jacobians, the explicit Euler flow and the discrete
//! resolvent (Jacobian of the flow map).
//!
//! Everything here is defined for the Euler discretization itself, so the
//! derivative identities used by the adjoint hold to rounding error.

mod activation;
mod params;

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayViewMut2, Axis, CowArray, Ix2};

pub use activation::{Activation, DEFAULT_SHARPNESS};
pub use params::{ControlParams, NodeParams};

use crate::architecture::{IndexSet, LayerSchedule, TimeGrid};
use crate::error::{Error, Result};

/// Grid, schedule and activation of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    grid: TimeGrid,
    schedule: LayerSchedule,
    activation: Activation,
}

/// States of one particle, `(n_steps + 1) × d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Array2<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> ArrayView1<'_, f64> {
        self.states.row(self.states.nrows() - 1)
    }
}

/// States of a batch of particles, indexed `[node, particle, component]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchTrajectory {
    pub states: Array3<f64>,
}

impl BatchTrajectory {
    pub fn n_particles(&self) -> usize {
        self.states.len_of(Axis(1))
    }

    pub fn at_node(&self, node: usize) -> ArrayView2<'_, f64> {
        self.states.index_axis(Axis(0), node)
    }

    pub fn final_states(&self) -> ArrayView2<'_, f64> {
        self.at_node(self.states.len_of(Axis(0)) - 1)
    }

    pub fn particle(&self, i: usize) -> Trajectory {
        Trajectory {
            states: self.states.index_axis(Axis(1), i).to_owned(),
        }
    }
}

/// Forward pass with the activation slopes needed by the adjoint sweep.
#[derive(Clone, Debug)]
pub(crate) struct ForwardPass {
    pub states: Array3<f64>,
    /// `σ'(W_j x̃_A + b_j)` per node, `N × |A_j|`.
    pub slopes: Vec<Array2<f64>>,
}

impl Network {
    pub fn new(grid: TimeGrid, schedule: LayerSchedule, activation: Activation) -> Result<Self> {
        if grid.n_steps() != schedule.n_steps() {
            return Err(Error::GridMismatch(format!(
                "grid has {} steps, schedule has {}",
                grid.n_steps(),
                schedule.n_steps()
            )));
        }
        activation.check().map_err(Error::Config)?;
        Ok(Self {
            grid,
            schedule,
            activation,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn schedule(&self) -> &LayerSchedule {
        &self.schedule
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dim(&self) -> usize {
        self.schedule.dim()
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    fn check_state(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Shape(format!(
                "state has {len} components, network dimension is {}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// `F(t_j, x, θ)`: `σ(W_j x + b_j)` on the active set, zero elsewhere.
    pub fn vector_field(&self, j: usize, x: ArrayView1<f64>, theta: &ControlParams) -> Result<Array1<f64>> {
        self.check_state(x.len())?;
        theta.check_schedule(&self.schedule)?;
        let active = self.schedule.active_at(j)?;
        let node = theta.node(j);
        let xa = gather_vec(x, active);
        let z = node.weight.dot(&xa) + &node.bias;
        let mut out = Array1::zeros(self.dim());
        for (a, k) in active.iter().enumerate() {
            out[k] = self.activation.eval(z[a]);
        }
        Ok(out)
    }

    /// `∇_x F(t_j, x, θ)` as a dense `d×d` matrix; only the active block is nonzero.
    pub fn jac_x(&self, j: usize, x: ArrayView1<f64>, theta: &ControlParams) -> Result<Array2<f64>> {
        self.check_state(x.len())?;
        theta.check_schedule(&self.schedule)?;
        let active = self.schedule.active_at(j)?;
        let block = self.active_jacobian(j, x, theta)?;
        let mut jac = Array2::zeros((self.dim(), self.dim()));
        for (a, k) in active.iter().enumerate() {
            for (b, l) in active.iter().enumerate() {
                jac[[k, l]] = block[[a, b]];
            }
        }
        Ok(jac)
    }

    /// Active block `diag(σ'(W_j x_A + b_j)) W_j`.
    pub fn active_jacobian(&self, j: usize, x: ArrayView1<f64>, theta: &ControlParams) -> Result<Array2<f64>> {
        let active = self.schedule.active_at(j)?;
        let node = theta.node(j);
        let xa = gather_vec(x, active);
        let z = node.weight.dot(&xa) + &node.bias;
        let mut block = node.weight.clone();
        for (a, mut row) in block.rows_mut().into_iter().enumerate() {
            row *= self.activation.derivative(z[a]);
        }
        Ok(block)
    }

    /// Adjoint action `v ↦ ∇_θF(t_j, x, θ)^T v`, shaped like the node's controls:
    /// `dW_{kl} = σ'_k v_k x_l`, `db_k = σ'_k v_k` over active `k, l`.
    pub fn jac_theta_adjoint(
        &self,
        j: usize,
        x: ArrayView1<f64>,
        theta: &ControlParams,
        v: ArrayView1<f64>,
    ) -> Result<NodeParams> {
        self.check_state(x.len())?;
        self.check_state(v.len())?;
        theta.check_schedule(&self.schedule)?;
        let active = self.schedule.active_at(j)?;
        let node = theta.node(j);
        let xa = gather_vec(x, active);
        let z = node.weight.dot(&xa) + &node.bias;
        let g: Array1<f64> = active
            .iter()
            .enumerate()
            .map(|(a, k)| self.activation.derivative(z[a]) * v[k])
            .collect();
        let weight = outer(&g, &xa);
        Ok(NodeParams { weight, bias: g })
    }

    /// Euler flow of a single particle.
    pub fn forward_flow(&self, x0: ArrayView1<f64>, theta: &ControlParams) -> Result<Trajectory> {
        let batch = x0.insert_axis(Axis(0));
        let traj = self.forward_batch(batch, theta)?;
        Ok(traj.particle(0))
    }

    /// Euler flow of `N` particles given as the rows of `x0`.
    pub fn forward_batch(&self, x0: ArrayView2<f64>, theta: &ControlParams) -> Result<BatchTrajectory> {
        self.forward_pass(x0, theta).map(|fp| BatchTrajectory { states: fp.states })
    }

    pub(crate) fn forward_pass(&self, x0: ArrayView2<f64>, theta: &ControlParams) -> Result<ForwardPass> {
        self.check_state(x0.ncols())?;
        theta.check_schedule(&self.schedule)?;
        let (n, d) = x0.dim();
        let steps = self.n_steps();
        let dt = self.dt();
        let mut states = Array3::zeros((steps + 1, n, d));
        states.index_axis_mut(Axis(0), 0).assign(&x0);
        let mut slopes = Vec::with_capacity(steps);
        for j in 0..steps {
            let (prev, mut next) = states.multi_slice_mut((s![j, .., ..], s![j + 1, .., ..]));
            next.assign(&prev);
            self.apply_reset(j, next.view_mut())?;
            let active = self.schedule.active_at(j)?;
            let node = theta.node(j);
            let mut z = gather_cols(next.view(), active).dot(&node.weight.t());
            z += &node.bias;
            let mut slope = Array2::zeros(z.raw_dim());
            ndarray::Zip::from(&mut z).and(&mut slope).for_each(|zv, sv| {
                let (f, df) = self.activation.eval_with_derivative(*zv);
                *zv = f;
                *sv = df;
            });
            scatter_add_cols(next.view_mut(), active, &z, dt);
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::NumericalBlowup { node: j + 1 });
            }
            slopes.push(slope);
        }
        Ok(ForwardPass { states, slopes })
    }

    /// Zero the slots that start a fresh shadow component at node `j`.
    pub(crate) fn apply_reset(&self, j: usize, mut x: ArrayViewMut2<f64>) -> Result<()> {
        if let Some(reset) = self.schedule.reset_at(j)? {
            for k in reset.iter() {
                x.column_mut(k).fill(0.0);
            }
        }
        Ok(())
    }

    /// Jacobian of the discrete flow map from node `from` to node `to` along
    /// the trajectory started at `x0`:
    /// `R = Π_{j=from}^{to-1} (Id + dt ∇_xF(t_j, x̃_j)) Π_j`, with `Π_j` the reset projection.
    pub fn resolvent(
        &self,
        x0: ArrayView1<f64>,
        theta: &ControlParams,
        from: usize,
        to: usize,
    ) -> Result<Array2<f64>> {
        if from > to || to > self.n_steps() {
            return Err(Error::Index {
                index: to.max(from),
                n_steps: self.n_steps(),
            });
        }
        let traj = self.forward_flow(x0, theta)?;
        self.resolvent_along(&traj, theta, from, to)
    }

    /// Resolvent along a precomputed trajectory.
    pub fn resolvent_along(
        &self,
        traj: &Trajectory,
        theta: &ControlParams,
        from: usize,
        to: usize,
    ) -> Result<Array2<f64>> {
        let d = self.dim();
        let dt = self.dt();
        let mut r = Array2::eye(d);
        for j in from..to {
            let mut x = traj.states.row(j).to_owned();
            let reset = self.schedule.reset_at(j)?.cloned();
            if let Some(reset) = &reset {
                for k in reset.iter() {
                    x[k] = 0.0;
                }
            }
            let mut step = Array2::eye(d);
            step.scaled_add(dt, &self.jac_x(j, x.view(), theta)?);
            if let Some(reset) = &reset {
                for k in reset.iter() {
                    step.column_mut(k).fill(0.0);
                }
            }
            r = step.dot(&r);
            if !r.iter().all(|v| v.is_finite()) {
                return Err(Error::NumericalBlowup { node: j + 1 });
            }
        }
        Ok(r)
    }
}

pub(crate) fn gather_vec(x: ArrayView1<f64>, set: &IndexSet) -> Array1<f64> {
    match set.as_range() {
        Some(r) => x.slice(s![r]).to_owned(),
        None => set.iter().map(|k| x[k]).collect(),
    }
}

/// Columns of `x` listed in `set`; borrowed when the set is contiguous.
pub(crate) fn gather_cols<'a>(x: ArrayView2<'a, f64>, set: &IndexSet) -> CowArray<'a, f64, Ix2> {
    match set.as_range() {
        Some(r) => CowArray::from(x.slice_move(s![.., r])),
        None => CowArray::from(x.select(Axis(1), set.as_slice())),
    }
}

/// `x[:, set] += alpha * values`
pub(crate) fn scatter_add_cols(mut x: ArrayViewMut2<f64>, set: &IndexSet, values: &Array2<f64>, alpha: f64) {
    match set.as_range() {
        Some(r) => x.slice_mut(s![.., r]).scaled_add(alpha, values),
        None => {
            for (a, k) in set.iter().enumerate() {
                x.column_mut(k).scaled_add(alpha, &values.column(a));
            }
        }
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut m = Array2::zeros((a.len(), b.len()));
    for (i, mut row) in m.rows_mut().into_iter().enumerate() {
        row.assign(&(b * a[i]));
    }
    m
}
