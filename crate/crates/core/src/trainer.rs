//! Shooting method with minimizing-movement stabilization.
//!
//! Each outer step solves the implicit problem
//! `θ_{k+1} ∈ argmin J(θ) + ‖θ - θ_k‖²_{L²} / (2τ)` through the fixed point of
//! `Λ(θ) = (θ_k - τ g(θ)) / (1 + 2λτ)`, where `g` is the L²-density gradient of
//! the data term. Accepted steps satisfy the descent inequality of the scheme;
//! a step that violates it is retried with a smaller `τ`.

use std::io::Write;

use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::adjoint::{CostBreakdown, LossSpec, Objective, ParticleBatch, Reduction};
use crate::dynamics::{ControlParams, Network};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Init {
    #[default]
    Zeros,
    Gaussian { scale: f64, seed: u64 },
}

impl Init {
    pub fn controls(&self, net: &Network) -> ControlParams {
        match *self {
            Init::Zeros => ControlParams::zeros(net.schedule()),
            Init::Gaussian { scale, seed } => ControlParams::gaussian(net.schedule(), scale, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub lambda: f64,
    pub tau: f64,
    pub n_outer: usize,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub tau_backoff: f64,
    /// Factor applied to `τ` after an outer step accepted without retries,
    /// never past the configured `tau`. `1` keeps reductions permanent.
    pub tau_growth: f64,
    /// Retries of one outer step before giving up.
    pub max_retries: usize,
    pub init: Init,
    pub deterministic_reduction: bool,
    /// Slack allowed in the descent inequality.
    pub descent_slack: f64,
    /// Fixed-point iterates with a larger L² norm count as divergent.
    pub blowup_bound: f64,
    /// Stop once `‖θ_{k+1} - θ_k‖ ≤ fp_tol · τ`.
    pub stop_when_stationary: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            tau: 0.1,
            n_outer: 100,
            fp_tol: 1e-6,
            fp_max_iter: 10,
            tau_backoff: 0.5,
            tau_growth: 1.0,
            max_retries: 20,
            init: Init::Zeros,
            deterministic_reduction: true,
            descent_slack: 1e-9,
            blowup_bound: 1e8,
            stop_when_stationary: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("trainer: {what}")));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda must be finite and non-negative");
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.fp_tol.is_finite() && self.fp_tol > 0.0) {
            return bad("fp_tol must be positive");
        }
        if self.fp_max_iter == 0 {
            return bad("fp_max_iter must be at least 1");
        }
        if !(self.tau_backoff > 0.0 && self.tau_backoff < 1.0) {
            return bad("tau_backoff must lie in (0, 1)");
        }
        if !(self.tau_growth.is_finite() && self.tau_growth >= 1.0) {
            return bad("tau_growth must be at least 1");
        }
        if !(self.descent_slack.is_finite() && self.descent_slack >= 0.0) {
            return bad("descent_slack must be finite and non-negative");
        }
        if !(self.blowup_bound > 0.0) {
            return bad("blowup_bound must be positive");
        }
        if let Init::Gaussian { scale, .. } = self.init {
            if !(scale.is_finite() && scale >= 0.0) {
                return bad("gaussian init scale must be finite and non-negative");
            }
        }
        Ok(())
    }

    pub fn reduction(&self) -> Reduction {
        if self.deterministic_reduction {
            Reduction::Deterministic
        } else {
            Reduction::Unordered
        }
    }
}

/// One row per outer iteration; row 0 is the initialization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub cost: f64,
    pub data_term: f64,
    pub reg_term: f64,
    pub fp_iters: usize,
    pub step_norm: f64,
    pub tau: f64,
    /// `‖θ_{k+1} - Λ(θ_{k+1})‖_{L²}` at the accepted iterate.
    pub fp_residual: f64,
    pub retries: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    pub rows: Vec<HistoryRow>,
}

impl TrainingHistory {
    pub const HEADER: &'static str = "iter,cost,data_term,reg_term,fp_iters,step_norm,tau";

    pub fn costs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cost).collect()
    }

    pub fn last(&self) -> Option<&HistoryRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::HEADER.split(','))?;
        for r in &self.rows {
            w.write_record([
                r.iter.to_string(),
                format!("{:e}", r.cost),
                format!("{:e}", r.data_term),
                format!("{:e}", r.reg_term),
                r.fp_iters.to_string(),
                format!("{:e}", r.step_norm),
                format!("{:e}", r.tau),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cost and data-term gradient density at one control.
#[derive(Clone, Debug)]
pub struct Evaluated {
    pub theta: ControlParams,
    pub cost: CostBreakdown,
    /// L²-density gradient of the data term.
    pub grad: ControlParams,
}

fn objective<'a>(net: &'a Network, batch: &'a ParticleBatch, spec: &'a LossSpec, config: &TrainerConfig) -> Objective<'a> {
    Objective::new(net, batch, spec, config.lambda).with_reduction(config.reduction())
}

/// Evaluate cost and gradient density at `theta`.
pub fn evaluate_at(obj: &Objective, theta: ControlParams) -> Result<Evaluated> {
    let (cost, mut grad) = obj.data_gradient(&theta)?;
    grad.scale(1.0 / obj.net.dt());
    Ok(Evaluated { theta, cost, grad })
}

/// `Λ` applied with a precomputed density gradient `g(θ)`.
pub fn lambda_step(theta_prev: &ControlParams, grad: &ControlParams, lambda: f64, tau: f64) -> ControlParams {
    let mut next = theta_prev.clone();
    next.axpy(-tau, grad);
    next.scale(1.0 / (1.0 + 2.0 * lambda * tau));
    next
}

/// `Λ(θ) = (θ_prev - τ g(θ)) / (1 + 2λτ)`.
pub fn lambda_map(
    net: &Network,
    theta: &ControlParams,
    theta_prev: &ControlParams,
    batch: &ParticleBatch,
    spec: &LossSpec,
    config: &TrainerConfig,
) -> Result<ControlParams> {
    theta_prev.check_schedule(net.schedule())?;
    let at = evaluate_at(&objective(net, batch, spec, config), theta.clone())?;
    Ok(lambda_step(theta_prev, &at.grad, config.lambda, config.tau))
}

#[derive(Clone, Debug)]
pub struct FixedPointResult {
    pub theta: ControlParams,
    pub iters: usize,
    /// Last Cauchy difference `‖θ^{(m+1)} - θ^{(m)}‖_{L²}`.
    pub last_diff: f64,
    pub converged: bool,
}

fn fixed_point_from(obj: &Objective, start: &Evaluated, config: &TrainerConfig, tau: f64) -> Result<FixedPointResult> {
    let dt = obj.net.dt();
    let mut next = lambda_step(&start.theta, &start.grad, config.lambda, tau);
    let mut prev = start.theta.clone();
    let mut iters = 1;
    loop {
        if !next.is_finite() || next.l2_norm(dt) > config.blowup_bound {
            return Err(Error::FixedPointDiverged(format!(
                "iterate {iters} left the ball of radius {:e}",
                config.blowup_bound
            )));
        }
        let diff = next.l2_distance(&prev, dt);
        if diff <= config.fp_tol || iters >= config.fp_max_iter {
            return Ok(FixedPointResult {
                theta: next,
                iters,
                last_diff: diff,
                converged: diff <= config.fp_tol,
            });
        }
        let at = evaluate_at(obj, next.clone()).map_err(|e| match e {
            Error::NumericalBlowup { node } => {
                Error::FixedPointDiverged(format!("state blew up at node {node} during the fixed-point solve"))
            }
            other => other,
        })?;
        prev = next;
        next = lambda_step(&start.theta, &at.grad, config.lambda, tau);
        iters += 1;
    }
}

/// Fixed-point iteration of `Λ` started at `θ_k`.
pub fn fixed_point_update(
    net: &Network,
    theta_k: &ControlParams,
    batch: &ParticleBatch,
    spec: &LossSpec,
    config: &TrainerConfig,
) -> Result<FixedPointResult> {
    config.validate()?;
    let obj = objective(net, batch, spec, config);
    let start = evaluate_at(&obj, theta_k.clone())?;
    fixed_point_from(&obj, &start, config, config.tau)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub theta: ControlParams,
    pub history: TrainingHistory,
    /// Training stopped on the stationarity criterion.
    pub converged: bool,
    /// Cost and gradient density at the returned controls.
    pub last: Evaluated,
}

/// Minimizing-movement training from the configured initialization.
pub fn train(net: &Network, batch: &ParticleBatch, spec: &LossSpec, config: &TrainerConfig) -> Result<TrainOutcome> {
    train_from(net, batch, spec, config, config.init.controls(net), |_, _| {})
}

/// Training from explicit initial controls; `observe` sees every accepted iterate.
pub fn train_from(
    net: &Network,
    batch: &ParticleBatch,
    spec: &LossSpec,
    config: &TrainerConfig,
    theta0: ControlParams,
    mut observe: impl FnMut(usize, &Evaluated),
) -> Result<TrainOutcome> {
    config.validate()?;
    theta0.check_schedule(net.schedule())?;
    let obj = objective(net, batch, spec, config);
    let dt = net.dt();
    let mut current = evaluate_at(&obj, theta0)?;
    let mut tau = config.tau;
    let mut history = TrainingHistory::default();
    history.rows.push(HistoryRow {
        iter: 0,
        cost: current.cost.total(),
        data_term: current.cost.data,
        reg_term: current.cost.reg,
        fp_iters: 0,
        step_norm: 0.0,
        tau,
        fp_residual: f64::NAN,
        retries: 0,
    });
    observe(0, &current);
    let mut converged = false;

    for iter in 1..=config.n_outer {
        let mut retries = 0;
        let (next, fp, step_norm) = loop {
            let attempt = fixed_point_from(&obj, &current, config, tau).and_then(|fp| {
                let at = evaluate_at(&obj, fp.theta.clone())?;
                Ok((at, fp))
            });
            match attempt {
                Ok((at, fp)) => {
                    let step = at.theta.l2_distance(&current.theta, dt);
                    let lhs = at.cost.total() + step * step / (2.0 * tau);
                    if lhs <= current.cost.total() + config.descent_slack {
                        break (at, fp, step);
                    }
                }
                Err(Error::FixedPointDiverged(_)) | Err(Error::NumericalBlowup { .. }) => {}
                Err(e) => return Err(e),
            }
            if retries >= config.max_retries {
                return Err(Error::FixedPointDiverged(format!(
                    "outer step {iter}: no descent after {retries} step-size reductions (tau = {tau:e})"
                )));
            }
            retries += 1;
            tau *= config.tau_backoff;
        };
        let residual = lambda_step(&current.theta, &next.grad, config.lambda, tau).l2_distance(&next.theta, dt);
        history.rows.push(HistoryRow {
            iter,
            cost: next.cost.total(),
            data_term: next.cost.data,
            reg_term: next.cost.reg,
            fp_iters: fp.iters,
            step_norm,
            tau,
            fp_residual: residual,
            retries,
        });
        current = next;
        observe(iter, &current);
        if config.stop_when_stationary && step_norm <= config.fp_tol * tau {
            converged = true;
            break;
        }
        if retries == 0 {
            tau = (tau * config.tau_growth).min(config.tau);
        }
    }
    Ok(TrainOutcome {
        theta: current.theta.clone(),
        history,
        converged,
        last: current,
    })
}

/// Explicit gradient descent on `J` with step `h` (in the L²-density metric),
/// returning every iterate. Reference solution for the gradient-flow limit.
pub fn gradient_descent_path(
    net: &Network,
    batch: &ParticleBatch,
    spec: &LossSpec,
    lambda: f64,
    theta0: ControlParams,
    h: f64,
    n_steps: usize,
) -> Result<Vec<ControlParams>> {
    let obj = Objective::new(net, batch, spec, lambda);
    let mut path = Vec::with_capacity(n_steps + 1);
    let mut theta = theta0;
    for _ in 0..n_steps {
        let at = evaluate_at(&obj, theta.clone())?;
        path.push(theta);
        let mut next = path.last().expect("just pushed").clone();
        next.axpy(-h, &at.grad);
        next.axpy(-2.0 * lambda * h, &at.theta);
        theta = next;
    }
    path.push(theta);
    Ok(path)
}

/// Value at flow time `t` of the piecewise-affine interpolation of iterates
/// spaced `step` apart.
pub fn interpolate_path(path: &[ControlParams], step: f64, t: f64) -> ControlParams {
    let pos = (t / step).max(0.0);
    let k = (pos.floor() as usize).min(path.len() - 1);
    if k + 1 >= path.len() {
        return path[path.len() - 1].clone();
    }
    let w = pos - k as f64;
    let mut out = path[k].clone();
    out.scale(1.0 - w);
    out.axpy(w, &path[k + 1]);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub data_term: f64,
    pub losses: Vec<f64>,
    /// Mean per-sample loss.
    pub mse: f64,
    /// Fraction of particles whose output is nearest to their own target
    /// among the distinct targets present (classification tasks only).
    pub accuracy: Option<f64>,
}

pub fn evaluate(
    net: &Network,
    theta: &ControlParams,
    batch: &ParticleBatch,
    spec: &LossSpec,
    classification: bool,
) -> Result<Metrics> {
    if batch.targets().ncols() != spec.target_dim() {
        return Err(Error::Shape(format!(
            "targets have {} components, loss expects {}",
            batch.targets().ncols(),
            spec.target_dim()
        )));
    }
    let traj = net.forward_batch(batch.inputs(), theta)?;
    let finals = traj.final_states();
    let losses = finals
        .outer_iter()
        .zip(batch.targets().outer_iter())
        .map(|(x, y)| spec.loss(x, y))
        .collect::<Result<Vec<_>>>()?;
    let mse = losses.iter().sum::<f64>() / losses.len() as f64;
    let accuracy = classification.then(|| {
        let out = spec.output().as_slice();
        let project = |v: ndarray::ArrayView1<f64>| -> Array1<f64> { out.iter().map(|&k| v[k]).collect() };
        let mut classes: Vec<Array1<f64>> = Vec::new();
        let labels: Vec<usize> = batch
            .targets()
            .axis_iter(Axis(0))
            .map(|y| {
                let y = project(y);
                match classes.iter().position(|c| *c == y) {
                    Some(c) => c,
                    None => {
                        classes.push(y);
                        classes.len() - 1
                    }
                }
            })
            .collect();
        let correct = finals
            .outer_iter()
            .zip(&labels)
            .filter(|(x, &label)| {
                let x = project(*x);
                let dist = |c: &Array1<f64>| (&x - c).mapv(|v| v * v).sum();
                let best = (0..classes.len())
                    .min_by(|&a, &b| dist(&classes[a]).total_cmp(&dist(&classes[b])))
                    .expect("at least one class");
                best == label
            })
            .count();
        correct as f64 / labels.len() as f64
    });
    Ok(Metrics {
        data_term: mse,
        losses,
        mse,
        accuracy,
    })
}
