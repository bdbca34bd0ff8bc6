//! Exact W1 between empirical measures: a shifted cloud, then the inputs and
//! outputs of a briefly trained parabola autoencoder against the targets.
//!
//! cargo run --release --example wasserstein

use autoencode::config::preset;
use autoencode::diagnostics::wasserstein1_exact;
use autoencode::trainer::train;
use ndarray::Array2;

fn main() -> autoencode::Result<()> {
    let a = Array2::from_shape_fn((64, 2), |(i, k)| ((i * 7 + k * 3) % 11) as f64 / 11.0);
    let b = &a + 0.25;
    println!("shift by (0.25, 0.25): W1 = {:.4}", wasserstein1_exact(a.view(), b.view())?);

    let mut cfg = preset("parabola40")?;
    cfg.data.n = 128;
    cfg.trainer.n_outer = 200;
    let problem = cfg.problem()?;
    let net = &problem.net;
    let batch = problem.dataset.batch(net.dim())?;
    let out = train(net, &batch, &problem.loss, &cfg.trainer)?;
    let traj = net.forward_batch(batch.inputs(), &out.theta)?;
    let targets = &problem.dataset.targets;
    let outputs = traj.final_states().to_owned();
    println!("W1(outputs at init, targets) = {:.4}", {
        let init = net.forward_batch(batch.inputs(), &cfg.trainer.init.controls(net))?;
        wasserstein1_exact(init.final_states(), targets.view())?
    });
    println!("W1(outputs after training, targets) = {:.4}", wasserstein1_exact(outputs.view(), targets.view())?);
    Ok(())
}
