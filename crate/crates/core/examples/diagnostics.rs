//! Post-training diagnostics on the parabola preset: per-node stability
//! margins, Hessian extremes, entropy along the layers, latent supports.
//!
//! cargo run --release --example diagnostics

use autoencode::adjoint::Objective;
use autoencode::config::preset;
use autoencode::diagnostics::{
    active_coordinates, default_radius, entropy_profiles, hessian_extreme_eigs, latent_sparsity_report,
    lipschitz_profile, HessianProbe,
};
use autoencode::trainer::train;

fn main() -> autoencode::Result<()> {
    let mut cfg = preset("parabola20")?;
    cfg.trainer.n_outer = 200;
    let problem = cfg.problem()?;
    let net = &problem.net;
    let batch = problem.dataset.batch(net.dim())?;
    let theta = train(net, &batch, &problem.loss, &cfg.trainer)?.theta;

    println!("node  lipschitz  delta  (dt = {})", net.dt());
    for e in lipschitz_profile(net, &theta, batch.inputs())? {
        println!("{:4}  {:9.3}  {:>8.3}{}", e.node, e.lipschitz, e.delta, if e.unstable { "  < dt" } else { "" });
    }

    let obj = Objective::new(net, &batch, &problem.loss, cfg.trainer.lambda);
    let h = hessian_extreme_eigs(&obj, &theta, HessianProbe::DenseFd, 1e-6)?;
    println!("hessian eigenvalues in [{:.3e}, {:.3e}]", h.min, h.max);

    let traj = net.forward_batch(batch.inputs(), &theta)?;
    let coords = active_coordinates(net.schedule());
    let eps = default_radius(batch.inputs());
    println!("node  shannon  cluster (eps {eps:.3})");
    for row in entropy_profiles(&traj, &coords, eps, 10, 0)? {
        println!("{:4}  {:7.3}  {:7.3}", row.node, row.shannon, row.cluster);
    }

    let node = net.schedule().bottleneck_node();
    let r = latent_sparsity_report(net, &theta, batch.inputs(), None, node, 1e-8)?;
    println!("latent at node {node}: support {:?}, consistency {:.2}", r.modal_support.as_slice(), r.consistency);
    Ok(())
}
