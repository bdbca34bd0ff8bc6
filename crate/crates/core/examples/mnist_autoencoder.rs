//! 784 -> 32 -> 784 reconstruction on the bundled 1000-image subset, then the
//! latent support report at the bottleneck.
//!
//! cargo run --release --example mnist_autoencoder [n_outer]
//!
//! The full preset budget takes about a quarter of an hour on one core.

use autoencode::config::preset;
use autoencode::diagnostics::latent_sparsity_report;
use autoencode::trainer::train_from;

fn main() -> autoencode::Result<()> {
    let mut cfg = preset("mnist")?;
    if let Some(n) = std::env::args().nth(1) {
        cfg.trainer.n_outer = n.parse().expect("n_outer");
    }
    let problem = cfg.problem()?;
    let net = &problem.net;
    let batch = problem.dataset.batch(net.dim())?;
    let start = std::time::Instant::now();
    let out = train_from(net, &batch, &problem.loss, &cfg.trainer, cfg.trainer.init.controls(net), |k, at| {
        if k % 25 == 0 {
            println!("iter {k:4}  data term {:.3}  {:.0?}", at.cost.data, start.elapsed());
        }
    })?;
    let (first, last) = (out.history.rows[0].data_term, out.history.last().unwrap().data_term);
    println!("data term {first:.3} -> {last:.3} ({:.3} of initial)", last / first);

    let node = net.schedule().bottleneck_node();
    let ds = &problem.dataset;
    let r = latent_sparsity_report(net, &out.theta, ds.inputs.view(), ds.labels.as_deref(), node, cfg.diagnostics.zero_tol)?;
    println!(
        "latent node {node}: modal support {}/{} (consistency {:.3}), union {}, mean size {:.1}",
        r.modal_support.len(),
        r.latent.len(),
        r.consistency,
        r.union_support.len(),
        r.mean_support_size
    );
    for (label, mean) in &r.class_means {
        let norm = mean.dot(mean).sqrt();
        println!("  digit {label}: |mean latent| {norm:.3}");
    }
    Ok(())
}
