//! Train the 2D classifier preset, report accuracy, and round-trip the
//! checkpoint through a temporary file.
//!
//! cargo run --release --example classify2d [n_outer]

use autoencode::config::preset;
use autoencode::data_io::{load_checkpoint, save_checkpoint, Checkpoint, Provenance};
use autoencode::trainer::{evaluate, train};

fn main() -> autoencode::Result<()> {
    let mut cfg = preset("classify2d")?;
    if let Some(n) = std::env::args().nth(1) {
        cfg.trainer.n_outer = n.parse().expect("n_outer");
    }
    let problem = cfg.problem()?;
    let net = &problem.net;
    let batch = problem.dataset.batch(net.dim())?;
    println!("{} layers, dt {:.4}, active widths {:?}", net.n_steps(), net.dt(), net.schedule().active_sizes());

    let out = train(net, &batch, &problem.loss, &cfg.trainer)?;
    for row in out.history.rows.iter().step_by((cfg.trainer.n_outer / 10).max(1)) {
        println!("iter {:5}  cost {:.4e}  tau {:.3e}", row.iter, row.cost, row.tau);
    }
    let m = evaluate(net, &out.theta, &batch, &problem.loss, true)?;
    println!("accuracy {:.3}, mse {:.4e}", m.accuracy.unwrap_or(f64::NAN), m.mse);

    let path = std::env::temp_dir().join("classify2d.aode");
    let ck = Checkpoint::new(net, cfg.trainer.lambda, out.theta, Provenance::from_config(cfg.seed, &cfg.to_toml()))?;
    save_checkpoint(&path, &ck)?;
    assert_eq!(load_checkpoint(&path)?, ck);
    println!("checkpoint written to {}", path.display());
    Ok(())
}
