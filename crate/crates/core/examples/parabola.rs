//! Parabola reconstruction through a one-dimensional bottleneck: 20 against
//! 40 layers, smooth leaky ReLU against tanh, same data and budget.
//!
//! cargo run --release --example parabola

use autoencode::config::{preset, ActivationKind};
use autoencode::trainer::train;

fn main() -> autoencode::Result<()> {
    for name in ["parabola20", "parabola40"] {
        for act in [ActivationKind::SmoothLeakyRelu, ActivationKind::Tanh] {
            let mut cfg = preset(name)?;
            cfg.architecture.activation = act;
            let problem = cfg.problem()?;
            let batch = problem.dataset.batch(problem.net.dim())?;
            let out = train(&problem.net, &batch, &problem.loss, &cfg.trainer)?;
            let (first, last) = (&out.history.rows[0], out.history.last().unwrap());
            println!("{name:<11} {act:<16?} data term {:.3e} -> {:.3e}", first.data_term, last.data_term);
        }
    }
    Ok(())
}
