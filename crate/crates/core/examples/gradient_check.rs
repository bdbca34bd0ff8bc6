//! Adjoint gradient against central finite differences on a small
//! autoencoder, for each activation.
//!
//! cargo run --example gradient_check

use autoencode::adjoint::{LossSpec, Objective};
use autoencode::architecture::{build_autoencoder_schedule, TimeGrid};
use autoencode::data_io::gen_parabola;
use autoencode::diagnostics::{gradient_check, gradient_check_sampled};
use autoencode::dynamics::{Activation, ControlParams, Network};

fn main() -> autoencode::Result<()> {
    let grid = TimeGrid::from_steps(0.1, 12)?;
    let schedule = build_autoencoder_schedule(&[(2, 4), (1, 4)], 0, &[(2, 4)], &grid)?;
    let data = gen_parabola(8, 1, (-1.0, 1.0))?;
    for act in [Activation::Tanh, Activation::smooth_relu(), Activation::smooth_leaky_relu(0.1)] {
        let net = Network::new(grid, schedule.clone(), act)?;
        let batch = data.batch(net.dim())?;
        let loss = LossSpec::for_schedule(net.schedule(), 2)?;
        let obj = Objective::new(&net, &batch, &loss, 1e-3);
        let theta = ControlParams::gaussian(net.schedule(), 0.5, 4);
        let full = gradient_check(&obj, &theta, 1e-5)?;
        let sampled = gradient_check_sampled(&obj, &theta, 1e-5, 20, 0)?;
        println!("{act:?}: {} coefficients, max relative error {full:.2e} (20 sampled: {sampled:.2e})", theta.param_count());
    }
    Ok(())
}
