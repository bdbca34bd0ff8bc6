//! Random small instances shared by unit tests.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::architecture::{
    build_autoencoder_schedule, build_encoder_schedule, build_plain_schedule, LayerSchedule, TimeGrid,
};
use crate::dynamics::{Activation, ControlParams, Network};

pub const ACTIVATIONS: [Activation; 3] = [
    Activation::Tanh,
    Activation::SmoothRelu { sharpness: 3.0 },
    Activation::SmoothLeakyRelu {
        alpha: 0.2,
        sharpness: 4.0,
    },
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random schedule of dimension `2..=4` over `3..=10` steps: plain, encoder or autoencoder.
pub fn random_schedule(rng: &mut impl Rng, grid_steps: usize, variant: usize) -> LayerSchedule {
    let dt = 0.15;
    let grid = TimeGrid::from_steps(dt, grid_steps).unwrap();
    let d = rng.random_range(2..=4usize);
    match variant % 3 {
        0 => build_plain_schedule(d, &grid).unwrap(),
        1 => {
            let first = grid_steps / 2;
            build_encoder_schedule(&[(d, first), (1, grid_steps - first)], &grid).unwrap()
        }
        _ => {
            let a = grid_steps / 3;
            let b = grid_steps / 3;
            build_autoencoder_schedule(&[(d, a), (1, b)], 0, &[(d, grid_steps - a - b)], &grid).unwrap()
        }
    }
}

pub fn random_network(seed: u64, activation: Activation) -> Network {
    let mut r = rng(seed);
    let steps = r.random_range(3..=10usize);
    let variant = r.random_range(0..3usize);
    let schedule = random_schedule(&mut r, steps, variant);
    let grid = TimeGrid::from_steps(0.15, steps).unwrap();
    Network::new(grid, schedule, activation).unwrap()
}

pub fn random_controls(net: &Network, seed: u64, scale: f64) -> ControlParams {
    ControlParams::gaussian(net.schedule(), scale, seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| scale * (2.0 * rng.random::<f64>() - 1.0))
}
