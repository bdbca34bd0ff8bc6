//! Active-set layouts produced by each builder.
//!
//! cargo run --example schedules

use autoencode::architecture::{
    build_autoencoder_schedule, build_encoder_schedule, build_plain_schedule, build_unet_schedule, LayerSchedule,
    TimeGrid,
};

fn show(name: &str, s: &LayerSchedule) {
    println!("{name}: dim {}, output {:?}", s.dim(), s.output_set().as_slice());
    for iv in s.intervals() {
        println!(
            "  steps {:>2}..{:<2} {:?}  active {:?}  reset {:?}",
            iv.start,
            iv.end,
            iv.phase,
            iv.active.as_slice(),
            iv.reset.as_slice()
        );
    }
}

fn main() -> autoencode::Result<()> {
    let grid = TimeGrid::new(2.0, 0.1)?;
    show("plain", &build_plain_schedule(2, &grid)?);
    show("encoder", &build_encoder_schedule(&[(4, 10), (2, 6), (1, 4)], &grid)?);
    let ae = build_autoencoder_schedule(&[(2, 7), (1, 7)], 0, &[(2, 6)], &grid)?;
    show("autoencoder", &ae);
    show("autoencoder, second coordinate kept", &ae.relabel(&[1, 0])?);
    show("u-net", &build_unet_schedule(&[4, 2, 1, 2, 4], &grid)?);
    Ok(())
}
