//! Trained-model container.
//!
//! Layout: `"AODE"`, `u32` version, payload, CRC32 of the payload. The payload
//! holds the grid, the schedule table, the activation, `λ`, provenance and then
//! the stored controls as little-endian `f64` in node-major, row-major order
//! (each node's active weight block followed by its active bias).

use std::path::Path;

use sha2::{Digest, Sha256};

use super::container::{frame, unframe, Decoder, Encoder};
use crate::architecture::{IntervalSpec, LayerSchedule, Phase, ScheduleKind, TimeGrid};
use crate::dynamics::{Activation, ControlParams, Network};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"AODE";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    /// SHA-256 of `config_text`, hex.
    pub config_hash: String,
    pub config_text: String,
}

impl Provenance {
    pub fn from_config(seed: u64, config_text: &str) -> Self {
        Self {
            seed,
            config_hash: sha256_hex(config_text.as_bytes()),
            config_text: config_text.to_string(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub grid: TimeGrid,
    pub schedule: LayerSchedule,
    pub activation: Activation,
    pub lambda: f64,
    pub theta: ControlParams,
    pub provenance: Provenance,
}

impl Checkpoint {
    pub fn new(net: &Network, lambda: f64, theta: ControlParams, provenance: Provenance) -> Result<Self> {
        theta.check_schedule(net.schedule())?;
        Ok(Self {
            grid: *net.grid(),
            schedule: net.schedule().clone(),
            activation: net.activation(),
            lambda,
            theta,
            provenance,
        })
    }

    pub fn network(&self) -> Result<Network> {
        Network::new(self.grid, self.schedule.clone(), self.activation)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::default();
        e.f64(self.grid.horizon());
        e.f64(self.grid.dt());
        e.usize(self.grid.n_steps());

        let s = &self.schedule;
        e.u8(s.kind().tag());
        e.usize(s.dim());
        e.usize(s.intervals().len());
        for iv in s.intervals() {
            e.usize(iv.len());
            e.u8(iv.phase.tag());
            e.set(&iv.active);
            e.set(&iv.reset);
            e.set(&iv.shadow_active);
        }
        e.set(s.output_set());

        match self.activation {
            Activation::Tanh => {
                e.u8(0);
                e.f64(0.0);
                e.f64(0.0);
            }
            Activation::SmoothRelu { sharpness } => {
                e.u8(1);
                e.f64(0.0);
                e.f64(sharpness);
            }
            Activation::SmoothLeakyRelu { alpha, sharpness } => {
                e.u8(2);
                e.f64(alpha);
                e.f64(sharpness);
            }
        }
        e.f64(self.lambda);

        e.u64(self.provenance.seed);
        e.str(&self.provenance.config_hash);
        e.str(&self.provenance.config_text);

        e.usize(self.theta.param_count());
        for v in self.theta.iter() {
            e.f64(v);
        }
        frame(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &e.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let payload = unframe(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let mut d = Decoder::new(payload);
        let horizon = d.f64()?;
        let dt = d.f64()?;
        let n_steps = d.usize()?;
        let grid = TimeGrid::new(horizon, dt)?;
        if grid.n_steps() != n_steps {
            return Err(Error::GridMismatch(format!(
                "stored grid declares {n_steps} steps, horizon/dt gives {}",
                grid.n_steps()
            )));
        }

        let kind_tag = d.u8()?;
        let kind = ScheduleKind::from_tag(kind_tag)
            .ok_or_else(|| Error::InvalidSchedule(format!("unknown schedule kind tag {kind_tag}")))?;
        let dim = d.usize()?;
        let n_intervals = d.usize()?;
        let mut specs = Vec::new();
        for _ in 0..n_intervals {
            let len = d.usize()?;
            let phase_tag = d.u8()?;
            let phase = Phase::from_tag(phase_tag)
                .ok_or_else(|| Error::InvalidSchedule(format!("unknown phase tag {phase_tag}")))?;
            specs.push(IntervalSpec {
                len,
                phase,
                active: d.set()?,
                reset: d.set()?,
                shadow_active: d.set()?,
            });
        }
        let output = d.set()?;
        let schedule = LayerSchedule::from_parts(kind, dim, specs, output)?;

        let act_tag = d.u8()?;
        let alpha = d.f64()?;
        let sharpness = d.f64()?;
        let activation = match act_tag {
            0 => Activation::Tanh,
            1 => Activation::SmoothRelu { sharpness },
            2 => Activation::SmoothLeakyRelu { alpha, sharpness },
            t => return Err(Error::Config(format!("unknown activation tag {t}"))),
        };
        let lambda = d.f64()?;
        let provenance = Provenance {
            seed: d.u64()?,
            config_hash: d.str()?,
            config_text: d.str()?,
        };

        let mut theta = ControlParams::zeros(&schedule);
        let count = d.usize()?;
        if count != theta.param_count() {
            return Err(Error::CountMismatch(format!(
                "checkpoint stores {count} coefficients, schedule needs {}",
                theta.param_count()
            )));
        }
        theta.set_flat(&d.f64s(count)?)?;
        d.finish()?;

        let ck = Self {
            grid,
            schedule,
            activation,
            lambda,
            theta,
            provenance,
        };
        ck.network()?;
        Ok(ck)
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    std::fs::write(path, ck.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
