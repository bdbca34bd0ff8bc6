//! Datasets, generators, IDX ingestion and the binary containers.

mod checkpoint;
mod container;
mod generators;
mod mnist;

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, sha256_hex, Checkpoint, Provenance, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use generators::{gen_gaussian_classification, gen_parabola};
pub use mnist::{
    encode_idx_images, encode_idx_labels, load_mnist_idx, mnist_from_bytes, parse_idx_images, parse_idx_labels,
    IMAGES_MAGIC, LABELS_MAGIC,
};

use crate::adjoint::ParticleBatch;
use crate::error::{Error, Result};
use container::{frame, unframe, Decoder, Encoder};

pub const DATASET_MAGIC: &[u8; 4] = b"AODS";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Classify2d,
    Parabola,
    Mnist,
    Other,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Classify2d => "classify2d",
            DatasetKind::Parabola => "parabola",
            DatasetKind::Mnist => "mnist",
            DatasetKind::Other => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "classify2d" => DatasetKind::Classify2d,
            "parabola" => DatasetKind::Parabola,
            "mnist" => DatasetKind::Mnist,
            "other" => DatasetKind::Other,
            _ => return None,
        })
    }

    /// Tasks scored by nearest-target accuracy.
    pub fn is_classification(self) -> bool {
        matches!(self, DatasetKind::Classify2d)
    }
}

/// How raw values were mapped to the stored inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Normalization {
    None,
    /// Raw values multiplied by this factor.
    Scaled(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
    pub kind: DatasetKind,
    pub labels: Option<Vec<u8>>,
    pub normalization: Normalization,
}

impl Dataset {
    pub fn new(
        inputs: Array2<f64>,
        targets: Array2<f64>,
        kind: DatasetKind,
        labels: Option<Vec<u8>>,
        normalization: Normalization,
    ) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::Shape("dataset is empty".into()));
        }
        if inputs.nrows() != targets.nrows() {
            return Err(Error::Shape(format!(
                "{} inputs but {} targets",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        if labels.as_ref().is_some_and(|l| l.len() != inputs.nrows()) {
            return Err(Error::Shape("label count differs from sample count".into()));
        }
        if !inputs.iter().chain(targets.iter()).all(|v| v.is_finite()) {
            return Err(Error::Shape("dataset contains non-finite values".into()));
        }
        Ok(Self {
            inputs,
            targets,
            kind,
            labels,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn target_dim(&self) -> usize {
        self.targets.ncols()
    }

    /// Inputs padded with zeros to the state dimension `dim`.
    pub fn batch(&self, dim: usize) -> Result<ParticleBatch> {
        ParticleBatch::embedded(self.inputs.view(), self.targets.clone(), dim)
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            self.inputs.select(Axis(0), rows),
            self.targets.select(Axis(0), rows),
            self.kind,
            self.labels.as_ref().map(|l| rows.iter().map(|&i| l[i]).collect()),
            self.normalization,
        )
    }

    /// First `n` samples.
    pub fn head(&self, n: usize) -> Result<Self> {
        self.select(&(0..n.min(self.len())).collect::<Vec<_>>())
    }

    /// Seeded shuffle, then the first `⌈train_fraction · N⌉` samples train.
    pub fn split(&self, train_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Config(format!("split fraction must lie in (0, 1), got {train_fraction}")));
        }
        let n = self.len();
        let n_train = ((train_fraction * n as f64).ceil() as usize).clamp(1, n.saturating_sub(1).max(1));
        if n_train >= n {
            return Err(Error::Config(format!("cannot split {n} samples")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (train, test) = order.split_at(n_train);
        Ok((self.select(train)?, self.select(test)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Binary,
    Csv,
}

impl Dataset {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::default();
        e.str(self.kind.name());
        match self.normalization {
            Normalization::None => {
                e.u8(0);
                e.f64(1.0);
            }
            Normalization::Scaled(s) => {
                e.u8(1);
                e.f64(s);
            }
        }
        e.usize(self.len());
        e.usize(self.input_dim());
        e.usize(self.target_dim());
        for v in self.inputs.iter().chain(self.targets.iter()) {
            e.f64(*v);
        }
        match &self.labels {
            None => e.u8(0),
            Some(l) => {
                e.u8(1);
                e.buf.extend_from_slice(l);
            }
        }
        frame(DATASET_MAGIC, DATASET_VERSION, &e.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let payload = unframe(bytes, DATASET_MAGIC, DATASET_VERSION)?;
        let mut d = Decoder::new(payload);
        let kind_name = d.str()?;
        let kind = DatasetKind::from_name(&kind_name)
            .ok_or_else(|| Error::Config(format!("unknown dataset kind {kind_name:?}")))?;
        let normalization = match (d.u8()?, d.f64()?) {
            (0, _) => Normalization::None,
            (1, s) => Normalization::Scaled(s),
            (t, _) => return Err(Error::Config(format!("unknown normalization tag {t}"))),
        };
        let n = d.usize()?;
        let din = d.usize()?;
        let dt = d.usize()?;
        let inputs = Array2::from_shape_vec((n, din), d.f64s(n * din)?).map_err(|e| Error::Shape(e.to_string()))?;
        let targets = Array2::from_shape_vec((n, dt), d.f64s(n * dt)?).map_err(|e| Error::Shape(e.to_string()))?;
        let labels = match d.u8()? {
            0 => None,
            _ => Some((0..n).map(|_| d.u8()).collect::<Result<Vec<u8>>>()?),
        };
        d.finish()?;
        Self::new(inputs, targets, kind, labels, normalization)
    }

    /// Header `x0..,y0..[,label]`, one sample per row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.input_dim()).map(|k| format!("x{k}")).collect();
        header.extend((0..self.target_dim()).map(|k| format!("y{k}")));
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self
                .inputs
                .row(i)
                .iter()
                .chain(self.targets.row(i).iter())
                .map(|v| format!("{v:?}"))
                .collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(text: &[u8], kind: DatasetKind) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text);
        let header = r.headers()?.clone();
        let din = header.iter().filter(|h| h.starts_with('x')).count();
        let dt = header.iter().filter(|h| h.starts_with('y')).count();
        let has_label = header.iter().any(|h| h == "label");
        if din + dt + usize::from(has_label) != header.len() || din == 0 || dt == 0 {
            return Err(Error::Config(format!("unrecognised dataset header {:?}", header)));
        }
        let (mut xs, mut ys, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
            };
            for k in 0..din {
                xs.push(parse(&rec[k])?);
            }
            for k in 0..dt {
                ys.push(parse(&rec[din + k])?);
            }
            if has_label {
                let s = &rec[din + dt];
                labels.push(s.trim().parse::<u8>().map_err(|e| Error::Config(format!("bad label {s:?}: {e}")))?);
            }
        }
        let n = xs.len() / din;
        let inputs = Array2::from_shape_vec((n, din), xs).map_err(|e| Error::Shape(e.to_string()))?;
        let targets = Array2::from_shape_vec((n, dt), ys).map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(inputs, targets, kind, has_label.then_some(labels), Normalization::None)
    }
}

pub fn save_dataset(path: impl AsRef<Path>, ds: &Dataset, format: DatasetFormat) -> Result<()> {
    match format {
        DatasetFormat::Binary => std::fs::write(path, ds.to_bytes())?,
        DatasetFormat::Csv => ds.write_csv(std::fs::File::create(path)?)?,
    }
    Ok(())
}

/// Reads either format; the binary container is recognised by its magic.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(DATASET_MAGIC) {
        Dataset::from_bytes(&bytes)
    } else {
        Dataset::read_csv(&bytes, DatasetKind::Other)
    }
}
