//! Time grids and the active/inactive index filtrations that turn a plain
//! residual network into an encoder, an autoencoder or a U-net-like schedule.
//!
//! All schedules use the overwrite layout: the state vector has one slot per
//! input component and decoder phases re-use slots that the encoder froze.
//! A re-used slot is zeroed when its decoder phase starts, which is exactly
//! the zero initial value of the corresponding shadow component in the
//! doubled `(z, z^H)` model. The doubled model is kept per interval as
//! `primal_active` / `shadow_active` so its identities can be validated.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// Sorted set of state-component indices.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn range(range: Range<usize>) -> Self {
        Self(range.collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// Position of `index` inside the set, if present.
    pub fn position(&self, index: usize) -> Option<usize> {
        self.0.binary_search(&index).ok()
    }

    pub fn max(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// Contiguous range covered by the set, when it has no holes.
    pub fn as_range(&self) -> Option<Range<usize>> {
        match (self.0.first(), self.0.last()) {
            (Some(&lo), Some(&hi)) if hi - lo + 1 == self.0.len() => Some(lo..hi + 1),
            (None, None) => Some(0..0),
            _ => None,
        }
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        self.iter().chain(other.iter()).collect()
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        self.iter().filter(|&i| other.contains(i)).collect()
    }

    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        self.iter().filter(|&i| !other.contains(i)).collect()
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    /// `{0..dim} \ self`
    pub fn complement(&self, dim: usize) -> IndexSet {
        (0..dim).filter(|&i| !self.contains(i)).collect()
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut v: Vec<usize> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

impl From<Vec<usize>> for IndexSet {
    fn from(v: Vec<usize>) -> Self {
        v.into_iter().collect()
    }
}

impl<const N: usize> From<[usize; N]> for IndexSet {
    fn from(v: [usize; N]) -> Self {
        v.into_iter().collect()
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.as_range() {
            Some(r) if self.len() > 4 => write!(f, "{{{}..{}}}", r.start, r.end),
            _ => f.debug_set().entries(self.0.iter()).finish(),
        }
    }
}

/// Uniform time grid `t_j = j * dt`, `j = 0..=n_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    /// Grid on `[0, horizon]`; `horizon / dt` must be an integer up to 1e-12 relative.
    pub fn new(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive and finite, got {dt}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Config(format!(
                "horizon must be positive and finite, got {horizon}"
            )));
        }
        let n = (horizon / dt).round();
        if n < 1.0 || (n * dt - horizon).abs() > 1e-12 * horizon {
            return Err(Error::GridMismatch(format!(
                "horizon {horizon} is not an integer multiple of dt {dt}"
            )));
        }
        Ok(Self {
            horizon,
            dt,
            n_steps: n as usize,
        })
    }

    pub fn from_steps(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive and finite, got {dt}")));
        }
        if n_steps == 0 {
            return Err(Error::GridMismatch("grid needs at least one step".into()));
        }
        Ok(Self {
            horizon: dt * n_steps as f64,
            dt,
            n_steps,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn time(&self, node: usize) -> f64 {
        node as f64 * self.dt
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleKind {
    Plain,
    Encoder,
    Autoencoder,
    UNet,
}

impl ScheduleKind {
    pub fn tag(self) -> u8 {
        match self {
            ScheduleKind::Plain => 0,
            ScheduleKind::Encoder => 1,
            ScheduleKind::Autoencoder => 2,
            ScheduleKind::UNet => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => ScheduleKind::Plain,
            1 => ScheduleKind::Encoder,
            2 => ScheduleKind::Autoencoder,
            3 => ScheduleKind::UNet,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Encode,
    Bottleneck,
    Decode,
}

impl Phase {
    pub fn tag(self) -> u8 {
        match self {
            Phase::Encode => 0,
            Phase::Bottleneck => 1,
            Phase::Decode => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => Phase::Encode,
            1 => Phase::Bottleneck,
            2 => Phase::Decode,
            _ => return None,
        })
    }
}

/// Steps `start..end` of the grid share one active set.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
    pub phase: Phase,
    pub active: IndexSet,
    pub inactive: IndexSet,
    /// Slots zeroed on entry to the interval (fresh shadow components).
    pub reset: IndexSet,
    /// Active slots that belong to the shadow half of the doubled model.
    pub shadow_active: IndexSet,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Active components of the primal half of the doubled model.
    pub fn primal_active(&self) -> IndexSet {
        self.active.difference(&self.shadow_active)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSchedule {
    kind: ScheduleKind,
    dim: usize,
    n_steps: usize,
    intervals: Vec<Interval>,
    output: IndexSet,
}

/// Interval description used by the builders and the checkpoint reader.
#[derive(Clone, Debug)]
pub struct IntervalSpec {
    pub len: usize,
    pub phase: Phase,
    pub active: IndexSet,
    pub reset: IndexSet,
    pub shadow_active: IndexSet,
}

impl LayerSchedule {
    /// Assemble and validate a schedule from consecutive interval specs.
    pub fn from_parts(
        kind: ScheduleKind,
        dim: usize,
        specs: Vec<IntervalSpec>,
        output: IndexSet,
    ) -> Result<Self> {
        let mut start = 0;
        let mut intervals = Vec::with_capacity(specs.len());
        for spec in specs {
            let inactive = spec.active.complement(dim);
            intervals.push(Interval {
                start,
                end: start + spec.len,
                phase: spec.phase,
                active: spec.active,
                inactive,
                reset: spec.reset,
                shadow_active: spec.shadow_active,
            });
            start += spec.len;
        }
        let schedule = Self {
            kind,
            dim,
            n_steps: start,
            intervals,
            output,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    /// Ambient state dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Components the terminal loss acts on.
    pub fn output_set(&self) -> &IndexSet {
        &self.output
    }

    pub fn interval_at(&self, node: usize) -> Result<&Interval> {
        if node >= self.n_steps {
            return Err(Error::Index {
                index: node,
                n_steps: self.n_steps,
            });
        }
        let pos = self.intervals.partition_point(|iv| iv.end <= node);
        Ok(&self.intervals[pos])
    }

    /// Active set of the step leaving node `node`.
    pub fn active_at(&self, node: usize) -> Result<&IndexSet> {
        self.interval_at(node).map(|iv| &iv.active)
    }

    /// Slots zeroed before the step leaving `node`; empty except at interval starts.
    pub fn reset_at(&self, node: usize) -> Result<Option<&IndexSet>> {
        let iv = self.interval_at(node)?;
        Ok((iv.start == node && !iv.reset.is_empty()).then_some(&iv.reset))
    }

    /// Node at which the bottleneck representation is complete: the start of
    /// the first decoding interval, or the final node when nothing decodes.
    pub fn bottleneck_node(&self) -> usize {
        self.intervals
            .iter()
            .find(|iv| iv.phase == Phase::Decode)
            .map(|iv| iv.start)
            .unwrap_or(self.n_steps)
    }

    /// Per-node active sizes, `n_steps` entries.
    pub fn active_sizes(&self) -> Vec<usize> {
        self.intervals
            .iter()
            .flat_map(|iv| std::iter::repeat_n(iv.active.len(), iv.len()))
            .collect()
    }

    /// The same schedule with component `k` renamed to `perm[k]`. Choosing
    /// which coordinates survive the bottleneck is a relabelling of the
    /// prefix layout built below.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.dim];
        if perm.len() != self.dim || perm.iter().any(|&k| k >= self.dim || std::mem::replace(&mut seen[k], true)) {
            return Err(Error::InvalidSchedule(format!(
                "relabelling must be a permutation of 0..{}",
                self.dim
            )));
        }
        let map = |set: &IndexSet| -> IndexSet { set.iter().map(|k| perm[k]).collect() };
        let specs = self
            .intervals
            .iter()
            .map(|iv| IntervalSpec {
                len: iv.len(),
                phase: iv.phase,
                active: map(&iv.active),
                reset: map(&iv.reset),
                shadow_active: map(&iv.shadow_active),
            })
            .collect();
        Self::from_parts(self.kind, self.dim, specs, map(&self.output))
    }

    /// Check every structural invariant for the schedule's kind.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        if self.dim == 0 {
            return bad("ambient dimension must be positive".into());
        }
        if self.intervals.is_empty() {
            return bad("schedule has no intervals".into());
        }
        let mut expected_start = 0;
        for (j, iv) in self.intervals.iter().enumerate() {
            if iv.start != expected_start || iv.end <= iv.start {
                return bad(format!("interval {j} does not tile the grid"));
            }
            expected_start = iv.end;
            let cover = iv.active.union(&iv.inactive);
            if cover != IndexSet::range(0..self.dim)
                || !iv.active.intersection(&iv.inactive).is_empty()
            {
                return bad(format!("interval {j} is not a partition of 0..{}", self.dim));
            }
            if iv.active.is_empty() {
                return bad(format!("interval {j} has no active components"));
            }
            if !iv.reset.is_subset(&iv.active) || !iv.shadow_active.is_subset(&iv.active) {
                return bad(format!("interval {j}: reset/shadow slots must be active"));
            }
        }
        if expected_start != self.n_steps {
            return bad("intervals do not end at n_steps".into());
        }
        if self.output.is_empty() || self.output.max().unwrap_or(0) >= self.dim {
            return bad("output set must be a nonempty subset of the state".into());
        }
        match self.kind {
            ScheduleKind::Plain => {
                if self.intervals.len() != 1 || self.intervals[0].active.len() != self.dim {
                    return bad("plain schedule must keep every component active".into());
                }
            }
            ScheduleKind::Encoder => self.validate_encoder()?,
            ScheduleKind::Autoencoder => self.validate_autoencoder()?,
            ScheduleKind::UNet => {}
        }
        Ok(())
    }

    fn validate_encoder(&self) -> Result<()> {
        for (j, pair) in self.intervals.windows(2).enumerate() {
            if !pair[0].inactive.is_subset(&pair[1].inactive) || pair[0].inactive == pair[1].inactive
            {
                return Err(Error::InvalidSchedule(format!(
                    "encoder filtration not strictly increasing at interval {}",
                    j + 1
                )));
            }
        }
        if !self.intervals[0].inactive.is_empty() {
            return Err(Error::InvalidSchedule(
                "encoder must start with every component active".into(),
            ));
        }
        Ok(())
    }

    /// Identities of the doubled `(z, z^H)` model, checked on the stored view.
    fn validate_autoencoder(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        let full = IndexSet::range(0..self.dim);
        let primal: Vec<IndexSet> = self.intervals.iter().map(Interval::primal_active).collect();
        let shadow: Vec<&IndexSet> = self.intervals.iter().map(|iv| &iv.shadow_active).collect();
        if primal[0] != full || !shadow[0].is_empty() {
            return bad("autoencoder must start with the full primal state active".into());
        }
        let bottleneck = primal
            .iter()
            .min_by_key(|a| a.len())
            .expect("nonempty schedule");
        let mut decoding = false;
        for j in 0..self.intervals.len() {
            let iv = &self.intervals[j];
            if !primal[j].intersection(shadow[j]).is_empty() {
                return bad(format!("A_j and A^H_j overlap at interval {j}"));
            }
            if !bottleneck.is_subset(&primal[j]) {
                return bad(format!("bottleneck set not contained in A_j at interval {j}"));
            }
            let primal_inactive = primal[j].complement(self.dim);
            if !shadow[j].is_subset(&primal_inactive) {
                return bad(format!("shadow actives must be primal-inactive at interval {j}"));
            }
            if j > 0 {
                let (prev_p, prev_s) = (&primal[j - 1], shadow[j - 1]);
                if !primal[j].is_subset(prev_p) {
                    return bad(format!("primal active sets must not grow (interval {j})"));
                }
                if !prev_s.is_subset(shadow[j]) {
                    return bad(format!("shadow active sets must not shrink (interval {j})"));
                }
                if shadow[j].len() > prev_s.len() {
                    decoding = true;
                    if primal[j] != *prev_p {
                        return bad(format!("primal set changes during decoding (interval {j})"));
                    }
                } else if decoding && primal[j] != *prev_p {
                    return bad(format!("encoder phase after decoder (interval {j})"));
                }
                let fresh = shadow[j].difference(prev_s);
                if iv.reset != fresh {
                    return bad(format!("reset slots must equal fresh shadow slots (interval {j})"));
                }
            } else if !iv.reset.is_empty() {
                return bad("first interval cannot reset slots".into());
            }
        }
        let last = self.intervals.len() - 1;
        if primal[last].union(shadow[last]) != full {
            return bad("final active sets do not cover the state".into());
        }
        if *shadow[last] != primal[last].complement(self.dim) {
            return bad("final shadow actives differ from final primal inactives".into());
        }
        if self.output != full {
            return bad("autoencoder output must be the full state".into());
        }
        Ok(())
    }
}

fn check_layer_total(phases: &[(usize, usize)], grid: &TimeGrid) -> Result<()> {
    let total: usize = phases.iter().map(|&(_, n)| n).sum();
    if total != grid.n_steps() {
        return Err(Error::GridMismatch(format!(
            "phases use {total} layers but the grid has {} steps",
            grid.n_steps()
        )));
    }
    Ok(())
}

fn check_phases(phases: &[(usize, usize)], what: &str) -> Result<()> {
    if phases.iter().any(|&(w, n)| w == 0 || n == 0) {
        return Err(Error::InvalidSchedule(format!(
            "{what} phases need positive width and layer count"
        )));
    }
    Ok(())
}

/// Constant-width network over the whole grid.
pub fn build_plain_schedule(dim: usize, grid: &TimeGrid) -> Result<LayerSchedule> {
    LayerSchedule::from_parts(
        ScheduleKind::Plain,
        dim,
        vec![IntervalSpec {
            len: grid.n_steps(),
            phase: Phase::Encode,
            active: IndexSet::range(0..dim),
            reset: IndexSet::new(),
            shadow_active: IndexSet::new(),
        }],
        IndexSet::range(0..dim),
    )
}

/// Encoder: each phase keeps the first `width` components active.
pub fn build_encoder_schedule(phases: &[(usize, usize)], grid: &TimeGrid) -> Result<LayerSchedule> {
    if phases.is_empty() {
        return Err(Error::InvalidSchedule("encoder needs at least one phase".into()));
    }
    check_phases(phases, "encoder")?;
    if phases.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::InvalidSchedule(
            "encoder widths must be strictly decreasing".into(),
        ));
    }
    check_layer_total(phases, grid)?;
    let dim = phases[0].0;
    if phases.len() == 1 {
        return build_plain_schedule(dim, grid);
    }
    let specs = phases
        .iter()
        .map(|&(width, len)| IntervalSpec {
            len,
            phase: Phase::Encode,
            active: IndexSet::range(0..width),
            reset: IndexSet::new(),
            shadow_active: IndexSet::new(),
        })
        .collect();
    let output = IndexSet::range(0..phases.last().unwrap().0);
    LayerSchedule::from_parts(ScheduleKind::Encoder, dim, specs, output)
}

/// Autoencoder in the overwrite layout.
///
/// Encoder widths decrease strictly from the input dimension; the last
/// encoder width is the latent width and is held for `bottleneck_layers`
/// extra steps; decoder widths increase strictly back to the input dimension.
pub fn build_autoencoder_schedule(
    encoder: &[(usize, usize)],
    bottleneck_layers: usize,
    decoder: &[(usize, usize)],
    grid: &TimeGrid,
) -> Result<LayerSchedule> {
    if encoder.is_empty() {
        return Err(Error::InvalidSchedule("autoencoder needs an encoder".into()));
    }
    check_phases(encoder, "encoder")?;
    check_phases(decoder, "decoder")?;
    if encoder.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::InvalidSchedule(
            "encoder widths must be strictly decreasing".into(),
        ));
    }
    let dim = encoder[0].0;
    let latent = encoder.last().unwrap().0;
    let total = encoder.iter().chain(decoder).map(|&(_, n)| n).sum::<usize>() + bottleneck_layers;
    if total != grid.n_steps() {
        return Err(Error::GridMismatch(format!(
            "phases use {total} layers but the grid has {} steps",
            grid.n_steps()
        )));
    }
    if decoder.is_empty() {
        if encoder.len() == 1 {
            return build_plain_schedule(dim, grid);
        }
        return Err(Error::InvalidSchedule(
            "final active sets must cover the input: decoder missing".into(),
        ));
    }
    if decoder[0].0 <= latent || decoder.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidSchedule(
            "decoder widths must increase strictly from the latent width".into(),
        ));
    }
    if decoder.last().unwrap().0 != dim {
        return Err(Error::InvalidSchedule(format!(
            "decoder must restore the input width {dim}, ends at {}",
            decoder.last().unwrap().0
        )));
    }

    let mut specs = Vec::new();
    for (k, &(width, len)) in encoder.iter().enumerate() {
        let is_last = k + 1 == encoder.len();
        specs.push(IntervalSpec {
            len,
            phase: if is_last && bottleneck_layers == 0 {
                Phase::Bottleneck
            } else {
                Phase::Encode
            },
            active: IndexSet::range(0..width),
            reset: IndexSet::new(),
            shadow_active: IndexSet::new(),
        });
    }
    if bottleneck_layers > 0 {
        specs.push(IntervalSpec {
            len: bottleneck_layers,
            phase: Phase::Bottleneck,
            active: IndexSet::range(0..latent),
            reset: IndexSet::new(),
            shadow_active: IndexSet::new(),
        });
    }
    let mut restored = latent;
    for &(width, len) in decoder {
        specs.push(IntervalSpec {
            len,
            phase: Phase::Decode,
            active: IndexSet::range(0..width),
            reset: IndexSet::range(restored..width),
            shadow_active: IndexSet::range(latent..width),
        });
        restored = width;
    }
    LayerSchedule::from_parts(ScheduleKind::Autoencoder, dim, specs, IndexSet::range(0..dim))
}

/// U-net-style schedule for a symmetric width profile `d_0, .., d_r, .., d_0`.
///
/// The state holds one block per level, `B_0 | B_1 | .. | B_r`, with the input
/// in `B_0` and the other blocks starting at zero. Contracting phase `i < r`
/// activates `B_i ∪ B_{i+1}`, the bottleneck activates `B_r` alone, and the
/// expansive phase `2r - i` re-activates the twin block `B_i` together with
/// `B_{i+1}`. Blocks left inactive carry their contracting-phase values
/// forward, which is the long skip connection. Layers are split as evenly as
/// possible, earlier phases taking the remainder.
pub fn build_unet_schedule(widths: &[usize], grid: &TimeGrid) -> Result<LayerSchedule> {
    if widths.is_empty() || widths.len() % 2 == 0 {
        return Err(Error::InvalidSchedule(
            "U-net width profile must have odd length 2r+1".into(),
        ));
    }
    if widths.contains(&0) {
        return Err(Error::InvalidSchedule("U-net widths must be positive".into()));
    }
    let n_phases = widths.len();
    if (0..n_phases).any(|i| widths[i] != widths[n_phases - 1 - i]) {
        return Err(Error::InvalidSchedule("U-net width profile must be symmetric".into()));
    }
    if grid.n_steps() < n_phases {
        return Err(Error::GridMismatch(format!(
            "{n_phases} phases need at least as many steps, grid has {}",
            grid.n_steps()
        )));
    }
    if n_phases == 1 {
        return build_plain_schedule(widths[0], grid);
    }
    let r = n_phases / 2;
    let mut offsets = vec![0usize; r + 2];
    for i in 0..=r {
        offsets[i + 1] = offsets[i] + widths[i];
    }
    let dim = offsets[r + 1];
    let block = |i: usize| IndexSet::range(offsets[i]..offsets[i + 1]);
    let base = grid.n_steps() / n_phases;
    let extra = grid.n_steps() % n_phases;
    let specs = (0..n_phases)
        .map(|p| {
            let (active, phase) = if p == r {
                (block(r), Phase::Bottleneck)
            } else {
                let level = p.min(2 * r - p);
                let phase = if p < r { Phase::Encode } else { Phase::Decode };
                (block(level).union(&block(level + 1)), phase)
            };
            IntervalSpec {
                len: base + usize::from(p < extra),
                phase,
                active,
                reset: IndexSet::new(),
                shadow_active: IndexSet::new(),
            }
        })
        .collect();
    LayerSchedule::from_parts(ScheduleKind::UNet, dim, specs, block(0))
}
