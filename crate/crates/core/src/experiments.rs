//! Counting experiments: two analyzers in sequence (law of Malus) and two
//! analyzers receiving the photons of a pair (coincidence counting).
//!
//! Runs are cut into `(angle, block)` work units of [`BLOCK_SIZE`] photons or
//! pairs. Each unit owns its source and analyzer streams, so the merged
//! counts are identical for any thread count or schedule.

use rayon::prelude::*;
use serde::Serialize;

use crate::analyzer::{transit, Analyzer, Criterion, SamplingDistribution};
use crate::error::{Error, Result};
use crate::rng::{RandomStream, StreamLabel, Wing};
use crate::sources::{emit_pair, emit_photon, PairSourceSpec, SingleSourceSpec};
use crate::stokes::Channel;

pub const BLOCK_SIZE: u64 = 4096;

/// Relative analyzer angles in degrees, strictly increasing in `[0, 360)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleGrid(Vec<f64>);

impl AngleGrid {
    pub fn new(angles_deg: Vec<f64>) -> Result<Self> {
        if angles_deg.is_empty() {
            return Err(Error::invalid(
                "angle grid",
                "must contain at least one angle",
            ));
        }
        if let Some(bad) = angles_deg
            .iter()
            .find(|a| !(a.is_finite() && (0.0..360.0).contains(*a)))
        {
            return Err(Error::invalid(
                "angle grid",
                format!("angles must lie in [0, 360) degrees, got {bad}"),
            ));
        }
        if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "angle grid",
                "angles must be strictly increasing",
            ));
        }
        if angles_deg.len() > u32::MAX as usize {
            return Err(Error::invalid("angle grid", "too many angles"));
        }
        Ok(AngleGrid(angles_deg))
    }

    /// `start, start + step, ...` up to and including `stop`.
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
            return Err(Error::invalid(
                "angle range",
                "start, stop and step must be finite",
            ));
        }
        if step <= 0.0 {
            return Err(Error::invalid(
                "angle range",
                format!("step must be > 0, got {step}"),
            ));
        }
        if stop < start {
            return Err(Error::invalid("angle range", "stop must be >= start"));
        }
        let span = (stop - start) / step;
        let count = (span + 1e-9).floor() as usize + 1;
        Self::new((0..count).map(|i| start + i as f64 * step).collect())
    }

    pub fn angles(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for AngleGrid {
    /// 0 to 90 degrees in 5 degree steps.
    fn default() -> Self {
        AngleGrid((0..=18).map(|i| 5.0 * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MalusConfig {
    pub grid: AngleGrid,
    pub photons_per_angle: u64,
    pub master_seed: u64,
    pub distribution: SamplingDistribution,
    pub criterion: Criterion,
}

impl MalusConfig {
    pub fn new(grid: AngleGrid, photons_per_angle: u64, master_seed: u64) -> Self {
        MalusConfig {
            grid,
            photons_per_angle,
            master_seed,
            distribution: SamplingDistribution::ArccosUniform,
            criterion: Criterion::Deterministic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.photons_per_angle == 0 {
            return Err(Error::invalid("photons_per_angle", "must be >= 1"));
        }
        self.distribution.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoincidenceConfig {
    pub grid: AngleGrid,
    pub pairs_per_angle: u64,
    pub master_seed: u64,
    pub distribution: SamplingDistribution,
    pub criterion: Criterion,
    pub coupled: bool,
}

impl CoincidenceConfig {
    pub fn new(grid: AngleGrid, pairs_per_angle: u64, master_seed: u64) -> Self {
        CoincidenceConfig {
            grid,
            pairs_per_angle,
            master_seed,
            distribution: SamplingDistribution::ArccosUniform,
            criterion: Criterion::Deterministic,
            coupled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pairs_per_angle == 0 {
            return Err(Error::invalid("pairs_per_angle", "must be >= 1"));
        }
        self.distribution.validate()
    }
}

/// Coincidence accumulators `N++, N+-, N-+, N--`; the first sign belongs to
/// analyzer (or stage) one.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CountTable {
    pub n_pp: u64,
    pub n_pm: u64,
    pub n_mp: u64,
    pub n_mm: u64,
}

impl CountTable {
    pub fn new(n_pp: u64, n_pm: u64, n_mp: u64, n_mm: u64) -> Self {
        CountTable {
            n_pp,
            n_pm,
            n_mp,
            n_mm,
        }
    }

    #[inline]
    pub fn record(&mut self, first: Channel, second: Channel) {
        match (first, second) {
            (Channel::Plus, Channel::Plus) => self.n_pp += 1,
            (Channel::Plus, Channel::Minus) => self.n_pm += 1,
            (Channel::Minus, Channel::Plus) => self.n_mp += 1,
            (Channel::Minus, Channel::Minus) => self.n_mm += 1,
        }
    }

    pub fn merge(&mut self, other: &CountTable) {
        self.n_pp += other.n_pp;
        self.n_pm += other.n_pm;
        self.n_mp += other.n_mp;
        self.n_mm += other.n_mm;
    }

    pub fn total(&self) -> u64 {
        self.n_pp + self.n_pm + self.n_mp + self.n_mm
    }

    pub fn concordant(&self) -> u64 {
        self.n_pp + self.n_mm
    }

    pub fn gamma(&self) -> Result<f64> {
        gamma(self)
    }

    pub fn normalized_pp(&self) -> Result<f64> {
        normalized_pp(self)
    }
}

/// `(N++ + N-- - N+- - N-+) / N`
pub fn gamma(counts: &CountTable) -> Result<f64> {
    let n = counts.total();
    if n == 0 {
        return Err(Error::EmptyCounts);
    }
    let concordant = counts.concordant() as f64;
    let discordant = (counts.n_pm + counts.n_mp) as f64;
    Ok((concordant - discordant) / n as f64)
}

/// `2 N++ / N`
pub fn normalized_pp(counts: &CountTable) -> Result<f64> {
    let n = counts.total();
    if n == 0 {
        return Err(Error::EmptyCounts);
    }
    Ok(2.0 * counts.n_pp as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceCurves {
    /// `N_half cos^2(theta)`
    pub malus_plus: f64,
    /// `N_half sin^2(theta)`
    pub malus_minus: f64,
    /// `cos(2 theta)`
    pub gamma_qm: f64,
}

pub fn reference_curves(theta_deg: f64, n_half: f64) -> ReferenceCurves {
    let t = theta_deg.to_radians();
    let (s, c) = t.sin_cos();
    ReferenceCurves {
        malus_plus: n_half * c * c,
        malus_minus: n_half * s * s,
        gamma_qm: (2.0 * t).cos(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResultRow {
    pub theta_deg: f64,
    pub counts: CountTable,
    pub gamma: f64,
    pub normalized_pp: f64,
    /// Reference curves with `N_half` = half the photons (pairs) at this angle.
    pub reference: ReferenceCurves,
    /// `cos^2(theta)`, the reference for `normalized_pp`.
    pub normalized_pp_ref: f64,
    /// `sqrt((1 - gamma^2) / N)`
    pub gamma_sigma: f64,
    /// `2 sqrt(p (1 - p) / N)` with `p = N++/N`
    pub normalized_pp_sigma: f64,
}

impl ResultRow {
    pub fn from_counts(theta_deg: f64, counts: CountTable) -> Result<Self> {
        let n = counts.total() as f64;
        let g = gamma(&counts)?;
        let npp = normalized_pp(&counts)?;
        let p = counts.n_pp as f64 / n;
        Ok(ResultRow {
            theta_deg,
            counts,
            gamma: g,
            normalized_pp: npp,
            reference: reference_curves(theta_deg, 0.5 * n),
            normalized_pp_ref: theta_deg.to_radians().cos().powi(2),
            gamma_sigma: ((1.0 - g * g).max(0.0) / n).sqrt(),
            normalized_pp_sigma: 2.0 * (p * (1.0 - p) / n).sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct WorkUnit {
    angle_index: u32,
    block_index: u32,
    len: u64,
}

fn work_units(angle_count: usize, per_angle: u64) -> Vec<WorkUnit> {
    let blocks = per_angle.div_ceil(BLOCK_SIZE);
    (0..angle_count as u32)
        .flat_map(|angle_index| {
            (0..blocks).map(move |b| WorkUnit {
                angle_index,
                block_index: b as u32,
                len: BLOCK_SIZE.min(per_angle - b * BLOCK_SIZE),
            })
        })
        .collect()
}

struct Streams {
    source: RandomStream,
    first: RandomStream,
    second: RandomStream,
}

impl Streams {
    fn for_unit(seed: u64, unit: &WorkUnit) -> Self {
        let label = |wing| StreamLabel::new(unit.angle_index, unit.block_index, wing);
        Streams {
            source: RandomStream::new(seed, label(Wing::Source)),
            first: RandomStream::new(seed, label(Wing::Analyzer1)),
            second: RandomStream::new(seed, label(Wing::Analyzer2)),
        }
    }
}

/// Runs `per_unit` over every work unit in parallel and merges the tables
/// per angle index.
fn accumulate<F>(
    seed: u64,
    angle_count: usize,
    per_angle: u64,
    per_unit: F,
) -> Result<Vec<CountTable>>
where
    F: Fn(&WorkUnit, &mut Streams) -> Result<CountTable> + Sync,
{
    let partials = work_units(angle_count, per_angle)
        .into_par_iter()
        .map(|unit| {
            let mut streams = Streams::for_unit(seed, &unit);
            per_unit(&unit, &mut streams).map(|t| (unit.angle_index as usize, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tables = vec![CountTable::default(); angle_count];
    for (i, t) in &partials {
        tables[*i].merge(t);
    }
    Ok(tables)
}

fn malus_block(
    first: &Analyzer,
    second: &Analyzer,
    len: u64,
    streams: &mut Streams,
) -> Result<CountTable> {
    let source = SingleSourceSpec::default();
    let q = second.frame_offset(first);
    let mut table = CountTable::default();
    for _ in 0..len {
        let photon = emit_photon(&source, &mut streams.source);
        let stage1 = transit(first, &photon, 0.0, &mut streams.first)?;
        let stage2 = transit(second, &stage1.post_state, q, &mut streams.second)?;
        table.record(stage1.channel, stage2.channel);
    }
    Ok(table)
}

fn pair_block(
    first: &Analyzer,
    second: &Analyzer,
    source: &PairSourceSpec,
    len: u64,
    streams: &mut Streams,
) -> Result<CountTable> {
    let q = second.frame_offset(first);
    let mut table = CountTable::default();
    for _ in 0..len {
        let (photon1, photon2) = emit_pair(source, &mut streams.source);
        let wing1 = transit(first, &photon1, 0.0, &mut streams.first)?;
        let wing2 = transit(second, &photon2, q, &mut streams.second)?;
        table.record(wing1.channel, wing2.channel);
    }
    Ok(table)
}

fn analyzers(
    distribution: SamplingDistribution,
    criterion: Criterion,
    relative_deg: &[f64],
) -> Result<(Analyzer, Vec<Analyzer>)> {
    let first = Analyzer::new(distribution, criterion)?;
    let seconds = relative_deg
        .iter()
        .map(|deg| first.with_orientation(deg.to_radians()))
        .collect::<Result<Vec<_>>>()?;
    Ok((first, seconds))
}

/// Two analyzers in sequence, one photon at a time. Every photon leaving the
/// first analyzer (either channel) enters the second, which is rotated by
/// `theta` and evaluated in the first analyzer's frame.
pub fn run_malus(config: &MalusConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let angles = config.grid.angles();
    let (first, seconds) = analyzers(config.distribution, config.criterion, angles)?;
    let tables = accumulate(
        config.master_seed,
        angles.len(),
        config.photons_per_angle,
        |unit, streams| {
            malus_block(
                &first,
                &seconds[unit.angle_index as usize],
                unit.len,
                streams,
            )
        },
    )?;
    angles
        .iter()
        .zip(tables)
        .map(|(&theta, t)| ResultRow::from_counts(theta, t))
        .collect()
}

/// Two-wing coincidence counting, one pair at a time. Wing one's analyzer
/// defines the frame; wing two's analyzer is rotated by `theta`. The two
/// analyzers draw from independent streams.
pub fn run_coincidence(config: &CoincidenceConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let tables = coincidence_tables(config, config.grid.angles())?;
    config
        .grid
        .angles()
        .iter()
        .zip(tables)
        .map(|(&theta, t)| ResultRow::from_counts(theta, t))
        .collect()
}

fn coincidence_tables(config: &CoincidenceConfig, relative_deg: &[f64]) -> Result<Vec<CountTable>> {
    let source = PairSourceSpec::new(config.coupled, 1.0)?;
    let (first, seconds) = analyzers(config.distribution, config.criterion, relative_deg)?;
    accumulate(
        config.master_seed,
        relative_deg.len(),
        config.pairs_per_angle,
        |unit, streams| {
            pair_block(
                &first,
                &seconds[unit.angle_index as usize],
                &source,
                unit.len,
                streams,
            )
        },
    )
}

/// Analyzer orientations in degrees: `a1, a2` on wing one, `b1, b2` on wing two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshSettings {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl ChshSettings {
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<Self> {
        if ![a1, a2, b1, b2].iter().all(|a| a.is_finite()) {
            return Err(Error::invalid(
                "chsh angles",
                "all four angles must be finite",
            ));
        }
        Ok(ChshSettings { a1, a2, b1, b2 })
    }

    /// The standard optimal set (0, 45, 22.5, 67.5) degrees.
    pub fn standard() -> Self {
        ChshSettings {
            a1: 0.0,
            a2: 45.0,
            b1: 22.5,
            b2: 67.5,
        }
    }

    /// `(a, b)` in the order `(a1,b1), (a1,b2), (a2,b1), (a2,b2)`.
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.a1, self.b1),
            (self.a1, self.b2),
            (self.a2, self.b1),
            (self.a2, self.b2),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshTerm {
    pub a_deg: f64,
    pub b_deg: f64,
    pub relative_deg: f64,
    pub counts: CountTable,
    pub correlation: f64,
    pub correlation_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChshResult {
    pub settings: ChshSettings,
    pub terms: [ChshTerm; 4],
    pub s_value: f64,
    pub s_sigma: f64,
}

impl ChshResult {
    pub fn exceeds_bell_limit(&self) -> bool {
        self.s_value > 2.0
    }

    /// `(S - 2) / sigma_S`
    pub fn bell_significance(&self) -> f64 {
        if self.s_sigma > 0.0 {
            (self.s_value - 2.0) / self.s_sigma
        } else if self.s_value > 2.0 {
            f64::INFINITY
        } else if self.s_value < 2.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    }
}

/// `S = |E(a1,b1) - E(a1,b2)| + |E(a2,b1) + E(a2,b2)|`, each correlation
/// measured with `pairs_per_angle` pairs at relative angle `|a - b|`. The
/// grid of `config` is not used.
pub fn chsh_s(config: &CoincidenceConfig, settings: &ChshSettings) -> Result<ChshResult> {
    config.validate()?;
    let pairs = settings.pairs();
    let relative: Vec<f64> = pairs.iter().map(|(a, b)| (a - b).abs()).collect();
    let tables = coincidence_tables(config, &relative)?;
    let mut terms = Vec::with_capacity(4);
    for (((a, b), rel), counts) in pairs.iter().zip(&relative).zip(tables) {
        let e = gamma(&counts)?;
        terms.push(ChshTerm {
            a_deg: *a,
            b_deg: *b,
            relative_deg: *rel,
            counts,
            correlation: e,
            correlation_sigma: ((1.0 - e * e).max(0.0) / counts.total() as f64).sqrt(),
        });
    }
    let terms: [ChshTerm; 4] = terms.try_into().expect("four CHSH terms");
    let e = |i: usize| terms[i].correlation;
    let s_value = (e(0) - e(1)).abs() + (e(2) + e(3)).abs();
    let s_sigma = terms
        .iter()
        .map(|t| t.correlation_sigma * t.correlation_sigma)
        .sum::<f64>()
        .sqrt();
    Ok(ChshResult {
        settings: *settings,
        terms,
        s_value,
        s_sigma,
    })
}
