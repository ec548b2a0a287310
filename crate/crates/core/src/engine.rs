//! The urn recursion: integer ball counts, growth schedules, and reproducible
//! trajectories.
//!
//! With `k_n` balls in the urn and empirical distribution `p_n`, a step draws
//! `k_{n+1} - k_n` new labels from `Multinomial(T(p_n), k_{n+1} - k_n)` and
//! adds them, so that
//!
//! ```text
//! p_{n+1} = (k_n p_n + sum X_i) / k_{n+1}
//! ```
//!
//! holds exactly as an identity on integer counts. State stores counts, never
//! floating frequencies; `p_n` is derived on demand.
//!
//! Reproducibility contract: one trajectory is a pure function of (config,
//! seed). The generator is ChaCha8 seeded per trajectory and every ball is
//! drawn by CDF inversion of a single `f64` in `[0, 1)`, in label-index
//! order; both facts are recorded in exported trajectory headers. Generator
//! and sampling order are platform-independent, so trajectories are
//! bit-identical across builds of this crate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::simplex::{Distribution, SimplexMap};

/// Identifier of the trajectory RNG, recorded in exports.
pub const RNG_NAME: &str = "chacha8";
/// Identifier of the batch sampling scheme, recorded in exports.
pub const SAMPLER_NAME: &str = "categorical-cdf";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("growth schedule needs k0 >= 1")]
    ZeroInitialPopulation,
    #[error("geometric schedule needs a finite ratio > 1, got {0}")]
    InvalidRatio(f64),
    #[error("schedule is not strictly increasing at step {step}: {prev} -> {next}")]
    NonIncreasingSchedule { step: usize, prev: u64, next: u64 },
    #[error("initial counts are empty or sum to zero")]
    EmptyUrn,
    #[error("initial counts have {counts} entries but the map has {map} states")]
    DimensionMismatch { counts: usize, map: usize },
    #[error("schedule starts at k0={schedule} but initial counts sum to {counts}")]
    InitialPopulationMismatch { schedule: u64, counts: u64 },
    #[error("snapshot stride must be >= 1")]
    ZeroStride,
    #[error("stop rule needs max_steps or max_total")]
    NoStopRule,
    #[error("seed list is empty")]
    EmptySeedList,
    #[error("trajectory file: {0}")]
    MalformedTrajectory(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the total ball count `k_n` grows. All kinds honor `k_{n+1} >= k_n + 1`;
/// geometric growth uses `k_{n+1} = max(k_n + 1, ceil(ratio * k_n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSchedule {
    kind: ScheduleKind,
    k0: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    Unit,
    Geometric { ratio: f64 },
    /// Caller-supplied totals `k_0, k_1, ...`, e.g. an externally simulated
    /// birth process. The engine itself only generates deterministic
    /// schedules, so the batch law is always conditioned on a known `k_{n+1}`.
    Explicit { totals: Vec<u64> },
}

impl GrowthSchedule {
    pub fn unit(k0: u64) -> Result<Self, EngineError> {
        if k0 == 0 {
            return Err(EngineError::ZeroInitialPopulation);
        }
        Ok(Self {
            kind: ScheduleKind::Unit,
            k0,
        })
    }

    pub fn geometric(k0: u64, ratio: f64) -> Result<Self, EngineError> {
        if k0 == 0 {
            return Err(EngineError::ZeroInitialPopulation);
        }
        if !ratio.is_finite() || ratio <= 1.0 {
            return Err(EngineError::InvalidRatio(ratio));
        }
        Ok(Self {
            kind: ScheduleKind::Geometric { ratio },
            k0,
        })
    }

    pub fn explicit(totals: Vec<u64>) -> Result<Self, EngineError> {
        let Some(&k0) = totals.first() else {
            return Err(EngineError::ZeroInitialPopulation);
        };
        if k0 == 0 {
            return Err(EngineError::ZeroInitialPopulation);
        }
        for (step, pair) in totals.windows(2).enumerate() {
            if pair[1] < pair[0] + 1 {
                return Err(EngineError::NonIncreasingSchedule {
                    step,
                    prev: pair[0],
                    next: pair[1],
                });
            }
        }
        Ok(Self {
            kind: ScheduleKind::Explicit { totals },
            k0,
        })
    }

    pub fn k0(&self) -> u64 {
        self.k0
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    /// Total after the next step, or `None` when an explicit schedule is
    /// exhausted (or a geometric one has outgrown u64, which means the run
    /// left any practical regime long ago). `next_index` is the index of the
    /// total being asked for, i.e. `state.step + 1`.
    pub fn next_total(&self, current: u64, next_index: usize) -> Option<u64> {
        match &self.kind {
            ScheduleKind::Unit => current.checked_add(1),
            ScheduleKind::Geometric { ratio } => {
                let scaled = (ratio * current as f64).ceil();
                if !(scaled < u64::MAX as f64) {
                    return None;
                }
                Some((scaled as u64).max(current.checked_add(1)?))
            }
            ScheduleKind::Explicit { totals } => totals.get(next_index).copied(),
        }
    }

    /// Materializes `k_0 ..= k_horizon` (shorter if an explicit list runs out).
    pub fn totals(&self, horizon: usize) -> Vec<u64> {
        let mut out = Vec::with_capacity(horizon + 1);
        out.push(self.k0);
        for n in 1..=horizon {
            match self.next_total(*out.last().expect("non-empty"), n) {
                Some(k) => out.push(k),
                None => break,
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            ScheduleKind::Unit => format!("unit(k0={})", self.k0),
            ScheduleKind::Geometric { ratio } => {
                format!("geometric(k0={},ratio={})", self.k0, ratio)
            }
            ScheduleKind::Explicit { totals } => {
                format!("explicit(k0={},len={})", self.k0, totals.len())
            }
        }
    }
}

/// Live simulation state: integer counts per label, total, step index, and
/// the trajectory's own RNG.
#[derive(Debug, Clone)]
pub struct UrnState {
    counts: Vec<u64>,
    total: u64,
    step: usize,
    rng: ChaCha8Rng,
}

impl UrnState {
    pub fn new(counts: Vec<u64>, seed: u64) -> Result<Self, EngineError> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() || total == 0 {
            return Err(EngineError::EmptyUrn);
        }
        Ok(Self {
            counts,
            total,
            step: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Empirical distribution `p_n = counts / total`.
    pub fn p(&self) -> Distribution {
        Distribution::from_counts(self.counts.clone()).expect("urn is never empty")
    }

    /// Draws a batch of `m >= 1` labels from `Multinomial(T(p_n), m)` without
    /// adding them. One uniform f64 per ball, CDF inversion in index order.
    pub fn sample_batch(&mut self, map: &SimplexMap, m: u64) -> Vec<u64> {
        assert!(m >= 1, "batch size must be at least 1");
        let probs = map.apply(&self.p());
        draw_multinomial(&mut self.rng, probs.weights(), m)
    }

    /// Advances one step of the recursion using `schedule` for `k_{n+1}`.
    /// Returns `false` without changing state if the schedule is exhausted.
    pub fn step(&mut self, map: &SimplexMap, schedule: &GrowthSchedule) -> bool {
        match schedule.next_total(self.total, self.step + 1) {
            Some(next_total) => {
                self.advance_to(map, next_total);
                true
            }
            None => false,
        }
    }

    fn advance_to(&mut self, map: &SimplexMap, next_total: u64) {
        debug_assert!(next_total >= self.total + 1);
        let batch = self.sample_batch(map, next_total - self.total);
        for (count, drawn) in self.counts.iter_mut().zip(&batch) {
            *count += drawn;
        }
        self.total = next_total;
        self.step += 1;
        debug_assert_eq!(self.counts.iter().sum::<u64>(), self.total);
    }
}

pub(crate) fn draw_multinomial<R: Rng>(rng: &mut R, probs: &[f64], m: u64) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..m {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = probs.len() - 1;
        for (i, &w) in probs.iter().enumerate() {
            acc += w;
            if u < acc {
                chosen = i;
                break;
            }
        }
        counts[chosen] += 1;
    }
    counts
}

/// One recorded state of a trajectory.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub total: u64,
    pub counts: Vec<u64>,
}

impl Snapshot {
    pub fn p(&self) -> Distribution {
        Distribution::from_counts(self.counts.clone()).expect("snapshot is never empty")
    }
}

/// A completed run: configuration descriptors plus snapshots at the stride
/// and the terminal state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub map_desc: String,
    pub schedule_desc: String,
    pub labels: Vec<String>,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn terminal(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectories are non-empty")
    }

    pub fn terminal_p(&self) -> Distribution {
        self.terminal().p()
    }

    pub fn steps(&self) -> usize {
        self.terminal().step
    }
}

/// Stop when either bound is reached, whichever first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopRule {
    pub max_steps: Option<usize>,
    pub max_total: Option<u64>,
}

impl StopRule {
    pub fn max_steps(n: usize) -> Self {
        Self {
            max_steps: Some(n),
            ..Self::default()
        }
    }

    pub fn max_total(k: u64) -> Self {
        Self {
            max_total: Some(k),
            ..Self::default()
        }
    }

    fn reached(&self, step: usize, total: u64) -> bool {
        self.max_steps.is_some_and(|n| step >= n) || self.max_total.is_some_and(|k| total >= k)
    }
}

/// Everything a single run needs besides the seed.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub map: SimplexMap,
    pub schedule: GrowthSchedule,
    pub initial_counts: Vec<u64>,
    pub stop: StopRule,
    pub stride: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.initial_counts.len() != self.map.dimension() {
            return Err(EngineError::DimensionMismatch {
                counts: self.initial_counts.len(),
                map: self.map.dimension(),
            });
        }
        let sum: u64 = self.initial_counts.iter().sum();
        if sum == 0 {
            return Err(EngineError::EmptyUrn);
        }
        if sum != self.schedule.k0() {
            return Err(EngineError::InitialPopulationMismatch {
                schedule: self.schedule.k0(),
                counts: sum,
            });
        }
        if self.stride == 0 {
            return Err(EngineError::ZeroStride);
        }
        if self.stop.max_steps.is_none() && self.stop.max_total.is_none() {
            return Err(EngineError::NoStopRule);
        }
        Ok(())
    }
}

/// Runs one seeded trajectory. Bit-identical output for identical
/// (config, seed).
pub fn run(config: &RunConfig, seed: u64) -> Result<Trajectory, EngineError> {
    config.validate()?;
    let mut state = UrnState::new(config.initial_counts.clone(), seed)?;
    let mut snapshots = vec![Snapshot {
        step: 0,
        total: state.total(),
        counts: state.counts().to_vec(),
    }];
    while !config.stop.reached(state.step_index(), state.total()) {
        if !state.step(&config.map, &config.schedule) {
            break; // explicit schedule exhausted
        }
        if state.step_index() % config.stride == 0 {
            snapshots.push(Snapshot {
                step: state.step_index(),
                total: state.total(),
                counts: state.counts().to_vec(),
            });
        }
    }
    if snapshots.last().map(|s| s.step) != Some(state.step_index()) {
        snapshots.push(Snapshot {
            step: state.step_index(),
            total: state.total(),
            counts: state.counts().to_vec(),
        });
    }
    Ok(Trajectory {
        seed,
        map_desc: config.map.describe(),
        schedule_desc: config.schedule.describe(),
        labels: config.map.labels(),
        snapshots,
    })
}

/// Runs one trajectory per seed, in parallel. Each trajectory owns its RNG,
/// so results are identical whether a seed runs alone or in a sweep.
pub fn run_sweep(config: &RunConfig, seeds: &[u64]) -> Result<Vec<Trajectory>, EngineError> {
    if seeds.is_empty() {
        return Err(EngineError::EmptySeedList);
    }
    config.validate()?;
    seeds
        .par_iter()
        .map(|&seed| run(config, seed))
        .collect()
}
