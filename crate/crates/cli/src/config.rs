//! Experiment configuration: a single TOML file describing the map, the
//! initial urn, the growth schedule, stop rule, seeds, output layout, and
//! checker parameters. Every field has an explicit default; `print-defaults`
//! emits the fully populated form so experiments stay self-documenting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use urnsim::checks::{
    A1Options, A2Options, DEFAULT_A1_EXCLUSION_RADIUS, DEFAULT_A1_SAMPLES, DEFAULT_A2_MARGIN,
    DEFAULT_A2_RADII, DEFAULT_A2_SAMPLES_PER_RADIUS, DEFAULT_A3_HORIZON,
};
use urnsim::diagnostics::{DEFAULT_CONVERGENCE_THRESHOLD, DEFAULT_CONVERGENCE_WINDOW};
use urnsim::engine::{GrowthSchedule, RunConfig, StopRule};
use urnsim::group::FiniteGroup;
use urnsim::simplex::{Distribution, SimplexMap};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapSpec,
    pub initial: InitialSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub stop: StopSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub checkers: CheckerSpec,
    #[serde(default)]
    pub convergence: ConvergenceSpec,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        // The headline experiment: the urn on S3 seeded with one ball per
        // generator (a transposition and a 3-cycle, in one-line notation).
        let mut counts = BTreeMap::new();
        counts.insert("213".to_string(), 1);
        counts.insert("231".to_string(), 1);
        Self {
            map: MapSpec::Convolution {
                group: GroupSpec::Symmetric { n: 3 },
            },
            initial: InitialSpec::Counts {
                counts: CountsSpec::ByLabel(counts),
            },
            schedule: ScheduleSpec::Unit,
            stop: StopSpec::default(),
            seeds: default_seeds(),
            output: OutputSpec::default(),
            checkers: CheckerSpec::default(),
            convergence: ConvergenceSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Convolution { group: GroupSpec },
    Parity { k: u32 },
    Genotype { s: f64, t: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupSpec {
    Cyclic { n: usize },
    Dihedral { n: usize },
    Symmetric { n: usize },
    DirectProduct { a: Box<GroupSpec>, b: Box<GroupSpec> },
    CayleyFile { path: String },
}

impl GroupSpec {
    pub fn build(&self) -> Result<FiniteGroup, ConfigError> {
        let invalid = |e: urnsim::group::GroupError| ConfigError::Invalid(e.to_string());
        match self {
            Self::Cyclic { n } => FiniteGroup::cyclic(*n).map_err(invalid),
            Self::Dihedral { n } => FiniteGroup::dihedral(*n).map_err(invalid),
            Self::Symmetric { n } => FiniteGroup::symmetric(*n).map_err(invalid),
            Self::DirectProduct { a, b } => {
                FiniteGroup::direct_product(&a.build()?, &b.build()?).map_err(invalid)
            }
            Self::CayleyFile { path } => FiniteGroup::from_cayley_file(path).map_err(invalid),
        }
    }
}

/// Initial urn contents: explicit counts, or a target distribution rounded
/// onto `k0` balls by largest remainder.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged, deny_unknown_fields)]
pub enum InitialSpec {
    Counts { counts: CountsSpec },
    Weighted { p0: Vec<f64>, k0: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CountsSpec {
    List(Vec<u64>),
    ByLabel(BTreeMap<String, u64>),
}

impl InitialSpec {
    pub fn resolve(&self, labels: &[String]) -> Result<Vec<u64>, ConfigError> {
        match self {
            Self::Counts {
                counts: CountsSpec::List(list),
            } => {
                if list.len() != labels.len() {
                    return Err(ConfigError::Invalid(format!(
                        "initial counts list has {} entries for {} states",
                        list.len(),
                        labels.len()
                    )));
                }
                Ok(list.clone())
            }
            Self::Counts {
                counts: CountsSpec::ByLabel(by_label),
            } => {
                let mut counts = vec![0u64; labels.len()];
                for (label, &count) in by_label {
                    let index = labels.iter().position(|l| l == label).ok_or_else(|| {
                        ConfigError::Invalid(format!("unknown state label {label:?}"))
                    })?;
                    counts[index] = count;
                }
                Ok(counts)
            }
            Self::Weighted { p0, k0 } => {
                if p0.len() != labels.len() {
                    return Err(ConfigError::Invalid(format!(
                        "p0 has {} entries for {} states",
                        p0.len(),
                        labels.len()
                    )));
                }
                if *k0 == 0 {
                    return Err(ConfigError::Invalid("k0 must be positive".into()));
                }
                let sum: f64 = p0.iter().sum();
                if p0.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(ConfigError::Invalid(
                        "p0 must be non-negative and sum to 1".into(),
                    ));
                }
                Ok(round_largest_remainder(p0, *k0))
            }
        }
    }
}

/// Largest-remainder rounding of `p0 * k0` onto integers summing to `k0`;
/// ties break toward lower indices, deterministically.
fn round_largest_remainder(p0: &[f64], k0: u64) -> Vec<u64> {
    let targets: Vec<f64> = p0.iter().map(|&w| w * k0 as f64).collect();
    let mut counts: Vec<u64> = targets.iter().map(|&t| t.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..p0.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = targets[a] - targets[a].floor();
        let fb = targets[b] - targets[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for i in 0..(k0 - assigned) as usize {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Unit,
    Geometric { ratio: f64 },
    Explicit { totals: Vec<u64> },
}

impl ScheduleSpec {
    pub fn build(&self, k0: u64) -> Result<GrowthSchedule, ConfigError> {
        let invalid = |e: urnsim::engine::EngineError| ConfigError::Invalid(e.to_string());
        match self {
            Self::Unit => GrowthSchedule::unit(k0).map_err(invalid),
            Self::Geometric { ratio } => GrowthSchedule::geometric(k0, *ratio).map_err(invalid),
            Self::Explicit { totals } => {
                if totals.first() != Some(&k0) {
                    return Err(ConfigError::Invalid(format!(
                        "explicit schedule starts at {:?} but the initial urn holds {k0}",
                        totals.first()
                    )));
                }
                GrowthSchedule::explicit(totals.clone()).map_err(invalid)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    pub max_steps: Option<usize>,
    pub max_total: Option<u64>,
}

impl Default for StopSpec {
    fn default() -> Self {
        Self {
            max_steps: Some(10_000),
            max_total: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_stride() -> usize {
    100
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CheckerSpec {
    #[serde(default = "d_a1_samples")]
    pub a1_samples: usize,
    #[serde(default = "d_a1_radius")]
    pub a1_exclusion_radius: f64,
    #[serde(default = "d_a2_radii")]
    pub a2_radii: Vec<f64>,
    #[serde(default = "d_a2_samples")]
    pub a2_samples_per_radius: usize,
    #[serde(default = "d_a2_margin")]
    pub a2_margin: f64,
    #[serde(default = "d_a3_horizon")]
    pub a3_horizon: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
}

fn d_a1_samples() -> usize {
    DEFAULT_A1_SAMPLES
}
fn d_a1_radius() -> f64 {
    DEFAULT_A1_EXCLUSION_RADIUS
}
fn d_a2_radii() -> Vec<f64> {
    DEFAULT_A2_RADII.to_vec()
}
fn d_a2_samples() -> usize {
    DEFAULT_A2_SAMPLES_PER_RADIUS
}
fn d_a2_margin() -> f64 {
    DEFAULT_A2_MARGIN
}
fn d_a3_horizon() -> usize {
    DEFAULT_A3_HORIZON
}
fn d_seed() -> u64 {
    1
}

impl Default for CheckerSpec {
    fn default() -> Self {
        Self {
            a1_samples: d_a1_samples(),
            a1_exclusion_radius: d_a1_radius(),
            a2_radii: d_a2_radii(),
            a2_samples_per_radius: d_a2_samples(),
            a2_margin: d_a2_margin(),
            a3_horizon: d_a3_horizon(),
            seed: d_seed(),
        }
    }
}

impl CheckerSpec {
    pub fn a1_options(&self) -> A1Options {
        A1Options {
            samples: self.a1_samples,
            exclusion_radius: self.a1_exclusion_radius,
            seed: self.seed,
        }
    }

    pub fn a2_options(&self) -> A2Options {
        A2Options {
            radii: self.a2_radii.clone(),
            samples_per_radius: self.a2_samples_per_radius,
            margin: self.a2_margin,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    #[serde(default = "d_window")]
    pub window: usize,
}

fn d_threshold() -> f64 {
    DEFAULT_CONVERGENCE_THRESHOLD
}
fn d_window() -> usize {
    DEFAULT_CONVERGENCE_WINDOW
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self {
            threshold: d_threshold(),
            window: d_window(),
        }
    }
}

/// Everything resolved and validated, ready to run.
#[derive(Debug)]
pub struct ResolvedExperiment {
    pub map: SimplexMap,
    pub labels: Vec<String>,
    pub initial_counts: Vec<u64>,
    pub p0: Distribution,
    pub schedule: GrowthSchedule,
    pub run_config: RunConfig,
    pub seeds: Vec<u64>,
    pub digest: String,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn build_map(&self) -> Result<SimplexMap, ConfigError> {
        let invalid = |e: urnsim::simplex::SimplexError| ConfigError::Invalid(e.to_string());
        match &self.map {
            MapSpec::Convolution { group } => {
                Ok(SimplexMap::convolution(Arc::new(group.build()?)))
            }
            MapSpec::Parity { k } => SimplexMap::parity(*k).map_err(invalid),
            MapSpec::Genotype { s, t } => SimplexMap::genotype(*s, *t).map_err(invalid),
        }
    }

    /// Validates every field and assembles the runnable experiment.
    pub fn resolve(&self) -> Result<ResolvedExperiment, ConfigError> {
        let map = self.build_map()?;
        let labels = map.labels();
        let initial_counts = self.initial.resolve(&labels)?;
        let k0: u64 = initial_counts.iter().sum();
        if k0 == 0 {
            return Err(ConfigError::Invalid("initial urn is empty".into()));
        }
        let p0 = Distribution::from_counts(initial_counts.clone())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let schedule = self.schedule.build(k0)?;
        if self.output.stride == 0 {
            return Err(ConfigError::Invalid("snapshot stride must be >= 1".into()));
        }
        if self.stop.max_steps.is_none() && self.stop.max_total.is_none() {
            return Err(ConfigError::Invalid(
                "stop rule needs max_steps or max_total".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("seed list is empty".into()));
        }
        let run_config = RunConfig {
            map: map.clone(),
            schedule: schedule.clone(),
            initial_counts: initial_counts.clone(),
            stop: StopRule {
                max_steps: self.stop.max_steps,
                max_total: self.stop.max_total,
            },
            stride: self.output.stride,
        };
        run_config
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(ResolvedExperiment {
            digest: self.digest(),
            map,
            labels,
            initial_counts,
            p0,
            schedule,
            run_config,
            seeds: self.seeds.clone(),
        })
    }

    /// Digest of the experiment definition (map, initial urn, schedule, stop
    /// rule, stride). Output paths and seeds are deliberately excluded: the
    /// same experiment written elsewhere, or one seed from a larger sweep,
    /// produces identical per-seed files.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct DigestView<'a> {
            map: &'a MapSpec,
            initial: &'a InitialSpec,
            schedule: &'a ScheduleSpec,
            stop: &'a StopSpec,
            stride: usize,
        }
        let view = DigestView {
            map: &self.map,
            initial: &self.initial,
            schedule: &self.schedule,
            stop: &self.stop,
            stride: self.output.stride,
        };
        let canonical = toml::to_string(&view).expect("digest view serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in hash.iter().take(8) {
            let _ = write!(hex, "{byte:02x}");
        }
        hex
    }
}
