//! Supermartingale drift monitoring and exact small-instance oracles.
//!
//! With `Z_n = ||p_n - q_0||^2` the recursion obeys, whenever the map does
//! not expand distances to `q_0`,
//!
//! ```text
//! E[Z_{n+1} | F_n] <= Z_n + xi_n,      xi_n = (k_{n+1} - k_n) / k_{n+1}^2,
//! ```
//!
//! and `sum xi_n` is finite along any admissible growth schedule. The
//! functions here compute that conditional drift either exactly (enumerating
//! every multinomial batch outcome in rational arithmetic) or by Monte Carlo,
//! monitor whole trajectories against the bound, and produce the full exact
//! law of small urns as an oracle for the sampling engine.

use num::rational::BigRational;
use num::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::engine::{GrowthSchedule, Trajectory};
use crate::exact::{
    apply_rational, compositions, count_compositions, counts_to_rational,
    distribution_to_rational, multinomial_pmf, squared_distance, to_f64,
};
use crate::simplex::{dot, Distribution, SimplexMap};

/// Cap on enumerated batch outcomes for one exact drift evaluation.
pub const DEFAULT_DRIFT_OUTCOME_CAP: u64 = 100_000;
/// Cap on state expansions for [`exact_distribution`].
pub const DEFAULT_EXACT_DISTRIBUTION_CAP: u64 = 1_000_000;
/// Monitors evaluate exact drift on every step below this index by default.
pub const DEFAULT_EXACT_PREFIX: usize = 200;
/// Default Euclidean threshold for convergence verdicts.
pub const DEFAULT_CONVERGENCE_THRESHOLD: f64 = 0.02;
/// Default number of trailing snapshots a verdict inspects.
pub const DEFAULT_CONVERGENCE_WINDOW: usize = 10;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("{required} multinomial outcomes exceed cap {cap}")]
    TooManyOutcomes { required: u128, cap: u64 },
    #[error("next total {next} must exceed current total {current}")]
    BadNextTotal { next: u64, current: u64 },
    #[error("need at least {min} replicates, got {got}")]
    TooFewReplicates { got: u32, min: u32 },
}

/// One drift checkpoint.
///
/// `drift` is `E[Z_{n+1} | F_n] - Z_n`; the supermartingale bound holds when
/// `drift <= xi`. `zeta` is the implied decrease `max(0, xi - drift)`.
/// For exact records `violates_bound` is decided in rational arithmetic with
/// no tolerance; Monte Carlo records leave it `None` and carry a standard
/// error instead.
#[derive(Debug, Clone, Serialize)]
pub struct DriftRecord {
    pub step: usize,
    pub z: f64,
    pub xi: f64,
    pub drift: f64,
    pub std_error: Option<f64>,
    pub zeta: f64,
    pub exact: bool,
    pub violates_bound: Option<bool>,
}

/// Exact drift evaluation, all in rationals.
#[derive(Debug, Clone)]
pub struct ExactDrift {
    pub z: BigRational,
    pub expected_next_z: BigRational,
    pub xi: BigRational,
}

impl ExactDrift {
    pub fn drift(&self) -> BigRational {
        &self.expected_next_z - &self.z
    }

    pub fn violates_bound(&self) -> bool {
        self.drift() > self.xi
    }

    pub fn record(&self, step: usize) -> DriftRecord {
        let drift = self.drift();
        let zeta = (&self.xi - &drift).max(BigRational::zero());
        DriftRecord {
            step,
            z: to_f64(&self.z),
            xi: to_f64(&self.xi),
            drift: to_f64(&drift),
            std_error: None,
            zeta: to_f64(&zeta),
            exact: true,
            violates_bound: Some(self.violates_bound()),
        }
    }
}

/// Conditional drift by exhaustive enumeration of the multinomial batch.
///
/// Requires the number of outcomes `C(m + |G| - 1, |G| - 1)` to stay under
/// `outcome_cap`. The expectation is a finite rational sum; the returned
/// bound verdict involves no tolerance.
pub fn exact_conditional_drift(
    counts: &[u64],
    step: usize,
    map: &SimplexMap,
    next_total: u64,
    q0: &Distribution,
    outcome_cap: u64,
) -> Result<DriftRecord, DiagnosticsError> {
    Ok(exact_drift(counts, map, next_total, q0, outcome_cap)?.record(step))
}

/// Rational-valued version of [`exact_conditional_drift`].
pub fn exact_drift(
    counts: &[u64],
    map: &SimplexMap,
    next_total: u64,
    q0: &Distribution,
    outcome_cap: u64,
) -> Result<ExactDrift, DiagnosticsError> {
    let total: u64 = counts.iter().sum();
    if next_total <= total {
        return Err(DiagnosticsError::BadNextTotal {
            next: next_total,
            current: total,
        });
    }
    let m = next_total - total;
    let parts = counts.len();
    match count_compositions(m, parts) {
        Some(n) if n <= outcome_cap => {}
        other => {
            return Err(DiagnosticsError::TooManyOutcomes {
                required: other.map_or(u128::MAX, u128::from),
                cap: outcome_cap,
            })
        }
    }

    let q = distribution_to_rational(q0);
    let p = counts_to_rational(counts, total);
    let probs = apply_rational(map, &p);
    let z = squared_distance(&p, &q);

    let mut expected_next_z = BigRational::zero();
    let mut total_prob = BigRational::zero();
    for outcome in compositions(m, parts) {
        let pmf = multinomial_pmf(&outcome, &probs);
        if pmf.is_zero() {
            continue;
        }
        let next: Vec<BigRational> = counts
            .iter()
            .zip(&outcome)
            .map(|(&c, &x)| {
                BigRational::new((c + x).into(), next_total.into())
            })
            .collect();
        expected_next_z += &pmf * squared_distance(&next, &q);
        total_prob += pmf;
    }
    assert_eq!(total_prob, BigRational::from_integer(1.into()));

    let xi = BigRational::new(m.into(), (next_total as u128 * next_total as u128).into());
    Ok(ExactDrift {
        z,
        expected_next_z,
        xi,
    })
}

/// Conditional drift by Monte Carlo over `replicates` batches.
pub fn monte_carlo_drift(
    counts: &[u64],
    step: usize,
    map: &SimplexMap,
    next_total: u64,
    q0: &Distribution,
    replicates: u32,
    seed: u64,
) -> Result<DriftRecord, DiagnosticsError> {
    const MIN_REPLICATES: u32 = 100;
    if replicates < MIN_REPLICATES {
        return Err(DiagnosticsError::TooFewReplicates {
            got: replicates,
            min: MIN_REPLICATES,
        });
    }
    let total: u64 = counts.iter().sum();
    if next_total <= total {
        return Err(DiagnosticsError::BadNextTotal {
            next: next_total,
            current: total,
        });
    }
    let m = next_total - total;
    let p = Distribution::from_counts(counts.to_vec()).expect("urn is never empty");
    let probs = map.apply(&p);
    let z = p.squared_distance(q0);
    let xi = m as f64 / (next_total as f64 * next_total as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..replicates {
        let batch = crate::engine::draw_multinomial(&mut rng, probs.weights(), m);
        let next: Vec<u64> = counts.iter().zip(&batch).map(|(&c, &x)| c + x).collect();
        let z_next = Distribution::from_counts(next)
            .expect("batch keeps urn non-empty")
            .squared_distance(q0);
        sum += z_next;
        sum_sq += z_next * z_next;
    }
    let n = replicates as f64;
    let mean = sum / n;
    let var = (sum_sq - n * mean * mean).max(0.0) / (n - 1.0);
    let se = (var / n).sqrt();
    let drift = mean - z;
    Ok(DriftRecord {
        step,
        z,
        xi,
        drift,
        std_error: Some(se),
        zeta: (xi - drift).max(0.0),
        exact: false,
        violates_bound: None,
    })
}

#[derive(Debug, Clone)]
pub struct MonitorOptions {
    /// Exact drift is evaluated on every stride-1 snapshot pair whose step is
    /// below this index.
    pub exact_prefix: usize,
    /// After the prefix, exact drift is evaluated at power-of-two steps.
    pub outcome_cap: u64,
}

impl Default for MonitorOptions {
    fn default() -> Self {
        Self {
            exact_prefix: DEFAULT_EXACT_PREFIX,
            outcome_cap: DEFAULT_DRIFT_OUTCOME_CAP,
        }
    }
}

/// Trajectory-level drift report.
#[derive(Debug, Clone, Serialize)]
pub struct MonitorReport {
    /// Exact drift checkpoints (prefix window plus log-spaced later steps).
    pub records: Vec<DriftRecord>,
    /// `(n, Z_n)` for every snapshot.
    pub z_series: Vec<(usize, f64)>,
    /// Sum of `xi_n` over all adjacent snapshot pairs; finite-sum shadow of
    /// the integral bound on `sum (k_{n+1}-k_n)/k_{n+1}^2`.
    pub sum_xi: f64,
    /// Steps whose exactly-computed drift exceeded `Z_n + xi_n`.
    pub violation_steps: Vec<usize>,
}

/// Replays a trajectory against the supermartingale bound.
///
/// The map is taken as an argument because trajectories carry only a textual
/// descriptor of it. Adjacent snapshots (consecutive step indices, i.e.
/// recorded at stride 1) provide `k_{n+1}` and hence `xi_n`; exact drift is
/// enumerated where the outcome count permits. Sparse stretches contribute
/// to the `Z_n` series only.
pub fn robbins_siegmund_monitor(
    trajectory: &Trajectory,
    map: &SimplexMap,
    q0: &Distribution,
    options: &MonitorOptions,
) -> MonitorReport {
    let mut records = Vec::new();
    let mut z_series = Vec::new();
    let mut sum_xi = 0.0;
    let mut violation_steps = Vec::new();

    for snap in &trajectory.snapshots {
        z_series.push((snap.step, snap.p().squared_distance(q0)));
    }
    for pair in trajectory.snapshots.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.step != a.step + 1 {
            continue;
        }
        let m = b.total - a.total;
        sum_xi += m as f64 / (b.total as f64 * b.total as f64);
        let checkpoint = a.step < options.exact_prefix || a.step.is_power_of_two();
        if !checkpoint {
            continue;
        }
        // Infeasible enumerations are skipped; the sampler-based estimate is
        // a separate operation.
        if let Ok(record) =
            exact_conditional_drift(&a.counts, a.step, map, b.total, q0, options.outcome_cap)
        {
            if record.violates_bound == Some(true) {
                violation_steps.push(record.step);
            }
            records.push(record);
        }
    }

    MonitorReport {
        records,
        z_series,
        sum_xi,
        violation_steps,
    }
}

/// Finite-sample surrogate for almost-sure convergence.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceVerdict {
    pub target: Distribution,
    pub final_distance: f64,
    pub window_max_distance: f64,
    pub converged: bool,
    pub estimated_limit: Distribution,
    /// Total variation distance of the terminal state to the target,
    /// reported alongside the Euclidean numbers for interpretability.
    pub tv_distance: f64,
    pub window: usize,
}

/// Declares convergence when every one of the last `window` snapshots is
/// within `threshold` of the target in Euclidean distance. Uses all
/// snapshots if fewer than `window` exist.
pub fn convergence_verdict(
    trajectory: &Trajectory,
    target: &Distribution,
    threshold: f64,
    window: usize,
) -> ConvergenceVerdict {
    let snaps = &trajectory.snapshots;
    let window = window.max(1);
    let tail_start = snaps.len().saturating_sub(window);
    let tail = &snaps[tail_start..];

    let window_max_distance = tail
        .iter()
        .map(|s| s.p().euclidean_distance(target))
        .fold(0.0, f64::max);
    let final_p = trajectory.terminal_p();
    let dim = final_p.len();
    let mut mean = vec![0.0; dim];
    for snap in tail {
        for (acc, w) in mean.iter_mut().zip(snap.p().weights()) {
            *acc += w / tail.len() as f64;
        }
    }
    let correction = 1.0 - mean.iter().sum::<f64>();
    let argmax = (0..dim).max_by(|&a, &b| mean[a].total_cmp(&mean[b])).expect("non-empty");
    mean[argmax] += correction;
    let estimated_limit =
        Distribution::from_weights(mean).expect("snapshot average stays on the simplex");

    ConvergenceVerdict {
        final_distance: final_p.euclidean_distance(target),
        window_max_distance,
        converged: window_max_distance <= threshold,
        estimated_limit,
        tv_distance: final_p.tv_distance(target),
        target: target.clone(),
        window,
    }
}

/// Full exact law of the counts vector after `steps` steps.
///
/// Walks the multinomial outcome tree in rational arithmetic, merging states
/// with equal counts. The per-level expansion total is capped; probabilities
/// sum to one exactly by construction.
pub fn exact_distribution(
    initial_counts: &[u64],
    map: &SimplexMap,
    schedule: &GrowthSchedule,
    steps: usize,
    cap: u64,
) -> Result<Vec<(Vec<u64>, BigRational)>, DiagnosticsError> {
    let mut level: BTreeMap<Vec<u64>, BigRational> = BTreeMap::new();
    level.insert(
        initial_counts.to_vec(),
        BigRational::from_integer(1.into()),
    );
    let mut total: u64 = initial_counts.iter().sum();
    let mut expansions: u128 = 0;

    for n in 1..=steps {
        let Some(next_total) = schedule.next_total(total, n) else {
            break;
        };
        let m = next_total - total;
        let parts = initial_counts.len();
        let per_state = count_compositions(m, parts)
            .ok_or(DiagnosticsError::TooManyOutcomes { required: u128::MAX, cap })?;
        expansions += level.len() as u128 * per_state as u128;
        if expansions > cap as u128 {
            return Err(DiagnosticsError::TooManyOutcomes {
                required: expansions,
                cap,
            });
        }

        let mut next_level: BTreeMap<Vec<u64>, BigRational> = BTreeMap::new();
        let outcomes = compositions(m, parts);
        for (counts, prob) in &level {
            let p = counts_to_rational(counts, total);
            let probs = apply_rational(map, &p);
            for outcome in &outcomes {
                let pmf = multinomial_pmf(outcome, &probs);
                if pmf.is_zero() {
                    continue;
                }
                let child: Vec<u64> = counts.iter().zip(outcome).map(|(&c, &x)| c + x).collect();
                *next_level.entry(child).or_insert_with(BigRational::zero) += prob * pmf;
            }
        }
        level = next_level;
        total = next_total;
    }

    let sum: BigRational = level.values().sum();
    assert_eq!(sum, BigRational::from_integer(1.into()));
    Ok(level.into_iter().collect())
}

/// The case-(b) watch quantity `1 / <c_j, p_n>` along a trajectory, as a raw
/// plottable series (infinite when the boundary mass is zero).
pub fn boundary_mass_series(trajectory: &Trajectory, c: &[f64]) -> Vec<(usize, f64)> {
    trajectory
        .snapshots
        .iter()
        .map(|snap| {
            let mass = dot(c, snap.p().weights());
            (snap.step, if mass > 0.0 { 1.0 / mass } else { f64::INFINITY })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, RunConfig, StopRule};
    use crate::exact::ratio;
    use crate::group::FiniteGroup;
    use num::One;

    fn z2_map() -> SimplexMap {
        SimplexMap::convolution(FiniteGroup::cyclic(2).unwrap().into_arc())
    }

    fn z2_unit_config(initial: Vec<u64>, max_steps: usize, stride: usize) -> RunConfig {
        let k0 = initial.iter().sum();
        RunConfig {
            map: z2_map(),
            schedule: GrowthSchedule::unit(k0).unwrap(),
            initial_counts: initial,
            stop: StopRule::max_steps(max_steps),
            stride,
        }
    }

    #[test]
    fn drift_from_balanced_start_is_one_eighteenth() {
        // counts (1,1), one ball added: p_1 is (2/3,1/3) or (1/3,2/3), each
        // with probability 1/2, so E Z_1 = 2 * (1/6)^2 = 1/18 <= xi_0 = 1/9.
        let q0 = Distribution::uniform(2);
        let d = exact_drift(&[1, 1], &z2_map(), 3, &q0, 100).unwrap();
        assert_eq!(d.z, BigRational::zero());
        assert_eq!(d.expected_next_z, ratio(1, 18));
        assert_eq!(d.xi, ratio(1, 9));
        assert!(!d.violates_bound());

        let record = d.record(0);
        assert_eq!(record.violates_bound, Some(false));
        assert!(record.exact);
        assert!((record.drift - 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn absorbed_state_has_zero_drift() {
        // All mass on the identity: T(p) = p = q0, every batch lands there.
        let q0 = Distribution::point_mass(2, 0);
        let d = exact_drift(&[4, 0], &z2_map(), 6, &q0, 100).unwrap();
        assert_eq!(d.z, BigRational::zero());
        assert_eq!(d.expected_next_z, BigRational::zero());
    }

    #[test]
    fn exact_and_monte_carlo_drift_agree() {
        let q0 = Distribution::uniform(2);
        let exact = exact_drift(&[3, 1], &z2_map(), 6, &q0, 100).unwrap();
        let mc = monte_carlo_drift(&[3, 1], 0, &z2_map(), 6, &q0, 20_000, 71).unwrap();
        let se = mc.std_error.unwrap();
        assert!(se > 0.0);
        let exact_drift_f = to_f64(&exact.drift());
        assert!(
            (mc.drift - exact_drift_f).abs() <= 3.0 * se,
            "mc {} vs exact {} (se {})",
            mc.drift,
            exact_drift_f,
            se
        );
    }

    #[test]
    fn monte_carlo_standard_error_shrinks() {
        let q0 = Distribution::uniform(2);
        let small = monte_carlo_drift(&[3, 1], 0, &z2_map(), 6, &q0, 100, 5).unwrap();
        let large = monte_carlo_drift(&[3, 1], 0, &z2_map(), 6, &q0, 10_000, 5).unwrap();
        assert!(large.std_error.unwrap() < small.std_error.unwrap() / 3.0);
        assert!(matches!(
            monte_carlo_drift(&[3, 1], 0, &z2_map(), 6, &q0, 99, 5),
            Err(DiagnosticsError::TooFewReplicates { got: 99, min: 100 })
        ));
    }

    #[test]
    fn outcome_cap_is_enforced() {
        let q0 = Distribution::uniform(2);
        let err = exact_drift(&[1, 1], &z2_map(), 200_003, &q0, 100_000).unwrap_err();
        assert!(matches!(err, DiagnosticsError::TooManyOutcomes { .. }));
    }

    #[test]
    fn monitor_accepts_unit_trajectory_and_bounds_xi_sum() {
        let config = z2_unit_config(vec![1, 1], 10_000, 1);
        let traj = run(&config, 13).unwrap();
        let q0 = Distribution::uniform(2);
        let report = robbins_siegmund_monitor(&traj, &config.map, &q0, &MonitorOptions::default());
        assert!(report.violation_steps.is_empty());
        assert!(report.records.len() >= 200);
        assert!(report.records.iter().all(|r| r.exact));
        assert!(report.records.iter().all(|r| r.zeta >= 0.0));
        // sum over 1/k^2 from k = 3: pi^2/6 - 1 - 1/4 ~ 0.395, well under 0.65.
        assert!(report.sum_xi > 0.3 && report.sum_xi < 0.65, "{}", report.sum_xi);
        assert_eq!(report.z_series.len(), traj.snapshots.len());
    }

    #[test]
    fn monitor_handles_identity_map() {
        // T = identity: drift <= xi still holds (zeta may be zero).
        let config = RunConfig {
            map: SimplexMap::genotype(0.0, 0.0).unwrap(),
            schedule: GrowthSchedule::unit(4).unwrap(),
            initial_counts: vec![1, 3],
            stop: StopRule::max_steps(100),
            stride: 1,
        };
        let traj = run(&config, 3).unwrap();
        let q0 = Distribution::from_weights(vec![0.4, 0.6]).unwrap();
        let report = robbins_siegmund_monitor(&traj, &config.map, &q0, &MonitorOptions::default());
        assert!(report.violation_steps.is_empty());
        assert!(!report.records.is_empty());
    }

    #[test]
    fn monitor_skips_sparse_snapshots() {
        let config = z2_unit_config(vec![1, 1], 100, 10);
        let traj = run(&config, 13).unwrap();
        let q0 = Distribution::uniform(2);
        let report = robbins_siegmund_monitor(&traj, &config.map, &q0, &MonitorOptions::default());
        assert!(report.records.is_empty(), "no adjacent pairs at stride 10");
        assert_eq!(report.z_series.len(), traj.snapshots.len());
    }

    #[test]
    fn convergence_verdict_cases() {
        let config = z2_unit_config(vec![1, 1], 20_000, 100);
        let traj = run(&config, 21).unwrap();
        let uniform = Distribution::uniform(2);
        let verdict = convergence_verdict(&traj, &uniform, 0.02, 10);
        assert!(verdict.converged);
        assert!(verdict.window_max_distance <= 0.02);
        assert!(verdict.final_distance <= verdict.window_max_distance);

        // Absorbed trajectory never approaches the uniform target.
        let absorbed = run(&z2_unit_config(vec![5, 0], 1000, 100), 2).unwrap();
        let verdict = convergence_verdict(&absorbed, &uniform, 0.02, 10);
        assert!(!verdict.converged);
        let expected = Distribution::point_mass(2, 0).euclidean_distance(&uniform);
        assert!((verdict.final_distance - expected).abs() < 1e-15);
        assert!((verdict.tv_distance - 0.5).abs() < 1e-15);

        // Degenerate zero threshold: passes only if the window is constant.
        let target = absorbed.terminal_p();
        let strict = convergence_verdict(&absorbed, &target, 0.0, 5);
        assert!(strict.converged, "absorbed urn is exactly constant in p");
        let moving = convergence_verdict(&traj, &traj.terminal_p(), 0.0, 5);
        assert!(!moving.converged);
    }

    #[test]
    fn exact_distribution_zero_and_one_step() {
        let schedule = GrowthSchedule::unit(2).unwrap();
        let law0 = exact_distribution(&[1, 1], &z2_map(), &schedule, 0, 1000).unwrap();
        assert_eq!(law0, vec![(vec![1, 1], BigRational::one())]);

        let law1 = exact_distribution(&[1, 1], &z2_map(), &schedule, 1, 1000).unwrap();
        assert_eq!(
            law1,
            vec![
                (vec![1, 2], ratio(1, 2)),
                (vec![2, 1], ratio(1, 2)),
            ]
        );
    }

    #[test]
    fn exact_distribution_three_steps_hand_checked() {
        // Hand enumeration of the tree from (1,1):
        //   step 1: (2,1) 1/2, (1,2) 1/2
        //   step 2: (3,1) 5/18, (2,2) 1/2, (1,3) 2/9
        //   step 3: (4,1) 25/144, (3,2) 51/144, (2,3) 56/144, (1,4) 12/144
        let schedule = GrowthSchedule::unit(2).unwrap();
        let law = exact_distribution(&[1, 1], &z2_map(), &schedule, 3, 10_000).unwrap();
        let expected = vec![
            (vec![1, 4], ratio(12, 144)),
            (vec![2, 3], ratio(56, 144)),
            (vec![3, 2], ratio(51, 144)),
            (vec![4, 1], ratio(25, 144)),
        ];
        assert_eq!(law, expected);
    }

    #[test]
    fn exact_distribution_cap() {
        let schedule = GrowthSchedule::geometric(2, 3.0).unwrap();
        let err = exact_distribution(&[1, 1], &z2_map(), &schedule, 30, 1000).unwrap_err();
        assert!(matches!(err, DiagnosticsError::TooManyOutcomes { .. }));
    }

    #[test]
    fn boundary_series_tracks_escaping_mass() {
        let config = z2_unit_config(vec![5, 0], 10, 1);
        let traj = run(&config, 1).unwrap();
        let series = boundary_mass_series(&traj, &[0.0, 1.0]);
        assert!(series.iter().all(|&(_, v)| v.is_infinite()));
        let config = z2_unit_config(vec![1, 1], 10, 1);
        let traj = run(&config, 1).unwrap();
        let series = boundary_mass_series(&traj, &[0.0, 1.0]);
        assert!(series.iter().all(|&(_, v)| v.is_finite() && v >= 1.0));
    }
}
