//! Sampling-based checkers for the three convergence conditions.
//!
//! * A1 (contraction): `||T(p) - q0|| < ||p - q0||` away from the fixed
//!   points. Checked on Dirichlet(1,..,1) samples of the simplex with a
//!   small exclusion ball around each fixed point; the worst observed ratio
//!   and its witness are reported.
//! * A2 (boundary repulsion): near each boundary fixed point `q_j` the
//!   escaping mass grows, `<c_j, T(p)> / <c_j, p> > 1` in the liminf. Checked
//!   on shrinking radii with a configurable margin; requires
//!   `<c_j, p0> > 0`.
//! * A3 (growth rate): `max k_{n+1}/k_n - 1` must stay below the minimal
//!   distance between fixed points.
//!
//! These are numeric probes with witnesses, not proofs: the point is to
//! extend the per-example analysis to arbitrary user-supplied Cayley tables
//! where no closed form is available. All distances are Euclidean.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::engine::GrowthSchedule;
use crate::simplex::{dot, Distribution, FixedPointSet, ParamMap, SimplexMap};

/// Default sample count for the A1 probe.
pub const DEFAULT_A1_SAMPLES: usize = 10_000;
/// Default Euclidean exclusion radius around fixed points for A1.
pub const DEFAULT_A1_EXCLUSION_RADIUS: f64 = 1e-3;
/// Default probe radii for A2, decreasing.
pub const DEFAULT_A2_RADII: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
/// Default sample count per A2 radius.
pub const DEFAULT_A2_SAMPLES_PER_RADIUS: usize = 2_000;
/// Default margin by which A2 ratio minima must exceed one.
pub const DEFAULT_A2_MARGIN: f64 = 1e-3;
/// Default schedule horizon materialized by the A3 check.
pub const DEFAULT_A3_HORIZON: usize = 1_000;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("fixed point set has no attracting point and no unique interior candidate")]
    NoAttractingPoint,
    #[error("all {samples} samples fell inside the exclusion radius")]
    AllSamplesExcluded { samples: usize },
    #[error("initial distribution puts zero mass outside fixed point {point}'s support")]
    InitialMassZero { point: usize },
}

/// Outcome of one condition check, serializable as structured text.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub condition: String,
    pub pass: bool,
    pub worst_value: f64,
    pub witness_point: Option<Vec<f64>>,
    pub parameters: ParamMap,
}

#[derive(Debug, Clone)]
pub struct A1Options {
    pub samples: usize,
    pub exclusion_radius: f64,
    pub seed: u64,
}

impl Default for A1Options {
    fn default() -> Self {
        Self {
            samples: DEFAULT_A1_SAMPLES,
            exclusion_radius: DEFAULT_A1_EXCLUSION_RADIUS,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct A2Options {
    pub radii: Vec<f64>,
    pub samples_per_radius: usize,
    pub margin: f64,
    pub seed: u64,
}

impl Default for A2Options {
    fn default() -> Self {
        Self {
            radii: DEFAULT_A2_RADII.to_vec(),
            samples_per_radius: DEFAULT_A2_SAMPLES_PER_RADIUS,
            margin: DEFAULT_A2_MARGIN,
            seed: 1,
        }
    }
}

fn dirichlet_uniform<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    // Normalized unit exponentials sample the simplex uniformly.
    let mut raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        raw = vec![1.0; n];
        let sum = n as f64;
        for x in &mut raw {
            *x /= sum;
        }
        return raw;
    }
    for x in &mut raw {
        *x /= sum;
    }
    raw
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Checks the contraction condition A1 by sampling.
///
/// The center `q0` is the designated attracting point when present,
/// otherwise the unique full-support fixed point (identity-like maps then
/// report a worst ratio of one and fail). Pass requires the worst ratio
/// `||T(p) - q0|| / ||p - q0||` over retained samples to stay strictly
/// below one.
pub fn check_a1(
    map: &SimplexMap,
    fps: &FixedPointSet,
    options: &A1Options,
) -> Result<ConditionReport, CheckError> {
    let center_index = fps
        .contraction_candidate()
        .ok_or(CheckError::NoAttractingPoint)?;
    let q0 = &fps.points[center_index];
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut used = 0usize;
    for _ in 0..options.samples {
        let raw = dirichlet_uniform(&mut rng, map.dimension());
        let excluded = fps
            .points
            .iter()
            .any(|q| euclidean(&raw, q.weights()) < options.exclusion_radius);
        if excluded {
            continue;
        }
        let p = match Distribution::from_weights(raw.clone()) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let denominator = p.euclidean_distance(q0);
        let ratio = map.apply(&p).euclidean_distance(q0) / denominator;
        if ratio > worst {
            worst = ratio;
            witness = Some(raw);
        }
        used += 1;
    }
    if used == 0 {
        return Err(CheckError::AllSamplesExcluded {
            samples: options.samples,
        });
    }

    let mut parameters = ParamMap::new();
    parameters.insert("samples".into(), options.samples.to_string());
    parameters.insert("samples_used".into(), used.to_string());
    parameters.insert(
        "exclusion_radius".into(),
        format!("{:e}", options.exclusion_radius),
    );
    parameters.insert("seed".into(), options.seed.to_string());
    parameters.insert("q0_index".into(), center_index.to_string());
    Ok(ConditionReport {
        condition: "A1".into(),
        pass: worst < 1.0,
        worst_value: worst,
        witness_point: witness,
        parameters,
    })
}

/// Checks the boundary repulsion condition A2 by sampling at shrinking radii.
///
/// For each boundary fixed point `q_j` (every fixed point with proper support
/// other than the A1 center): requires `<c_j, p0> > 0`, then samples points
/// within each radius of `q_j` and records the minimum of
/// `<c_j, T(p)> / <c_j, p>`. Pass requires every per-radius minimum to stay
/// at or above `1 + margin`. Vacuously passes when no boundary point exists.
pub fn check_a2(
    map: &SimplexMap,
    fps: &FixedPointSet,
    p0: &Distribution,
    options: &A2Options,
) -> Result<ConditionReport, CheckError> {
    let boundary = fps.boundary_points();
    let mut parameters = ParamMap::new();
    parameters.insert(
        "radii".into(),
        options
            .radii
            .iter()
            .map(|r| format!("{r:e}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    parameters.insert(
        "samples_per_radius".into(),
        options.samples_per_radius.to_string(),
    );
    parameters.insert("margin".into(), format!("{:e}", options.margin));
    parameters.insert("seed".into(), options.seed.to_string());

    if boundary.is_empty() {
        parameters.insert("note".into(), "vacuous: no boundary fixed points".into());
        return Ok(ConditionReport {
            condition: "A2".into(),
            pass: true,
            worst_value: f64::INFINITY,
            witness_point: None,
            parameters,
        });
    }
    for (j, _, c) in &boundary {
        if dot(c, p0.weights()) <= 0.0 {
            return Err(CheckError::InitialMassZero { point: *j });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut pass = true;
    for (j, q, c) in &boundary {
        for &radius in &options.radii {
            let mut minimum = f64::INFINITY;
            for _ in 0..options.samples_per_radius {
                let direction = dirichlet_uniform(&mut rng, map.dimension());
                let gap = euclidean(&direction, q.weights());
                if gap == 0.0 {
                    continue;
                }
                let u = 1.0 - rng.gen::<f64>(); // in (0, 1]
                let lambda = (radius * u / gap).min(1.0);
                let raw: Vec<f64> = q
                    .weights()
                    .iter()
                    .zip(&direction)
                    .map(|(&qi, &di)| qi + lambda * (di - qi))
                    .collect();
                let mass = dot(c, &raw);
                if mass <= 0.0 {
                    continue;
                }
                let p = match Distribution::from_weights(raw.clone()) {
                    Ok(p) => p,
                    Err(_) => continue,
                };
                let ratio = dot(c, map.apply(&p).weights()) / mass;
                if ratio < minimum {
                    minimum = ratio;
                    if ratio < worst {
                        worst = ratio;
                        witness = Some(raw);
                    }
                }
            }
            parameters.insert(format!("min[q{j},r={radius:e}]"), format!("{minimum}"));
            if minimum < 1.0 + options.margin {
                pass = false;
            }
        }
    }

    Ok(ConditionReport {
        condition: "A2".into(),
        pass,
        worst_value: worst,
        witness_point: witness,
        parameters,
    })
}

/// Checks the growth-rate condition A3 over a materialized schedule prefix.
///
/// Computes `C_emp = max k_{n+1}/k_n` over the horizon and the minimal
/// pairwise distance `d_min` among the fixed points; pass requires
/// `C_emp - 1 < d_min`. With fewer than two fixed points the distance
/// condition is vacuous and reported as such.
pub fn check_a3(
    schedule: &GrowthSchedule,
    fps: &FixedPointSet,
    horizon: usize,
) -> ConditionReport {
    let totals = schedule.totals(horizon.max(1));
    let mut c_emp = 1.0f64;
    for pair in totals.windows(2) {
        c_emp = c_emp.max(pair[1] as f64 / pair[0] as f64);
    }

    let mut parameters = ParamMap::new();
    parameters.insert("schedule".into(), schedule.describe());
    parameters.insert("horizon".into(), horizon.to_string());
    parameters.insert("effective_horizon".into(), (totals.len() - 1).to_string());
    parameters.insert("c_emp".into(), format!("{c_emp}"));

    let worst_value = c_emp - 1.0;
    match fps.min_pairwise_distance() {
        Some(d_min) => {
            parameters.insert("d_min".into(), format!("{d_min}"));
            ConditionReport {
                condition: "A3".into(),
                pass: worst_value < d_min,
                worst_value,
                witness_point: None,
                parameters,
            }
        }
        None => {
            parameters.insert("note".into(), "vacuous: fewer than 2 fixed points".into());
            ConditionReport {
                condition: "A3".into(),
                pass: true,
                worst_value,
                witness_point: None,
                parameters,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FiniteGroup;

    fn convolution(group: FiniteGroup) -> (SimplexMap, FixedPointSet) {
        let map = SimplexMap::convolution(group.into_arc());
        let fps = map.fixed_points().unwrap();
        (map, fps)
    }

    #[test]
    fn a1_passes_for_z2_convolution() {
        let (map, fps) = convolution(FiniteGroup::cyclic(2).unwrap());
        let report = check_a1(&map, &fps, &A1Options::default()).unwrap();
        assert!(report.pass, "worst ratio {}", report.worst_value);
        assert!(report.worst_value < 1.0);
        assert!(report.witness_point.is_some());
    }

    #[test]
    fn a1_passes_for_s3_convolution() {
        let (map, fps) = convolution(FiniteGroup::symmetric(3).unwrap());
        let report = check_a1(&map, &fps, &A1Options::default()).unwrap();
        assert!(report.pass, "worst ratio {}", report.worst_value);
    }

    #[test]
    fn a1_fails_for_identity_map() {
        let map = SimplexMap::genotype(0.0, 0.0).unwrap();
        let fps = map.fixed_points().unwrap();
        let report = check_a1(&map, &fps, &A1Options::default()).unwrap();
        assert!(!report.pass);
        assert!((report.worst_value - 1.0).abs() < 1e-12, "ratio is exactly 1");
    }

    #[test]
    fn a1_fails_for_repelling_interior_point() {
        let map = SimplexMap::genotype(-0.5, -0.5).unwrap();
        let fps = map.fixed_points().unwrap();
        assert_eq!(fps.attracting, None);
        let report = check_a1(&map, &fps, &A1Options::default()).unwrap();
        assert!(!report.pass);
        assert!(report.worst_value > 1.0);
    }

    #[test]
    fn a1_all_samples_excluded() {
        let (map, fps) = convolution(FiniteGroup::cyclic(2).unwrap());
        let options = A1Options {
            exclusion_radius: 10.0,
            ..A1Options::default()
        };
        assert!(matches!(
            check_a1(&map, &fps, &options),
            Err(CheckError::AllSamplesExcluded { .. })
        ));
    }

    #[test]
    fn a2_passes_for_s3_convolution() {
        let (map, fps) = convolution(FiniteGroup::symmetric(3).unwrap());
        let p0 = Distribution::uniform(6);
        let report = check_a2(&map, &fps, &p0, &A2Options::default()).unwrap();
        assert!(report.pass, "worst ratio {}", report.worst_value);
        // Products across a proper subgroup boundary escape it:
        // the ratio tends to 2 near each q_j.
        assert!(report.worst_value >= 1.0 + DEFAULT_A2_MARGIN);
    }

    #[test]
    fn a2_genotype_limit_ratio_matches_closed_form() {
        // Near p = 0 the escaping-mass ratio approaches 1/(1-t) = 10/7.
        let map = SimplexMap::genotype(0.2, 0.3).unwrap();
        let fps = map.fixed_points().unwrap();
        let p0 = Distribution::from_weights(vec![0.5, 0.5]).unwrap();
        let options = A2Options::default();
        let report = check_a2(&map, &fps, &p0, &options).unwrap();
        assert!(report.pass);
        let key = "min[q0,r=1e-4]";
        let min_small: f64 = report.parameters[key].parse().unwrap();
        assert!(
            (min_small - 1.0 / 0.7).abs() < 0.02,
            "limit ratio {min_small} should be near {}",
            1.0 / 0.7
        );
    }

    #[test]
    fn a2_initial_mass_zero() {
        let (map, fps) = convolution(FiniteGroup::cyclic(4).unwrap());
        // All initial mass on the subgroup {0, 2}: hypothesis fails for its c_j.
        let p0 = Distribution::uniform_on(4, &[0, 2]).unwrap();
        assert!(matches!(
            check_a2(&map, &fps, &p0, &A2Options::default()),
            Err(CheckError::InitialMassZero { .. })
        ));
    }

    #[test]
    fn a2_vacuous_without_boundary_points() {
        // Genotype with mixed signs attracts to a corner; the only other
        // fixed point is the opposite corner, which is boundary, so this is
        // not vacuous. Build a vacuous case from the trivial group instead.
        let (map, fps) = convolution(FiniteGroup::cyclic(1).unwrap());
        let p0 = Distribution::uniform(1);
        let report = check_a2(&map, &fps, &p0, &A2Options::default()).unwrap();
        assert!(report.pass);
        assert_eq!(report.parameters["note"], "vacuous: no boundary fixed points");
    }

    #[test]
    fn a3_unit_schedule_passes_on_z2() {
        let (_, fps) = convolution(FiniteGroup::cyclic(2).unwrap());
        let schedule = GrowthSchedule::unit(2).unwrap();
        let report = check_a3(&schedule, &fps, 100);
        // C_emp = 3/2 at the first step; d_min = sqrt(1/2).
        assert!((report.worst_value - 0.5).abs() < 1e-12);
        assert!(report.pass);
        let d_min: f64 = report.parameters["d_min"].parse().unwrap();
        assert!((d_min - (0.5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn a3_geometric_ratio_two_fails_on_z2() {
        let (_, fps) = convolution(FiniteGroup::cyclic(2).unwrap());
        let schedule = GrowthSchedule::geometric(2, 2.0).unwrap();
        let report = check_a3(&schedule, &fps, 100);
        assert!(!report.pass, "C - 1 = 1 exceeds d_min ~ 0.707");
    }

    #[test]
    fn a3_geometric_small_ratio_passes_from_large_k0() {
        let (_, fps) = convolution(FiniteGroup::cyclic(2).unwrap());
        let schedule = GrowthSchedule::geometric(100, 1.05).unwrap();
        let report = check_a3(&schedule, &fps, 200);
        assert!(report.pass);
        assert!(report.worst_value < 0.06, "C_emp stays near the ratio");
    }

    #[test]
    fn a3_vacuous_with_single_fixed_point() {
        let (_, fps) = convolution(FiniteGroup::cyclic(1).unwrap());
        let schedule = GrowthSchedule::geometric(5, 3.0).unwrap();
        let report = check_a3(&schedule, &fps, 10);
        assert!(report.pass);
        assert!(report.parameters.contains_key("note"));
    }
}
