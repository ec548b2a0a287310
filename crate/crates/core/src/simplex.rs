//! The probability simplex over a finite state space and the simplex
//! transformations driving the urn.
//!
//! Three map kinds are provided:
//!
//! * `Convolution` over a finite group `G`: `(T(p))_g = sum_h p_{g h^-1} p_h`,
//!   the label law of the product of two independent draws from `p`.
//! * `Parity(k)` on `{0, 1}`: draw `k` balls, add a `1` when an odd number of
//!   ones was drawn, so `p_1' = [1 - (1 - 2 p_1)^k] / 2`.
//! * `Genotype(s, t)` on `{A, a}`: one-locus selection with homozygote
//!   penalties `s` and `t`, `T(p) = p (1 - p s) / [1 - p^2 s - (1-p)^2 t]`.
//!
//! Distances between distributions use the Euclidean norm unless a function
//! says otherwise; the convergence theory squares that norm throughout.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{FiniteGroup, GroupError, Subgroup, DEFAULT_SUBGROUP_CAP};

/// Tolerance on `sum(weights) - 1` accepted by [`Distribution`] constructors.
pub const SIMPLEX_SUM_TOLERANCE: f64 = 1e-12;
/// Max-norm tolerance within which a listed fixed point must satisfy `T(q) = q`.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("empty weight vector")]
    Empty,
    #[error("weights[{index}] = {value} is negative")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum:?}, expected 1 within {SIMPLEX_SUM_TOLERANCE:e}")]
    NotNormalized { sum: f64 },
    #[error("counts sum to zero")]
    ZeroTotal,
    #[error("parity map needs k >= 1")]
    InvalidParity,
    #[error("fitness parameters must be finite and < 1: s={s}, t={t}")]
    InvalidFitness { s: f64, t: f64 },
    #[error("map on {expected} states applied to distribution of length {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("fixed point candidate {index} fails T(q) = q: residual {residual:e}")]
    FixedPointResidual { index: usize, residual: f64 },
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// A point of the simplex: non-negative weights summing to one, optionally
/// backed by the exact integer counts it was derived from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Distribution {
    weights: Vec<f64>,
    exact: Option<ExactBacking>,
}

/// Integer counts behind a [`Distribution`]; `weights[i]` equals
/// `counts[i] / total` to within one ulp (exactly, in rational arithmetic).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactBacking {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Distribution {
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, SimplexError> {
        if weights.is_empty() {
            return Err(SimplexError::Empty);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value >= 0.0) {
                return Err(SimplexError::NegativeWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOLERANCE {
            return Err(SimplexError::NotNormalized { sum });
        }
        Ok(Self {
            weights,
            exact: None,
        })
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self, SimplexError> {
        if counts.is_empty() {
            return Err(SimplexError::Empty);
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(SimplexError::ZeroTotal);
        }
        let weights = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self {
            weights,
            exact: Some(ExactBacking { counts, total }),
        })
    }

    pub fn uniform(len: usize) -> Self {
        Self::from_counts(vec![1; len]).expect("uniform distribution is valid")
    }

    pub fn point_mass(len: usize, at: usize) -> Self {
        let mut counts = vec![0; len];
        counts[at] = 1;
        Self::from_counts(counts).expect("point mass is valid")
    }

    /// Uniform distribution over a subset of the state space.
    pub fn uniform_on(len: usize, members: &[usize]) -> Result<Self, SimplexError> {
        let mut counts = vec![0; len];
        for &m in members {
            counts[m] = 1;
        }
        Self::from_counts(counts)
    }

    pub fn uniform_on_subgroup(subgroup: &Subgroup) -> Self {
        Self::uniform_on(subgroup.mask().len(), &subgroup.members())
            .expect("subgroups are non-empty")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn exact(&self) -> Option<&ExactBacking> {
        self.exact.as_ref()
    }

    /// Indices carrying strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter_map(|(i, &w)| (w > 0.0).then_some(i))
            .collect()
    }

    pub fn euclidean_distance(&self, other: &Self) -> f64 {
        self.squared_distance(other).sqrt()
    }

    pub fn squared_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len());
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn linf_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len());
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Total variation distance, half the L1 distance.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len());
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// A map of the simplex into itself: `apply` plus a descriptor.
#[derive(Debug, Clone)]
pub enum SimplexMap {
    Convolution { group: Arc<FiniteGroup> },
    Parity { k: u32 },
    Genotype { s: f64, t: f64 },
}

impl SimplexMap {
    pub fn convolution(group: Arc<FiniteGroup>) -> Self {
        Self::Convolution { group }
    }

    pub fn parity(k: u32) -> Result<Self, SimplexError> {
        if k == 0 {
            return Err(SimplexError::InvalidParity);
        }
        Ok(Self::Parity { k })
    }

    pub fn genotype(s: f64, t: f64) -> Result<Self, SimplexError> {
        if !(s.is_finite() && t.is_finite() && s < 1.0 && t < 1.0) {
            return Err(SimplexError::InvalidFitness { s, t });
        }
        Ok(Self::Genotype { s, t })
    }

    /// Size of the state space the map acts on.
    pub fn dimension(&self) -> usize {
        match self {
            Self::Convolution { group } => group.order(),
            Self::Parity { .. } | Self::Genotype { .. } => 2,
        }
    }

    /// Canonical state labels, in index order.
    pub fn labels(&self) -> Vec<String> {
        match self {
            Self::Convolution { group } => group.labels().to_vec(),
            Self::Parity { .. } => vec!["0".into(), "1".into()],
            Self::Genotype { .. } => vec!["A".into(), "a".into()],
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Convolution { group } => format!("convolution({})", group.name()),
            Self::Parity { k } => format!("parity(k={k})"),
            Self::Genotype { s, t } => format!("genotype(s={s},t={t})"),
        }
    }

    /// Applies the transformation. Panics if the distribution length does not
    /// match the map's state space; dimension errors are caller bugs here and
    /// are validated with proper errors at the configuration layer.
    pub fn apply(&self, p: &Distribution) -> Distribution {
        assert_eq!(
            p.len(),
            self.dimension(),
            "distribution length does not match map state space"
        );
        match self {
            Self::Convolution { group } => {
                let w = p.weights();
                let n = group.order();
                let mut out = vec![0.0; n];
                for (g, slot) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for h in 0..n {
                        acc += w[group.mul(g, group.inv(h))] * w[h];
                    }
                    *slot = acc;
                }
                Distribution::from_weights(out).expect("convolution stays on the simplex")
            }
            Self::Parity { k } => {
                let p1 = p.weight(1);
                let odd = (1.0 - (1.0 - 2.0 * p1).powi(*k as i32)) / 2.0;
                Distribution::from_weights(vec![1.0 - odd, odd])
                    .expect("parity stays on the simplex")
            }
            Self::Genotype { s, t } => {
                let pa = p.weight(0);
                let denom = 1.0 - pa * pa * s - (1.0 - pa) * (1.0 - pa) * t;
                assert!(denom > 0.0, "selection denominator must stay positive");
                let next = (pa * (1.0 - pa * s) / denom).clamp(0.0, 1.0);
                Distribution::from_weights(vec![next, 1.0 - next])
                    .expect("genotype stays on the simplex")
            }
        }
    }

    /// Enumerates the fixed points of the map.
    ///
    /// * Convolution: exactly the uniform distributions over subgroups, with
    ///   the uniform distribution over the whole group attracting.
    /// * Parity: solutions of `[1 - (1 - 2p)^k] / 2 = p`; the point mass at
    ///   all-ones is fixed only for odd `k`. The uniform point attracts for
    ///   `k >= 2`; `k = 1` is the identity map, reported with no attracting
    ///   point.
    /// * Genotype: `p = 0` and `p = 1` always; `t/(s+t)` in addition when `s`
    ///   and `t` share a strict sign. The attracting point follows the sign
    ///   analysis (interior when both positive, `1` when `s <= 0 <= t`, `0`
    ///   when `t <= 0 <= s`, none when both negative or both zero). Identity
    ///   regimes report canonical representatives with no attracting index.
    pub fn fixed_points(&self) -> Result<FixedPointSet, SimplexError> {
        self.fixed_points_with_cap(DEFAULT_SUBGROUP_CAP)
    }

    pub fn fixed_points_with_cap(&self, subgroup_cap: usize) -> Result<FixedPointSet, SimplexError> {
        let (points, attracting) = match self {
            Self::Convolution { group } => {
                let subs = group.subgroups_with_cap(subgroup_cap)?;
                let points: Vec<Distribution> = subs
                    .iter()
                    .map(Distribution::uniform_on_subgroup)
                    .collect();
                // Subgroups come back ascending by order; the whole group is last.
                let attracting = Some(points.len() - 1);
                (points, attracting)
            }
            Self::Parity { k } => {
                let zero = Distribution::point_mass(2, 0);
                let one = Distribution::point_mass(2, 1);
                let half = Distribution::uniform(2);
                if *k == 1 {
                    // Identity map: every point is fixed; report representatives.
                    (vec![zero, one, half], None)
                } else if k % 2 == 0 {
                    (vec![zero, half], Some(1))
                } else {
                    (vec![zero, one, half], Some(2))
                }
            }
            Self::Genotype { s, t } => {
                // Index 0 is allele A; p = 0 means the (0, 1) corner.
                let p0 = Distribution::point_mass(2, 1);
                let p1 = Distribution::point_mass(2, 0);
                let interior = |q: f64| {
                    Distribution::from_weights(vec![q, 1.0 - q])
                        .expect("interior fixed point is valid")
                };
                if *s == 0.0 && *t == 0.0 {
                    (vec![p0, p1, Distribution::uniform(2)], None)
                } else if *s > 0.0 && *t > 0.0 {
                    (vec![p0, p1, interior(t / (s + t))], Some(2))
                } else if *s < 0.0 && *t < 0.0 {
                    (vec![p0, p1, interior(t / (s + t))], None)
                } else if *s <= 0.0 {
                    // s <= 0 <= t, not both zero: all-A is attracting.
                    (vec![p0, p1], Some(1))
                } else {
                    (vec![p0, p1], Some(0))
                }
            }
        };

        for (index, q) in points.iter().enumerate() {
            let residual = self.apply(q).linf_distance(q);
            if residual > FIXED_POINT_TOLERANCE {
                return Err(SimplexError::FixedPointResidual { index, residual });
            }
        }
        let boundary_vectors = points
            .iter()
            .map(|q| {
                let c: Vec<f64> = q
                    .weights()
                    .iter()
                    .map(|&w| if w == 0.0 { 1.0 } else { 0.0 })
                    .collect();
                c.iter().any(|&x| x > 0.0).then_some(c)
            })
            .collect();
        Ok(FixedPointSet {
            points,
            attracting,
            boundary_vectors,
        })
    }
}

/// The fixed points of a [`SimplexMap`].
///
/// `boundary_vectors[j]`, present exactly when point `j` has proper support,
/// is the 0/1 vector with ones off the support; its inner product with `p`
/// measures the mass escaping that support.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointSet {
    pub points: Vec<Distribution>,
    pub attracting: Option<usize>,
    pub boundary_vectors: Vec<Option<Vec<f64>>>,
}

impl FixedPointSet {
    pub fn attracting_point(&self) -> Option<&Distribution> {
        self.attracting.map(|i| &self.points[i])
    }

    /// The attracting point if designated, otherwise the unique full-support
    /// point when there is one. Identity-like maps have no designation, but
    /// condition checks still need a candidate to evaluate (and fail) against.
    pub fn contraction_candidate(&self) -> Option<usize> {
        self.attracting.or_else(|| {
            let mut interior = self
                .boundary_vectors
                .iter()
                .enumerate()
                .filter_map(|(i, c)| c.is_none().then_some(i));
            match (interior.next(), interior.next()) {
                (Some(i), None) => Some(i),
                _ => None,
            }
        })
    }

    /// Boundary points other than the designated/candidate center, as
    /// `(index, point, c_j)` triples.
    pub fn boundary_points(&self) -> Vec<(usize, &Distribution, &[f64])> {
        let center = self.contraction_candidate();
        self.boundary_vectors
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let c = c.as_ref()?;
                if Some(i) == center {
                    return None;
                }
                Some((i, &self.points[i], c.as_slice()))
            })
            .collect()
    }

    pub fn min_pairwise_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                let d = self.points[i].euclidean_distance(&self.points[j]);
                best = Some(best.map_or(d, |b: f64| b.min(d)));
            }
        }
        best
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Serializable summary of one fixed point, used by report output.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointInfo {
    pub weights: Vec<f64>,
    pub support: Vec<String>,
    pub boundary: bool,
    pub attracting: bool,
}

/// Flattens a [`FixedPointSet`] against a map's labels for display.
pub fn fixed_point_infos(map: &SimplexMap, fps: &FixedPointSet) -> Vec<FixedPointInfo> {
    let labels = map.labels();
    fps.points
        .iter()
        .enumerate()
        .map(|(i, q)| FixedPointInfo {
            weights: q.weights().to_vec(),
            support: q.support().iter().map(|&s| labels[s].clone()).collect(),
            boundary: fps.boundary_vectors[i].is_some(),
            attracting: fps.attracting == Some(i),
        })
        .collect()
}

/// Key/value parameter bag carried by condition reports; stringified values
/// keep the serialized form stable and order deterministic.
pub type ParamMap = BTreeMap<String, String>;


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn normalized_weights_form_distributions(raw in proptest::collection::vec(1e-6..1.0f64, 1..12)) {
            let sum: f64 = raw.iter().sum();
            let mut weights: Vec<f64> = raw.iter().map(|x| x / sum).collect();
            let correction = 1.0 - weights.iter().sum::<f64>();
            let last = weights.len() - 1;
            weights[last] += correction;
            let d = Distribution::from_weights(weights).unwrap();
            prop_assert!((d.weights().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_SUM_TOLERANCE);
        }

        #[test]
        fn maps_preserve_simplex(raw in proptest::collection::vec(1e-6..1.0f64, 2), k in 1u32..8, s in -0.99f64..0.99, t in -0.99f64..0.99) {
            let sum: f64 = raw.iter().sum();
            let mut weights: Vec<f64> = raw.iter().map(|x| x / sum).collect();
            let correction = 1.0 - weights.iter().sum::<f64>();
            weights[1] += correction;
            let p = Distribution::from_weights(weights).unwrap();
            for map in [SimplexMap::parity(k).unwrap(), SimplexMap::genotype(s, t).unwrap()] {
                let tp = map.apply(&p);
                prop_assert!((tp.weights().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_SUM_TOLERANCE);
                prop_assert!(tp.weights().iter().all(|&w| w >= 0.0));
            }
        }
    }
}
