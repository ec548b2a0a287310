//! Exact rational evaluation of the simplex maps and multinomial laws.
//!
//! Everything here mirrors the f64 engine in structure but runs in `BigRational`,
//! so drift inequalities and small-instance laws can be certified with no
//! floating-point tolerance at all. Float parameters (genotype `s`, `t`, a
//! distribution without integer backing) enter as their exact dyadic values
//! via `BigRational::from_float`.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive};

use crate::simplex::{Distribution, SimplexMap};

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn counts_to_rational(counts: &[u64], total: u64) -> Vec<BigRational> {
    assert!(total > 0);
    counts
        .iter()
        .map(|&c| BigRational::new(BigInt::from(c), BigInt::from(total)))
        .collect()
}

/// Exact value of a distribution: the integer backing when present, otherwise
/// the dyadic rationals of the stored f64 weights.
pub fn distribution_to_rational(d: &Distribution) -> Vec<BigRational> {
    if let Some(backing) = d.exact() {
        counts_to_rational(&backing.counts, backing.total)
    } else {
        d.weights()
            .iter()
            .map(|&w| BigRational::from_float(w).expect("weights are finite"))
            .collect()
    }
}

/// Applies a simplex map in exact rational arithmetic.
pub fn apply_rational(map: &SimplexMap, p: &[BigRational]) -> Vec<BigRational> {
    assert_eq!(p.len(), map.dimension());
    match map {
        SimplexMap::Convolution { group } => {
            let n = group.order();
            (0..n)
                .map(|g| {
                    (0..n)
                        .map(|h| &p[group.mul(g, group.inv(h))] * &p[h])
                        .sum()
                })
                .collect()
        }
        SimplexMap::Parity { k } => {
            let one = BigRational::one();
            let two = ratio(2, 1);
            let base = &one - &two * &p[1];
            let mut odd_term = BigRational::one();
            for _ in 0..*k {
                odd_term *= &base;
            }
            let odd = (&one - odd_term) / &two;
            vec![&one - &odd, odd]
        }
        SimplexMap::Genotype { s, t } => {
            let s = BigRational::from_float(*s).expect("s is finite");
            let t = BigRational::from_float(*t).expect("t is finite");
            let one = BigRational::one();
            let pa = p[0].clone();
            let q = &one - &pa;
            let denom = &one - &pa * &pa * &s - &q * &q * &t;
            assert!(denom.is_positive(), "selection denominator must be positive");
            let next = &pa * (&one - &pa * &s) / denom;
            vec![next.clone(), &one - &next]
        }
    }
}

pub fn squared_distance(a: &[BigRational], b: &[BigRational]) -> BigRational {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            &d * &d
        })
        .sum()
}

/// Number of ways to split `m` balls into `parts` labeled bins,
/// `C(m + parts - 1, parts - 1)`, or `None` on overflow.
pub fn count_compositions(m: u64, parts: usize) -> Option<u64> {
    let mut acc: u128 = 1;
    let k = parts as u128 - 1;
    for i in 1..=k {
        acc = acc.checked_mul(m as u128 + i)?;
        acc /= i; // exact: product of i consecutive integers divides by i!
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    acc.to_u64()
}

/// All compositions of `m` into `parts` non-negative parts, in
/// lexicographically decreasing order of the first coordinate.
pub fn compositions(m: u64, parts: usize) -> Vec<Vec<u64>> {
    assert!(parts >= 1);
    let mut out = Vec::new();
    let mut current = vec![0u64; parts];
    fill(&mut out, &mut current, 0, m);
    out
}

fn fill(out: &mut Vec<Vec<u64>>, current: &mut Vec<u64>, index: usize, remaining: u64) {
    if index == current.len() - 1 {
        current[index] = remaining;
        out.push(current.clone());
        return;
    }
    for take in (0..=remaining).rev() {
        current[index] = take;
        fill(out, current, index + 1, remaining - take);
    }
}

/// Exact multinomial probability of the outcome `counts` under `probs`.
pub fn multinomial_pmf(counts: &[u64], probs: &[BigRational]) -> BigRational {
    assert_eq!(counts.len(), probs.len());
    let m: u64 = counts.iter().sum();
    let mut coeff = BigInt::one();
    let mut remaining = m;
    for &c in counts {
        // multiply C(remaining, c) into the coefficient
        coeff *= binomial(remaining, c);
        remaining -= c;
    }
    let mut pmf = BigRational::from_integer(coeff);
    for (&c, p) in counts.iter().zip(probs) {
        for _ in 0..c {
            pmf *= p;
        }
    }
    pmf
}

fn binomial(n: u64, k: u64) -> BigInt {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Shorthand used by reports; `None` only for values outside f64 range.
pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().expect("rational fits in f64")
}
