//! Finite groups stored as dense Cayley tables.
//!
//! All algebra runs on element indices `0..|G|`; string labels exist only for
//! I/O. Tables are validated on construction: Latin-square property, a
//! two-sided identity, two-sided inverses, and associativity are checked
//! explicitly rather than taken on trust. Dense index tables give O(1)
//! products, which is all the small groups of interest here need.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

/// Default order cap for exhaustive subgroup enumeration.
pub const DEFAULT_SUBGROUP_CAP: usize = 24;
/// Default order cap for the `symmetric` builtin (7! = 5040).
pub const DEFAULT_SYMMETRIC_CAP: usize = 5040;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("cayley table is not square: {rows} rows but row {row} has {cols} columns")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("table entry at ({row},{col}) is {value}, outside 0..{order}")]
    EntryOutOfRange {
        row: usize,
        col: usize,
        value: usize,
        order: usize,
    },
    #[error("not a latin square: {axis} {index} repeats value {value}")]
    NotLatinSquare {
        axis: &'static str,
        index: usize,
        value: usize,
    },
    #[error("no two-sided identity element")]
    NoIdentity,
    #[error("element {element} has no two-sided inverse")]
    NoInverse { element: usize },
    #[error("associativity fails at ({i},{j},{k}): ({i}*{j})*{k} != {i}*({j}*{k})")]
    NotAssociative { i: usize, j: usize, k: usize },
    #[error("order {requested} exceeds cap {cap}")]
    SizeCapExceeded { requested: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("duplicate element label {label:?}")]
    DuplicateLabel { label: String },
    #[error("unknown element label {label:?}")]
    UnknownLabel { label: String },
    #[error("cayley file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A finite group: labeled elements plus a validated multiplication table.
///
/// Immutable after construction, so it can be shared read-only across
/// simulation workers (typically behind an [`Arc`]).
#[derive(Debug, Clone)]
pub struct FiniteGroup {
    name: String,
    elements: Vec<String>,
    /// Flattened |G| x |G| table; entry `i * order + j` is the index of
    /// `elements[i] * elements[j]`.
    table: Vec<usize>,
    identity: usize,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    /// Validates raw Cayley data and builds a group.
    ///
    /// The checks run in order: shape, entry range, Latin square, identity,
    /// two-sided inverses, associativity. Each failure names the first
    /// violating tuple. Inverses are checked before associativity so that a
    /// loop with only one-sided inverses reports `NoInverse` rather than the
    /// less specific `NotAssociative`.
    pub fn from_table(elements: Vec<String>, rows: Vec<Vec<usize>>) -> Result<Self, GroupError> {
        let n = elements.len();
        if n == 0 {
            return Err(GroupError::InvalidParameter("empty element list".into()));
        }
        {
            let mut seen = BTreeSet::new();
            for label in &elements {
                if !seen.insert(label.clone()) {
                    return Err(GroupError::DuplicateLabel {
                        label: label.clone(),
                    });
                }
            }
        }
        if rows.len() != n {
            return Err(GroupError::NotSquare {
                rows: rows.len(),
                row: rows.len(),
                cols: n,
            });
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(GroupError::NotSquare {
                    rows: n,
                    row: i,
                    cols: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v >= n {
                    return Err(GroupError::EntryOutOfRange {
                        row: i,
                        col: j,
                        value: v,
                        order: n,
                    });
                }
            }
        }

        let mut table = Vec::with_capacity(n * n);
        for row in &rows {
            table.extend_from_slice(row);
        }
        let at = |i: usize, j: usize| table[i * n + j];

        // Latin square: every row and column is a permutation of 0..n.
        for i in 0..n {
            let mut seen = vec![false; n];
            for j in 0..n {
                let v = at(i, j);
                if seen[v] {
                    return Err(GroupError::NotLatinSquare {
                        axis: "row",
                        index: i,
                        value: v,
                    });
                }
                seen[v] = true;
            }
        }
        for j in 0..n {
            let mut seen = vec![false; n];
            for i in 0..n {
                let v = at(i, j);
                if seen[v] {
                    return Err(GroupError::NotLatinSquare {
                        axis: "column",
                        index: j,
                        value: v,
                    });
                }
                seen[v] = true;
            }
        }

        let identity = (0..n)
            .find(|&e| (0..n).all(|i| at(e, i) == i && at(i, e) == i))
            .ok_or(GroupError::NoIdentity)?;

        let mut inverse = vec![usize::MAX; n];
        for i in 0..n {
            let inv = (0..n).find(|&j| at(i, j) == identity && at(j, i) == identity);
            inverse[i] = inv.ok_or(GroupError::NoInverse { element: i })?;
        }

        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if at(at(i, j), k) != at(i, at(j, k)) {
                        return Err(GroupError::NotAssociative { i, j, k });
                    }
                }
            }
        }

        Ok(Self {
            name: format!("G{n}"),
            elements,
            table,
            identity,
            inverse,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Cyclic group of order `n` with elements labeled `"0".."n-1"`.
    pub fn cyclic(n: usize) -> Result<Self, GroupError> {
        if n == 0 {
            return Err(GroupError::InvalidParameter(
                "cyclic group needs order >= 1".into(),
            ));
        }
        let elements = (0..n).map(|i| i.to_string()).collect();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| (i + j) % n).collect())
            .collect();
        Ok(Self::from_table(elements, rows)?.with_name(format!("C{n}")))
    }

    /// Dihedral group of order `2n` (`n >= 3`). Rotations are labeled
    /// `"r0".."r{n-1}"` and reflections `"s0".."s{n-1}"`, where `s{i}` means
    /// the reflection `s * r^i`.
    pub fn dihedral(n: usize) -> Result<Self, GroupError> {
        if n < 3 {
            return Err(GroupError::InvalidParameter(
                "dihedral group needs n >= 3".into(),
            ));
        }
        let order = 2 * n;
        let mut elements = Vec::with_capacity(order);
        for i in 0..n {
            elements.push(format!("r{i}"));
        }
        for i in 0..n {
            elements.push(format!("s{i}"));
        }
        // Index f*n + i encodes s^f r^i; r^i s = s r^{-i} gives the product rule.
        let idx = |f: usize, i: usize| f * n + i;
        let mut rows = vec![vec![0usize; order]; order];
        for f1 in 0..2 {
            for i1 in 0..n {
                for f2 in 0..2 {
                    for i2 in 0..n {
                        let (f, i) = if f2 == 0 {
                            (f1, (i1 + i2) % n)
                        } else {
                            (1 - f1, (i2 + n - i1) % n)
                        };
                        rows[idx(f1, i1)][idx(f2, i2)] = idx(f, i);
                    }
                }
            }
        }
        Ok(Self::from_table(elements, rows)?.with_name(format!("D{n}")))
    }

    /// Symmetric group on `n` letters, capped at [`DEFAULT_SYMMETRIC_CAP`].
    pub fn symmetric(n: usize) -> Result<Self, GroupError> {
        Self::symmetric_with_cap(n, DEFAULT_SYMMETRIC_CAP)
    }

    /// Symmetric group with an explicit factorial cap. Elements are labeled
    /// in one-line notation (the images of `1..n` concatenated), listed in
    /// lexicographic order, with composition `(a*b)(x) = a(b(x))`.
    pub fn symmetric_with_cap(n: usize, cap: usize) -> Result<Self, GroupError> {
        if n == 0 {
            return Err(GroupError::InvalidParameter(
                "symmetric group needs n >= 1".into(),
            ));
        }
        let mut order = 1usize;
        for i in 2..=n {
            order = order
                .checked_mul(i)
                .ok_or(GroupError::SizeCapExceeded { requested: usize::MAX, cap })?;
            if order > cap {
                return Err(GroupError::SizeCapExceeded {
                    requested: order,
                    cap,
                });
            }
        }

        let mut perms: Vec<Vec<usize>> = Vec::with_capacity(order);
        let mut current: Vec<usize> = (0..n).collect();
        permute_lex(&mut current, &mut perms);
        debug_assert_eq!(perms.len(), order);

        let elements: Vec<String> = perms
            .iter()
            .map(|p| p.iter().map(|&x| (x + 1).to_string()).collect::<String>())
            .collect();
        let index: std::collections::HashMap<&[usize], usize> = perms
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_slice(), i))
            .collect();
        let rows = perms
            .iter()
            .map(|a| {
                perms
                    .iter()
                    .map(|b| {
                        let composed: Vec<usize> = (0..n).map(|x| a[b[x]]).collect();
                        index[composed.as_slice()]
                    })
                    .collect()
            })
            .collect();
        Ok(Self::from_table(elements, rows)?.with_name(format!("S{n}")))
    }

    /// Direct product; element `(i, j)` is labeled `"(a,b)"` from the factor
    /// labels and indexed `i * |B| + j`.
    pub fn direct_product(a: &FiniteGroup, b: &FiniteGroup) -> Result<Self, GroupError> {
        let (na, nb) = (a.order(), b.order());
        let order = na
            .checked_mul(nb)
            .ok_or(GroupError::InvalidParameter("product order overflow".into()))?;
        let mut elements = Vec::with_capacity(order);
        for i in 0..na {
            for j in 0..nb {
                elements.push(format!("({},{})", a.label(i), b.label(j)));
            }
        }
        let rows = (0..order)
            .map(|x| {
                let (xi, xj) = (x / nb, x % nb);
                (0..order)
                    .map(|y| {
                        let (yi, yj) = (y / nb, y % nb);
                        a.mul(xi, yi) * nb + b.mul(xj, yj)
                    })
                    .collect()
            })
            .collect();
        Ok(Self::from_table(elements, rows)?.with_name(format!("{}x{}", a.name, b.name)))
    }

    /// Loads a group from the Cayley table text format: a `elements` list of
    /// labels and a `table` of rows written with labels rather than indices.
    pub fn from_cayley_str(text: &str) -> Result<Self, GroupError> {
        #[derive(Deserialize)]
        struct CayleyFile {
            elements: Vec<String>,
            table: Vec<Vec<String>>,
        }
        let parsed: CayleyFile =
            toml::from_str(text).map_err(|e| GroupError::Parse(e.to_string()))?;
        let mut index = std::collections::HashMap::new();
        for (i, label) in parsed.elements.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(GroupError::DuplicateLabel {
                    label: label.clone(),
                });
            }
        }
        let rows = parsed
            .table
            .iter()
            .map(|row| {
                row.iter()
                    .map(|label| {
                        index
                            .get(label)
                            .copied()
                            .ok_or_else(|| GroupError::UnknownLabel {
                                label: label.clone(),
                            })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_table(parsed.elements, rows)
    }

    pub fn from_cayley_file(path: impl AsRef<Path>) -> Result<Self, GroupError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "cayley".into());
        Ok(Self::from_cayley_str(&text)?.with_name(name))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    #[inline]
    pub fn mul(&self, i: usize, j: usize) -> usize {
        self.table[i * self.order() + j]
    }

    #[inline]
    pub fn inv(&self, i: usize) -> usize {
        self.inverse[i]
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn label(&self, i: usize) -> &str {
        &self.elements[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.elements
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.elements.iter().position(|l| l == label)
    }

    pub fn is_abelian(&self) -> bool {
        let n = self.order();
        (0..n).all(|i| (i + 1..n).all(|j| self.mul(i, j) == self.mul(j, i)))
    }

    /// Multiplicative order of one element.
    pub fn element_order(&self, i: usize) -> usize {
        let mut x = i;
        let mut ord = 1;
        while x != self.identity {
            x = self.mul(x, i);
            ord += 1;
        }
        ord
    }

    /// Smallest subgroup containing `seeds`. Terminates because the group is
    /// finite; closure under products alone suffices since every element has
    /// finite order.
    pub fn closure(&self, seeds: &[usize]) -> Subgroup {
        assert!(!seeds.is_empty(), "closure requires at least one seed");
        let n = self.order();
        let mut mask = vec![false; n];
        let mut members: Vec<usize> = Vec::new();
        let mut frontier: Vec<usize> = Vec::new();
        for &s in seeds {
            assert!(s < n, "seed index {s} out of range for order {n}");
            if !mask[s] {
                mask[s] = true;
                members.push(s);
                frontier.push(s);
            }
        }
        while let Some(x) = frontier.pop() {
            for idx in 0..members.len() {
                let y = members[idx];
                for z in [self.mul(x, y), self.mul(y, x)] {
                    if !mask[z] {
                        mask[z] = true;
                        members.push(z);
                        frontier.push(z);
                    }
                }
            }
        }
        // Seeds generate at least one power cycle, so the identity is in.
        debug_assert!(mask[self.identity]);
        Subgroup::from_mask(mask)
    }

    /// All subgroups, ascending by order, using the default cap.
    pub fn subgroups(&self) -> Result<Vec<Subgroup>, GroupError> {
        self.subgroups_with_cap(DEFAULT_SUBGROUP_CAP)
    }

    /// All subgroups, ascending by order (ties broken by member list).
    ///
    /// Starts from every cyclic subgroup and repeatedly closes joins of pairs
    /// until no new subgroup appears. Complete for finite groups: any
    /// subgroup is generated by its elements, hence reachable as a join of
    /// cyclic subgroups.
    pub fn subgroups_with_cap(&self, cap: usize) -> Result<Vec<Subgroup>, GroupError> {
        let n = self.order();
        if n > cap {
            return Err(GroupError::SizeCapExceeded { requested: n, cap });
        }
        let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
        found.insert(vec![self.identity]);
        for g in 0..n {
            found.insert(self.closure(&[g]).members());
        }
        loop {
            let snapshot: Vec<Vec<usize>> = found.iter().cloned().collect();
            let before = found.len();
            for a in 0..snapshot.len() {
                for b in a + 1..snapshot.len() {
                    let mut seeds = snapshot[a].clone();
                    seeds.extend_from_slice(&snapshot[b]);
                    found.insert(self.closure(&seeds).members());
                }
            }
            if found.len() == before {
                break;
            }
        }
        let mut subs: Vec<Subgroup> = found
            .into_iter()
            .map(|members| {
                let mut mask = vec![false; n];
                for m in members {
                    mask[m] = true;
                }
                Subgroup::from_mask(mask)
            })
            .collect();
        subs.sort_by(|a, b| (a.order(), a.members()).cmp(&(b.order(), b.members())));
        Ok(subs)
    }

    pub fn into_arc(self) -> Arc<Self> {
        Arc::new(self)
    }
}

fn permute_lex(current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    // Lexicographic successor loop; `current` starts sorted.
    loop {
        out.push(current.clone());
        // Find the longest non-increasing suffix.
        let n = current.len();
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            return;
        };
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
}

/// A subgroup of some [`FiniteGroup`], stored as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgroup {
    mask: Vec<bool>,
    order: usize,
}

impl Subgroup {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        let order = mask.iter().filter(|&&b| b).count();
        Self { mask, order }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn members(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn is_proper(&self) -> bool {
        self.order < self.mask.len()
    }
}
