use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A feature-selector representation: a sorted set of distinct feature indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FeatureSubset(Vec<usize>);

impl FeatureSubset {
    /// Sorts `indices` and checks they are distinct.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!("duplicate feature index in {indices:?}")));
        }
        Ok(Self(indices))
    }

    /// Like [`FeatureSubset::new`] and additionally requires every index `< d`.
    pub fn within(indices: Vec<usize>, d: usize) -> Result<Self> {
        let s = Self::new(indices)?;
        s.check_within(d)?;
        Ok(s)
    }

    pub fn all(d: usize) -> Self {
        Self((0..d).collect())
    }

    pub fn check_within(&self, d: usize) -> Result<()> {
        match self.0.last() {
            Some(&max) if max >= d => Err(Error::InvalidArgument(format!(
                "feature index {max} out of range for d = {d}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.0.binary_search(&idx).is_ok()
    }

    /// Position of `idx` inside the subset, if present.
    pub fn position(&self, idx: usize) -> Option<usize> {
        self.0.binary_search(&idx).ok()
    }

    pub fn is_superset_of(&self, other: &FeatureSubset) -> bool {
        other.0.iter().all(|&i| self.contains(i))
    }

    pub fn union(&self, other: &FeatureSubset) -> FeatureSubset {
        let mut v: Vec<usize> = self.0.iter().chain(other.0.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        FeatureSubset(v)
    }

    pub fn intersection_size(&self, other: &FeatureSubset) -> usize {
        self.0.iter().filter(|&&i| other.contains(i)).count()
    }

    /// Positions of `self`'s indices within `sup`; `None` if some index is missing.
    pub fn positions_in(&self, sup: &FeatureSubset) -> Option<Vec<usize>> {
        self.0.iter().map(|&i| sup.position(i)).collect()
    }

    /// Bitmask of the subset's indices (requires every index < 64).
    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0u64, |m, &i| m | (1u64 << i))
    }
}

impl TryFrom<Vec<usize>> for FeatureSubset {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FeatureSubset> for Vec<usize> {
    fn from(s: FeatureSubset) -> Vec<usize> {
        s.0
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.iter().join(";"))
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All size-`k` subsets of `0..d` in lexicographic order.
pub fn all_subsets(d: usize, k: usize, budget: u128) -> Result<Vec<FeatureSubset>> {
    if k > d {
        return Err(Error::InvalidArgument(format!("subset size {k} exceeds d = {d}")));
    }
    let needed = binomial(d, k);
    if needed > budget {
        return Err(Error::Budget { what: "subset enumeration", needed, budget });
    }
    Ok((0..d).combinations(k).map(FeatureSubset).collect())
}
