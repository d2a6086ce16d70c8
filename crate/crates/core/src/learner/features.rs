use serde::{Deserialize, Serialize};

use crate::sampling::{LabeledPair, NEG, POS};
use crate::FeatureSubset;

/// `[x; x'; x - x'; |x - x'|]` for a pair restricted to `k` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures(pub Vec<f64>);

impl PairFeatures {
    pub fn k(&self) -> usize {
        self.0.len() / 4
    }

    pub fn first(&self) -> &[f64] {
        &self.0[..self.k()]
    }

    pub fn second(&self) -> &[f64] {
        let k = self.k();
        &self.0[k..2 * k]
    }

    pub fn difference(&self) -> &[f64] {
        let k = self.k();
        &self.0[2 * k..3 * k]
    }

    pub fn abs_difference(&self) -> &[f64] {
        let k = self.k();
        &self.0[3 * k..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn fill(out: &mut [f64], k: usize, first: impl Fn(usize) -> u8, second: impl Fn(usize) -> u8) {
    for j in 0..k {
        let a = first(j) as f64;
        let b = second(j) as f64;
        out[j] = a;
        out[k + j] = b;
        out[2 * k + j] = a - b;
        out[3 * k + j] = (a - b).abs();
    }
}

pub fn featurize_pair(pair: &LabeledPair, subset: &FeatureSubset) -> PairFeatures {
    let idx = subset.indices();
    let mut out = vec![0.0; 4 * idx.len()];
    fill(&mut out, idx.len(), |j| pair.x_first[idx[j]], |j| pair.x_second[idx[j]]);
    PairFeatures(out)
}

/// Featurises values already restricted to the subset and packed as bits.
pub fn featurize_packed(first: usize, second: usize, k: usize) -> PairFeatures {
    let mut out = vec![0.0; 4 * k];
    fill(&mut out, k, |j| ((first >> j) & 1) as u8, |j| ((second >> j) & 1) as u8);
    PairFeatures(out)
}

/// Weighted binary classification data with labels in {-1, +1}. Duplicate
/// rows may be merged into one row carrying their total weight without
/// changing any objective.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Default::default() }
    }

    pub fn from_rows<I, R>(dim: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = (R, i8)>,
        R: AsRef<[f64]>,
    {
        let mut ds = Self::new(dim);
        for (x, y) in rows {
            ds.push(x.as_ref(), y, 1.0);
        }
        ds
    }

    pub fn push(&mut self, x: &[f64], y: i8, weight: f64) {
        assert_eq!(x.len(), self.dim, "row length does not match dataset dimension");
        debug_assert!(y == POS || y == NEG);
        self.x.extend_from_slice(x);
        self.y.push(if y == POS { 1.0 } else { -1.0 });
        self.w.push(weight);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    /// Label of row `i` as +1.0 / -1.0.
    pub fn label(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.w[i]
    }

    pub fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Total weight carried by each label, as (positive, negative).
    pub fn label_weights(&self) -> (f64, f64) {
        self.y.iter().zip(&self.w).fold((0.0, 0.0), |(p, n), (&y, &w)| if y > 0.0 { (p + w, n) } else { (p, n + w) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Scheme;

    fn pair(a: Vec<u8>, b: Vec<u8>) -> LabeledPair {
        LabeledPair { x_first: a, x_second: b, w_first: 0, w_second: 1, y: POS, scheme: Scheme::Ocp, source_ids: (0, 0) }
    }

    #[test]
    fn direct_arithmetic() {
        let f = featurize_pair(&pair(vec![1, 0], vec![1, 1]), &FeatureSubset::all(2));
        assert_eq!(f.as_slice(), &[1.0, 0.0, 1.0, 1.0, 0.0, -1.0, 0.0, 1.0]);
        assert_eq!(f.k(), 2);
        assert_eq!(f.difference(), &[0.0, -1.0]);
    }

    #[test]
    fn identical_windows_have_zero_differences() {
        let f = featurize_pair(&pair(vec![1, 0, 1], vec![1, 0, 1]), &FeatureSubset::all(3));
        assert!(f.difference().iter().chain(f.abs_difference()).all(|&v| v == 0.0));
    }

    #[test]
    fn packed_matches_unpacked_on_subset() {
        let p = pair(vec![0, 1, 1, 0], vec![1, 1, 0, 0]);
        let sub = FeatureSubset::new(vec![0, 2, 3]).unwrap();
        let packed_first = 0b010; // features 0,2,3 of x_first = (0,1,0)
        let packed_second = 0b001;
        assert_eq!(featurize_pair(&p, &sub), featurize_packed(packed_first, packed_second, 3));
    }

    #[test]
    fn dataset_bookkeeping() {
        let mut ds = Dataset::new(2);
        ds.push(&[1.0, 0.0], POS, 2.0);
        ds.push(&[0.0, 1.0], NEG, 1.0);
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.label_weights(), (2.0, 1.0));
        assert_eq!(ds.row(1), &[0.0, 1.0]);
    }
}
