//! Exhaustive ERM over feature-selector representations.
//!
//! Each candidate subset gets its own logistic fit on the pair featurisation
//! restricted to that subset; the subset with the smallest empirical 0-1 risk
//! (or, with [`SelectionCriterion::Loss`], the smallest training objective)
//! wins, ties going to the lexicographically smallest index list.

use serde::{Deserialize, Serialize};

use super::features::{featurize_packed, Dataset};
use super::logistic::{train_logistic, LinearModel, Regularization, SolverOptions};
use crate::par::Exec;
use crate::sampling::{PackedPair, NEG, POS};
use crate::subset::all_subsets;
use crate::{Error, FeatureSubset, Result};

/// Default cap on the number of candidate subsets.
pub const DEFAULT_SUBSET_BUDGET: u128 = 1 << 20;

/// How fitted subsets are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCriterion {
    /// Training 0-1 error.
    #[default]
    ZeroOne,
    /// Final regularised training objective.
    Loss,
}

#[derive(Debug, Clone, Copy)]
pub struct SubsetSearchOptions {
    pub reg: Regularization,
    pub solver: SolverOptions,
    pub criterion: SelectionCriterion,
    pub subset_budget: u128,
    pub exec: Exec,
}

impl Default for SubsetSearchOptions {
    fn default() -> Self {
        Self {
            reg: Regularization::default(),
            solver: SolverOptions::default(),
            criterion: SelectionCriterion::default(),
            subset_budget: DEFAULT_SUBSET_BUDGET,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetFit {
    pub subset: FeatureSubset,
    /// Number of misclassified training pairs.
    pub errors: u64,
    pub risk: f64,
    pub model: LinearModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSearch {
    /// Index into `fits` of the selected subset.
    pub best: usize,
    /// One fit per candidate, in lexicographic subset order.
    pub fits: Vec<SubsetFit>,
}

impl SubsetSearch {
    pub fn best(&self) -> &SubsetFit {
        &self.fits[self.best]
    }
}

/// Restricts packed pairs to `indices` (in the given order, which need not
/// be sorted) and counts each distinct `(first, second, label)` pattern.
/// The returned vector is indexed by `first | second << k | positive << 2k`.
pub fn compress_pairs(pairs: &[PackedPair], indices: &[usize]) -> Vec<u64> {
    let k = indices.len();
    assert!(k <= 20, "compressed table would be too large");
    let mut counts = vec![0u64; 1 << (2 * k + 1)];
    let extract = |bits: u64| indices.iter().enumerate().fold(0usize, |acc, (j, &i)| acc | ((((bits >> i) & 1) as usize) << j));
    for p in pairs {
        let key = extract(p.first) | (extract(p.second) << k) | (usize::from(p.y == POS) << (2 * k));
        counts[key] += 1;
    }
    counts
}

fn dataset_from_counts(counts: &[u64], k: usize) -> Dataset {
    let mask = (1usize << k) - 1;
    let mut ds = Dataset::new(4 * k);
    for (key, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let y = if key >> (2 * k) == 1 { POS } else { NEG };
        let f = featurize_packed(key & mask, (key >> k) & mask, k);
        ds.push(f.as_slice(), y, c as f64);
    }
    ds
}

/// Fits one model on the pairs restricted to `indices` and counts its
/// training errors.
pub fn fit_subset_indices(pairs: &[PackedPair], indices: &[usize], opts: &SubsetSearchOptions) -> Result<(LinearModel, u64)> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair sample"));
    }
    let k = indices.len();
    let counts = compress_pairs(pairs, indices);
    let ds = dataset_from_counts(&counts, k);
    let model = train_logistic(&ds, opts.reg, &opts.solver)?;
    let errors = (0..ds.len())
        .filter(|&i| (model.predict(ds.row(i)) == POS) != (ds.label(i) > 0.0))
        .map(|i| ds.weight(i) as u64)
        .sum();
    Ok((model, errors))
}

pub fn fit_subset(pairs: &[PackedPair], subset: &FeatureSubset, opts: &SubsetSearchOptions) -> Result<SubsetFit> {
    let (model, errors) = fit_subset_indices(pairs, subset.indices(), opts)?;
    Ok(SubsetFit { subset: subset.clone(), errors, risk: errors as f64 / pairs.len() as f64, model })
}

/// Searches all size-`d0` subsets of `0..d`; ties go to the earliest subset
/// in lexicographic order.
pub fn erm_subset_search_with(pairs: &[PackedPair], d: usize, d0: usize, opts: &SubsetSearchOptions) -> Result<SubsetSearch> {
    if pairs.is_empty() {
        return Err(Error::Empty("pair sample"));
    }
    if d > 64 {
        return Err(Error::InvalidArgument("subset search needs d <= 64".into()));
    }
    if d0 == 0 {
        return Err(Error::InvalidArgument("subset size must be at least 1".into()));
    }
    let candidates = all_subsets(d, d0, opts.subset_budget)?;
    let fits = opts.exec.try_map(&candidates, |s| fit_subset(pairs, s, opts))?;
    let best = match opts.criterion {
        SelectionCriterion::ZeroOne => fits.iter().enumerate().min_by_key(|(i, f)| (f.errors, *i)).map(|(i, _)| i),
        SelectionCriterion::Loss => fits
            .iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.model.diagnostics.final_objective.total_cmp(&b.model.diagnostics.final_objective).then(i.cmp(j)))
            .map(|(i, _)| i),
    }
    .expect("at least one candidate");
    Ok(SubsetSearch { best, fits })
}

/// Returns the selected subset and its empirical 0-1 risk.
pub fn erm_subset_search(pairs: &[PackedPair], d: usize, d0: usize, reg: Regularization, tol: f64) -> Result<(FeatureSubset, f64)> {
    let opts = SubsetSearchOptions { reg, solver: SolverOptions { tol, ..Default::default() }, ..Default::default() };
    let search = erm_subset_search_with(pairs, d, d0, &opts)?;
    let best = search.best();
    Ok((best.subset.clone(), best.risk))
}

/// Size of the overlap between a selected feature set and the truth.
pub fn recovery_score(found: &[usize], truth: &FeatureSubset) -> usize {
    let mut seen = found.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.iter().filter(|&&i| truth.contains(i)).count()
}
