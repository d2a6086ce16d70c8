//! Exact joint laws of feature values at one or two time points.
//!
//! Instead of enumerating all `2^(tau*d)` paths, the computation factorises
//! over independent groups: each root driver together with its followers and
//! noisy copies, and each background feature on its own. A driver group is
//! summarised by the law of its latent on/off value at the requested times;
//! noisy copies are conditionally independent given that value. Background
//! features use closed-form marginals and k-step transitions. Group tables are
//! then combined by an outer product over disjoint bit positions.
//!
//! Table layout: for a subset of `k` features and times `t_0, t_1, ...`, the
//! value of the subset's `j`-th feature at `t_s` lives at bit `s*k + j`. For a
//! window pair this means index `v | (v' << k)`.

use serde::{Deserialize, Serialize};

use super::{BackgroundFeature, DistributionSpec, DriverFeature, Group};
use crate::{Error, FeatureSubset, Result};

/// Maximum number of table entries an exact computation may allocate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryBudget(pub u128);

impl Default for EntryBudget {
    fn default() -> Self {
        EntryBudget(1 << 26)
    }
}

impl EntryBudget {
    pub fn check(self, what: &'static str, needed: u128) -> Result<()> {
        if needed > self.0 {
            Err(Error::Budget { what, needed, budget: self.0 })
        } else {
            Ok(())
        }
    }
}

/// Exact joint law of `(X^w_U, X^{w'}_U)` for one window pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    k: usize,
    probs: Vec<f64>,
}

impl PairTable {
    pub fn from_probs(k: usize, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), 1 << (2 * k));
        Self { k, probs }
    }

    /// Number of features in the subset.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P[X^w_U = first, X^{w'}_U = second]` with values packed as bitmasks.
    pub fn get(&self, first: usize, second: usize) -> f64 {
        self.probs[first | (second << self.k)]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Law of the reversed pair `(X^{w'}, X^w)`.
    pub fn transpose(&self) -> PairTable {
        let k = self.k;
        let mask = (1 << k) - 1;
        let mut probs = vec![0.0; self.probs.len()];
        for (idx, &p) in self.probs.iter().enumerate() {
            probs[(idx >> k) | ((idx & mask) << k)] = p;
        }
        PairTable { k, probs }
    }

    /// Sums out every coordinate not listed in `keep` (positions within the
    /// subset, in the order they should appear in the result).
    pub fn marginalize(&self, keep: &[usize]) -> PairTable {
        let k = self.k;
        let nk = keep.len();
        let mut probs = vec![0.0; 1 << (2 * nk)];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut out = 0usize;
            for (slot, &pos) in keep.iter().enumerate() {
                out |= ((idx >> pos) & 1) << slot;
                out |= ((idx >> (k + pos)) & 1) << (nk + slot);
            }
            probs[out] += p;
        }
        PairTable { k: nk, probs }
    }
}

/// Exact joint law of `X^t_U` at a single time.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMarginal {
    k: usize,
    probs: Vec<f64>,
}

impl TimeMarginal {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, v: usize) -> f64 {
        self.probs[v]
    }
}

/// Per-window-pair exact laws over a fixed subset.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistribution {
    subset: FeatureSubset,
    windows: Vec<(usize, usize)>,
    tables: Vec<PairTable>,
}

impl PairDistribution {
    pub fn subset(&self) -> &FeatureSubset {
        &self.subset
    }

    pub fn windows(&self) -> &[(usize, usize)] {
        &self.windows
    }

    pub fn tables(&self) -> &[PairTable] {
        &self.tables
    }

    pub fn table(&self, window: (usize, usize)) -> Option<&PairTable> {
        self.windows.iter().position(|&w| w == window).map(|i| &self.tables[i])
    }

    /// Probability of a `(w, w', v, v')` cell.
    pub fn prob(&self, window: (usize, usize), first: usize, second: usize) -> Option<f64> {
        self.table(window).map(|t| t.get(first, second))
    }

    /// Marginalizes every table down to `sub`, which must be contained in this
    /// distribution's subset.
    pub fn marginalize(&self, sub: &FeatureSubset) -> Result<PairDistribution> {
        let keep = sub.positions_in(&self.subset).ok_or_else(|| {
            Error::InvalidArgument(format!("{sub} is not contained in {}", self.subset))
        })?;
        Ok(PairDistribution {
            subset: sub.clone(),
            windows: self.windows.clone(),
            tables: self.tables.iter().map(|t| t.marginalize(&keep)).collect(),
        })
    }
}

/// Computes the exact law of `(X^w_U, X^{w'}_U)` for every window pair in
/// `support`. Each table individually sums to one.
pub fn exact_pair_distribution(
    spec: &DistributionSpec,
    support: &[(usize, usize)],
    subset: &FeatureSubset,
    budget: EntryBudget,
) -> Result<PairDistribution> {
    if support.is_empty() {
        return Err(Error::Empty("window support"));
    }
    let needed = (1u128 << (2 * subset.len().min(63))) * support.len() as u128;
    budget.check("pair distribution", needed)?;
    let tables = support
        .iter()
        .map(|&w| pair_table(spec, w, subset, budget))
        .collect::<Result<Vec<_>>>()?;
    Ok(PairDistribution { subset: subset.clone(), windows: support.to_vec(), tables })
}

/// Exact law of one window pair.
pub fn pair_table(
    spec: &DistributionSpec,
    window: (usize, usize),
    subset: &FeatureSubset,
    budget: EntryBudget,
) -> Result<PairTable> {
    let probs = joint_at_times(spec, &[window.0, window.1], subset, budget)?;
    Ok(PairTable { k: subset.len(), probs })
}

/// Exact law of `X^t_U`.
pub fn exact_time_marginal(
    spec: &DistributionSpec,
    t: usize,
    subset: &FeatureSubset,
    budget: EntryBudget,
) -> Result<TimeMarginal> {
    let probs = joint_at_times(spec, &[t], subset, budget)?;
    Ok(TimeMarginal { k: subset.len(), probs })
}

fn joint_at_times(
    spec: &DistributionSpec,
    times: &[usize],
    subset: &FeatureSubset,
    budget: EntryBudget,
) -> Result<Vec<f64>> {
    subset.check_within(spec.d())?;
    if let Some(&t) = times.iter().find(|&&t| t >= spec.tau()) {
        return Err(Error::InvalidArgument(format!("time {t} outside 0..{}", spec.tau())));
    }
    let k = subset.len();
    let n = times.len();
    let bits = n * k;
    if bits >= 64 {
        return Err(Error::Budget { what: "joint table", needed: u128::MAX, budget: budget.0 });
    }
    budget.check("joint table", 1u128 << bits)?;

    let mut acc = vec![0.0; 1 << bits];
    acc[0] = 1.0;
    let mut support: Vec<usize> = vec![0];

    for group in spec.groups() {
        // (feature, position in subset) of the group's features that are kept
        let local: Vec<(usize, usize)> = group
            .features()
            .into_iter()
            .filter_map(|f| subset.position(f).map(|pos| (f, pos)))
            .collect();
        if local.is_empty() {
            continue;
        }
        let table = group_table(spec, &group, &local, times);
        let l = local.len();
        // local bit s*l + c  ->  global bit s*k + pos_c
        let scatter: Vec<usize> = (0..table.len())
            .map(|li| {
                let mut g = 0usize;
                for s in 0..n {
                    for (c, &(_, pos)) in local.iter().enumerate() {
                        g |= ((li >> (s * l + c)) & 1) << (s * k + pos);
                    }
                }
                g
            })
            .collect();
        let mut next = vec![0.0; acc.len()];
        let mut next_support = Vec::with_capacity(support.len() * 2);
        for &i in &support {
            let pi = acc[i];
            for (li, &pg) in table.iter().enumerate() {
                if pg == 0.0 {
                    continue;
                }
                let j = i | scatter[li];
                if next[j] == 0.0 {
                    next_support.push(j);
                }
                next[j] += pi * pg;
            }
        }
        acc = next;
        support = next_support;
    }
    Ok(acc)
}

/// Law of one group's kept features at `times`, indexed by local bits
/// `s*l + c` (time slot `s`, kept feature `c`).
fn group_table(spec: &DistributionSpec, group: &Group, local: &[(usize, usize)], times: &[usize]) -> Vec<f64> {
    let n = times.len();
    let l = local.len();
    match group {
        Group::Background { kind, .. } => {
            debug_assert_eq!(l, 1);
            // with a single feature the local layout is simply bit s
            background_law(*kind, times)
        }
        Group::Driver { root, members, noisy } => {
            let latent = driver_law(&spec.drivers()[*root], spec.tau(), times);
            // per kept feature: None for a member (exact copy), Some(eps) for a noisy copy
            let eps: Vec<Option<f64>> = local
                .iter()
                .map(|&(f, _)| {
                    if members.contains(&f) {
                        None
                    } else {
                        Some(noisy.iter().find(|&&(j, _)| j == f).map(|&(_, e)| e).expect("feature in group"))
                    }
                })
                .collect();
            let mut out = vec![0.0; 1 << (n * l)];
            for (b, &pb) in latent.iter().enumerate() {
                if pb == 0.0 {
                    continue;
                }
                for (li, slot) in out.iter_mut().enumerate() {
                    let mut p = pb;
                    for s in 0..n {
                        let parent = (b >> s) & 1;
                        for (c, e) in eps.iter().enumerate() {
                            let v = (li >> (s * l + c)) & 1;
                            p *= match e {
                                None => (v == parent) as u8 as f64,
                                Some(e) => {
                                    if v == parent {
                                        1.0 - e
                                    } else {
                                        *e
                                    }
                                }
                            };
                            if p == 0.0 {
                                break;
                            }
                        }
                    }
                    *slot += p;
                }
            }
            out
        }
    }
}

/// Law of a root driver's value at `times` (bit `s` = value at `times[s]`),
/// by enumerating activation and switch-off times.
fn driver_law(driver: &DriverFeature, tau: usize, times: &[usize]) -> Vec<f64> {
    let n = times.len();
    let mut out = vec![0.0; 1 << n];
    out[0] += 1.0 - driver.activation_prob;
    let p_start = driver.activation_prob / tau as f64;
    let q = driver.deactivation_prob;
    let pattern = |start: usize, stop: usize| -> usize {
        times.iter().enumerate().fold(0, |acc, (s, &t)| acc | (((start <= t && t < stop) as usize) << s))
    };
    for start in 0..tau {
        if q == 0.0 {
            out[pattern(start, tau)] += p_start;
            continue;
        }
        // switches off at start + j (j >= 1) with prob (1-q)^(j-1) q
        let mut survive = 1.0;
        for stop in start + 1..tau {
            out[pattern(start, stop)] += p_start * survive * q;
            survive *= 1.0 - q;
        }
        out[pattern(start, tau)] += p_start * survive;
    }
    out
}

fn background_marginal(kind: BackgroundFeature, t: usize) -> f64 {
    match kind {
        BackgroundFeature::Periodic | BackgroundFeature::MarkovStay(_) => 0.5,
        BackgroundFeature::IidBernoulli(p) => p,
        BackgroundFeature::TwoState(ts) => {
            let rate = ts.p01 + ts.p10;
            if rate == 0.0 {
                return ts.init;
            }
            let stationary = ts.p01 / rate;
            let lambda = 1.0 - rate;
            stationary + (ts.init - stationary) * lambda.powi(t as i32)
        }
    }
}

/// `P[X^{t+steps} = to | X^t = from]`.
fn background_transition(kind: BackgroundFeature, steps: usize, from: usize, to: usize) -> f64 {
    if steps == 0 {
        return (from == to) as u8 as f64;
    }
    match kind {
        BackgroundFeature::Periodic => ((from ^ (steps & 1)) == to) as u8 as f64,
        BackgroundFeature::MarkovStay(p_stay) => {
            let same = 0.5 * (1.0 + (2.0 * p_stay - 1.0).powi(steps as i32));
            if from == to {
                same
            } else {
                1.0 - same
            }
        }
        BackgroundFeature::IidBernoulli(p) => {
            if to == 1 {
                p
            } else {
                1.0 - p
            }
        }
        BackgroundFeature::TwoState(ts) => {
            let rate = ts.p01 + ts.p10;
            if rate == 0.0 {
                return (from == to) as u8 as f64;
            }
            let stationary = ts.p01 / rate;
            let decay = (1.0 - rate).powi(steps as i32);
            let p_one = if from == 1 {
                stationary + (1.0 - stationary) * decay
            } else {
                stationary * (1.0 - decay)
            };
            if to == 1 {
                p_one
            } else {
                1.0 - p_one
            }
        }
    }
}

/// Joint law of a background feature at `times` (bit `s` = value at `times[s]`).
fn background_law(kind: BackgroundFeature, times: &[usize]) -> Vec<f64> {
    let n = times.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&s| times[s]);
    let mut out = vec![0.0; 1 << n];
    for (idx, slot) in out.iter_mut().enumerate() {
        let value = |s: usize| (idx >> s) & 1;
        let first = order[0];
        let p1 = background_marginal(kind, times[first]);
        let mut p = if value(first) == 1 { p1 } else { 1.0 - p1 };
        for pair in order.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            p *= background_transition(kind, times[b] - times[a], value(a), value(b));
        }
        *slot = p;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{NoisyFeature, TwoState};

    fn spec(drivers: Vec<DriverFeature>, noisy: Vec<NoisyFeature>, bg: Vec<BackgroundFeature>, tau: usize) -> DistributionSpec {
        DistributionSpec::new(tau, drivers, noisy, bg).unwrap()
    }

    #[test]
    fn periodic_pair_law() {
        // single periodic feature needs a driver to make a valid spec; keep only the background
        let s = spec(vec![DriverFeature::new(0.3)], vec![], vec![BackgroundFeature::Periodic], 2);
        let t = pair_table(&s, (0, 1), &FeatureSubset::new(vec![1]).unwrap(), EntryBudget::default()).unwrap();
        assert_eq!(t.get(0, 1), 0.5);
        assert_eq!(t.get(1, 0), 0.5);
        assert_eq!(t.get(0, 0), 0.0);
        assert_eq!(t.get(1, 1), 0.0);
    }

    #[test]
    fn certain_driver_two_steps() {
        // activation at time 0 or 1 with probability 1/2 each
        let s = spec(vec![DriverFeature::new(1.0)], vec![], vec![], 2);
        let t = pair_table(&s, (0, 1), &FeatureSubset::all(1), EntryBudget::default()).unwrap();
        assert_eq!(t.get(1, 1), 0.5);
        assert_eq!(t.get(0, 1), 0.5);
        assert_eq!(t.get(0, 0) + t.get(1, 0), 0.0);
    }

    #[test]
    fn tables_normalize_and_transpose() {
        let s = DistributionSpec::dist1();
        let all = FeatureSubset::all(s.d());
        let fwd = pair_table(&s, (2, 3), &all, EntryBudget::default()).unwrap();
        assert!((fwd.total() - 1.0).abs() < 1e-12);
        let bwd = pair_table(&s, (3, 2), &all, EntryBudget::default()).unwrap();
        let tr = fwd.transpose();
        let max_diff = tr.probs().iter().zip(bwd.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max_diff < 1e-15, "{max_diff}");
    }

    #[test]
    fn two_state_matches_markov_stay_when_symmetric() {
        let ts = BackgroundFeature::TwoState(TwoState { init: 0.5, p01: 0.7, p10: 0.7 });
        for times in [[0usize, 3], [5, 2], [4, 4]] {
            let a = background_law(ts, &times);
            let b = background_law(BackgroundFeature::MarkovStay(0.3), &times);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let s = DistributionSpec::dist1();
        let err = exact_pair_distribution(&s, &[(0, 1)], &FeatureSubset::all(8), EntryBudget(1000)).unwrap_err();
        assert!(err.is_budget());
        assert!(exact_pair_distribution(&s, &[], &FeatureSubset::all(2), EntryBudget::default()).is_err());
        assert!(pair_table(&s, (0, 10), &FeatureSubset::all(2), EntryBudget::default()).is_err());
    }

    #[test]
    fn single_time_marginal_of_driver() {
        let s = spec(vec![DriverFeature::new(0.4)], vec![NoisyFeature { parent: 0, epsilon: 0.25 }], vec![], 10);
        let m = exact_time_marginal(&s, 4, &FeatureSubset::all(2), EntryBudget::default()).unwrap();
        let on = 0.4 * 5.0 / 10.0;
        assert!((m.get(0b01) - on * 0.25).abs() < 1e-15);
        assert!((m.get(0b11) - on * 0.75).abs() < 1e-15);
        assert!((m.get(0b00) - (1.0 - on) * 0.75).abs() < 1e-15);
    }
}
