//! Exact population quantities for the contrastive task.
//!
//! Everything here is computed from exact window-pair laws; nothing is
//! sampled except in [`Oracle::monte_carlo_risk`], which exists to cross-check
//! the exact values.
//!
//! For a subset `U` the Bayes 0-1 risk `err(U)` is `sum_z min_y P[Z_U = z, Y = y]`
//! under the scheme's labelled pair law. For OCP and OCP-biased the oracle also
//! computes the confusion mass
//!
//! ```text
//! E[m_U] = sum_{z : p_{U∩S} = q_{U∩S}} min(c · P[inc, z], P[dec, z])
//! ```
//!
//! where `inc` / `dec` mean the driver pattern strictly increases / decreases
//! from the first window to the second, and `c` is 1 for OCP and 1/3 for
//! OCP-biased. Under the model assumptions `err(U) = err(S) + E[m_U]`; the
//! residual of that identity is reported alongside each risk.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{DistributionSpec, EntryBudget};
use crate::par::Exec;
use crate::sampling::{sample_packed_pairs, scheme_pair_law, window_law, LabeledPairLaw, Scheme, NEG, POS};
use crate::subset::all_subsets;
use crate::{Error, FeatureSubset, Result};

/// Gaps at or below this are treated as ties when deciding uniqueness.
pub const UNIQUENESS_TOL: f64 = 1e-10;

/// Cap on the number of candidate subsets enumerated by the oracle.
pub const SUBSET_BUDGET: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub scheme: Scheme,
    pub subset: FeatureSubset,
    pub err_u: f64,
    pub err_s: f64,
    pub excess: f64,
    /// `E[m_U]` for OCP, `E[m'_U]` for OCP-biased, absent for PCL.
    pub m_expectation: Option<f64>,
    /// `err(U) - (err(S) + E[m_U])`.
    pub decomposition_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSubset {
    pub scheme: Scheme,
    pub subset: FeatureSubset,
    pub err: f64,
    pub is_unique: bool,
    /// Risk of the runner-up minus the optimum; absent with a single candidate.
    pub gap_to_second: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub scheme: Scheme,
    pub epsilon0: f64,
    /// Unlabeled sample count from the bound; absent when `epsilon0 <= 0`.
    pub m_bound: Option<f64>,
    pub d: usize,
    pub d0: usize,
    pub delta: f64,
    /// VC dimension of the downstream class, used only for the labeled rate.
    pub vc_f: Option<f64>,
    pub log_base: String,
}

impl BoundReport {
    /// `sqrt((VC(F) + ln(2/δ)) / n)`, the labeled excess-risk rate up to constants.
    pub fn labeled_rate(&self, n: usize) -> Option<f64> {
        let vc = self.vc_f?;
        (n > 0).then(|| ((vc + (2.0 / self.delta).ln()) / n as f64).sqrt())
    }
}

/// Exact population oracle for one scheme on one distribution.
#[derive(Debug, Clone)]
pub struct Oracle {
    scheme: Scheme,
    spec: DistributionSpec,
    budget: EntryBudget,
    truth: FeatureSubset,
    /// Law over every feature, when it fits the budget.
    full: Option<LabeledPairLaw>,
    err_s: f64,
}

fn extract(bits: usize, positions: &[usize]) -> usize {
    positions.iter().enumerate().fold(0, |acc, (j, &p)| acc | (((bits >> p) & 1) << j))
}

fn mask_of(positions: &[usize]) -> usize {
    positions.iter().fold(0, |m, &p| m | (1 << p))
}

impl Oracle {
    pub fn new(scheme: Scheme, spec: &DistributionSpec, budget: EntryBudget) -> Result<Self> {
        let windows = window_law(scheme, spec.tau())?.len() as u128;
        let d = spec.d();
        let all = FeatureSubset::all(d);
        let full = if d < 32 && budget.check("full law", (1u128 << (2 * d)) * windows).is_ok() {
            Some(scheme_pair_law(scheme, spec, &all, budget)?)
        } else {
            None
        };
        let mut oracle = Self { scheme, spec: spec.clone(), budget, truth: spec.driver_subset(), full, err_s: 0.0 };
        oracle.err_s = oracle.law(&oracle.truth.clone())?.bayes_risk();
        Ok(oracle)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn truth(&self) -> &FeatureSubset {
        &self.truth
    }

    pub fn err_s(&self) -> f64 {
        self.err_s
    }

    /// Labelled pair law restricted to `subset`.
    pub fn law(&self, subset: &FeatureSubset) -> Result<LabeledPairLaw> {
        subset.check_within(self.spec.d())?;
        match &self.full {
            Some(full) => full.marginalize(subset),
            None => scheme_pair_law(self.scheme, &self.spec, subset, self.budget),
        }
    }

    pub fn bayes_risk(&self, subset: &FeatureSubset) -> Result<f64> {
        Ok(self.law(subset)?.bayes_risk())
    }

    /// `P[X^W_S = X^{W'}_S]` under the scheme's pair law.
    pub fn equal_driver_probability(&self) -> Result<f64> {
        let law = self.law(&self.truth)?;
        let k = law.k();
        let mask = (1usize << k) - 1;
        Ok((0..1usize << (2 * k)).filter(|&i| i & mask == i >> k).map(|i| law.positive()[i] + law.negative()[i]).sum())
    }

    /// `P[X^W_S ⊊ X^{W'}_S]` under the scheme's pair law.
    pub fn increasing_driver_probability(&self) -> Result<f64> {
        let law = self.law(&self.truth)?;
        let k = law.k();
        let mask = (1usize << k) - 1;
        Ok((0..1usize << (2 * k))
            .filter(|&i| {
                let (a, b) = (i & mask, i >> k);
                a != b && a & !b == 0
            })
            .map(|i| law.positive()[i] + law.negative()[i])
            .sum())
    }

    /// Closed form of `err(S)`: `½P[eq]` for OCP, `½P[eq] + ⅓P[inc]` for
    /// OCP-biased.
    pub fn err_s_closed_form(&self) -> Result<Option<f64>> {
        Ok(match self.scheme {
            Scheme::Ocp => Some(0.5 * self.equal_driver_probability()?),
            Scheme::OcpBiased => Some(0.5 * self.equal_driver_probability()? + self.increasing_driver_probability()? / 3.0),
            _ => None,
        })
    }

    /// `E[m_U]` (OCP) or `E[m'_U]` (OCP-biased); `None` for other schemes.
    pub fn m_expectation(&self, subset: &FeatureSubset) -> Result<Option<f64>> {
        let factor = match self.scheme {
            Scheme::Ocp => 1.0,
            Scheme::OcpBiased => 1.0 / 3.0,
            _ => return Ok(None),
        };
        let v = subset.union(&self.truth);
        let law = self.law(&v)?;
        let kv = v.len();
        let u_pos = subset.positions_in(&v).expect("subset of union");
        let s_pos = self.truth.positions_in(&v).expect("subset of union");
        let shared: Vec<usize> = subset.indices().iter().filter(|&&i| self.truth.contains(i)).map(|&i| v.position(i).expect("in union")).collect();
        let s_mask = mask_of(&s_pos);
        let shared_mask = mask_of(&shared);
        let ku = subset.len();
        let vmask = (1usize << kv) - 1;
        let mut inc = vec![0.0; 1 << (2 * ku)];
        let mut dec = vec![0.0; 1 << (2 * ku)];
        for idx in 0..1usize << (2 * kv) {
            let p = law.positive()[idx] + law.negative()[idx];
            if p == 0.0 {
                continue;
            }
            let (a, b) = (idx & vmask, idx >> kv);
            if a & shared_mask != b & shared_mask {
                continue;
            }
            let (sa, sb) = (a & s_mask, b & s_mask);
            if sa == sb {
                continue;
            }
            let z = extract(a, &u_pos) | (extract(b, &u_pos) << ku);
            if sa & !sb == 0 {
                inc[z] += p;
            } else if sb & !sa == 0 {
                dec[z] += p;
            }
        }
        Ok(Some(inc.iter().zip(&dec).map(|(i, d)| (factor * i).min(*d)).sum()))
    }

    pub fn risk(&self, subset: &FeatureSubset) -> Result<RiskReport> {
        let err_u = self.bayes_risk(subset)?;
        let m = self.m_expectation(subset)?;
        Ok(RiskReport {
            scheme: self.scheme,
            subset: subset.clone(),
            err_u,
            err_s: self.err_s,
            excess: err_u - self.err_s,
            m_expectation: m,
            decomposition_residual: m.map(|m| err_u - (self.err_s + m)),
        })
    }

    /// Reports for every size-`d0` subset, in lexicographic order.
    pub fn all_risks(&self, d0: usize, exec: Exec) -> Result<Vec<RiskReport>> {
        let subsets = all_subsets(self.spec.d(), d0, SUBSET_BUDGET)?;
        exec.try_map(&subsets, |s| self.risk(s))
    }

    pub fn optimal_subset(&self, d0: usize, exec: Exec) -> Result<OptimalSubset> {
        let subsets = all_subsets(self.spec.d(), d0, SUBSET_BUDGET)?;
        let risks = exec.try_map(&subsets, |s| self.bayes_risk(s))?;
        Ok(optimal_from(self.scheme, &subsets, &risks))
    }

    /// Minimum excess risk over size-`d0` subsets that miss part of `S`.
    pub fn epsilon_zero(&self, d0: usize, exec: Exec) -> Result<f64> {
        let subsets: Vec<FeatureSubset> = all_subsets(self.spec.d(), d0, SUBSET_BUDGET)?
            .into_iter()
            .filter(|u| !u.is_superset_of(&self.truth))
            .collect();
        if subsets.is_empty() {
            return Err(Error::Empty("subsets missing a driver"));
        }
        let risks = exec.try_map(&subsets, |s| self.bayes_risk(s))?;
        Ok(risks.into_iter().fold(f64::INFINITY, f64::min) - self.err_s)
    }

    /// Empirical risk of the plug-in Bayes classifier on `n` fresh pairs, with
    /// its standard error.
    pub fn monte_carlo_risk<R: Rng + ?Sized>(&self, subset: &FeatureSubset, n: usize, rng: &mut R) -> Result<(f64, f64)> {
        if n == 0 {
            return Err(Error::Empty("monte carlo sample"));
        }
        let law = self.law(subset)?;
        let k = subset.len();
        let pairs = sample_packed_pairs(&self.spec, self.scheme, n, rng)?;
        let pos: Vec<usize> = subset.indices().to_vec();
        let wrong = pairs
            .iter()
            .filter(|p| {
                let z = extract(p.first as usize, &pos) | (extract(p.second as usize, &pos) << k);
                let guess = if law.positive()[z] > law.negative()[z] { POS } else { NEG };
                guess != p.y
            })
            .count();
        let mean = wrong as f64 / n as f64;
        Ok((mean, (mean * (1.0 - mean) / n as f64).sqrt()))
    }
}

fn optimal_from(scheme: Scheme, subsets: &[FeatureSubset], risks: &[f64]) -> OptimalSubset {
    let mut order: Vec<usize> = (0..subsets.len()).collect();
    order.sort_by(|&a, &b| risks[a].total_cmp(&risks[b]).then(a.cmp(&b)));
    let best = order[0];
    let gap = order.get(1).map(|&i| risks[i] - risks[best]);
    OptimalSubset {
        scheme,
        subset: subsets[best].clone(),
        err: risks[best],
        is_unique: gap.is_none_or(|g| g > UNIQUENESS_TOL),
        gap_to_second: gap,
    }
}

pub fn population_risk(scheme: Scheme, spec: &DistributionSpec, subset: &FeatureSubset, budget: EntryBudget) -> Result<RiskReport> {
    Oracle::new(scheme, spec, budget)?.risk(subset)
}

pub fn optimal_subset(scheme: Scheme, spec: &DistributionSpec, d0: usize, budget: EntryBudget) -> Result<OptimalSubset> {
    Oracle::new(scheme, spec, budget)?.optimal_subset(d0, Exec::default())
}

pub fn epsilon_zero(scheme: Scheme, spec: &DistributionSpec, d0: usize, budget: EntryBudget) -> Result<f64> {
    Oracle::new(scheme, spec, budget)?.epsilon_zero(d0, Exec::default())
}

/// `E[m_U]` or `E[m'_U]` for `variant` in {OCP, OCP-biased}.
pub fn m_expectation(spec: &DistributionSpec, subset: &FeatureSubset, variant: Scheme, budget: EntryBudget) -> Result<f64> {
    if !matches!(variant, Scheme::Ocp | Scheme::OcpBiased) {
        return Err(Error::UnsupportedScheme(variant));
    }
    Ok(Oracle::new(variant, spec, budget)?.m_expectation(subset)?.expect("variant checked"))
}

/// `2 (ln C(d, d0) + ln(4/δ)) / ε₀²`.
pub fn unlabeled_sample_bound(epsilon0: f64, d: usize, d0: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} must lie in (0, 1)")));
    }
    if d0 > d {
        return Err(Error::InvalidArgument(format!("d0 = {d0} exceeds d = {d}")));
    }
    if epsilon0.is_nan() || epsilon0 <= 0.0 {
        return Err(Error::NotIdentifiable(epsilon0));
    }
    let ln_binom = ln_binomial(d, d0);
    Ok(2.0 * (ln_binom + (4.0 / delta).ln()) / (epsilon0 * epsilon0))
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

pub fn bound_report(
    scheme: Scheme,
    spec: &DistributionSpec,
    d0: usize,
    delta: f64,
    vc_f: Option<f64>,
    budget: EntryBudget,
) -> Result<BoundReport> {
    let epsilon0 = epsilon_zero(scheme, spec, d0, budget)?;
    let m_bound = match unlabeled_sample_bound(epsilon0, spec.d(), d0, delta) {
        Ok(m) => Some(m),
        Err(Error::NotIdentifiable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(BoundReport { scheme, epsilon0, m_bound, d: spec.d(), d0, delta, vc_f, log_base: "natural".into() })
}

/// Columns: scheme, subset, err, excess, m_expectation (empty when absent).
pub fn write_risk_csv<W: Write>(reports: &[RiskReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scheme", "subset", "err", "excess", "m_expectation"])?;
    for r in reports {
        w.write_record([
            r.scheme.to_string(),
            r.subset.to_string(),
            r.err_u.to_string(),
            r.excess.to_string(),
            r.m_expectation.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
