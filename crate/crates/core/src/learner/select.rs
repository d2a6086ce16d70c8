//! L1 feature selection over the full pair featurisation.
//!
//! The penalty is bisected on a log scale until the number of selected
//! original features lands in `target ± slack`. A feature counts as selected
//! when any of its four blocks has a nonzero weight.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::features::{featurize_packed, Dataset};
use super::logistic::{train_logistic, train_logistic_from, LinearModel, Regularization, SolverOptions};
use crate::sampling::PackedPair;
use crate::{Error, Result};

pub const MAX_ROUNDS: usize = 50;
/// Ratio between the smallest penalty tried and the smallest penalty that
/// zeroes every weight.
pub const LAMBDA_FLOOR_RATIO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Selection {
    pub lambda: f64,
    pub selected: Vec<usize>,
    /// Sum of absolute block weights per original feature.
    pub aggregate_weights: Vec<f64>,
    pub target: usize,
    pub slack: usize,
    /// False when no penalty on the path gave a count within the window; the
    /// result is then the closest count seen.
    pub reached: bool,
    pub rounds: usize,
    pub model: LinearModel,
}

impl L1Selection {
    pub fn count(&self) -> usize {
        self.selected.len()
    }
}

fn full_dataset(pairs: &[PackedPair], d: usize) -> Dataset {
    let mut counts: BTreeMap<(u64, u64, i8), u64> = BTreeMap::new();
    for p in pairs {
        *counts.entry((p.first, p.second, p.y)).or_default() += 1;
    }
    let mut ds = Dataset::new(4 * d);
    for ((first, second, y), c) in counts {
        let f = featurize_packed(first as usize, second as usize, d);
        ds.push(f.as_slice(), y, c as f64);
    }
    ds
}

/// Smallest L1 penalty at which the all-zero weight vector is optimal.
fn lambda_max(ds: &Dataset) -> f64 {
    let (pos, neg) = ds.label_weights();
    let total = pos + neg;
    let bias = (pos / neg).ln();
    let mut grad = vec![0.0; ds.dim()];
    for i in 0..ds.len() {
        let y = ds.label(i);
        let c = -ds.weight(i) * y / (1.0 + (y * bias).exp()) / total;
        for (g, x) in grad.iter_mut().zip(ds.row(i)) {
            *g += c * x;
        }
    }
    grad.iter().fold(0.0, |m: f64, g| m.max(g.abs()))
}

fn aggregate(model: &LinearModel, d: usize) -> Vec<f64> {
    (0..d).map(|j| (0..4).map(|b| model.weights[b * d + j].abs()).sum()).collect()
}

fn selected(weights: &[f64]) -> Vec<usize> {
    weights.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(j, _)| j).collect()
}

pub fn l1_select(pairs: &[PackedPair], d: usize, target: usize, slack: usize) -> Result<L1Selection> {
    l1_select_with(pairs, d, target, slack, &SolverOptions::default())
}

pub fn l1_select_with(pairs: &[PackedPair], d: usize, target: usize, slack: usize, opts: &SolverOptions) -> Result<L1Selection> {
    if target == 0 {
        return Err(Error::InvalidArgument("target count must be at least 1".into()));
    }
    if d == 0 || d > 64 {
        return Err(Error::InvalidArgument(format!("feature count {d} outside 1..=64")));
    }
    if pairs.is_empty() {
        return Err(Error::Empty("pair sample"));
    }
    let ds = full_dataset(pairs, d);
    let (pos, neg) = ds.label_weights();
    let lo_count = target.saturating_sub(slack);
    let hi_count = target + slack;
    let in_window = |c: usize| c >= lo_count && c <= hi_count;

    let fit = |lambda: f64, warm: Option<&LinearModel>| -> Result<(LinearModel, Vec<f64>)> {
        let reg = Regularization::l1(lambda);
        let model = match warm {
            Some(w) => train_logistic_from(&ds, reg, opts, w)?,
            None => train_logistic(&ds, reg, opts)?,
        };
        let agg = aggregate(&model, d);
        Ok((model, agg))
    };
    let finish = |lambda: f64, model: LinearModel, agg: Vec<f64>, reached: bool, rounds: usize| L1Selection {
        lambda,
        selected: selected(&agg),
        aggregate_weights: agg,
        target,
        slack,
        reached,
        rounds,
        model,
    };

    if pos == 0.0 || neg == 0.0 {
        let (model, agg) = fit(0.0, None)?;
        let reached = in_window(0);
        return Ok(finish(0.0, model, agg, reached, 0));
    }

    let lmax = lambda_max(&ds);
    let mut lo = lmax * LAMBDA_FLOOR_RATIO;
    let (lo_model, lo_agg) = fit(lo, None)?;
    let lo_n = selected(&lo_agg).len();
    if in_window(lo_n) || lo_n < lo_count {
        return Ok(finish(lo, lo_model, lo_agg, in_window(lo_n), 0));
    }
    let mut hi = lmax;
    let mut best = (lo_n.abs_diff(target), lo, lo_model.clone(), lo_agg);
    let mut warm = lo_model;
    for round in 1..=MAX_ROUNDS {
        let mid = (lo * hi).sqrt();
        let (model, agg) = fit(mid, Some(&warm))?;
        let n = selected(&agg).len();
        if in_window(n) {
            return Ok(finish(mid, model, agg, true, round));
        }
        if n.abs_diff(target) < best.0 {
            best = (n.abs_diff(target), mid, model.clone(), agg);
        }
        if n > hi_count {
            lo = mid;
            warm = model;
        } else {
            hi = mid;
        }
    }
    let (_, lambda, model, agg) = best;
    Ok(finish(lambda, model, agg, false, MAX_ROUNDS))
}

/// Columns: feature, aggregate_weight, selected.
pub fn write_selection_csv<W: Write>(sel: &L1Selection, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "aggregate_weight", "selected"])?;
    for (j, a) in sel.aggregate_weights.iter().enumerate() {
        w.write_record([j.to_string(), format!("{a:.12e}"), u8::from(*a > 0.0).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::sampling::{NEG, POS};
    use rand::Rng;

    fn perfect_feature_pairs(n: usize) -> Vec<PackedPair> {
        let mut rng = substream(11, &[]);
        (0..n)
            .map(|_| {
                let y = if rng.random_bool(0.5) { POS } else { NEG };
                let first: u64 = rng.random_range(0..16) & !4;
                let second: u64 = rng.random_range(0..16) & !4;
                if y == POS {
                    PackedPair { first, second: second | 4, y }
                } else {
                    PackedPair { first: first | 4, second, y }
                }
            })
            .collect()
    }

    #[test]
    fn single_feature_target() {
        let sel = l1_select(&perfect_feature_pairs(400), 4, 1, 0).unwrap();
        assert!(sel.reached);
        assert_eq!(sel.selected, vec![2]);
    }

    #[test]
    fn wide_window_takes_path_endpoint() {
        let sel = l1_select(&perfect_feature_pairs(400), 4, 4, 4).unwrap();
        assert!(sel.reached);
        assert_eq!(sel.rounds, 0);
    }

    #[test]
    fn csv_layout() {
        let sel = l1_select(&perfect_feature_pairs(200), 4, 1, 0).unwrap();
        let mut buf = Vec::new();
        write_selection_csv(&sel, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("feature,aggregate_weight,selected\n"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn invalid_target() {
        assert!(l1_select(&perfect_feature_pairs(10), 4, 0, 0).is_err());
    }
}
