//! Synthetic downstream task and the pretrain-then-finetune comparison.
//!
//! The label at time `T` is `1` when at least `threshold` drivers are active,
//! flipped independently with probability `label_noise`. The Bayes classifier
//! depends on the drivers only and its risk is exactly `label_noise`, which is
//! also the best risk reachable by a linear model on any subset containing
//! the drivers.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{exact_time_marginal, sample_trajectory, DistributionSpec, EntryBudget};
use crate::learner::{erm_subset_search_with, train_logistic, Dataset, LinearModel, Regularization, SolverOptions, SubsetSearchOptions};
use crate::par::Exec;
use crate::rng::{substream, tag};
use crate::sampling::{sample_packed_pairs, Scheme, NEG, POS};
use crate::subset::all_subsets;
use crate::{Error, FeatureSubset, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamTask {
    target: FeatureSubset,
    threshold: usize,
    label_noise: f64,
}

impl DownstreamTask {
    pub fn new(target: FeatureSubset, threshold: usize, label_noise: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&label_noise) {
            return Err(Error::InvalidArgument(format!("label noise {label_noise} outside [0, 0.5)")));
        }
        if threshold == 0 || threshold > target.len() {
            return Err(Error::InvalidArgument(format!("threshold {threshold} outside 1..={}", target.len())));
        }
        Ok(Self { target, threshold, label_noise })
    }

    /// Any active driver, 10% label noise.
    pub fn for_spec(spec: &DistributionSpec) -> Result<Self> {
        Self::new(spec.driver_subset(), 1, 0.1)
    }

    pub fn target(&self) -> &FeatureSubset {
        &self.target
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn label_noise(&self) -> f64 {
        self.label_noise
    }

    /// Noise-free label of a full feature vector.
    pub fn rule(&self, x: &[u8]) -> u8 {
        let active = self.target.indices().iter().filter(|&&i| x[i] == 1).count();
        u8::from(active >= self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: Vec<u8>,
    pub y: u8,
    pub t: usize,
}

/// One example per fresh trajectory, at a uniformly drawn time.
pub fn make_labeled_dataset<R: Rng + ?Sized>(spec: &DistributionSpec, task: &DownstreamTask, n: usize, rng: &mut R) -> Result<Vec<LabeledExample>> {
    if n == 0 {
        return Err(Error::Empty("labeled sample"));
    }
    task.target.check_within(spec.d())?;
    Ok((0..n)
        .map(|_| {
            let tr = sample_trajectory(spec, rng);
            let t = rng.random_range(0..spec.tau());
            let x = tr.row(t).to_vec();
            let flip = rng.random_bool(task.label_noise);
            let y = task.rule(&x) ^ u8::from(flip);
            LabeledExample { x, y, t }
        })
        .collect())
}

fn restricted(x: &[u8], subset: &FeatureSubset) -> Vec<f64> {
    subset.indices().iter().map(|&i| x[i] as f64).collect()
}

fn label(y: u8) -> i8 {
    if y == 1 {
        POS
    } else {
        NEG
    }
}

/// Logistic fit on the raw features of `representation`.
pub fn finetune(representation: &FeatureSubset, data: &[LabeledExample], reg: Regularization) -> Result<LinearModel> {
    if data.is_empty() {
        return Err(Error::Empty("labeled sample"));
    }
    let k = representation.len();
    if k > 20 {
        return Err(Error::InvalidArgument(format!("representation of size {k} is too large")));
    }
    let mut counts = vec![0u64; 1 << (k + 1)];
    for ex in data {
        let bits = representation.indices().iter().enumerate().fold(0, |acc, (j, &i)| acc | (usize::from(ex.x[i]) << j));
        counts[bits | (usize::from(ex.y) << k)] += 1;
    }
    let mut ds = Dataset::new(k);
    for (key, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
        let x: Vec<f64> = (0..k).map(|j| ((key >> j) & 1) as f64).collect();
        ds.push(&x, label((key >> k) as u8), c as f64);
    }
    train_logistic(&ds, reg, &SolverOptions::default())
}

fn training_errors(model: &LinearModel, subset: &FeatureSubset, data: &[LabeledExample]) -> usize {
    data.iter().filter(|ex| model.predict(&restricted(&ex.x, subset)) != label(ex.y)).count()
}

/// ERM over subsets and linear models on the labelled sample alone.
pub fn direct_erm(data: &[LabeledExample], d: usize, d0: usize, reg: Regularization) -> Result<(LinearModel, FeatureSubset)> {
    direct_erm_with(data, d, d0, reg, Exec::default())
}

pub fn direct_erm_with(data: &[LabeledExample], d: usize, d0: usize, reg: Regularization, exec: Exec) -> Result<(LinearModel, FeatureSubset)> {
    if data.is_empty() {
        return Err(Error::Empty("labeled sample"));
    }
    let subsets = all_subsets(d, d0, crate::learner::DEFAULT_SUBSET_BUDGET)?;
    let fits = exec.try_map(&subsets, |s| {
        let m = finetune(s, data, reg)?;
        let e = training_errors(&m, s, data);
        Ok::<_, Error>((m, e))
    })?;
    let (best, _) = fits.iter().enumerate().min_by_key(|(i, (_, e))| (*e, *i)).expect("at least one subset");
    Ok((fits[best].0.clone(), subsets[best].clone()))
}

/// Exact risk of a classifier on `subset`, averaged over a uniform time.
/// `classify` receives the subset's values packed as bits (position `j` at bit `j`).
pub fn exact_classifier_risk(
    classify: impl Fn(usize) -> u8,
    subset: &FeatureSubset,
    spec: &DistributionSpec,
    task: &DownstreamTask,
    budget: EntryBudget,
) -> Result<f64> {
    subset.check_within(spec.d())?;
    let v = subset.union(&task.target);
    let u_pos = subset.positions_in(&v).expect("subset of union");
    let s_pos = task.target.positions_in(&v).expect("subset of union");
    let eta = task.label_noise;
    let mut risk = 0.0;
    for t in 0..spec.tau() {
        let marginal = exact_time_marginal(spec, t, &v, budget)?;
        for (bits, &p) in marginal.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let u_bits = u_pos.iter().enumerate().fold(0, |acc, (j, &q)| acc | (((bits >> q) & 1) << j));
            let active = s_pos.iter().filter(|&&q| (bits >> q) & 1 == 1).count();
            let truth = u8::from(active >= task.threshold);
            risk += p * if classify(u_bits) == truth { eta } else { 1.0 - eta };
        }
    }
    Ok(risk / spec.tau() as f64)
}

pub fn exact_downstream_risk(
    model: &LinearModel,
    subset: &FeatureSubset,
    spec: &DistributionSpec,
    task: &DownstreamTask,
    budget: EntryBudget,
) -> Result<f64> {
    let k = subset.len();
    exact_classifier_risk(
        |bits| {
            let x: Vec<f64> = (0..k).map(|j| ((bits >> j) & 1) as f64).collect();
            u8::from(model.predict(&x) == POS)
        },
        subset,
        spec,
        task,
        budget,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    /// Subset from contrastive pretraining, then a fit on the labels.
    Pretrained,
    /// Subset and model both fit on the labels.
    Direct,
}

impl Learner {
    pub fn name(self) -> &'static str {
        match self {
            Learner::Pretrained => "pretrained",
            Learner::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamRow {
    pub n: usize,
    pub replicate: usize,
    pub learner: Learner,
    pub subset: FeatureSubset,
    pub exact_risk: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamSummary {
    pub n: usize,
    pub mean_excess_pretrained: f64,
    pub mean_excess_direct: f64,
    /// Replicates where the pretrained learner has strictly lower excess risk.
    pub pretrained_wins: usize,
    pub ties: usize,
    pub direct_wins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamConfig {
    pub scheme: Scheme,
    pub m_unlabeled: usize,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub d0: usize,
    pub seed: u64,
    pub reg: Regularization,
}

impl DownstreamConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            scheme: Scheme::Ocp,
            m_unlabeled: 16000,
            n_grid: vec![16, 64, 256, 1024, 4096, 16000],
            replicates: 100,
            d0: 4,
            seed,
            reg: Regularization::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamResult {
    pub rows: Vec<DownstreamRow>,
    pub summary: Vec<DownstreamSummary>,
}

/// Excess risks (exact risk minus `label_noise`) of both learners for every
/// `n` and replicate. The pretrained subset of a replicate is shared across
/// the grid; labelled samples are drawn per `(n, replicate)` and shared by the
/// two learners.
pub fn excess_risk_curves(spec: &DistributionSpec, task: &DownstreamTask, config: &DownstreamConfig, exec: Exec) -> Result<DownstreamResult> {
    if config.replicates == 0 || config.n_grid.is_empty() {
        return Err(Error::InvalidArgument("downstream run needs replicates >= 1 and a non-empty n grid".into()));
    }
    if config.m_unlabeled == 0 {
        return Err(Error::InvalidArgument("unlabeled sample size must be positive".into()));
    }
    let budget = EntryBudget::default();
    let search = SubsetSearchOptions { reg: config.reg, exec: Exec::Sequential, ..Default::default() };
    let replicates: Vec<usize> = (0..config.replicates).collect();
    let pretrained = exec.try_map(&replicates, |&r| {
        let mut rng = substream(config.seed, &[tag("downstream-pretrain"), config.scheme.tag(), config.m_unlabeled as u64, r as u64]);
        let pairs = sample_packed_pairs(spec, config.scheme, config.m_unlabeled, &mut rng)?;
        Ok::<_, Error>(erm_subset_search_with(&pairs, spec.d(), config.d0, &search)?.best().subset.clone())
    })?;
    let cells: Vec<(usize, usize)> = config.n_grid.iter().flat_map(|&n| replicates.iter().map(move |&r| (n, r))).collect();
    let eta = task.label_noise;
    let pairs_of_rows = exec.try_map(&cells, |&(n, r)| {
        let mut rng = substream(config.seed, &[tag("downstream-labeled"), n as u64, r as u64]);
        let data = make_labeled_dataset(spec, task, n, &mut rng)?;
        let g = &pretrained[r];
        let pt_model = finetune(g, &data, config.reg)?;
        let pt_risk = exact_downstream_risk(&pt_model, g, spec, task, budget)?;
        let (ds_model, ds_subset) = direct_erm_with(&data, spec.d(), config.d0, config.reg, Exec::Sequential)?;
        let ds_risk = exact_downstream_risk(&ds_model, &ds_subset, spec, task, budget)?;
        Ok::<_, Error>([
            DownstreamRow { n, replicate: r, learner: Learner::Pretrained, subset: g.clone(), exact_risk: pt_risk, excess: pt_risk - eta },
            DownstreamRow { n, replicate: r, learner: Learner::Direct, subset: ds_subset, exact_risk: ds_risk, excess: ds_risk - eta },
        ])
    })?;
    let summary = config
        .n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let block = &pairs_of_rows[i * config.replicates..(i + 1) * config.replicates];
            let reps = config.replicates as f64;
            let mut s = DownstreamSummary {
                n,
                mean_excess_pretrained: block.iter().map(|[p, _]| p.excess).sum::<f64>() / reps,
                mean_excess_direct: block.iter().map(|[_, d]| d.excess).sum::<f64>() / reps,
                pretrained_wins: 0,
                ties: 0,
                direct_wins: 0,
            };
            for [p, d] in block {
                match p.excess.total_cmp(&d.excess) {
                    std::cmp::Ordering::Less => s.pretrained_wins += 1,
                    std::cmp::Ordering::Equal => s.ties += 1,
                    std::cmp::Ordering::Greater => s.direct_wins += 1,
                }
            }
            s
        })
        .collect();
    Ok(DownstreamResult { rows: pairs_of_rows.into_iter().flatten().collect(), summary })
}

/// Columns: n, replicate, learner, subset, exact_risk, excess.
pub fn write_downstream_csv<W: Write>(rows: &[DownstreamRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "replicate", "learner", "subset", "exact_risk", "excess"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.replicate.to_string(),
            r.learner.name().to_string(),
            r.subset.to_string(),
            r.exact_risk.to_string(),
            r.excess.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
