//! Recovery sweeps, summaries and the bundled experiment run.
//!
//! Every `(scheme, m, replicate)` cell draws from its own substream, so the
//! rows do not depend on scheduling or on which other cells are present. CSV
//! outputs hold only deterministic columns; timings go to JSON files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::distribution::{verify_assumptions, AssumptionReport, DistributionSpec, EntryBudget};
use crate::downstream::{excess_risk_curves, write_downstream_csv, DownstreamConfig, DownstreamSummary, DownstreamTask};
use crate::learner::{erm_subset_search_with, recovery_score, Regularization, SelectionCriterion, SubsetSearchOptions};
use crate::oracle::{unlabeled_sample_bound, write_risk_csv, BoundReport, OptimalSubset, Oracle, RiskReport};
use crate::par::Exec;
use crate::rng::{substream, tag};
use crate::sampling::{sample_packed_pairs, Scheme};
use crate::{Error, FeatureSubset, Result};

/// Unlabeled sample sizes of the recovery experiment.
pub const FULL_M_GRID: [usize; 11] = [50, 100, 200, 400, 600, 800, 1000, 2000, 4000, 8000, 16000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub spec_name: String,
    pub spec: DistributionSpec,
    pub schemes: Vec<Scheme>,
    pub m_grid: Vec<usize>,
    pub replicates: usize,
    pub d0: usize,
    pub master_seed: u64,
    pub reg: Regularization,
    #[serde(default)]
    pub criterion: SelectionCriterion,
}

impl SweepConfig {
    /// Full grid, 100 replicates, the three pretraining schemes, `d0 = |S|`.
    pub fn full(spec_name: &str, spec: DistributionSpec, master_seed: u64) -> Self {
        Self {
            spec_name: spec_name.to_string(),
            d0: spec.n_drivers(),
            spec,
            schemes: Scheme::PRETRAINING.to_vec(),
            m_grid: FULL_M_GRID.to_vec(),
            replicates: 100,
            master_seed,
            reg: Regularization::default(),
            criterion: SelectionCriterion::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::InvalidArgument("no schemes given".into()));
        }
        if self.m_grid.is_empty() || self.m_grid.windows(2).any(|w| w[0] >= w[1]) || self.m_grid[0] == 0 {
            return Err(Error::InvalidArgument("m grid must be non-empty, positive and strictly ascending".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.d0 == 0 || self.d0 > self.spec.d() {
            return Err(Error::InvalidArgument(format!("d0 = {} outside 1..={}", self.d0, self.spec.d())));
        }
        self.reg.validate()
    }

    fn blocks(&self) -> Vec<(Scheme, usize)> {
        self.schemes.iter().flat_map(|&s| self.m_grid.iter().map(move |&m| (s, m))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub m: usize,
    pub replicate: usize,
    pub recovered: usize,
    pub subset: FeatureSubset,
    /// Seconds spent on the cell; not written to the rows CSV.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Runs one cell: sample `m` pairs, search subsets, score the winner.
pub fn run_cell(config: &SweepConfig, scheme: Scheme, m: usize, replicate: usize) -> Result<SweepRow> {
    let start = Instant::now();
    let mut rng = substream(config.master_seed, &[tag("sweep"), scheme.tag(), m as u64, replicate as u64]);
    let pairs = sample_packed_pairs(&config.spec, scheme, m, &mut rng)?;
    let opts = SubsetSearchOptions { reg: config.reg, criterion: config.criterion, exec: Exec::Sequential, ..Default::default() };
    let search = erm_subset_search_with(&pairs, config.spec.d(), config.d0, &opts)?;
    let subset = search.best().subset.clone();
    Ok(SweepRow {
        scheme,
        m,
        replicate,
        recovered: recovery_score(subset.indices(), &config.spec.driver_subset()),
        subset,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn run_block(config: &SweepConfig, scheme: Scheme, m: usize, exec: Exec) -> Result<Vec<SweepRow>> {
    let reps: Vec<usize> = (0..config.replicates).collect();
    exec.try_map(&reps, |&r| run_cell(config, scheme, m, r))
}

pub fn run_sweep(config: &SweepConfig, exec: Exec) -> Result<SweepResult> {
    config.validate()?;
    let mut rows = Vec::new();
    for (scheme, m) in config.blocks() {
        rows.extend(run_block(config, scheme, m, exec)?);
    }
    Ok(SweepResult { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ResumeMarker {
    config: SweepConfig,
    completed_blocks: usize,
}

/// File names used by [`run_sweep_resumable`] for a given stem.
pub fn sweep_paths(dir: &Path, stem: &str) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("{stem}.csv")),
        dir.join(format!("{stem}.partial.csv")),
        dir.join(format!("{stem}.resume.json")),
    )
}

/// Runs a sweep block by block, appending finished `(scheme, m)` blocks to
/// `<stem>.partial.csv` and recording progress in `<stem>.resume.json`. A
/// later call with the same config picks up after the last finished block.
/// On success the rows are written to `<stem>.csv` and the partial files are
/// removed.
pub fn run_sweep_resumable(config: &SweepConfig, dir: &Path, stem: &str, exec: Exec) -> Result<SweepResult> {
    config.validate()?;
    fs::create_dir_all(dir)?;
    let (final_path, partial_path, marker_path) = sweep_paths(dir, stem);
    let mut rows = Vec::new();
    let mut done = 0;
    if let Ok(text) = fs::read_to_string(&marker_path) {
        if let Ok(marker) = serde_json::from_str::<ResumeMarker>(&text) {
            if marker.config == *config {
                rows = read_sweep_csv(fs::File::open(&partial_path)?)?;
                done = marker.completed_blocks;
            }
        }
    }
    let blocks = config.blocks();
    if done == 0 {
        write_sweep_csv(&[], fs::File::create(&partial_path)?)?;
    }
    for (i, &(scheme, m)) in blocks.iter().enumerate().skip(done) {
        let block = run_block(config, scheme, m, exec)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(fs::OpenOptions::new().append(true).open(&partial_path)?);
        for r in &block {
            w.serialize(CsvRow::from(r))?;
        }
        w.flush()?;
        rows.extend(block);
        let marker = ResumeMarker { config: config.clone(), completed_blocks: i + 1 };
        fs::write(&marker_path, serde_json::to_string_pretty(&marker)?)?;
    }
    write_sweep_csv(&rows, fs::File::create(&final_path)?)?;
    fs::remove_file(&partial_path).ok();
    fs::remove_file(&marker_path).ok();
    Ok(SweepResult { rows })
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    scheme: Scheme,
    m: usize,
    replicate: usize,
    recovered: usize,
    subset: String,
}

impl From<&SweepRow> for CsvRow {
    fn from(r: &SweepRow) -> Self {
        Self { scheme: r.scheme, m: r.m, replicate: r.replicate, recovered: r.recovered, subset: r.subset.to_string() }
    }
}

/// Columns: scheme, m, replicate, recovered, subset (indices joined by `;`).
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["scheme", "m", "replicate", "recovered", "subset"])?;
    for r in rows {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(reader: R) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            let indices = if row.subset.is_empty() {
                Vec::new()
            } else {
                row.subset
                    .split(';')
                    .map(|s| s.parse::<usize>().map_err(|e| Error::InvalidArgument(format!("bad subset '{}': {e}", row.subset))))
                    .collect::<Result<Vec<_>>>()?
            };
            Ok(SweepRow {
                scheme: row.scheme,
                m: row.m,
                replicate: row.replicate,
                recovered: row.recovered,
                subset: FeatureSubset::new(indices)?,
                wall_time: 0.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub scheme: Scheme,
    pub m: usize,
    pub replicate: usize,
    pub wall_time_s: f64,
}

/// Per-cell wall times as a JSON array.
pub fn write_timing_json<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let cells: Vec<CellTiming> =
        rows.iter().map(|r| CellTiming { scheme: r.scheme, m: r.m, replicate: r.replicate, wall_time_s: r.wall_time }).collect();
    serde_json::to_writer_pretty(writer, &cells)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub m: usize,
    pub replicates: usize,
    pub mean: f64,
    /// Population standard deviation (divides by the replicate count).
    pub sd: f64,
    /// Most frequent selected subset; ties go to the lexicographically smallest.
    pub modal_subset: FeatureSubset,
    pub modal_count: usize,
}

/// Mean and standard deviation of recovery per `(scheme, m)`, in order of
/// first appearance.
pub fn summarize(result: &SweepResult) -> Result<Vec<SummaryRow>> {
    if result.rows.is_empty() {
        return Err(Error::Empty("sweep result"));
    }
    let mut keys: Vec<(Scheme, usize)> = Vec::new();
    for r in &result.rows {
        if !keys.contains(&(r.scheme, r.m)) {
            keys.push((r.scheme, r.m));
        }
    }
    Ok(keys
        .into_iter()
        .map(|(scheme, m)| {
            let group: Vec<&SweepRow> = result.rows.iter().filter(|r| r.scheme == scheme && r.m == m).collect();
            let n = group.len() as f64;
            let mean = group.iter().map(|r| r.recovered as f64).sum::<f64>() / n;
            let var = group.iter().map(|r| (r.recovered as f64 - mean).powi(2)).sum::<f64>() / n;
            let mut subsets: Vec<&FeatureSubset> = group.iter().map(|r| &r.subset).collect();
            subsets.sort();
            let mut modal = (subsets[0], 0usize);
            let mut i = 0;
            while i < subsets.len() {
                let j = subsets[i..].iter().take_while(|s| **s == subsets[i]).count();
                if j > modal.1 {
                    modal = (subsets[i], j);
                }
                i += j;
            }
            SummaryRow { scheme, m, replicates: group.len(), mean, sd: var.sqrt(), modal_subset: modal.0.clone(), modal_count: modal.1 }
        })
        .collect())
}

/// Columns: scheme, m, replicates, mean_recovery, sd_recovery, modal_subset, modal_count.
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scheme", "m", "replicates", "mean_recovery", "sd_recovery", "modal_subset", "modal_count"])?;
    for r in rows {
        w.write_record([
            r.scheme.to_string(),
            r.m.to_string(),
            r.replicates.to_string(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.modal_subset.to_string(),
            r.modal_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; `None` when either
/// side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

/// Sizes of the bundled run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: String,
    pub m_grid: Vec<usize>,
    pub replicates: usize,
    pub downstream_m: usize,
    pub downstream_n_grid: Vec<usize>,
    pub downstream_replicates: usize,
    pub delta: f64,
}

impl Profile {
    pub fn full() -> Self {
        Self {
            name: "full".into(),
            m_grid: FULL_M_GRID.to_vec(),
            replicates: 100,
            downstream_m: 16000,
            downstream_n_grid: vec![16, 64, 256, 1024, 4096, 16000],
            downstream_replicates: 100,
            delta: 0.05,
        }
    }

    /// A few minutes' worth of the same pipeline.
    pub fn quick() -> Self {
        Self {
            name: "quick".into(),
            m_grid: vec![50, 400, 2000, 8000],
            replicates: 4,
            downstream_m: 4000,
            downstream_n_grid: vec![16, 1024],
            downstream_replicates: 4,
            delta: 0.05,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::full()),
            "quick" => Ok(Self::quick()),
            other => Err(Error::InvalidArgument(format!("unknown profile '{other}' (expected full or quick)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub optimal: Vec<OptimalSubset>,
    pub bounds: Vec<BoundReport>,
    /// Largest `|err(U) - (err(S) + E[m_U])|` over all subsets and both OCP variants.
    pub max_decomposition_residual: f64,
    /// Largest gap between `err(S)` and its closed form.
    pub max_closed_form_gap: f64,
    /// Smallest `E[m_U]` over subsets missing a driver.
    pub min_m_expectation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetBundle {
    pub name: String,
    pub assumptions: AssumptionReport,
    pub oracle: OracleSummary,
    pub sweep_summary: Vec<SummaryRow>,
    pub downstream: Option<Vec<DownstreamSummary>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub profile: Profile,
    pub master_seed: u64,
    pub threads: usize,
    pub parallel: bool,
    pub files: Vec<String>,
    pub stage_seconds: Vec<(String, f64)>,
    pub total_seconds: f64,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub presets: Vec<PresetBundle>,
    pub manifest: Manifest,
}

impl Bundle {
    pub fn all_checks_pass(&self) -> bool {
        self.manifest.checks.iter().all(|c| c.passed)
    }
}

/// Oracle tables for the three pretraining schemes.
pub fn oracle_tables(spec: &DistributionSpec, d0: usize, delta: f64, exec: Exec) -> Result<(Vec<RiskReport>, OracleSummary)> {
    let mut reports = Vec::new();
    let mut optimal = Vec::new();
    let mut bounds = Vec::new();
    let mut max_res: f64 = 0.0;
    let mut max_closed: f64 = 0.0;
    let mut min_m = f64::INFINITY;
    for scheme in Scheme::PRETRAINING {
        let oracle = Oracle::new(scheme, spec, EntryBudget::default())?;
        let risks = oracle.all_risks(d0, exec)?;
        let subsets: Vec<FeatureSubset> = risks.iter().map(|r| r.subset.clone()).collect();
        let errs: Vec<f64> = risks.iter().map(|r| r.err_u).collect();
        optimal.push(optimal_of(scheme, &subsets, &errs));
        let eps0 = risks.iter().filter(|r| !r.subset.is_superset_of(oracle.truth())).map(|r| r.excess).fold(f64::INFINITY, f64::min);
        if eps0.is_finite() {
            bounds.push(BoundReport {
                scheme,
                epsilon0: eps0,
                m_bound: unlabeled_sample_bound(eps0, spec.d(), d0, delta).ok(),
                d: spec.d(),
                d0,
                delta,
                vc_f: Some((d0 + 1) as f64),
                log_base: "natural".into(),
            });
        }
        for r in &risks {
            if let Some(res) = r.decomposition_residual {
                max_res = max_res.max(res.abs());
            }
            if let Some(m) = r.m_expectation {
                if !r.subset.is_superset_of(oracle.truth()) {
                    min_m = min_m.min(m);
                }
            }
        }
        if let Some(closed) = oracle.err_s_closed_form()? {
            max_closed = max_closed.max((closed - oracle.err_s()).abs());
        }
        reports.extend(risks);
    }
    Ok((reports, OracleSummary { optimal, bounds, max_decomposition_residual: max_res, max_closed_form_gap: max_closed, min_m_expectation: min_m }))
}

fn optimal_of(scheme: Scheme, subsets: &[FeatureSubset], errs: &[f64]) -> OptimalSubset {
    let mut order: Vec<usize> = (0..subsets.len()).collect();
    order.sort_by(|&a, &b| errs[a].total_cmp(&errs[b]).then(a.cmp(&b)));
    let gap = order.get(1).map(|&i| errs[i] - errs[order[0]]);
    OptimalSubset {
        scheme,
        subset: subsets[order[0]].clone(),
        err: errs[order[0]],
        is_unique: gap.is_none_or(|g| g > crate::oracle::UNIQUENESS_TOL),
        gap_to_second: gap,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Runs everything for both presets and writes CSV/JSON outputs plus a
/// manifest into `out`. The downstream comparison runs on `dist1`.
pub fn run_all(profile: &Profile, master_seed: u64, out: &Path, exec: Exec) -> Result<Bundle> {
    let total = Instant::now();
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut stages = Vec::new();
    let mut presets = Vec::new();
    let mut stage = |name: String, t: Instant| stages.push((name, t.elapsed().as_secs_f64()));
    for name in crate::distribution::PRESETS {
        let spec = DistributionSpec::preset(name).expect("built-in preset");
        let d0 = spec.n_drivers();

        let t = Instant::now();
        let assumptions = verify_assumptions(&spec, EntryBudget::default())?;
        write_json(&out.join(format!("assumptions_{name}.json")), &assumptions)?;
        files.push(format!("assumptions_{name}.json"));
        stage(format!("verify_{name}"), t);

        let t = Instant::now();
        let (reports, oracle) = oracle_tables(&spec, d0, profile.delta, exec)?;
        write_risk_csv(&reports, fs::File::create(out.join(format!("oracle_{name}.csv")))?)?;
        write_json(&out.join(format!("oracle_{name}.json")), &oracle)?;
        files.extend([format!("oracle_{name}.csv"), format!("oracle_{name}.json")]);
        stage(format!("oracle_{name}"), t);

        let t = Instant::now();
        let mut config = SweepConfig::full(name, spec.clone(), master_seed);
        config.m_grid = profile.m_grid.clone();
        config.replicates = profile.replicates;
        let stem = format!("sweep_{name}");
        let result = run_sweep_resumable(&config, out, &stem, exec)?;
        let summary = summarize(&result)?;
        write_summary_csv(&summary, fs::File::create(out.join(format!("summary_{name}.csv")))?)?;
        write_timing_json(&result.rows, fs::File::create(out.join(format!("timing_{name}.json")))?)?;
        files.extend([format!("{stem}.csv"), format!("summary_{name}.csv"), format!("timing_{name}.json")]);
        stage(format!("sweep_{name}"), t);

        let downstream = if name == "dist1" {
            let t = Instant::now();
            let task = DownstreamTask::for_spec(&spec)?;
            let mut dc = DownstreamConfig::new(master_seed);
            dc.m_unlabeled = profile.downstream_m;
            dc.n_grid = profile.downstream_n_grid.clone();
            dc.replicates = profile.downstream_replicates;
            dc.d0 = d0;
            let res = excess_risk_curves(&spec, &task, &dc, exec)?;
            write_downstream_csv(&res.rows, fs::File::create(out.join(format!("downstream_{name}.csv")))?)?;
            write_json(&out.join(format!("downstream_summary_{name}.json")), &res.summary)?;
            files.extend([format!("downstream_{name}.csv"), format!("downstream_summary_{name}.json")]);
            stage(format!("downstream_{name}"), t);
            Some(res.summary)
        } else {
            None
        };
        presets.push(PresetBundle { name: name.to_string(), assumptions, oracle, sweep_summary: summary, downstream });
    }
    let checks = checks(&presets, profile);
    let manifest = Manifest {
        tool: "ordcon".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        profile: profile.clone(),
        master_seed,
        threads: current_threads(exec),
        parallel: exec.is_parallel(),
        files,
        stage_seconds: stages,
        total_seconds: total.elapsed().as_secs_f64(),
        checks,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(Bundle { presets, manifest })
}

fn current_threads(exec: Exec) -> usize {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return rayon::current_num_threads();
    }
    let _ = exec;
    1
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.into(), passed, detail }
}

fn summary_at(rows: &[SummaryRow], scheme: Scheme, m: usize) -> Option<&SummaryRow> {
    rows.iter().find(|r| r.scheme == scheme && r.m == m)
}

/// Pass/fail checks over a finished bundle. Sample-size dependent checks are
/// only evaluated when the profile covers the sizes they refer to.
pub fn checks(presets: &[PresetBundle], profile: &Profile) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for p in presets {
        let truth_ok = |o: &OptimalSubset| o.subset.indices() == [0, 1, 2, 3] && o.gap_to_second.is_some_and(|g| g > 1e-6);
        for o in p.oracle.optimal.iter().filter(|o| o.scheme != Scheme::Pcl) {
            out.push(check(
                &format!("oracle_unique_{}_{}", p.name, o.scheme),
                truth_ok(o),
                format!("argmin {} gap {:?}", o.subset, o.gap_to_second),
            ));
        }
        out.push(check(
            &format!("assumptions_{}", p.name),
            p.assumptions.all_hold(),
            format!("{:?}", (p.assumptions.a1_irreversible, p.assumptions.a2_reversible, p.assumptions.a3_lone_activation)),
        ));
        out.push(check(
            &format!("risk_identities_{}", p.name),
            p.oracle.max_decomposition_residual <= 1e-12 && p.oracle.max_closed_form_gap <= 1e-12 && p.oracle.min_m_expectation > 0.0,
            format!(
                "residual {:e} closed-form gap {:e} min E[m] {:e}",
                p.oracle.max_decomposition_residual, p.oracle.max_closed_form_gap, p.oracle.min_m_expectation
            ),
        ));
        let eps = |s: Scheme| p.oracle.bounds.iter().find(|b| b.scheme == s).map(|b| b.epsilon0);
        if let (Some(a), Some(b)) = (eps(Scheme::Ocp), eps(Scheme::OcpBiased)) {
            out.push(check(&format!("epsilon0_order_{}", p.name), a > b, format!("ocp {a} ocp_biased {b}")));
        }
    }
    if let Some(d1) = presets.iter().find(|p| p.name == "dist1") {
        if let Some(pcl) = d1.oracle.optimal.iter().find(|o| o.scheme == Scheme::Pcl) {
            let periodic = 7;
            let rec = recovery_score(pcl.subset.indices(), &FeatureSubset::new(vec![0, 1, 2, 3]).expect("valid"));
            out.push(check("pcl_divergence_dist1", pcl.subset.contains(periodic) && rec <= 3, format!("argmin {} recovery {rec}", pcl.subset)));
        }
    }
    let m_max = 16000;
    let full_grid = profile.m_grid == FULL_M_GRID && profile.replicates == 100;
    if full_grid {
        if let Some(d1) = presets.iter().find(|p| p.name == "dist1") {
            let ocp = summary_at(&d1.sweep_summary, Scheme::Ocp, m_max).map_or(0.0, |r| r.mean);
            let pcl = summary_at(&d1.sweep_summary, Scheme::Pcl, m_max).map_or(f64::INFINITY, |r| r.mean);
            out.push(check("recovery_dist1", ocp >= 3.95 && pcl <= 3.1, format!("ocp {ocp} pcl {pcl} at m={m_max}")));
        }
        if let Some(d2) = presets.iter().find(|p| p.name == "dist2") {
            let s = &d2.sweep_summary;
            let mean = |sc: Scheme, m: usize| summary_at(s, sc, m).map_or(f64::NAN, |r| r.mean);
            let top = Scheme::PRETRAINING.iter().all(|&sc| mean(sc, m_max) >= 3.9);
            let ordered = profile.m_grid.iter().all(|&m| mean(Scheme::Ocp, m) >= mean(Scheme::OcpBiased, m) && mean(Scheme::OcpBiased, m) >= mean(Scheme::Pcl, m) - 0.05);
            let gap = profile.m_grid.iter().any(|&m| m != m_max && mean(Scheme::Ocp, m) - mean(Scheme::Pcl, m) >= 0.2);
            out.push(check("recovery_dist2", top && ordered && gap, format!("top {top} ordered {ordered} gap {gap}")));
        }
    }
    if let Some(ds) = presets.iter().find_map(|p| p.downstream.as_ref()) {
        let at = |n: usize| ds.iter().find(|s| s.n == n);
        if let (Some(small), Some(large)) = (at(16), at(16000)) {
            if profile.downstream_replicates == 100 && profile.downstream_m == 16000 {
                let pass = small.mean_excess_pretrained <= small.mean_excess_direct
                    && small.pretrained_wins + small.ties >= 80
                    && large.mean_excess_pretrained <= 0.01
                    && large.mean_excess_direct <= 0.01;
                out.push(check("downstream_dist1", pass, format!("{small:?} {large:?}")));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(scheme: Scheme, m: usize, replicate: usize, recovered: usize) -> SweepRow {
        SweepRow { scheme, m, replicate, recovered, subset: FeatureSubset::new(vec![0, 1]).unwrap(), wall_time: 0.0 }
    }

    #[test]
    fn summary_examples() {
        let all_four = SweepResult { rows: (0..5).map(|r| row(Scheme::Ocp, 50, r, 4)).collect() };
        let s = summarize(&all_four).unwrap();
        assert_eq!((s[0].mean, s[0].sd), (4.0, 0.0));
        let mixed = SweepResult { rows: vec![row(Scheme::Ocp, 50, 0, 3), row(Scheme::Ocp, 50, 1, 4)] };
        let s = summarize(&mixed).unwrap();
        assert_eq!((s[0].mean, s[0].sd), (3.5, 0.5));
        assert!(summarize(&SweepResult::default()).is_err());
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[2.0, 4.0, 8.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 1.0]), None);
    }

    #[test]
    fn config_validation() {
        let mut c = SweepConfig::full("dist1", DistributionSpec::dist1(), 1);
        assert!(c.validate().is_ok());
        c.m_grid = vec![100, 50];
        assert!(c.validate().is_err());
        c.m_grid = vec![50];
        c.replicates = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn single_cell_per_scheme() {
        let mut c = SweepConfig::full("dist2", DistributionSpec::dist2(), 3);
        c.m_grid = vec![50];
        c.replicates = 1;
        let r = run_sweep(&c, Exec::Sequential).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows.iter().all(|row| row.recovered <= 4));
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![row(Scheme::Pcl, 100, 2, 1)];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "scheme,m,replicate,recovered,subset\npcl,100,2,1,0;1\n");
        assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), rows);
    }
}
