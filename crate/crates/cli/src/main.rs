use std::fs::{self, File};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ordcon::distribution::{sample_trajectory, verify_assumptions, write_trajectories_csv, DistributionSpec, EntryBudget};
use ordcon::downstream::{excess_risk_curves, write_downstream_csv, DownstreamConfig, DownstreamTask};
use ordcon::harness::{run_all, run_sweep_resumable, summarize, write_summary_csv, write_timing_json, Profile, SweepConfig};
use ordcon::learner::{l1_select, recovery_score, write_selection_csv, SelectionCriterion};
use ordcon::oracle::{unlabeled_sample_bound, write_risk_csv, Oracle};
use ordcon::par::{with_threads, Exec};
use ordcon::rng::{substream, tag};
use ordcon::sampling::{sample_packed_pairs, sample_pair, write_pairs_csv, Scheme};
use ordcon::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "ordcon", version, about = "Order-contrastive pre-training on synthetic binary time series")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Preset name (dist1, dist2) or path to a JSON spec.
    #[arg(long, global = true, default_value = "dist1")]
    spec: String,

    #[arg(long, global = true, default_value_t = 20240)]
    seed: u64,

    /// Comma-separated schemes: ocp, pcl, ocp_biased, patient_contrastive.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_scheme)]
    schemes: Vec<Scheme>,

    /// Comma-separated unlabeled sample sizes.
    #[arg(long, global = true, value_delimiter = ',')]
    m_grid: Vec<usize>,

    #[arg(long, global = true)]
    replicates: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Largest number of table entries an exact computation may allocate.
    #[arg(long, global = true, default_value_t = 1 << 26)]
    entry_budget: u128,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum Criterion {
    ZeroOne,
    Loss,
}

impl From<Criterion> for SelectionCriterion {
    fn from(c: Criterion) -> Self {
        match c {
            Criterion::ZeroOne => SelectionCriterion::ZeroOne,
            Criterion::Loss => SelectionCriterion::Loss,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump sampled trajectories and labelled pairs.
    Simulate {
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Subset-recovery sweep over the m grid.
    Sweep {
        #[arg(long)]
        d0: Option<usize>,
        /// Subset ranking: zero-one or loss.
        #[arg(long, value_enum, default_value_t = Criterion::ZeroOne)]
        criterion: Criterion,
    },
    /// Exact risk tables, epsilon0 and the unlabeled sample bound.
    Oracle {
        #[arg(long)]
        d0: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// VC dimension of the downstream class, for the labeled rate (default d0 + 1).
        #[arg(long)]
        vc_f: Option<f64>,
    },
    /// Check the structural assumptions on the exact laws; exits 3 when one fails.
    Verify,
    /// Pretrain-then-finetune against direct ERM on a downstream task.
    Downstream {
        /// Unlabeled pairs used for pretraining.
        #[arg(long, default_value_t = 16000)]
        m: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [16, 64, 256, 1024, 4096, 16000])]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        threshold: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
    },
    /// L1 feature selection on the full pair featurisation.
    Select {
        #[arg(long, default_value_t = 16000)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        target: usize,
        #[arg(long, default_value_t = 1)]
        slack: usize,
    },
    /// Every experiment for both presets, plus a manifest.
    RunAll {
        #[arg(long, default_value = "full")]
        profile: String,
        /// Exit with status 3 when any acceptance check fails.
        #[arg(long)]
        check: bool,
    },
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn spec(&self) -> anyhow::Result<DistributionSpec> {
        Ok(DistributionSpec::load(&self.spec)?)
    }

    fn schemes(&self, default: &[Scheme]) -> Vec<Scheme> {
        if self.schemes.is_empty() {
            default.to_vec()
        } else {
            self.schemes.clone()
        }
    }

    fn budget(&self) -> EntryBudget {
        EntryBudget(self.entry_budget)
    }

    fn exec(&self) -> Exec {
        if self.threads == 1 {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn out_file(&self, name: &str) -> anyhow::Result<File> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        File::create(&path).with_context(|| format!("creating {}", path.display()))
    }
}

fn write_json(c: &Common, name: &str, value: serde_json::Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(&value)? + "\n";
    fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    fs::write(c.out.join(name), &text).with_context(|| format!("writing {name}"))?;
    print!("{text}");
    Ok(())
}

fn simulate(c: &Common, n: usize) -> anyhow::Result<()> {
    let spec = c.spec()?;
    let mut rng = substream(c.seed, &[tag("simulate")]);
    let trajectories: Vec<_> = (0..n).map(|_| sample_trajectory(&spec, &mut rng)).collect();
    write_trajectories_csv(&trajectories, c.out_file("trajectories.csv")?)?;
    for scheme in c.schemes(&Scheme::PRETRAINING) {
        let mut rng = substream(c.seed, &[tag("simulate-pairs"), scheme.tag()]);
        let pairs = trajectories
            .iter()
            .enumerate()
            .map(|(id, tr)| sample_pair(scheme, tr, id, Some(&trajectories), &mut rng))
            .collect::<ordcon::Result<Vec<_>>>()?;
        write_pairs_csv(&pairs, c.out_file(&format!("pairs_{scheme}.csv"))?)?;
    }
    println!("wrote {n} trajectories to {}", c.out.display());
    Ok(())
}

fn sweep(c: &Common, d0: Option<usize>, criterion: Criterion) -> anyhow::Result<()> {
    let spec = c.spec()?;
    let mut config = SweepConfig::full(&c.spec, spec, c.seed);
    config.criterion = criterion.into();
    config.schemes = c.schemes(&Scheme::PRETRAINING);
    if !c.m_grid.is_empty() {
        config.m_grid = c.m_grid.clone();
    }
    if let Some(r) = c.replicates {
        config.replicates = r;
    }
    if let Some(d0) = d0 {
        config.d0 = d0;
    }
    let result = run_sweep_resumable(&config, &c.out, "sweep", c.exec())?;
    let summary = summarize(&result)?;
    write_summary_csv(&summary, c.out_file("summary.csv")?)?;
    write_timing_json(&result.rows, c.out_file("timing.json")?)?;
    println!("scheme\tm\tmean\tsd");
    for s in &summary {
        println!("{}\t{}\t{:.3}\t{:.3}", s.scheme, s.m, s.mean, s.sd);
    }
    Ok(())
}

fn oracle(c: &Common, d0: Option<usize>, delta: f64, vc_f: Option<f64>) -> anyhow::Result<()> {
    let spec = c.spec()?;
    let d0 = d0.unwrap_or(spec.n_drivers());
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} must lie in (0, 1)")).into());
    }
    let mut reports = Vec::new();
    let mut optimal = Vec::new();
    let mut bounds = Vec::new();
    for scheme in c.schemes(&Scheme::PRETRAINING) {
        let o = Oracle::new(scheme, &spec, c.budget())?;
        reports.extend(o.all_risks(d0, c.exec())?);
        optimal.push(o.optimal_subset(d0, c.exec())?);
        let eps0 = o.epsilon_zero(d0, c.exec())?;
        let m_bound = match unlabeled_sample_bound(eps0, spec.d(), d0, delta) {
            Ok(m) => Some(m),
            Err(Error::NotIdentifiable(_)) => None,
            Err(e) => return Err(e.into()),
        };
        bounds.push(ordcon::oracle::BoundReport { scheme, epsilon0: eps0, m_bound, d: spec.d(), d0, delta, vc_f: vc_f.or(Some((d0 + 1) as f64)), log_base: "natural".into() });
    }
    write_risk_csv(&reports, c.out_file("oracle.csv")?)?;
    let truth = spec.driver_subset();
    for o in &optimal {
        eprintln!(
            "{}: optimal {} err {:.6} unique {} recovery {}",
            o.scheme,
            o.subset,
            o.err,
            o.is_unique,
            recovery_score(o.subset.indices(), &truth)
        );
    }
    write_json(c, "bound.json", serde_json::json!({ "optimal": optimal, "bounds": bounds }))
}

fn verify(c: &Common) -> anyhow::Result<bool> {
    let report = verify_assumptions(&c.spec()?, c.budget())?;
    write_json(c, "assumptions.json", serde_json::to_value(&report)?)?;
    Ok(report.all_hold())
}

fn downstream(c: &Common, m: usize, n_grid: Vec<usize>, threshold: usize, noise: f64) -> anyhow::Result<()> {
    let spec = c.spec()?;
    let task = DownstreamTask::new(spec.driver_subset(), threshold, noise)?;
    let mut config = DownstreamConfig::new(c.seed);
    config.scheme = c.schemes(&[Scheme::Ocp])[0];
    config.m_unlabeled = m;
    config.n_grid = n_grid;
    config.d0 = spec.n_drivers();
    if let Some(r) = c.replicates {
        config.replicates = r;
    }
    let result = excess_risk_curves(&spec, &task, &config, c.exec())?;
    write_downstream_csv(&result.rows, c.out_file("downstream.csv")?)?;
    write_json(c, "downstream_summary.json", serde_json::to_value(&result.summary)?)
}

fn select(c: &Common, m: usize, target: usize, slack: usize) -> anyhow::Result<()> {
    let spec = c.spec()?;
    let scheme = c.schemes(&[Scheme::Ocp])[0];
    let mut rng = substream(c.seed, &[tag("select"), scheme.tag(), m as u64]);
    let pairs = sample_packed_pairs(&spec, scheme, m, &mut rng)?;
    let sel = l1_select(&pairs, spec.d(), target, slack)?;
    write_selection_csv(&sel, c.out_file("selection.csv")?)?;
    fs::write(c.out.join("selection_model.json"), sel.model.to_json())?;
    if !sel.reached {
        eprintln!("warning: no penalty gave {target} ± {slack} features; closest count is {}", sel.count());
    }
    println!(
        "lambda {:.6e} selected {:?} recovery {}",
        sel.lambda,
        sel.selected,
        recovery_score(&sel.selected, &spec.driver_subset())
    );
    Ok(())
}

fn run_all_cmd(c: &Common, profile: &str, check: bool) -> anyhow::Result<bool> {
    let mut profile = Profile::by_name(profile)?;
    if !c.m_grid.is_empty() {
        profile.m_grid = c.m_grid.clone();
    }
    if let Some(r) = c.replicates {
        profile.replicates = r;
        profile.downstream_replicates = r;
    }
    let bundle = run_all(&profile, c.seed, &c.out, c.exec())?;
    for ch in &bundle.manifest.checks {
        println!("{} {} ({})", if ch.passed { "PASS" } else { "FAIL" }, ch.name, ch.detail);
    }
    println!("outputs in {} ({:.1}s)", c.out.display(), bundle.manifest.total_seconds);
    Ok(!check || bundle.all_checks_pass())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_budget() => EXIT_BUDGET,
        _ => EXIT_CONFIG,
    }
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    let c = &cli.common;
    match cli.command {
        Command::Simulate { n } => simulate(c, n)?,
        Command::Sweep { d0, criterion } => sweep(c, d0, criterion)?,
        Command::Oracle { d0, delta, vc_f } => oracle(c, d0, delta, vc_f)?,
        Command::Verify => return verify(c),
        Command::Downstream { m, n_grid, threshold, noise } => downstream(c, m, n_grid, threshold, noise)?,
        Command::Select { m, target, slack } => select(c, m, target, slack)?,
        Command::RunAll { profile, check } => return run_all_cmd(c, &profile, check),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    let threads = cli.common.threads;
    match with_threads(threads, move || execute(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
