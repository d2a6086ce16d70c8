//! The generative trajectory model.
//!
//! A trajectory has `tau` time points and `d` binary features split into three
//! roles, laid out in a fixed global order: drivers first, then noisy copies,
//! then background features.
//!
//! * Drivers are time-irreversible. Each activates with probability
//!   `activation_prob` at a time drawn uniformly from `0..tau` and stays on.
//!   Two knobs exist only to build counter-examples: `deactivation_prob` lets
//!   an active driver switch off (breaking irreversibility), and `follows`
//!   locks a driver to an earlier one so both always activate together.
//! * Noisy copies disagree with their parent driver independently at every
//!   time step with probability `epsilon`.
//! * Background features are reversible nuisance processes.

mod assumptions;
mod exact;
mod sample;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use assumptions::{verify_assumptions, A1Witness, A2Witness, A3Witness, AssumptionReport};
pub use exact::{
    exact_pair_distribution, exact_time_marginal, pair_table, EntryBudget, PairDistribution,
    PairTable, TimeMarginal,
};
pub use sample::{periodic_column, sample_trajectory, write_trajectories_csv, Trajectory};

use crate::{Error, FeatureSubset, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverFeature {
    pub activation_prob: f64,
    /// Per-step probability that an active driver switches off for good.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub deactivation_prob: f64,
    /// Index of an earlier driver whose column this driver copies exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follows: Option<usize>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl DriverFeature {
    pub fn new(activation_prob: f64) -> Self {
        Self { activation_prob, deactivation_prob: 0.0, follows: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyFeature {
    /// Driver index (0-based among drivers).
    pub parent: usize,
    /// Per-step disagreement rate with the parent.
    pub epsilon: f64,
}

/// Parameters of a general two-state Markov chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoState {
    /// `P[X^0 = 1]`.
    pub init: f64,
    /// `P[X^{t+1} = 1 | X^t = 0]`.
    pub p01: f64,
    /// `P[X^{t+1} = 0 | X^t = 1]`.
    pub p10: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "snake_case")]
pub enum BackgroundFeature {
    /// Alternates every step from a uniform initial state.
    Periodic,
    /// Uniform initial state; the value repeats with the given probability.
    MarkovStay(f64),
    /// Independent Bernoulli draws at every step.
    IidBernoulli(f64),
    /// Arbitrary two-state chain. Not reversible unless started at its
    /// stationary law; used to build assumption violations.
    TwoState(TwoState),
}

/// Role of a feature in the global index order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureRole {
    Driver(usize),
    Noisy { which: usize, parent: usize },
    Background(usize),
}

/// One independent block of features: a driver (plus drivers locked to it
/// and all their noisy copies), or a single background feature.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Group {
    Driver {
        root: usize,
        /// Global indices of the root and its followers.
        members: Vec<usize>,
        /// (global index, epsilon) of each noisy copy of any member.
        noisy: Vec<(usize, f64)>,
    },
    Background { feature: usize, kind: BackgroundFeature },
}

impl Group {
    pub(crate) fn features(&self) -> Vec<usize> {
        match self {
            Group::Driver { members, noisy, .. } => {
                members.iter().copied().chain(noisy.iter().map(|&(j, _)| j)).collect()
            }
            Group::Background { feature, .. } => vec![*feature],
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    tau: usize,
    drivers: Vec<DriverFeature>,
    #[serde(default)]
    noisy: Vec<NoisyFeature>,
    #[serde(default)]
    background: Vec<BackgroundFeature>,
}

/// Full generative description of a trajectory distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct DistributionSpec {
    tau: usize,
    drivers: Vec<DriverFeature>,
    noisy: Vec<NoisyFeature>,
    background: Vec<BackgroundFeature>,
}

impl TryFrom<RawSpec> for DistributionSpec {
    type Error = Error;
    fn try_from(r: RawSpec) -> Result<Self> {
        Self::new(r.tau, r.drivers, r.noisy, r.background)
    }
}

impl From<DistributionSpec> for RawSpec {
    fn from(s: DistributionSpec) -> RawSpec {
        RawSpec { tau: s.tau, drivers: s.drivers, noisy: s.noisy, background: s.background }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} = {p} is not a probability")))
    }
}

pub const PRESETS: [&str; 2] = ["dist1", "dist2"];

impl DistributionSpec {
    pub fn new(
        tau: usize,
        drivers: Vec<DriverFeature>,
        noisy: Vec<NoisyFeature>,
        background: Vec<BackgroundFeature>,
    ) -> Result<Self> {
        if tau < 2 {
            return Err(Error::InvalidSpec(format!("tau must be at least 2, got {tau}")));
        }
        if drivers.is_empty() {
            return Err(Error::InvalidSpec("at least one driver is required".into()));
        }
        for (i, dr) in drivers.iter().enumerate() {
            check_prob("activation_prob", dr.activation_prob)?;
            check_prob("deactivation_prob", dr.deactivation_prob)?;
            if let Some(leader) = dr.follows {
                if leader >= i {
                    return Err(Error::InvalidSpec(format!(
                        "driver {i} follows driver {leader}, which is not an earlier driver"
                    )));
                }
                if drivers[leader].follows.is_some() {
                    return Err(Error::InvalidSpec(format!(
                        "driver {i} follows driver {leader}, which itself follows another driver"
                    )));
                }
            }
        }
        for nf in &noisy {
            if nf.parent >= drivers.len() {
                return Err(Error::InvalidSpec(format!(
                    "noisy feature parent {} is not a driver index",
                    nf.parent
                )));
            }
            check_prob("epsilon", nf.epsilon)?;
        }
        for bg in &background {
            match *bg {
                BackgroundFeature::Periodic => {}
                BackgroundFeature::MarkovStay(p) => check_prob("p_stay", p)?,
                BackgroundFeature::IidBernoulli(p) => check_prob("p", p)?,
                BackgroundFeature::TwoState(ts) => {
                    check_prob("init", ts.init)?;
                    check_prob("p01", ts.p01)?;
                    check_prob("p10", ts.p10)?;
                }
            }
        }
        Ok(Self { tau, drivers, noisy, background })
    }

    /// Trajectories of length 10 with 8 features: four drivers activating with
    /// probabilities (0.4, 0.4, 0.6, 0.6), noisy copies of the first three
    /// drivers with disagreement rate 0.7, and one period-1 background feature.
    pub fn dist1() -> Self {
        Self::new(
            10,
            [0.4, 0.4, 0.6, 0.6].map(DriverFeature::new).to_vec(),
            (0..3).map(|parent| NoisyFeature { parent, epsilon: 0.7 }).collect(),
            vec![BackgroundFeature::Periodic],
        )
        .expect("dist1 preset is valid")
    }

    /// Same drivers as [`dist1`](Self::dist1); noisy copies of the first two
    /// drivers with disagreement rate 0.55; one Markov background feature that
    /// repeats its value with probability 0.3. Seven features in total.
    pub fn dist2() -> Self {
        Self::new(
            10,
            [0.4, 0.4, 0.6, 0.6].map(DriverFeature::new).to_vec(),
            (0..2).map(|parent| NoisyFeature { parent, epsilon: 0.55 }).collect(),
            vec![BackgroundFeature::MarkovStay(0.3)],
        )
        .expect("dist2 preset is valid")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "dist1" => Some(Self::dist1()),
            "dist2" => Some(Self::dist2()),
            _ => None,
        }
    }

    /// Resolves a preset name or reads a JSON file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(s) = Self::preset(name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(Error::InvalidSpec(format!(
                "'{name_or_path}' is neither a preset ({}) nor an existing file",
                PRESETS.join(", ")
            )));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            if e.is_data() || e.is_syntax() || e.is_eof() {
                Error::InvalidSpec(e.to_string())
            } else {
                Error::Json(e)
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn d(&self) -> usize {
        self.drivers.len() + self.noisy.len() + self.background.len()
    }

    pub fn drivers(&self) -> &[DriverFeature] {
        &self.drivers
    }

    pub fn noisy(&self) -> &[NoisyFeature] {
        &self.noisy
    }

    pub fn background(&self) -> &[BackgroundFeature] {
        &self.background
    }

    pub fn n_drivers(&self) -> usize {
        self.drivers.len()
    }

    /// The driver set `S` as global feature indices.
    pub fn driver_subset(&self) -> FeatureSubset {
        FeatureSubset::all(self.drivers.len())
    }

    pub fn noisy_index(&self, which: usize) -> usize {
        self.drivers.len() + which
    }

    pub fn background_index(&self, which: usize) -> usize {
        self.drivers.len() + self.noisy.len() + which
    }

    pub fn role(&self, feature: usize) -> FeatureRole {
        let nd = self.drivers.len();
        let nn = self.noisy.len();
        if feature < nd {
            FeatureRole::Driver(feature)
        } else if feature < nd + nn {
            let which = feature - nd;
            FeatureRole::Noisy { which, parent: self.noisy[which].parent }
        } else {
            FeatureRole::Background(feature - nd - nn)
        }
    }

    /// Root driver of driver `i` (itself unless it follows another driver).
    pub(crate) fn root_of(&self, i: usize) -> usize {
        self.drivers[i].follows.unwrap_or(i)
    }

    pub(crate) fn groups(&self) -> Vec<Group> {
        let mut groups = Vec::new();
        for root in (0..self.drivers.len()).filter(|&i| self.drivers[i].follows.is_none()) {
            let members: Vec<usize> =
                (0..self.drivers.len()).filter(|&i| self.root_of(i) == root).collect();
            let noisy = self
                .noisy
                .iter()
                .enumerate()
                .filter(|(_, nf)| self.root_of(nf.parent) == root)
                .map(|(j, nf)| (self.noisy_index(j), nf.epsilon))
                .collect();
            groups.push(Group::Driver { root, members, noisy });
        }
        for (j, &kind) in self.background.iter().enumerate() {
            groups.push(Group::Background { feature: self.background_index(j), kind });
        }
        groups
    }

    /// Returns a copy with one driver replaced (used to inject violations).
    pub fn with_driver(&self, i: usize, driver: DriverFeature) -> Result<Self> {
        let mut drivers = self.drivers.clone();
        *drivers
            .get_mut(i)
            .ok_or_else(|| Error::InvalidArgument(format!("no driver {i}")))? = driver;
        Self::new(self.tau, drivers, self.noisy.clone(), self.background.clone())
    }

    /// Returns a copy with one background feature replaced.
    pub fn with_background(&self, j: usize, kind: BackgroundFeature) -> Result<Self> {
        let mut background = self.background.clone();
        *background
            .get_mut(j)
            .ok_or_else(|| Error::InvalidArgument(format!("no background feature {j}")))? = kind;
        Self::new(self.tau, self.drivers.clone(), self.noisy.clone(), background)
    }
}
