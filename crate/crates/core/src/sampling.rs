//! Contrastive pair sampling.
//!
//! Every scheme draws the label first, uniformly from {-1, +1}. Positives are
//! always a uniformly chosen consecutive pair `(T, T+1)` in the correct order;
//! the schemes differ only in their negatives:
//!
//! | scheme                | negative windows                                       |
//! |-----------------------|--------------------------------------------------------|
//! | OCP                   | `(T+1, T)`                                             |
//! | PCL                   | uniform over ordered pairs of distinct indices         |
//! | OCP-biased            | `(T, T+1)` or `(T+1, T)` with equal probability        |
//! | patient-contrastive   | one window from this trajectory, one from another      |
//!
//! PCL negatives are not filtered, so some are consecutive and correctly
//! ordered.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{pair_table, sample_trajectory, DistributionSpec, EntryBudget, PairTable, Trajectory};
use crate::{Error, FeatureSubset, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Ocp,
    Pcl,
    OcpBiased,
    PatientContrastive,
}

impl Scheme {
    /// The three schemes that have a single-trajectory population law.
    pub const PRETRAINING: [Scheme; 3] = [Scheme::Ocp, Scheme::Pcl, Scheme::OcpBiased];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Ocp => "ocp",
            Scheme::Pcl => "pcl",
            Scheme::OcpBiased => "ocp_biased",
            Scheme::PatientContrastive => "patient_contrastive",
        }
    }

    /// Stable tag for seeding substreams.
    pub fn tag(self) -> u64 {
        crate::rng::tag(self.name())
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ocp" => Ok(Scheme::Ocp),
            "pcl" => Ok(Scheme::Pcl),
            "ocp_biased" | "ocpbiased" => Ok(Scheme::OcpBiased),
            "patient_contrastive" | "patientcontrastive" | "patient" => Ok(Scheme::PatientContrastive),
            other => Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Positive and negative labels of the contrastive task.
pub const POS: i8 = 1;
pub const NEG: i8 = -1;

/// One contrastive sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub x_first: Vec<u8>,
    pub x_second: Vec<u8>,
    pub w_first: usize,
    pub w_second: usize,
    pub y: i8,
    pub scheme: Scheme,
    /// Trajectories the first and second window come from.
    pub source_ids: (usize, usize),
}

/// A pair with its windows packed as bitmasks (feature `j` at bit `j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PackedPair {
    pub first: u64,
    pub second: u64,
    pub y: i8,
}

fn pack(bits: &[u8]) -> u64 {
    bits.iter().enumerate().fold(0u64, |m, (j, &v)| m | ((v as u64) << j))
}

impl From<&LabeledPair> for PackedPair {
    fn from(p: &LabeledPair) -> Self {
        PackedPair { first: pack(&p.x_first), second: pack(&p.x_second), y: p.y }
    }
}

struct Draw {
    y: i8,
    w_first: usize,
    w_second: usize,
    /// Trajectory of the second window for patient-contrastive negatives.
    other: Option<usize>,
}

fn draw_windows<R: Rng + ?Sized>(
    scheme: Scheme,
    tau: usize,
    source_id: usize,
    pool: Option<&[Trajectory]>,
    rng: &mut R,
) -> Result<Draw> {
    if tau < 2 {
        return Err(Error::InvalidArgument(format!("trajectory length {tau} < 2")));
    }
    if scheme == Scheme::PatientContrastive && pool.is_none_or(|p| p.len() < 2 || source_id >= p.len()) {
        return Err(Error::MissingPool);
    }
    let y = if rng.random_bool(0.5) { POS } else { NEG };
    if y == POS {
        let t = rng.random_range(0..tau - 1);
        return Ok(Draw { y, w_first: t, w_second: t + 1, other: None });
    }
    let draw = match scheme {
        Scheme::Ocp => {
            let t = rng.random_range(0..tau - 1);
            Draw { y, w_first: t + 1, w_second: t, other: None }
        }
        Scheme::Pcl => {
            let a = rng.random_range(0..tau);
            let mut b = rng.random_range(0..tau - 1);
            if b >= a {
                b += 1;
            }
            Draw { y, w_first: a, w_second: b, other: None }
        }
        Scheme::OcpBiased => {
            let t = rng.random_range(0..tau - 1);
            if rng.random_bool(0.5) {
                Draw { y, w_first: t, w_second: t + 1, other: None }
            } else {
                Draw { y, w_first: t + 1, w_second: t, other: None }
            }
        }
        Scheme::PatientContrastive => {
            let pool = pool.expect("checked above");
            let mut other = rng.random_range(0..pool.len() - 1);
            if other >= source_id {
                other += 1;
            }
            let w_first = rng.random_range(0..tau);
            let w_second = rng.random_range(0..pool[other].tau());
            Draw { y, w_first, w_second, other: Some(other) }
        }
    };
    Ok(draw)
}

/// Draws one labelled pair from `trajectory`. For patient-contrastive
/// sampling, `pool` must hold at least two trajectories and `source_id` is the
/// position of `trajectory` in it; the negative's second window comes from a
/// uniformly chosen different trajectory.
pub fn sample_pair<R: Rng + ?Sized>(
    scheme: Scheme,
    trajectory: &Trajectory,
    source_id: usize,
    pool: Option<&[Trajectory]>,
    rng: &mut R,
) -> Result<LabeledPair> {
    let draw = draw_windows(scheme, trajectory.tau(), source_id, pool, rng)?;
    let (second_traj, second_id) = match (draw.other, pool) {
        (Some(o), Some(p)) => (&p[o], o),
        _ => (trajectory, source_id),
    };
    Ok(LabeledPair {
        x_first: trajectory.row(draw.w_first).to_vec(),
        x_second: second_traj.row(draw.w_second).to_vec(),
        w_first: draw.w_first,
        w_second: draw.w_second,
        y: draw.y,
        scheme,
        source_ids: (source_id, second_id),
    })
}

/// Samples `m` trajectories and `pairs_per_trajectory` pairs from each.
pub fn sample_pairs<R: Rng + ?Sized>(
    spec: &DistributionSpec,
    scheme: Scheme,
    m: usize,
    pairs_per_trajectory: usize,
    rng: &mut R,
) -> Result<Vec<LabeledPair>> {
    let trajectories: Vec<Trajectory> = (0..m).map(|_| sample_trajectory(spec, rng)).collect();
    let mut pairs = Vec::with_capacity(m * pairs_per_trajectory);
    for (id, tr) in trajectories.iter().enumerate() {
        for _ in 0..pairs_per_trajectory {
            pairs.push(sample_pair(scheme, tr, id, Some(&trajectories), rng)?);
        }
    }
    Ok(pairs)
}

/// Like [`sample_pairs`] with one pair per trajectory, returning packed pairs.
/// Consumes the stream identically to `sample_pairs(.., 1, ..)`.
pub fn sample_packed_pairs<R: Rng + ?Sized>(
    spec: &DistributionSpec,
    scheme: Scheme,
    m: usize,
    rng: &mut R,
) -> Result<Vec<PackedPair>> {
    if spec.d() > 64 {
        return Err(Error::InvalidArgument("packed pairs need d <= 64".into()));
    }
    if scheme == Scheme::PatientContrastive {
        return Ok(sample_pairs(spec, scheme, m, 1, rng)?.iter().map(PackedPair::from).collect());
    }
    let trajectories: Vec<Trajectory> = (0..m).map(|_| sample_trajectory(spec, rng)).collect();
    trajectories
        .iter()
        .enumerate()
        .map(|(id, tr)| {
            let draw = draw_windows(scheme, tr.tau(), id, None, rng)?;
            Ok(PackedPair { first: tr.row_mask(draw.w_first), second: tr.row_mask(draw.w_second), y: draw.y })
        })
        .collect()
}

/// Probability of presenting windows `(first, second)` with label `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowMass {
    pub y: i8,
    pub first: usize,
    pub second: usize,
    pub prob: f64,
}

/// Exact joint law of `(Y, W, W')` for a scheme on trajectories of length `tau`.
pub fn window_law(scheme: Scheme, tau: usize) -> Result<Vec<WindowMass>> {
    if tau < 2 {
        return Err(Error::InvalidArgument(format!("trajectory length {tau} < 2")));
    }
    let consecutive = (tau - 1) as f64;
    let mut law: Vec<WindowMass> = (0..tau - 1)
        .map(|t| WindowMass { y: POS, first: t, second: t + 1, prob: 0.5 / consecutive })
        .collect();
    match scheme {
        Scheme::Ocp => {
            law.extend((0..tau - 1).map(|t| WindowMass { y: NEG, first: t + 1, second: t, prob: 0.5 / consecutive }));
        }
        Scheme::OcpBiased => {
            for t in 0..tau - 1 {
                law.push(WindowMass { y: NEG, first: t, second: t + 1, prob: 0.25 / consecutive });
                law.push(WindowMass { y: NEG, first: t + 1, second: t, prob: 0.25 / consecutive });
            }
        }
        Scheme::Pcl => {
            let ordered = (tau * (tau - 1)) as f64;
            for a in 0..tau {
                for b in (0..tau).filter(|&b| b != a) {
                    law.push(WindowMass { y: NEG, first: a, second: b, prob: 0.5 / ordered });
                }
            }
        }
        Scheme::PatientContrastive => return Err(Error::UnsupportedScheme(scheme)),
    }
    Ok(law)
}

/// Exact joint law of `(X^W_U, X^{W'}_U, Y)` under a scheme, aggregated over
/// windows. Entries are indexed like [`PairTable`]: `first | (second << k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPairLaw {
    scheme: Scheme,
    subset: FeatureSubset,
    windows: Vec<WindowMass>,
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl LabeledPairLaw {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn subset(&self) -> &FeatureSubset {
        &self.subset
    }

    pub fn k(&self) -> usize {
        self.subset.len()
    }

    pub fn windows(&self) -> &[WindowMass] {
        &self.windows
    }

    /// `P[Z = (first, second), Y = y]`.
    pub fn joint(&self, first: usize, second: usize, y: i8) -> f64 {
        let idx = first | (second << self.k());
        if y == POS {
            self.pos[idx]
        } else {
            self.neg[idx]
        }
    }

    pub fn positive(&self) -> &[f64] {
        &self.pos
    }

    pub fn negative(&self) -> &[f64] {
        &self.neg
    }

    pub fn label_prob(&self, y: i8) -> f64 {
        if y == POS {
            self.pos.iter().sum()
        } else {
            self.neg.iter().sum()
        }
    }

    /// Law of `Z` with the label summed out.
    pub fn unlabeled(&self) -> PairTable {
        PairTable::from_probs(self.k(), self.pos.iter().zip(&self.neg).map(|(a, b)| a + b).collect())
    }

    /// Bayes 0-1 risk of predicting `Y` from `Z`: `sum_z min_y P[Z = z, Y = y]`.
    pub fn bayes_risk(&self) -> f64 {
        self.pos.iter().zip(&self.neg).map(|(a, b)| a.min(*b)).sum()
    }

    /// Restricts to `sub`, which must be contained in this law's subset.
    pub fn marginalize(&self, sub: &FeatureSubset) -> Result<LabeledPairLaw> {
        let keep = sub
            .positions_in(&self.subset)
            .ok_or_else(|| Error::InvalidArgument(format!("{sub} is not contained in {}", self.subset)))?;
        let k = self.k();
        let pos = PairTable::from_probs(k, self.pos.clone()).marginalize(&keep);
        let neg = PairTable::from_probs(k, self.neg.clone()).marginalize(&keep);
        Ok(LabeledPairLaw {
            scheme: self.scheme,
            subset: sub.clone(),
            windows: self.windows.clone(),
            pos: pos.probs().to_vec(),
            neg: neg.probs().to_vec(),
        })
    }
}

/// Mixes the exact window-pair laws over the scheme's window law.
pub fn scheme_pair_law(
    scheme: Scheme,
    spec: &DistributionSpec,
    subset: &FeatureSubset,
    budget: EntryBudget,
) -> Result<LabeledPairLaw> {
    let windows = window_law(scheme, spec.tau())?;
    let k = subset.len();
    let size = 1usize.checked_shl(2 * k as u32).unwrap_or(usize::MAX);
    budget.check("labeled pair law", (size as u128).saturating_mul(windows.len() as u128))?;
    let mut pos = vec![0.0; size];
    let mut neg = vec![0.0; size];
    // each unordered pair is computed once and transposed for the reverse order
    let mut cache: Vec<((usize, usize), PairTable)> = Vec::new();
    for wm in &windows {
        let key = (wm.first.min(wm.second), wm.first.max(wm.second));
        let table = match cache.iter().find(|(w, _)| *w == key) {
            Some((_, t)) => t,
            None => {
                cache.push((key, pair_table(spec, key, subset, budget)?));
                &cache.last().expect("just pushed").1
            }
        };
        let reversed;
        let table = if wm.first > wm.second {
            reversed = table.transpose();
            &reversed
        } else {
            table
        };
        let target = if wm.y == POS { &mut pos } else { &mut neg };
        for (acc, &p) in target.iter_mut().zip(table.probs()) {
            *acc += wm.prob * p;
        }
    }
    Ok(LabeledPairLaw { scheme, subset: subset.clone(), windows, pos, neg })
}

/// Writes pairs as CSV: `scheme,y,w_first,w_second`, then one column per bit
/// of the first window (`xf0..`) and of the second window (`xs0..`).
pub fn write_pairs_csv<W: Write>(pairs: &[LabeledPair], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = pairs.first().map_or(0, |p| p.x_first.len());
    let mut header = vec!["scheme".to_string(), "y".into(), "w_first".into(), "w_second".into()];
    header.extend((0..d).map(|j| format!("xf{j}")));
    header.extend((0..d).map(|j| format!("xs{j}")));
    w.write_record(&header)?;
    for p in pairs {
        let mut rec = vec![p.scheme.to_string(), p.y.to_string(), p.w_first.to_string(), p.w_second.to_string()];
        rec.extend(p.x_first.iter().map(u8::to_string));
        rec.extend(p.x_second.iter().map(u8::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{BackgroundFeature, DriverFeature};
    use crate::rng::substream;

    #[test]
    fn scheme_names_round_trip() {
        for s in [Scheme::Ocp, Scheme::Pcl, Scheme::OcpBiased, Scheme::PatientContrastive] {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert_eq!("OCP-biased".parse::<Scheme>().unwrap(), Scheme::OcpBiased);
        assert!("simclr".parse::<Scheme>().is_err());
    }

    #[test]
    fn ocp_positive_windows_are_consecutive() {
        let spec = DistributionSpec::dist1();
        let mut rng = substream(11, &[]);
        for p in sample_pairs(&spec, Scheme::Ocp, 2000, 1, &mut rng).unwrap() {
            if p.y == POS {
                assert_eq!(p.w_second, p.w_first + 1);
            } else {
                assert_eq!(p.w_first, p.w_second + 1);
            }
        }
    }

    #[test]
    fn periodic_feature_always_differs_under_ocp() {
        let spec = DistributionSpec::dist1();
        let periodic = spec.background_index(0);
        let mut rng = substream(12, &[]);
        for p in sample_pairs(&spec, Scheme::Ocp, 2000, 1, &mut rng).unwrap() {
            assert_ne!(p.x_first[periodic], p.x_second[periodic]);
        }
    }

    #[test]
    fn window_laws_are_normalized() {
        for s in Scheme::PRETRAINING {
            let law = window_law(s, 10).unwrap();
            let total: f64 = law.iter().map(|w| w.prob).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let pos: f64 = law.iter().filter(|w| w.y == POS).map(|w| w.prob).sum();
            assert!((pos - 0.5).abs() < 1e-12);
        }
        assert!(window_law(Scheme::PatientContrastive, 10).is_err());
        // 18 of the 90 ordered distinct pairs are consecutive
        let pcl = window_law(Scheme::Pcl, 10).unwrap();
        let neg_consecutive: f64 = pcl
            .iter()
            .filter(|w| w.y == NEG && w.first.abs_diff(w.second) == 1)
            .map(|w| w.prob)
            .sum();
        assert!((neg_consecutive / 0.5 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn periodic_ocp_law_is_label_symmetric() {
        let spec = DistributionSpec::new(2, vec![DriverFeature::new(0.3)], vec![], vec![BackgroundFeature::Periodic]).unwrap();
        let sub = FeatureSubset::new(vec![1]).unwrap();
        let law = scheme_pair_law(Scheme::Ocp, &spec, &sub, EntryBudget::default()).unwrap();
        for y in [POS, NEG] {
            assert_eq!(law.joint(0, 1, y), 0.25);
            assert_eq!(law.joint(1, 0, y), 0.25);
            assert_eq!(law.joint(0, 0, y), 0.0);
        }
    }

    #[test]
    fn patient_contrastive_needs_pool() {
        let spec = DistributionSpec::dist1();
        let mut rng = substream(13, &[]);
        let tr = sample_trajectory(&spec, &mut rng);
        assert!(matches!(sample_pair(Scheme::PatientContrastive, &tr, 0, None, &mut rng), Err(Error::MissingPool)));
        let single = vec![tr.clone()];
        assert!(matches!(
            sample_pair(Scheme::PatientContrastive, &tr, 0, Some(&single), &mut rng),
            Err(Error::MissingPool)
        ));
        let pairs = sample_pairs(&spec, Scheme::PatientContrastive, 50, 4, &mut rng).unwrap();
        for p in &pairs {
            if p.y == NEG {
                assert_ne!(p.source_ids.0, p.source_ids.1);
            } else {
                assert_eq!(p.source_ids.0, p.source_ids.1);
                assert_eq!(p.w_second, p.w_first + 1);
            }
        }
    }

    #[test]
    fn packed_and_full_pairs_agree() {
        let spec = DistributionSpec::dist2();
        let full = sample_pairs(&spec, Scheme::Pcl, 300, 1, &mut substream(5, &[1])).unwrap();
        let packed = sample_packed_pairs(&spec, Scheme::Pcl, 300, &mut substream(5, &[1])).unwrap();
        assert_eq!(full.iter().map(PackedPair::from).collect::<Vec<_>>(), packed);
    }

    #[test]
    fn csv_layout() {
        let p = LabeledPair {
            x_first: vec![1, 0],
            x_second: vec![1, 1],
            w_first: 3,
            w_second: 4,
            y: POS,
            scheme: Scheme::Ocp,
            source_ids: (0, 0),
        };
        let mut buf = Vec::new();
        write_pairs_csv(&[p], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "scheme,y,w_first,w_second,xf0,xf1,xs0,xs1\nocp,1,3,4,1,0,1,1\n");
    }
}
