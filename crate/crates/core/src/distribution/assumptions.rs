//! Checks of the three structural assumptions on the exact consecutive-pair
//! laws: irreversible drivers, reversibility of everything else while the
//! drivers hold still, and the lone-activation condition that makes the
//! driver set the unique optimum.

use serde::{Deserialize, Serialize};

use super::exact::{pair_table, EntryBudget};
use super::DistributionSpec;
use crate::{FeatureSubset, Result};

/// Tolerance on the pairwise exchange symmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A driver switching off between `t` and `t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A1Witness {
    pub driver: usize,
    pub t: usize,
    pub prob: f64,
}

/// A pair of full states with equal driver values whose forward and reversed
/// probabilities differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2Witness {
    pub t: usize,
    pub v: Vec<u8>,
    pub v_next: Vec<u8>,
    pub forward: f64,
    pub backward: f64,
}

/// A driver that never activates while all other drivers hold still.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A3Witness {
    pub driver: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1_irreversible: bool,
    pub a2_reversible: bool,
    pub a3_lone_activation: bool,
    pub a1_witness: Option<A1Witness>,
    pub a2_witness: Option<A2Witness>,
    pub a3_witness: Option<A3Witness>,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.a1_irreversible && self.a2_reversible && self.a3_lone_activation
    }
}

fn unpack(bits: usize, d: usize) -> Vec<u8> {
    (0..d).map(|j| ((bits >> j) & 1) as u8).collect()
}

pub fn verify_assumptions(spec: &DistributionSpec, budget: EntryBudget) -> Result<AssumptionReport> {
    let tau = spec.tau();
    let nd = spec.n_drivers();
    let s = spec.driver_subset();

    let mut a1_witness = None;
    'a1: for driver in 0..nd {
        let single = FeatureSubset::new(vec![driver])?;
        for t in 0..tau - 1 {
            let prob = pair_table(spec, (t, t + 1), &single, budget)?.get(1, 0);
            if prob > 0.0 {
                a1_witness = Some(A1Witness { driver, t, prob });
                break 'a1;
            }
        }
    }

    let d = spec.d();
    let all = FeatureSubset::all(d);
    let s_mask = (1usize << nd) - 1;
    let mut a2_witness: Option<A2Witness> = None;
    'a2: for t in 0..tau - 1 {
        let table = pair_table(spec, (t, t + 1), &all, budget)?;
        for v in 0..1usize << d {
            for v_next in v + 1..1usize << d {
                if v & s_mask != v_next & s_mask {
                    continue;
                }
                let forward = table.get(v, v_next);
                let backward = table.get(v_next, v);
                if (forward - backward).abs() > SYMMETRY_TOL {
                    a2_witness = Some(A2Witness {
                        t,
                        v: unpack(v, d),
                        v_next: unpack(v_next, d),
                        forward,
                        backward,
                    });
                    break 'a2;
                }
            }
        }
    }

    // P[X^t_i = 0, X^{t+1}_i = 1, X^t_{S\i} = X^{t+1}_{S\i}] > 0 for some t
    let s_tables = (0..tau - 1)
        .map(|t| pair_table(spec, (t, t + 1), &s, budget))
        .collect::<Result<Vec<_>>>()?;
    let mut a3_witness = None;
    for driver in 0..nd {
        let bit = 1usize << driver;
        let lone = s_tables.iter().any(|table| {
            (0..1usize << nd)
                .filter(|v| v & bit == 0)
                .any(|v| table.get(v, v | bit) > 0.0)
        });
        if !lone {
            a3_witness = Some(A3Witness { driver });
            break;
        }
    }

    Ok(AssumptionReport {
        a1_irreversible: a1_witness.is_none(),
        a2_reversible: a2_witness.is_none(),
        a3_lone_activation: a3_witness.is_none(),
        a1_witness,
        a2_witness,
        a3_witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{BackgroundFeature, DriverFeature, TwoState};

    #[test]
    fn presets_pass() {
        for spec in [DistributionSpec::dist1(), DistributionSpec::dist2()] {
            let r = verify_assumptions(&spec, EntryBudget::default()).unwrap();
            assert!(r.all_hold(), "{r:?}");
        }
    }

    #[test]
    fn switching_off_breaks_a1() {
        let leaky = DriverFeature { deactivation_prob: 0.5, ..DriverFeature::new(0.4) };
        let spec = DistributionSpec::dist1().with_driver(0, leaky).unwrap();
        let r = verify_assumptions(&spec, EntryBudget::default()).unwrap();
        assert!(!r.a1_irreversible);
        let w = r.a1_witness.unwrap();
        assert_eq!(w.driver, 0);
        assert!(w.prob > 0.0);
    }

    #[test]
    fn non_stationary_background_breaks_a2() {
        let drift = BackgroundFeature::TwoState(TwoState { init: 0.0, p01: 0.3, p10: 0.1 });
        let spec = DistributionSpec::dist1().with_background(0, drift).unwrap();
        let r = verify_assumptions(&spec, EntryBudget::default()).unwrap();
        assert!(r.a1_irreversible);
        assert!(!r.a2_reversible);
        let w = r.a2_witness.unwrap();
        assert!((w.forward - w.backward).abs() > SYMMETRY_TOL);
        assert_eq!(w.v[..4], w.v_next[..4]);
    }

    #[test]
    fn lock_step_drivers_break_a3() {
        let follower = DriverFeature { follows: Some(0), ..DriverFeature::new(0.4) };
        let spec = DistributionSpec::dist1().with_driver(1, follower).unwrap();
        let r = verify_assumptions(&spec, EntryBudget::default()).unwrap();
        assert!(r.a1_irreversible && r.a2_reversible);
        assert!(!r.a3_lone_activation);
        assert_eq!(r.a3_witness.unwrap().driver, 0);
    }
}
