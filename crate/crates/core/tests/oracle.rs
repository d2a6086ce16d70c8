mod common;

use ordcon::distribution::{DistributionSpec, EntryBudget};
use ordcon::oracle::{
    bound_report, epsilon_zero, m_expectation, population_risk, unlabeled_sample_bound, write_risk_csv, Oracle,
};
use ordcon::par::Exec;
use ordcon::rng::substream;
use ordcon::sampling::Scheme;
use ordcon::subset::all_subsets;
use ordcon::{Error, FeatureSubset};
use proptest::prelude::*;

fn subset(ix: &[usize]) -> FeatureSubset {
    FeatureSubset::new(ix.to_vec()).unwrap()
}

#[test]
fn exact_risk_agrees_with_monte_carlo() {
    let spec = DistributionSpec::dist2();
    for scheme in Scheme::PRETRAINING {
        let oracle = Oracle::new(scheme, &spec, EntryBudget::default()).unwrap();
        for (k, ix) in [&[0usize, 1, 2, 3][..], &[0, 4, 5, 6], &[2, 3, 6]].into_iter().enumerate() {
            let u = subset(ix);
            let exact = oracle.bayes_risk(&u).unwrap();
            let mut rng = substream(31, &[scheme.tag(), k as u64]);
            let (mc, se) = oracle.monte_carlo_risk(&u, 100_000, &mut rng).unwrap();
            assert!((mc - exact).abs() <= 4.5 * se, "{scheme} {u}: exact {exact} mc {mc} se {se}");
        }
    }
}

#[test]
fn pcl_has_no_confusion_mass() {
    let spec = DistributionSpec::dist1();
    let r = population_risk(Scheme::Pcl, &spec, &subset(&[0, 1, 2, 3]), EntryBudget::default()).unwrap();
    assert!(r.m_expectation.is_none());
    assert!(r.decomposition_residual.is_none());
    assert!(m_expectation(&spec, &subset(&[0]), Scheme::Pcl, EntryBudget::default()).is_err());
}

#[test]
fn superset_of_drivers_has_zero_excess() {
    let spec = DistributionSpec::dist1();
    for scheme in [Scheme::Ocp, Scheme::OcpBiased] {
        let oracle = Oracle::new(scheme, &spec, EntryBudget::default()).unwrap();
        for extra in 4..spec.d() {
            let r = oracle.risk(&subset(&[0, 1, 2, 3, extra])).unwrap();
            assert!(r.excess.abs() < 1e-12);
            assert!(r.m_expectation.unwrap().abs() < 1e-15);
        }
    }
}

#[test]
fn bound_argument_validation() {
    assert!(matches!(unlabeled_sample_bound(0.1, 8, 4, 0.0), Err(Error::InvalidArgument(_))));
    assert!(matches!(unlabeled_sample_bound(0.1, 8, 4, 1.0), Err(Error::InvalidArgument(_))));
    assert!(matches!(unlabeled_sample_bound(0.1, 3, 4, 0.5), Err(Error::InvalidArgument(_))));
    assert!(matches!(unlabeled_sample_bound(0.0, 8, 4, 0.05), Err(Error::NotIdentifiable(_))));
    assert!(matches!(unlabeled_sample_bound(-1.0, 8, 4, 0.05), Err(Error::NotIdentifiable(_))));
    let m = unlabeled_sample_bound(0.1, 8, 4, 0.05).unwrap();
    assert!((m - 1726.1).abs() < 0.1);
    let half = unlabeled_sample_bound(0.05, 8, 4, 0.05).unwrap();
    assert!((half / m - 4.0).abs() < 1e-12);
    assert!(unlabeled_sample_bound(0.1, 8, 4, 0.01).unwrap() > m);
}

#[test]
fn pcl_bound_is_absent_when_not_identifiable() {
    let spec = DistributionSpec::dist1();
    let report = bound_report(Scheme::Pcl, &spec, 4, 0.05, Some(5.0), EntryBudget::default()).unwrap();
    assert!(report.epsilon0 <= 0.0);
    assert!(report.m_bound.is_none());
    let ocp = bound_report(Scheme::Ocp, &spec, 4, 0.05, Some(5.0), EntryBudget::default()).unwrap();
    assert!(ocp.m_bound.unwrap() > 0.0);
    assert!(ocp.labeled_rate(400).unwrap() < ocp.labeled_rate(100).unwrap());
    assert_eq!(ocp.labeled_rate(0), None);
}

#[test]
fn budget_too_small_is_reported() {
    let spec = DistributionSpec::dist1();
    assert!(matches!(Oracle::new(Scheme::Ocp, &spec, EntryBudget(16)), Err(Error::Budget { .. })));
}

#[test]
fn risk_csv_layout() {
    let oracle = Oracle::new(Scheme::Ocp, &DistributionSpec::dist2(), EntryBudget::default()).unwrap();
    let reports = oracle.all_risks(4, Exec::Sequential).unwrap();
    let mut buf = Vec::new();
    write_risk_csv(&reports, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "scheme,subset,err,excess,m_expectation");
    assert_eq!(lines.count(), 35);
}

#[test]
fn sequential_and_parallel_reports_agree() {
    let oracle = Oracle::new(Scheme::OcpBiased, &DistributionSpec::dist1(), EntryBudget::default()).unwrap();
    assert_eq!(oracle.all_risks(4, Exec::Sequential).unwrap(), oracle.all_risks(4, Exec::Parallel).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn ocp_variants_share_the_driver_argmin(spec in common::small_spec()) {
        let d0 = spec.n_drivers();
        let a = Oracle::new(Scheme::Ocp, &spec, EntryBudget::default()).unwrap().optimal_subset(d0, Exec::Sequential).unwrap();
        let b = Oracle::new(Scheme::OcpBiased, &spec, EntryBudget::default()).unwrap().optimal_subset(d0, Exec::Sequential).unwrap();
        prop_assert_eq!(&a.subset, &spec.driver_subset());
        prop_assert_eq!(&b.subset, &a.subset);
    }

    #[test]
    fn biased_margin_is_half(spec in common::small_spec()) {
        let d0 = spec.n_drivers();
        prop_assume!(spec.d() > d0);
        let a = epsilon_zero(Scheme::Ocp, &spec, d0, EntryBudget::default()).unwrap();
        let b = epsilon_zero(Scheme::OcpBiased, &spec, d0, EntryBudget::default()).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((b - a / 2.0).abs() <= 1e-12, "ocp {} biased {}", a, b);
    }

    #[test]
    fn decomposition_holds_on_every_subset(spec in common::small_spec(), biased in any::<bool>()) {
        let scheme = if biased { Scheme::OcpBiased } else { Scheme::Ocp };
        let oracle = Oracle::new(scheme, &spec, EntryBudget::default()).unwrap();
        for k in 1..=spec.d() {
            for u in all_subsets(spec.d(), k, 1 << 12).unwrap() {
                let r = oracle.risk(&u).unwrap();
                prop_assert!(r.m_expectation.unwrap() >= 0.0);
                prop_assert!(r.decomposition_residual.unwrap().abs() < 1e-12, "{}: {:?}", u, r);
            }
        }
    }

    #[test]
    fn adding_a_feature_never_raises_risk(spec in common::small_spec(), scheme_ix in 0usize..3) {
        let scheme = [Scheme::Ocp, Scheme::OcpBiased, Scheme::Pcl][scheme_ix];
        let oracle = Oracle::new(scheme, &spec, EntryBudget::default()).unwrap();
        let d = spec.d();
        for u in all_subsets(d, 2, 1 << 12).unwrap() {
            let base = oracle.bayes_risk(&u).unwrap();
            for j in (0..d).filter(|&j| !u.contains(j)) {
                let bigger = u.union(&subset(&[j]));
                prop_assert!(oracle.bayes_risk(&bigger).unwrap() <= base + 1e-15);
            }
        }
    }
}
