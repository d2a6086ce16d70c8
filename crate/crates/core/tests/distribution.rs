mod common;

use ordcon::distribution::{
    exact_pair_distribution, exact_time_marginal, pair_table, sample_trajectory, verify_assumptions,
    write_trajectories_csv, DistributionSpec, EntryBudget,
};
use ordcon::rng::substream;
use ordcon::FeatureSubset;
use proptest::prelude::*;

fn subset(ix: &[usize]) -> FeatureSubset {
    FeatureSubset::new(ix.to_vec()).unwrap()
}

#[test]
fn driver_marginal_matches_uniform_activation() {
    let spec = DistributionSpec::dist1();
    for (i, p) in [0.4, 0.4, 0.6, 0.6].into_iter().enumerate() {
        for t in 0..10 {
            let law = exact_time_marginal(&spec, t, &subset(&[i]), EntryBudget::default()).unwrap();
            let expected = p * (t + 1) as f64 / 10.0;
            assert!((law.get(1) - expected).abs() < 1e-12, "driver {i} t {t}");
        }
    }
}

#[test]
fn noisy_marginal_mixes_parent_with_flip_rate() {
    let spec = DistributionSpec::dist2();
    let j = spec.noisy_index(1);
    for t in [0, 4, 9] {
        let q = 0.4 * (t + 1) as f64 / 10.0;
        let expected = q * 0.45 + (1.0 - q) * 0.55;
        let law = exact_time_marginal(&spec, t, &subset(&[j]), EntryBudget::default()).unwrap();
        assert!((law.get(1) - expected).abs() < 1e-12);
    }
}

#[test]
fn periodic_and_markov_lag_laws() {
    let d1 = DistributionSpec::dist1();
    let per = d1.background_index(0);
    for (a, b) in [(0, 1), (2, 6), (7, 2)] {
        let table = pair_table(&d1, (a, b), &subset(&[per]), EntryBudget::default()).unwrap();
        let flip = (a as i64 - b as i64).rem_euclid(2) as usize;
        for v in 0..2 {
            assert!((table.get(v, v ^ flip) - 0.5).abs() < 1e-12);
            assert_eq!(table.get(v, v ^ flip ^ 1), 0.0);
        }
    }
    let d2 = DistributionSpec::dist2();
    let mk = d2.background_index(0);
    for lag in 1..6 {
        let table = pair_table(&d2, (1, 1 + lag), &subset(&[mk]), EntryBudget::default()).unwrap();
        let equal = table.get(0, 0) + table.get(1, 1);
        let expected = 0.5 + 0.5 * (2.0f64 * 0.3 - 1.0).powi(lag as i32);
        assert!((equal - expected).abs() < 1e-12, "lag {lag}");
    }
}

#[test]
fn monte_carlo_pair_frequencies() {
    let spec = DistributionSpec::dist2();
    let sub = subset(&[0, 1, 4, 6]);
    let window = (2, 7);
    let table = pair_table(&spec, window, &sub, EntryBudget::default()).unwrap();
    let n = 40_000;
    let mut counts = vec![0u64; table.probs().len()];
    let mut rng = substream(77, &[]);
    let pos = sub.indices();
    for _ in 0..n {
        let tr = sample_trajectory(&spec, &mut rng);
        let pack = |t: usize| pos.iter().enumerate().fold(0usize, |m, (s, &j)| m | ((tr.get(t, j) as usize) << s));
        counts[pack(window.0) | (pack(window.1) << sub.len())] += 1;
    }
    for (cell, (&c, &p)) in counts.iter().zip(table.probs()).enumerate() {
        let freq = c as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
        assert!((freq - p).abs() <= 5.0 * se, "cell {cell}: freq {freq} exact {p}");
    }
}

#[test]
fn trajectories_csv_layout() {
    let spec = DistributionSpec::dist2();
    let mut rng = substream(1, &[]);
    let trs: Vec<_> = (0..3).map(|_| sample_trajectory(&spec, &mut rng)).collect();
    let mut buf = Vec::new();
    write_trajectories_csv(&trs, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "trajectory,t,x0,x1,x2,x3,x4,x5,x6");
    assert_eq!(lines.count(), 30);
}

#[test]
fn budget_is_enforced() {
    let spec = DistributionSpec::dist1();
    let all = FeatureSubset::all(spec.d());
    assert!(exact_pair_distribution(&spec, &[(0, 1)], &all, EntryBudget(1 << 10)).is_err());
    assert!(exact_pair_distribution(&spec, &[(0, 1)], &all, EntryBudget(1 << 16)).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sampled_drivers_never_switch_off(spec in common::small_spec(), seed in any::<u64>()) {
        let tr = sample_trajectory(&spec, &mut substream(seed, &[]));
        for i in 0..spec.n_drivers() {
            let col = tr.column(i);
            prop_assert!(col.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn sampling_is_seed_deterministic(spec in common::small_spec(), seed in any::<u64>()) {
        let a = sample_trajectory(&spec, &mut substream(seed, &[3]));
        let b = sample_trajectory(&spec, &mut substream(seed, &[3]));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn tables_are_distributions_and_marginalize(spec in common::small_spec(), a in 0usize..3, b in 3usize..6) {
        let b = b.min(spec.tau() - 1);
        let all = FeatureSubset::all(spec.d());
        let full = pair_table(&spec, (a, b), &all, EntryBudget::default()).unwrap();
        prop_assert!((full.total() - 1.0).abs() < 1e-12);
        prop_assert!(full.probs().iter().all(|&p| p >= 0.0));
        let keep = [0, spec.d() - 1];
        let direct = pair_table(&spec, (a, b), &subset(&keep), EntryBudget::default()).unwrap();
        let marg = full.marginalize(&keep);
        for (x, y) in direct.probs().iter().zip(marg.probs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn background_pairs_are_exchangeable(spec in common::small_spec(), a in 0usize..3, b in 3usize..6) {
        let b = b.min(spec.tau() - 1);
        let bg: Vec<usize> = (0..spec.background().len()).map(|j| spec.background_index(j)).collect();
        prop_assume!(!bg.is_empty());
        let sub = subset(&bg);
        let forward = pair_table(&spec, (a, b), &sub, EntryBudget::default()).unwrap();
        let backward = pair_table(&spec, (b, a), &sub, EntryBudget::default()).unwrap();
        for (x, y) in forward.probs().iter().zip(backward.probs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in forward.probs().iter().zip(backward.transpose().probs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn generated_specs_satisfy_assumptions(spec in common::small_spec()) {
        let report = verify_assumptions(&spec, EntryBudget::default()).unwrap();
        prop_assert!(report.all_hold(), "{:?}", report);
    }

    #[test]
    fn json_round_trip(spec in common::small_spec()) {
        let back = DistributionSpec::from_json(&spec.to_json()).unwrap();
        prop_assert_eq!(back, spec);
    }
}
