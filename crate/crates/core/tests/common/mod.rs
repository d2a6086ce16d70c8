#![allow(dead_code)]

use ordcon::distribution::{BackgroundFeature, DistributionSpec, DriverFeature, NoisyFeature};
use proptest::prelude::*;

/// Small specs satisfying the three assumptions: 2..=3 drivers, up to two
/// noisy copies and up to two reversible background features.
pub fn small_spec() -> impl Strategy<Value = DistributionSpec> {
    let drivers = prop::collection::vec(0.1f64..0.9, 2..=3);
    let noisy = prop::collection::vec((0usize..3, 0.05f64..0.45), 0..=2);
    let background = prop::collection::vec(
        prop_oneof![
            Just(BackgroundFeature::Periodic),
            (0.05f64..0.95).prop_map(BackgroundFeature::MarkovStay),
            (0.05f64..0.95).prop_map(BackgroundFeature::IidBernoulli),
        ],
        0..=2,
    );
    (3usize..=6, drivers, noisy, background).prop_map(|(tau, drivers, noisy, background)| {
        let n = drivers.len();
        DistributionSpec::new(
            tau,
            drivers.into_iter().map(DriverFeature::new).collect(),
            noisy.into_iter().map(|(p, epsilon)| NoisyFeature { parent: p % n, epsilon }).collect(),
            background,
        )
        .expect("generated spec is valid")
    })
}
