//! Order-contrastive pre-training (OCP) on synthetic binary time series.
//!
//! The crate is organised bottom-up:
//!
//! * [`distribution`] describes the generative trajectory model (irreversible
//!   drivers, noisy copies, reversible background features), samples from it
//!   and computes exact joint laws of window pairs.
//! * [`sampling`] turns trajectories into labelled contrastive pairs under the
//!   OCP, PCL, OCP-biased and patient-contrastive schemes, and mixes the exact
//!   window-pair laws into labelled population laws.
//! * [`learner`] holds the pair featurisation, a from-scratch logistic
//!   regression (L2 and L1), exhaustive subset ERM and L1 feature selection.
//! * [`oracle`] computes exact Bayes risks, the `m_U` decompositions, `ε₀`
//!   and the unlabeled sample bound.
//! * [`downstream`] compares pretrain-then-finetune against direct ERM on a
//!   synthetic downstream task.
//! * [`harness`] runs the recovery sweeps and bundles every experiment.
//!
//! Feature indices and time indices are 0-based throughout.

pub mod distribution;
pub mod downstream;
pub mod error;
pub mod harness;
pub mod learner;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod sampling;
pub mod subset;

pub use error::{Error, Result};
pub use subset::FeatureSubset;
