//! Pair featurisation, logistic regression, subset ERM and L1 selection.

mod features;
mod logistic;
mod select;
mod subset_search;

pub use features::{featurize_packed, featurize_pair, Dataset, PairFeatures};
pub use logistic::{
    logistic_objective, logistic_objective_and_gradient, train_logistic, Diagnostics, LinearModel, Penalty,
    Regularization, Solver, SolverOptions, TIE_TOL,
};
pub use select::{l1_select, l1_select_with, write_selection_csv, L1Selection, LAMBDA_FLOOR_RATIO, MAX_ROUNDS};
pub use subset_search::{
    compress_pairs, erm_subset_search, erm_subset_search_with, fit_subset, fit_subset_indices, recovery_score,
    SelectionCriterion, SubsetFit, SubsetSearch, SubsetSearchOptions, DEFAULT_SUBSET_BUDGET,
};
