//! Exact and kernel-based SHAP on finite grids, with tooling for comparing
//! explanations computed on a joint distribution against the product of its
//! marginals.
//!
//! Functions and distributions are tables over a finite rectangular grid.
//! Cells are indexed row-major with the last feature varying fastest.

pub mod counterexample;
pub mod error;
pub mod exact;
pub mod kernelshap;
pub mod lp;
pub mod model;
pub mod operators;
pub mod oracle;
pub mod random;
pub mod verify;

pub use counterexample::{
    admissible_pairs, build_lp, find_counterexample, find_counterexample_for, ring_support, CounterexampleOptions,
    CounterexampleReport, CounterexampleSearch,
};
pub use error::{Error, Result};
pub use exact::{aggregate_shap, shap_all, shap_field, shap_value, value_function, ShapReport, ShapleyWeights};
pub use kernelshap::{
    aggregate_kernelshap, eta_estimate, iota_decomposition, kernelshap_limit, kernelshap_point, m_matrix, pi_weights,
    scramble_columns, IotaReport, KernelShapConfig, KernelShapMode, KernelShapReport,
};
pub use lp::{solve_lp, LpProblem, LpSolution, LpStatus, SimplexOptions};
pub use model::{
    determinedness, empirical_distribution, is_determined, Dataset, Determinedness, DiscreteDistribution,
    FeatureSubset, Grid, ProblemFile, TabularFunction,
};
pub use operators::{
    derived_series, hermitian_check, l1_l2_bound_check, reconstruct_determined, shap_operator_matrices,
    spectrum_check, value_operator_matrix, DerivedSeriesOptions, DerivedSeriesReport, OperatorMatrix, Reconstruction,
    ShapOperators, SpectrumReport,
};
pub use verify::{run_check, run_verify, CheckOutcome, VerifyConfig, VerifyReport, CHECKS};
