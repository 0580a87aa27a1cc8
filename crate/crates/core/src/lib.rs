//! Tree ensembles whose node splitting runs as a batched multi-armed
//! bandit: candidate (feature, threshold) splits are sampled in batches,
//! scored with confidence intervals, and eliminated until one winner
//! remains, usually long before every row has been touched. Exact and
//! brute-force solvers share the same histogram arithmetic so the three
//! agree wherever they overlap, and every random decision flows from
//! explicit seeds.

pub mod analysis;
pub mod data;
pub mod error;
pub mod forest;
pub mod histogram;
pub mod impurity;
pub mod seeding;
pub mod splitter;
pub mod tree;

pub use analysis::{
    least_squares_r2, mdi_importance, nogueira_stability, permutation_importance_oob,
    permutation_importance_oob_with, scaling_experiment, theorem_bound_check, top_k_indices,
    write_scaling_csv, ArmBoundRecord, ImportanceMethod, ImportanceReport, ScalingConfig,
    ScalingReport, StabilityReport, TheoremBoundReport,
};
pub use data::{
    bootstrap_sample, feature_subspace, load_csv, make_synthetic, patch_subsample,
    train_test_split, Dataset, LabelColumn, NodeView, SyntheticKind, SyntheticSpec, Targets,
    TaskKind,
};
pub use error::{Error, Result};
pub use forest::{
    fit_forest, fit_forest_with_budget, forest_accuracy, forest_mse, oob_indices, predict_forest,
    Forest, ForestConfig, ForestDocument, ForestKind, ForestMetrics,
};
pub use histogram::{
    make_edges, BinEdges, EdgeStrategy, FeatureHistogram, HistogramKind, InsertionLedger,
    TargetValue,
};
pub use impurity::{
    estimate_with_ci, impurity_reduction, node_impurity, objective_gradient, split_objective,
    ImpurityKind, SideStats, SplitEstimate, ThetaVector,
};
pub use splitter::{
    arm_objectives_naive, node_bin_edges, parent_impurity, record_pull_counts, solve_exact,
    solve_mabsplit, solve_naive, Arm, ArmPullRecord, ChosenSplit, PullInstrumentation,
    SamplingMode, SolverConfig, SplitResult,
};
pub use tree::{
    fit_tree, BinRule, DecisionTree, FeatureSubsample, LeafValue, SolverKind, TreeConfig,
    TreeNode,
};
