//! Post-hoc analysis of trained forests and solver runs: feature
//! importance (impurity-based and out-of-bag permutation), selection
//! stability across repeated runs, sample-complexity scaling fits, and an
//! empirical check of the per-arm pull bound.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NodeView, Targets};
use crate::error::{Error, Result};
use crate::forest::{argmax_lowest, oob_indices, Forest};
use crate::histogram::{BinEdges, EdgeStrategy, InsertionLedger};
use crate::impurity::ImpurityKind;
use crate::seeding;
use crate::splitter::{
    arm_objectives_naive, node_bin_edges, record_pull_counts, solve_exact, solve_mabsplit,
    solve_naive, SolverConfig,
};
use crate::tree::{DecisionTree, LeafValue, SolverKind, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    Mdi,
    PermutationOob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    /// One score per dataset feature.
    pub scores: Vec<f64>,
    /// Indices of the k highest-scoring features, ascending; score ties
    /// resolve to the lower index.
    pub top_k: Vec<usize>,
}

/// Indices of the `k` largest entries, ties to the lower index, returned
/// sorted ascending.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut top: Vec<usize> = order.into_iter().take(k).collect();
    top.sort_unstable();
    top
}

fn check_top_k(k: usize, m: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::InvalidParam(format!("top_k {k} out of range 1..={m}")));
    }
    Ok(())
}

/// Mean impurity decrease: each feature's average `-reduction` over the
/// internal nodes that split on it, across every tree. Features never
/// chosen score zero, as does a forest with no internal nodes.
pub fn mdi_importance(forest: &Forest, k: usize) -> Result<ImportanceReport> {
    check_top_k(k, forest.n_features)?;
    let mut sums = vec![0.0f64; forest.n_features];
    let mut counts = vec![0usize; forest.n_features];
    fn walk(node: &TreeNode, sums: &mut [f64], counts: &mut [usize]) {
        if let TreeNode::Internal { feature, reduction, left, right, .. } = node {
            sums[*feature] += (-reduction).max(0.0);
            counts[*feature] += 1;
            walk(left, sums, counts);
            walk(right, sums, counts);
        }
    }
    for tree in &forest.trees {
        walk(&tree.root, &mut sums, &mut counts);
    }
    let scores: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    let top_k = top_k_indices(&scores, k);
    Ok(ImportanceReport { method: ImportanceMethod::Mdi, scores, top_k })
}

/// Error of one tree on a row subset, optionally reading one feature
/// through a permutation of those rows.
fn tree_error(
    tree: &DecisionTree,
    data: &Dataset,
    rows: &[usize],
    permuted: Option<(usize, &[usize])>,
) -> f64 {
    let value_at = |i: usize, row: usize, f: usize| match permuted {
        Some((pf, perm)) if f == pf => data.value(rows[perm[i]], f),
        _ => data.value(row, f),
    };
    match data.targets() {
        Targets::Classes { labels, .. } => {
            let wrong = rows
                .iter()
                .enumerate()
                .filter(|&(i, &row)| {
                    let LeafValue::Probabilities(p) = tree.predict_with(|f| value_at(i, row, f))
                    else {
                        unreachable!("classification data trains classification trees")
                    };
                    argmax_lowest(p) != labels[row] as usize
                })
                .count();
            wrong as f64 / rows.len() as f64
        }
        Targets::Values(y) => {
            let sum: f64 = rows
                .iter()
                .enumerate()
                .map(|(i, &row)| {
                    let LeafValue::Mean(m) = tree.predict_with(|f| value_at(i, row, f)) else {
                        unreachable!("regression data trains regression trees")
                    };
                    (m - y[row]) * (m - y[row])
                })
                .sum();
            sum / rows.len() as f64
        }
    }
}

/// Out-of-bag permutation importance with an injectable shuffle, called as
/// `shuffle(tree_index, feature, permutation)` on an identity permutation
/// of each tree's out-of-bag rows. An identity shuffle scores every
/// feature exactly zero.
pub fn permutation_importance_oob_with(
    forest: &Forest,
    data: &Dataset,
    k: usize,
    shuffle: &mut dyn FnMut(usize, usize, &mut [usize]),
) -> Result<ImportanceReport> {
    check_top_k(k, forest.n_features)?;
    if data.n_rows() != forest.n_train_rows || data.n_features() != forest.n_features {
        return Err(Error::InvalidParam(
            "permutation importance needs the forest's training data".into(),
        ));
    }
    let m = forest.n_features;
    let mut sums = vec![0.0f64; m];
    let mut used_trees = 0usize;
    for (t, tree) in forest.trees.iter().enumerate() {
        let oob = oob_indices(forest, t)?;
        if oob.is_empty() {
            continue;
        }
        used_trees += 1;
        let baseline = tree_error(tree, data, &oob, None);
        let mut perm: Vec<usize> = (0..oob.len()).collect();
        for f in 0..m {
            for (i, p) in perm.iter_mut().enumerate() {
                *p = i;
            }
            shuffle(t, f, &mut perm);
            sums[f] += tree_error(tree, data, &oob, Some((f, &perm))) - baseline;
        }
    }
    if used_trees == 0 {
        return Err(Error::InvalidParam("every tree has an empty out-of-bag set".into()));
    }
    let scores: Vec<f64> = sums.iter().map(|s| s / used_trees as f64).collect();
    let top_k = top_k_indices(&scores, k);
    Ok(ImportanceReport { method: ImportanceMethod::PermutationOob, scores, top_k })
}

/// Out-of-bag permutation importance: per tree, the error increase on its
/// own out-of-bag rows when one feature's values are shuffled among those
/// rows, averaged over trees.
pub fn permutation_importance_oob(
    forest: &Forest,
    data: &Dataset,
    k: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    permutation_importance_oob_with(forest, data, k, &mut |tree, feature, perm| {
        let stream = seeding::derive(seeding::derive(seed, tree as u64), feature as u64);
        perm.shuffle(&mut seeding::rng(stream));
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Z runs by M features; true marks a selected feature.
    pub selection_matrix: Vec<Vec<bool>>,
    pub k: usize,
    pub stability: f64,
}

/// Nogueira's variance-ratio stability of repeated top-k selections:
/// 1 minus the mean unbiased per-feature selection variance over its value
/// under uniformly random size-k selections. Identical runs score exactly
/// 1; independent random runs score near 0; can go negative for
/// selections more dispersed than chance.
pub fn nogueira_stability(matrix: &[Vec<bool>], k: usize) -> Result<f64> {
    let z = matrix.len();
    if z < 2 {
        return Err(Error::InvalidParam("stability needs at least 2 runs".into()));
    }
    let m = matrix[0].len();
    if k == 0 || k >= m {
        return Err(Error::InvalidParam(format!(
            "selection size {k} must be strictly between 0 and {m}"
        )));
    }
    for row in matrix {
        if row.len() != m {
            return Err(Error::InvalidParam("selection rows differ in width".into()));
        }
        let sum = row.iter().filter(|&&b| b).count();
        if sum != k {
            return Err(Error::InvalidParam(format!("selection row sums to {sum}, expected {k}")));
        }
    }
    let zf = z as f64;
    let mean_var = (0..m)
        .map(|f| {
            let s = matrix.iter().filter(|row| row[f]).count() as f64;
            // unbiased variance of a binary column: (s - s^2/Z) / (Z - 1)
            (s - s * s / zf) / (zf - 1.0)
        })
        .sum::<f64>()
        / m as f64;
    let p = k as f64 / m as f64;
    Ok(1.0 - mean_var / (p * (1.0 - p)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub subset_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Thresholds per feature for the root solve.
    pub thresholds: usize,
    pub edge_strategy: EdgeStrategy,
    pub impurity: ImpurityKind,
    pub solver_kind: SolverKind,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub subset_sizes: Vec<usize>,
    /// Mean rows drawn per root solve, by size.
    pub samples_per_split: Vec<f64>,
    /// Sample standard deviation over seeds, by size.
    pub samples_std: Vec<f64>,
    pub linear_fit_r2: f64,
    pub log_fit_r2: f64,
}

/// R-squared of the least-squares line through (x, y); a zero-variance
/// response or predictor reports 0 rather than dividing by zero.
pub fn least_squares_r2(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let ybar = ys.iter().sum::<f64>() / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    if ss_tot == 0.0 {
        return 0.0;
    }
    let xbar = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    if sxx == 0.0 {
        return 0.0;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let fitted = ybar + slope * (x - xbar);
            (y - fitted) * (y - fitted)
        })
        .sum();
    1.0 - ss_res / ss_tot
}

/// How many rows a single root split consumes as the subsample grows: for
/// each size and seed, draw that many rows with replacement, solve the
/// root once, and record `samples_used`; then fit the per-run points
/// against size with both a linear and a logarithmic model.
pub fn scaling_experiment(d: &Dataset, config: &ScalingConfig) -> Result<ScalingReport> {
    let mut distinct = config.subset_sizes.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidParam("scaling needs at least 3 distinct subset sizes".into()));
    }
    if config.seeds.is_empty() {
        return Err(Error::InvalidParam("scaling needs at least one seed".into()));
    }
    for &size in &config.subset_sizes {
        if size < 2 || size > d.n_rows() {
            return Err(Error::InvalidParam(format!(
                "subset size {size} out of range 2..={}",
                d.n_rows()
            )));
        }
    }

    let mut means = Vec::with_capacity(config.subset_sizes.len());
    let mut stds = Vec::with_capacity(config.subset_sizes.len());
    let mut xs_linear = Vec::new();
    let mut xs_log = Vec::new();
    let mut ys = Vec::new();
    for &size in &config.subset_sizes {
        let mut samples = Vec::with_capacity(config.seeds.len());
        for &seed in &config.seeds {
            let trial = seeding::derive(seed, size as u64);
            let rows = {
                use rand::Rng;
                let mut rng = seeding::rng(seeding::derive(trial, 0));
                (0..size).map(|_| rng.random_range(0..d.n_rows())).collect::<Vec<_>>()
            };
            let view = NodeView::full(d);
            let view = NodeView::new(d, rows, view.features().to_vec())?;
            let edges =
                node_bin_edges(&view, config.edge_strategy, config.thresholds, seeding::derive(trial, 2))?;
            let solver = SolverConfig { seed: seeding::derive(trial, 1), ..config.solver.clone() };
            let ledger = InsertionLedger::new_uncapped();
            let result = match config.solver_kind {
                SolverKind::Exact => solve_exact(&view, config.impurity, &edges, &solver, &ledger),
                SolverKind::MabSplit => {
                    solve_mabsplit(&view, config.impurity, &edges, &solver, &ledger)
                }
                SolverKind::Naive => solve_naive(&view, config.impurity, &edges, &solver, &ledger),
            }?;
            samples.push(result.samples_used as f64);
            xs_linear.push(size as f64);
            xs_log.push((size as f64).ln());
            ys.push(result.samples_used as f64);
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = if samples.len() < 2 {
            0.0
        } else {
            (samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        means.push(mean);
        stds.push(std);
    }

    Ok(ScalingReport {
        subset_sizes: config.subset_sizes.clone(),
        samples_per_split: means,
        samples_std: stds,
        linear_fit_r2: least_squares_r2(&xs_linear, &ys),
        log_fit_r2: least_squares_r2(&xs_log, &ys),
    })
}

/// Write one row per subset size: size, mean_samples, std_samples.
pub fn write_scaling_csv(report: &ScalingReport, path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["size", "mean_samples", "std_samples"])?;
    for ((&size, mean), std) in report
        .subset_sizes
        .iter()
        .zip(&report.samples_per_split)
        .zip(&report.samples_std)
    {
        w.write_record([size.to_string(), format!("{mean}"), format!("{std}")])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmBoundRecord {
    pub feature: usize,
    pub threshold_index: usize,
    /// Objective gap to the best arm, from brute-force recount.
    pub gap: f64,
    /// Rows the arm had consumed when it was eliminated (or when the
    /// solve ended, for survivors).
    pub measured: usize,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremBoundReport {
    /// Subgaussian scale constant the bounds were evaluated with.
    pub c0: f64,
    pub arms: Vec<ArmBoundRecord>,
    /// Arms whose measured pulls exceed their bound.
    pub violations: usize,
    pub total_measured: usize,
    /// Sum of per-arm bounds plus the 2mT batching slack.
    pub total_bound: f64,
}

/// Replay one instrumented bandit solve and compare each arm's measured
/// pulls against min(4 c0^2 / gap^2 * ln(n^2 m T) + B, 2n), the gap-zero
/// arms against the flat 2n branch. When `c0` is not supplied it is
/// calibrated from the run's own confidence intervals as
/// max ci * sqrt(n_used / ln(1/delta)).
pub fn theorem_bound_check(
    node: &NodeView,
    kind: ImpurityKind,
    edges: &[BinEdges],
    config: &SolverConfig,
    c0: Option<f64>,
) -> Result<TheoremBoundReport> {
    let instrumented = SolverConfig { instrument: true, ..config.clone() };
    let ledger = InsertionLedger::new_uncapped();
    let result = solve_mabsplit(node, kind, edges, &instrumented, &ledger)?;
    let inst = record_pull_counts(&result)?;

    let oracle = arm_objectives_naive(node, kind, edges)?;
    if oracle.is_empty() {
        return Ok(TheoremBoundReport {
            c0: c0.unwrap_or(0.0),
            arms: Vec::new(),
            violations: 0,
            total_measured: 0,
            total_bound: 0.0,
        });
    }
    let mu_star = oracle.iter().map(|&(_, mu)| mu).fold(f64::INFINITY, f64::min);
    let gaps: HashMap<(usize, usize), f64> = oracle
        .iter()
        .map(|&(arm, mu)| ((arm.feature, arm.threshold_index), mu - mu_star))
        .collect();

    let c0 = match c0 {
        Some(v) if v > 0.0 => v,
        Some(v) => {
            return Err(Error::InvalidParam(format!("c0 must be positive, got {v}")));
        }
        None if inst.max_ci_scale > 0.0 => inst.max_ci_scale,
        None => {
            return Err(Error::InvalidParam(
                "no confidence intervals observed to calibrate c0; pass it explicitly".into(),
            ));
        }
    };

    let n = node.n_rows();
    let active: Vec<&BinEdges> = edges.iter().filter(|e| !e.is_degenerate()).collect();
    let m = active.len().max(1);
    let t_max = active.iter().map(|e| e.thresholds.len()).max().unwrap_or(1);
    let ln_term = ((n as f64) * (n as f64) * m as f64 * t_max as f64).ln();
    let cap = 2.0 * n as f64;

    let mut arms = Vec::with_capacity(inst.records.len());
    let mut violations = 0usize;
    let mut total_measured = 0usize;
    let mut total_bound = 2.0 * (m * t_max) as f64;
    for rec in &inst.records {
        let gap = gaps[&(rec.feature, rec.threshold_index)];
        let bound = if gap > 0.0 {
            (4.0 * c0 * c0 / (gap * gap) * ln_term + inst.batch_size as f64).min(cap)
        } else {
            cap
        };
        if rec.samples as f64 > bound {
            violations += 1;
        }
        total_measured += rec.samples;
        total_bound += bound;
        arms.push(ArmBoundRecord {
            feature: rec.feature,
            threshold_index: rec.threshold_index,
            gap,
            measured: rec.samples,
            bound,
        });
    }

    Ok(TheoremBoundReport { c0, arms, violations, total_measured, total_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticKind, SyntheticSpec};
    use crate::forest::{fit_forest, ForestConfig, ForestKind};
    use crate::splitter::SamplingMode;
    use crate::tree::{BinRule, TreeConfig};

    fn stump_data(n_per_class: usize) -> Dataset {
        let mut v0 = Vec::new();
        let mut v1 = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per_class {
            let jitter = (i % 7) as f64 * 0.1;
            v0.push(jitter);
            v1.push((i % 5) as f64);
            labels.push(0);
            v0.push(10.0 + jitter);
            v1.push((i % 3) as f64);
            labels.push(1);
        }
        Dataset::from_columns(
            vec![v0, v1],
            Targets::Classes { labels, n_classes: 2 },
            None,
            "y",
        )
        .unwrap()
    }

    fn stump_forest(d: &Dataset, depth: usize) -> Forest {
        fit_forest(
            d,
            &ForestConfig {
                kind: ForestKind::Rf,
                n_trees: 5,
                tree: TreeConfig {
                    max_depth: Some(depth),
                    solver: crate::tree::SolverKind::Exact,
                    bins: BinRule::Fixed(8),
                    ..TreeConfig::default()
                },
                budget: None,
                seed: 0,
            },
        )
        .unwrap()
    }

    #[test]
    fn mdi_concentrates_on_the_splitting_feature() {
        let d = stump_data(30);
        let forest = stump_forest(&d, 1);
        let report = mdi_importance(&forest, 1).unwrap();
        assert!(report.scores[0] > 0.4);
        assert_eq!(report.scores[1], 0.0);
        assert_eq!(report.top_k, vec![0]);
    }

    #[test]
    fn mdi_of_an_all_leaf_forest_is_zero() {
        let d = stump_data(10);
        let mut config = ForestConfig {
            kind: ForestKind::Rf,
            n_trees: 3,
            tree: TreeConfig {
                max_depth: Some(0),
                solver: crate::tree::SolverKind::Exact,
                ..TreeConfig::default()
            },
            budget: None,
            seed: 0,
        };
        config.tree.max_depth = Some(0);
        let forest = fit_forest(&d, &config).unwrap();
        let report = mdi_importance(&forest, 2).unwrap();
        assert_eq!(report.scores, vec![0.0, 0.0]);
        assert_eq!(report.top_k, vec![0, 1]);
    }

    #[test]
    fn mdi_ignores_tree_order() {
        let d = make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Classification,
            n_samples: 400,
            n_features: 6,
            n_informative: 2,
            noise_scale: 0.5,
            seed: 7,
        })
        .unwrap();
        let forest = stump_forest(&d, 3);
        let mut reversed = forest.clone();
        reversed.trees.reverse();
        reversed.bootstraps.reverse();
        assert_eq!(
            mdi_importance(&forest, 3).unwrap().scores,
            mdi_importance(&reversed, 3).unwrap().scores
        );
    }

    #[test]
    fn mdi_ranks_informative_features_highly() {
        // budget-truncated forests keep splits at large nodes, where noise
        // features cannot fake a big impurity decrease
        let mut hits = 0;
        for seed in 0..5u64 {
            let d = make_synthetic(&SyntheticSpec {
                kind: SyntheticKind::Classification,
                n_samples: 10_000,
                n_features: 60,
                n_informative: 5,
                noise_scale: 0.3,
                seed,
            })
            .unwrap();
            let forest = crate::forest::fit_forest_with_budget(
                &d,
                &ForestConfig {
                    kind: ForestKind::Rf,
                    n_trees: 100,
                    tree: TreeConfig {
                        max_depth: Some(5),
                        solver: crate::tree::SolverKind::MabSplit,
                        ..TreeConfig::default()
                    },
                    budget: None,
                    seed,
                },
                500_000,
            )
            .unwrap();
            let report = mdi_importance(&forest, 10).unwrap();
            if (0..5).all(|f| report.top_k.contains(&f)) {
                hits += 1;
            }
        }
        assert!(hits >= 4, "informative features in top 10 in only {hits}/5 runs");
    }

    #[test]
    fn identity_shuffle_scores_exactly_zero() {
        let d = stump_data(40);
        let forest = stump_forest(&d, 2);
        let report =
            permutation_importance_oob_with(&forest, &d, 1, &mut |_, _, _| {}).unwrap();
        assert_eq!(report.scores, vec![0.0, 0.0]);
    }

    #[test]
    fn shuffling_the_separating_feature_hurts() {
        let d = stump_data(40);
        let forest = stump_forest(&d, 1);
        let report = permutation_importance_oob(&forest, &d, 1, 3).unwrap();
        assert!(report.scores[0] > 0.2, "importance {}", report.scores[0]);
        assert_eq!(report.top_k, vec![0]);
    }

    #[test]
    fn noise_feature_importance_centers_on_zero() {
        // feature 3 is pure noise; refit the forest per seed so the
        // idiosyncrasies of any one forest's noise splits average out
        let d = make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Classification,
            n_samples: 300,
            n_features: 4,
            n_informative: 1,
            noise_scale: 0.5,
            seed: 5,
        })
        .unwrap();
        let values: Vec<f64> = (0..30u64)
            .map(|seed| {
                let forest = fit_forest(
                    &d,
                    &ForestConfig {
                        kind: ForestKind::Rf,
                        n_trees: 5,
                        tree: TreeConfig {
                            max_depth: Some(3),
                            solver: crate::tree::SolverKind::Exact,
                            bins: BinRule::Fixed(8),
                            ..TreeConfig::default()
                        },
                        budget: None,
                        seed,
                    },
                )
                .unwrap();
                permutation_importance_oob(&forest, &d, 1, seed).unwrap().scores[3]
            })
            .collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(mean.abs() <= 2.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn permutation_importance_needs_training_data() {
        let d = stump_data(20);
        let forest = stump_forest(&d, 1);
        let other = stump_data(10);
        assert!(permutation_importance_oob(&forest, &other, 1, 0).is_err());
    }

    #[test]
    fn identical_selections_are_perfectly_stable() {
        let row = vec![true, false, true, false, false];
        let matrix = vec![row.clone(); 4];
        assert_eq!(nogueira_stability(&matrix, 2).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_two_run_selection_scores_minus_one() {
        let matrix = vec![vec![true, false], vec![false, true]];
        assert_eq!(nogueira_stability(&matrix, 1).unwrap(), -1.0);
    }

    #[test]
    fn random_selections_score_near_zero() {
        use rand::seq::SliceRandom;
        let mut rng = seeding::rng(99);
        let matrix: Vec<Vec<bool>> = (0..100)
            .map(|_| {
                let mut idx: Vec<usize> = (0..60).collect();
                idx.shuffle(&mut rng);
                let mut row = vec![false; 60];
                for &f in idx.iter().take(5) {
                    row[f] = true;
                }
                row
            })
            .collect();
        let s = nogueira_stability(&matrix, 5).unwrap();
        assert!(s.abs() < 0.1, "stability {s}");
    }

    #[test]
    fn stability_ignores_run_order() {
        let matrix = vec![
            vec![true, true, false, false],
            vec![true, false, true, false],
            vec![false, true, true, false],
        ];
        let mut reversed = matrix.clone();
        reversed.reverse();
        assert_eq!(
            nogueira_stability(&matrix, 2).unwrap(),
            nogueira_stability(&reversed, 2).unwrap()
        );
    }

    #[test]
    fn stability_rejects_malformed_input() {
        let row = vec![true, false, true];
        assert!(nogueira_stability(&[row.clone()], 2).is_err(), "one run");
        assert!(
            nogueira_stability(&[row.clone(), vec![true, true, true]], 2).is_err(),
            "row sum mismatch"
        );
        assert!(
            nogueira_stability(&[vec![true, true, true], vec![true, true, true]], 3).is_err(),
            "k = M divides by zero"
        );
    }

    #[test]
    fn r2_conventions_for_degenerate_fits() {
        assert_eq!(least_squares_r2(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), 0.0);
        assert_eq!(least_squares_r2(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(least_squares_r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 1.0);
    }

    fn scaling_config(solver_kind: SolverKind, sizes: Vec<usize>) -> ScalingConfig {
        ScalingConfig {
            subset_sizes: sizes,
            seeds: vec![0, 1],
            thresholds: 8,
            edge_strategy: EdgeStrategy::EqualWidth,
            impurity: ImpurityKind::Gini,
            solver_kind,
            solver: SolverConfig {
                sampling: SamplingMode::WithoutReplacement,
                ..SolverConfig::default()
            },
        }
    }

    #[test]
    fn census_solver_scales_linearly() {
        let d = make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Classification,
            n_samples: 4000,
            n_features: 4,
            n_informative: 2,
            noise_scale: 0.5,
            seed: 9,
        })
        .unwrap();
        let report = scaling_experiment(
            &d,
            &scaling_config(SolverKind::Exact, vec![500, 1000, 2000, 4000]),
        )
        .unwrap();
        for (&size, &mean) in report.subset_sizes.iter().zip(&report.samples_per_split) {
            assert_eq!(mean, size as f64);
        }
        assert_eq!(report.samples_std, vec![0.0; 4]);
        assert_eq!(report.linear_fit_r2, 1.0);
        assert!(report.log_fit_r2 < 1.0);
    }

    #[test]
    fn bandit_solver_scaling_favors_the_log_fit() {
        // class boundary off the threshold grid's symmetry point, so the
        // best arm is uniquely best and sampling saturates
        use rand::Rng;
        let n = 50_000usize;
        let mut rng = seeding::rng(7);
        let x0: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let labels: Vec<u32> = x0.iter().map(|&v| (v > 0.71) as u32).collect();
        let mut cols = vec![x0];
        for _ in 0..5 {
            cols.push((0..n).map(|_| rng.random::<f64>()).collect());
        }
        let d = Dataset::from_columns(cols, Targets::Classes { labels, n_classes: 2 }, None, "y")
            .unwrap();
        let mut config =
            scaling_config(SolverKind::MabSplit, vec![500, 2000, 6000, 16_000, 50_000]);
        config.seeds = vec![0, 1, 2, 3];
        let report = scaling_experiment(&d, &config).unwrap();
        assert!(
            report.log_fit_r2 > report.linear_fit_r2,
            "log r2 {} vs linear r2 {}",
            report.log_fit_r2,
            report.linear_fit_r2
        );
        let first = report.samples_per_split[0];
        let last = report.samples_per_split[4];
        assert!(last < 25.0 * first, "samples grew almost linearly: {first} -> {last}");
    }

    #[test]
    fn scaling_validates_its_inputs() {
        let d = stump_data(50);
        let too_few = scaling_config(SolverKind::Exact, vec![10, 10, 10]);
        assert!(scaling_experiment(&d, &too_few).is_err());
        let too_big = scaling_config(SolverKind::Exact, vec![10, 20, 1000]);
        assert!(scaling_experiment(&d, &too_big).is_err());
    }

    #[test]
    fn scaling_csv_round_trips_through_disk() {
        let d = stump_data(200);
        let report =
            scaling_experiment(&d, &scaling_config(SolverKind::Exact, vec![50, 100, 200]))
                .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scaling.csv");
        write_scaling_csv(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("size,mean_samples,std_samples"));
        assert_eq!(lines.next(), Some("50,50,0"));
        assert_eq!(text.lines().count(), 4);
    }

    fn bound_fixture(n: usize, seed: u64) -> Dataset {
        make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Classification,
            n_samples: n,
            n_features: 5,
            n_informative: 1,
            noise_scale: 0.2,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn calibrated_bound_holds_for_every_arm() {
        let d = bound_fixture(3000, 31);
        let view = NodeView::full(&d);
        let edges = node_bin_edges(&view, EdgeStrategy::EqualWidth, 8, 1).unwrap();
        let config = SolverConfig::default();
        let report =
            theorem_bound_check(&view, ImpurityKind::Gini, &edges, &config, None).unwrap();
        assert!(report.c0 > 0.0);
        assert_eq!(report.violations, 0, "arms over bound: {:?}", report.arms);
        assert!(report.total_measured as f64 <= report.total_bound);
        assert_eq!(report.arms.len(), 5 * 8);
    }

    #[test]
    fn tied_optimal_arms_get_the_loop_bound() {
        // duplicate the informative column so the best arm is tied
        let d = bound_fixture(800, 33);
        let col = d.column(0).to_vec();
        let mut columns: Vec<Vec<f64>> = (0..d.n_features()).map(|f| d.column(f).to_vec()).collect();
        columns.push(col);
        let d2 = Dataset::from_columns(columns, d.targets().clone(), None, "y").unwrap();
        let view = NodeView::full(&d2);
        let edges = node_bin_edges(&view, EdgeStrategy::EqualWidth, 8, 1).unwrap();
        let report =
            theorem_bound_check(&view, ImpurityKind::Gini, &edges, &SolverConfig::default(), None)
                .unwrap();
        let zero_gap: Vec<_> = report.arms.iter().filter(|a| a.gap == 0.0).collect();
        assert!(zero_gap.len() >= 2, "expected tied optima across duplicate columns");
        for arm in zero_gap {
            assert_eq!(arm.bound, 2.0 * 800.0);
            assert!(arm.measured as f64 <= arm.bound);
        }
    }

    #[test]
    fn explicit_c0_must_be_positive() {
        let d = bound_fixture(200, 35);
        let view = NodeView::full(&d);
        let edges = node_bin_edges(&view, EdgeStrategy::EqualWidth, 4, 1).unwrap();
        let err =
            theorem_bound_check(&view, ImpurityKind::Gini, &edges, &SolverConfig::default(), Some(0.0));
        assert!(err.is_err());
    }
}
