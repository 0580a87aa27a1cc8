//! Single decision trees over any of the split solvers.
//!
//! Growth is depth-first by default; setting `max_leaf_nodes` switches to
//! best-first expansion, where the frontier node promising the largest
//! impurity decrease is split next, so a leaf budget spends itself on the
//! most valuable splits. Every node draws its own feature subspace and bin
//! edges from seeds derived along the tree path, which makes fitted trees
//! a pure function of (data, config).
//!
//! Training charges histogram insertions to a shared ledger. When the
//! ledger's cap runs out mid-node, the tree finalizes every unfinished
//! node as a leaf and reports itself interrupted; whatever structure was
//! already built remains usable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NodeView, Targets, TaskKind};
use crate::error::{Error, Result};
use crate::histogram::{EdgeStrategy, InsertionLedger};
use crate::impurity::ImpurityKind;
use crate::seeding;
use crate::splitter::{
    node_bin_edges, solve_exact, solve_mabsplit, solve_naive, SamplingMode, SolverConfig,
    SplitResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    /// `ceil(sqrt(m))` of the tree's feature pool per node.
    Sqrt,
    All,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinRule {
    Fixed(usize),
    /// `ceil(sqrt(M))` thresholds, `M` the dataset's feature count.
    SqrtTotal,
    /// `M` thresholds.
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Exact,
    MabSplit,
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    /// Switches growth to best-first with this leaf budget.
    pub max_leaf_nodes: Option<usize>,
    pub min_impurity_decrease: f64,
    pub feature_subsample: FeatureSubsample,
    pub edge_strategy: EdgeStrategy,
    pub bins: BinRule,
    pub solver: SolverKind,
    pub impurity: ImpurityKind,
    pub batch_size: Option<usize>,
    pub delta: Option<f64>,
    pub sampling: SamplingMode,
    pub seed: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: Some(5),
            max_leaf_nodes: None,
            min_impurity_decrease: 0.005,
            feature_subsample: FeatureSubsample::Sqrt,
            edge_strategy: EdgeStrategy::EqualWidth,
            bins: BinRule::Fixed(32),
            solver: SolverKind::MabSplit,
            impurity: ImpurityKind::Gini,
            batch_size: None,
            delta: None,
            sampling: SamplingMode::WithoutReplacement,
            seed: 0,
        }
    }
}

impl TreeConfig {
    /// Defaults with the conventional impurity for the task.
    pub fn for_task(task: TaskKind) -> TreeConfig {
        TreeConfig {
            impurity: match task {
                TaskKind::Classification => ImpurityKind::Gini,
                TaskKind::Regression => ImpurityKind::Mse,
            },
            ..TreeConfig::default()
        }
    }

    fn validate(&self, task: TaskKind, pool: usize) -> Result<()> {
        let unbounded = self.max_depth.is_none()
            && self.max_leaf_nodes.is_none()
            && self.min_impurity_decrease <= 0.0;
        if unbounded {
            return Err(Error::InvalidParam(
                "tree needs a stopping rule: max_depth, max_leaf_nodes, or a positive \
                 min_impurity_decrease"
                    .into(),
            ));
        }
        if self.max_leaf_nodes == Some(0) {
            return Err(Error::InvalidParam("max_leaf_nodes must be at least 1".into()));
        }
        if let FeatureSubsample::Fixed(k) = self.feature_subsample {
            if k == 0 || k > pool {
                return Err(Error::InvalidParam(format!(
                    "fixed feature subsample {k} out of range 1..={pool}"
                )));
            }
        }
        if let BinRule::Fixed(t) = self.bins {
            if t == 0 {
                return Err(Error::InvalidParam("bin rule needs at least one threshold".into()));
            }
        }
        let matches = matches!(
            (task, self.impurity),
            (TaskKind::Classification, ImpurityKind::Gini)
                | (TaskKind::Classification, ImpurityKind::Entropy)
                | (TaskKind::Regression, ImpurityKind::Mse)
        );
        if !matches {
            return Err(Error::InvalidParam(format!(
                "impurity {:?} does not fit a {task:?} target",
                self.impurity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LeafValue {
    /// Class probabilities over all classes, in label order.
    Probabilities(Vec<f64>),
    Mean(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        /// Dataset feature index; rows with `value < threshold` go left.
        feature: usize,
        threshold: f64,
        /// Signed impurity change the split achieved (negative).
        reduction: f64,
        n: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: LeafValue,
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub n_features: usize,
    pub task: TaskKind,
    pub n_classes: Option<usize>,
    pub insertions_used: u64,
    pub nodes_split: usize,
    pub n_leaves: usize,
    pub depth: usize,
    /// True when the insertion budget ran out mid-training.
    pub interrupted: bool,
}

impl DecisionTree {
    /// Leaf reached by following `value_of(feature)` comparisons.
    pub fn predict_with(&self, value_of: impl Fn(usize) -> f64) -> &LeafValue {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return value,
                TreeNode::Internal { feature, threshold, left, right, .. } => {
                    node = if value_of(*feature) < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<&LeafValue> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: row.len() });
        }
        Ok(self.predict_with(|f| row[f]))
    }
}

fn leaf_value(data: &Dataset, rows: &[usize]) -> LeafValue {
    match data.targets() {
        Targets::Classes { labels, n_classes } => {
            let mut counts = vec![0usize; *n_classes];
            for &row in rows {
                counts[labels[row] as usize] += 1;
            }
            let n = rows.len() as f64;
            LeafValue::Probabilities(counts.iter().map(|&c| c as f64 / n).collect())
        }
        Targets::Values(values) => {
            let sum: f64 = rows.iter().map(|&r| values[r]).sum();
            LeafValue::Mean(sum / rows.len() as f64)
        }
    }
}

fn is_pure(data: &Dataset, rows: &[usize]) -> bool {
    match data.targets() {
        Targets::Classes { labels, .. } => {
            let first = labels[rows[0]];
            rows.iter().all(|&r| labels[r] == first)
        }
        Targets::Values(values) => {
            let first = values[rows[0]];
            rows.iter().all(|&r| values[r] == first)
        }
    }
}

fn features_per_node(rule: FeatureSubsample, pool: usize) -> usize {
    match rule {
        FeatureSubsample::Sqrt => (pool as f64).sqrt().ceil() as usize,
        FeatureSubsample::All => pool,
        FeatureSubsample::Fixed(k) => k,
    }
    .clamp(1, pool)
}

fn threshold_count(rule: BinRule, total_features: usize) -> usize {
    match rule {
        BinRule::Fixed(t) => t,
        BinRule::SqrtTotal => (total_features as f64).sqrt().ceil() as usize,
        BinRule::Total => total_features,
    }
    .max(1)
}

/// Shared per-fit state.
struct Grower<'a> {
    data: &'a Dataset,
    pool: &'a [usize],
    config: &'a TreeConfig,
    ledger: &'a InsertionLedger,
    thresholds: usize,
    insertions: u64,
    nodes_split: usize,
    interrupted: bool,
}

impl<'a> Grower<'a> {
    fn at_depth_limit(&self, depth: usize) -> bool {
        self.config.max_depth.is_some_and(|d| depth >= d)
    }

    /// Solve for this node's best split, or None when it must stay a leaf.
    /// A budget failure flips `interrupted` and returns None.
    fn try_split(&mut self, rows: &[usize], depth: usize, seed: u64) -> Result<Option<NodeSplit>> {
        if self.interrupted || rows.len() < 2 || self.at_depth_limit(depth)
            || is_pure(self.data, rows)
        {
            return Ok(None);
        }
        let k = features_per_node(self.config.feature_subsample, self.pool.len());
        let pool_view = NodeView::new(self.data, rows.to_vec(), self.pool.to_vec())?;
        let chosen = crate::data::feature_subspace(&pool_view, k, seeding::derive(seed, 3))?;
        let view = NodeView::new(self.data, rows.to_vec(), chosen)?;
        let edges = node_bin_edges(
            &view,
            self.config.edge_strategy,
            self.thresholds,
            seeding::derive(seed, 4),
        )?;
        let solver_config = SolverConfig {
            batch_size: self.config.batch_size,
            delta: self.config.delta,
            sampling: self.config.sampling,
            min_impurity_decrease: self.config.min_impurity_decrease,
            seed: seeding::derive(seed, 5),
            instrument: false,
        };
        let solve = match self.config.solver {
            SolverKind::Exact => solve_exact,
            SolverKind::MabSplit => solve_mabsplit,
            SolverKind::Naive => solve_naive,
        };
        let result: SplitResult =
            match solve(&view, self.config.impurity, &edges, &solver_config, self.ledger) {
                Ok(r) => r,
                Err(Error::BudgetExhausted { charged }) => {
                    self.insertions += charged;
                    self.interrupted = true;
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
        self.insertions += result.insertions_used;
        let Some(best) = result.best else { return Ok(None) };

        let column = self.data.column(best.feature);
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &row in rows {
            if column[row] < best.threshold {
                left.push(row);
            } else {
                right.push(row);
            }
        }
        // thresholds come from sampled bins, so a side can come up empty;
        // such a split partitions nothing and the node stays a leaf
        if left.is_empty() || right.is_empty() {
            return Ok(None);
        }
        Ok(Some(NodeSplit {
            feature: best.feature,
            threshold: best.threshold,
            reduction: result.reduction,
            left,
            right,
        }))
    }
}

struct NodeSplit {
    feature: usize,
    threshold: f64,
    reduction: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

/// Fit a tree on the view's rows, drawing per-node feature subsets from
/// the view's feature pool.
pub fn fit_tree(node: &NodeView, config: &TreeConfig, ledger: &InsertionLedger) -> Result<DecisionTree> {
    let data = node.data();
    config.validate(data.task(), node.features().len())?;
    let mut grower = Grower {
        data,
        pool: node.features(),
        config,
        ledger,
        thresholds: threshold_count(config.bins, data.n_features()),
        insertions: 0,
        nodes_split: 0,
        interrupted: false,
    };
    let root = match config.max_leaf_nodes {
        None => grow_depth_first(&mut grower, node.rows().to_vec(), 0, config.seed)?,
        Some(limit) => grow_best_first(&mut grower, node.rows().to_vec(), limit)?,
    };

    let mut n_leaves = 0;
    let mut depth = 0;
    measure(&root, 0, &mut n_leaves, &mut depth);
    Ok(DecisionTree {
        root,
        n_features: data.n_features(),
        task: data.task(),
        n_classes: data.n_classes(),
        insertions_used: grower.insertions,
        nodes_split: grower.nodes_split,
        n_leaves,
        depth,
        interrupted: grower.interrupted,
    })
}

fn measure(node: &TreeNode, depth: usize, n_leaves: &mut usize, max_depth: &mut usize) {
    match node {
        TreeNode::Leaf { .. } => {
            *n_leaves += 1;
            *max_depth = (*max_depth).max(depth);
        }
        TreeNode::Internal { left, right, .. } => {
            measure(left, depth + 1, n_leaves, max_depth);
            measure(right, depth + 1, n_leaves, max_depth);
        }
    }
}

fn grow_depth_first(
    grower: &mut Grower,
    rows: Vec<usize>,
    depth: usize,
    seed: u64,
) -> Result<TreeNode> {
    match grower.try_split(&rows, depth, seed)? {
        None => Ok(TreeNode::Leaf { value: leaf_value(grower.data, &rows), n: rows.len() }),
        Some(split) => {
            grower.nodes_split += 1;
            let n = rows.len();
            drop(rows);
            let left =
                grow_depth_first(grower, split.left, depth + 1, seeding::derive(seed, 1))?;
            let right =
                grow_depth_first(grower, split.right, depth + 1, seeding::derive(seed, 2))?;
            Ok(TreeNode::Internal {
                feature: split.feature,
                threshold: split.threshold,
                reduction: split.reduction,
                n,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
    }
}

/// Frontier entry: best = most negative reduction, ties to the node
/// created first. `BinaryHeap` pops its maximum, so the ordering is
/// reversed.
struct FrontierEntry {
    reduction: f64,
    order: usize,
    node_id: usize,
    split: NodeSplit,
    depth: usize,
    seed: u64,
}

impl PartialEq for FrontierEntry {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
    }
}
impl Eq for FrontierEntry {}
impl PartialOrd for FrontierEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for FrontierEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .reduction
            .partial_cmp(&self.reduction)
            .unwrap_or(Ordering::Equal)
            .then(other.order.cmp(&self.order))
    }
}

enum ArenaNode {
    Leaf { rows: Vec<usize> },
    Internal { feature: usize, threshold: f64, reduction: f64, n: usize, left: usize, right: usize },
}

fn grow_best_first(grower: &mut Grower, rows: Vec<usize>, max_leaves: usize) -> Result<TreeNode> {
    let mut arena: Vec<ArenaNode> = Vec::new();
    let mut heap: BinaryHeap<FrontierEntry> = BinaryHeap::new();
    let mut order = 0usize;

    let enqueue = |grower: &mut Grower,
                       arena: &mut Vec<ArenaNode>,
                       heap: &mut BinaryHeap<FrontierEntry>,
                       order: &mut usize,
                       rows: Vec<usize>,
                       depth: usize,
                       seed: u64|
     -> Result<usize> {
        let node_id = arena.len();
        if let Some(split) = grower.try_split(&rows, depth, seed)? {
            heap.push(FrontierEntry {
                reduction: split.reduction,
                order: *order,
                node_id,
                split,
                depth,
                seed,
            });
            *order += 1;
        }
        arena.push(ArenaNode::Leaf { rows });
        Ok(node_id)
    };

    let root_id = enqueue(grower, &mut arena, &mut heap, &mut order, rows, 0, grower.config.seed)?;
    let mut splits_done = 0usize;

    while splits_done + 1 < max_leaves && !grower.interrupted {
        let Some(entry) = heap.pop() else { break };
        let left_id = enqueue(
            grower,
            &mut arena,
            &mut heap,
            &mut order,
            entry.split.left,
            entry.depth + 1,
            seeding::derive(entry.seed, 1),
        )?;
        let right_id = enqueue(
            grower,
            &mut arena,
            &mut heap,
            &mut order,
            entry.split.right,
            entry.depth + 1,
            seeding::derive(entry.seed, 2),
        )?;
        let n = match &arena[entry.node_id] {
            ArenaNode::Leaf { rows } => rows.len(),
            ArenaNode::Internal { .. } => unreachable!("frontier nodes are unexpanded"),
        };
        arena[entry.node_id] = ArenaNode::Internal {
            feature: entry.split.feature,
            threshold: entry.split.threshold,
            reduction: entry.split.reduction,
            n,
            left: left_id,
            right: right_id,
        };
        grower.nodes_split += 1;
        splits_done += 1;
    }

    Ok(build_from_arena(&arena, root_id, grower.data))
}

fn build_from_arena(arena: &[ArenaNode], id: usize, data: &Dataset) -> TreeNode {
    match &arena[id] {
        ArenaNode::Leaf { rows } => {
            TreeNode::Leaf { value: leaf_value(data, rows), n: rows.len() }
        }
        ArenaNode::Internal { feature, threshold, reduction, n, left, right } => {
            TreeNode::Internal {
                feature: *feature,
                threshold: *threshold,
                reduction: *reduction,
                n: *n,
                left: Box::new(build_from_arena(arena, *left, data)),
                right: Box::new(build_from_arena(arena, *right, data)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticKind, SyntheticSpec};
    use approx::assert_abs_diff_eq;

    fn stump_data() -> Dataset {
        // class 0 clusters near 0, class 1 near 10, on feature 0; feature 1
        // is constant noise-free filler
        let values = vec![
            vec![0.1, 0.4, 0.9, 9.2, 9.6, 9.9],
            vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        ];
        Dataset::from_columns(
            values,
            Targets::Classes { labels: vec![0, 0, 0, 1, 1, 1], n_classes: 2 },
            None,
            "y",
        )
        .unwrap()
    }

    fn exact_config() -> TreeConfig {
        TreeConfig {
            solver: SolverKind::Exact,
            feature_subsample: FeatureSubsample::All,
            bins: BinRule::Fixed(8),
            max_depth: Some(1),
            ..TreeConfig::default()
        }
    }

    fn train_accuracy(tree: &DecisionTree, data: &Dataset) -> f64 {
        let labels = data.labels().unwrap();
        let mut hits = 0;
        for row in 0..data.n_rows() {
            let LeafValue::Probabilities(p) = tree.predict_with(|f| data.value(row, f)) else {
                panic!("classification tree must yield probabilities")
            };
            let argmax = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .unwrap()
                .0;
            if argmax == labels[row] as usize {
                hits += 1;
            }
        }
        hits as f64 / data.n_rows() as f64
    }

    #[test]
    fn stump_separates_clustered_classes() {
        let d = stump_data();
        let node = NodeView::full(&d);
        let ledger = InsertionLedger::new_uncapped();
        let tree = fit_tree(&node, &exact_config(), &ledger).unwrap();
        assert_eq!(tree.depth, 1);
        assert_eq!(tree.n_leaves, 2);
        assert_eq!(tree.nodes_split, 1);
        assert!(!tree.interrupted);
        assert_abs_diff_eq!(train_accuracy(&tree, &d), 1.0);
        let TreeNode::Internal { feature, threshold, reduction, .. } = &tree.root else {
            panic!("expected a stump")
        };
        assert_eq!(*feature, 0);
        assert!(*threshold > 0.9 && *threshold < 9.2);
        assert!(*reduction < -0.4);
    }

    #[test]
    fn stump_prediction_below_threshold_is_pure_class_zero() {
        let d = stump_data();
        let node = NodeView::full(&d);
        let ledger = InsertionLedger::new_uncapped();
        let tree = fit_tree(&node, &exact_config(), &ledger).unwrap();
        let leaf = tree.predict(&[0.2, 1.0]).unwrap();
        assert_eq!(leaf, &LeafValue::Probabilities(vec![1.0, 0.0]));
    }

    #[test]
    fn predict_checks_row_width() {
        let d = stump_data();
        let node = NodeView::full(&d);
        let ledger = InsertionLedger::new_uncapped();
        let tree = fit_tree(&node, &exact_config(), &ledger).unwrap();
        assert!(matches!(
            tree.predict(&[0.2]).unwrap_err(),
            Error::DimensionMismatch { expected: 2, got: 1 }
        ));
    }

    #[test]
    fn depth_zero_yields_single_leaf() {
        let d = stump_data();
        let node = NodeView::full(&d);
        let ledger = InsertionLedger::new_uncapped();
        let config = TreeConfig { max_depth: Some(0), ..exact_config() };
        let tree = fit_tree(&node, &config, &ledger).unwrap();
        assert_eq!(tree.n_leaves, 1);
        assert_eq!(tree.depth, 0);
        assert_eq!(tree.insertions_used, 0);
        let TreeNode::Leaf { value: LeafValue::Probabilities(p), n } = &tree.root else {
            panic!("expected a leaf")
        };
        assert_eq!(*n, 6);
        assert_abs_diff_eq!(p[0], 0.5);
    }

    #[test]
    fn pure_nodes_are_not_split() {
        let d = Dataset::from_columns(
            vec![vec![1.0, 2.0, 3.0, 4.0]],
            Targets::Classes { labels: vec![1, 1, 1, 1], n_classes: 2 },
            None,
            "y",
        )
        .unwrap();
        let node = NodeView::full(&d);
        let ledger = InsertionLedger::new_uncapped();
        let config = TreeConfig { max_depth: Some(5), ..exact_config() };
        let tree = fit_tree(&node, &config, &ledger).unwrap();
        assert_eq!(tree.n_leaves, 1);
        assert_eq!(tree.insertions_used, 0);
    }

    #[test]
    fn gate_failure_leaves_node_unsplit() {
        // one row of each class per bin: every split leaves both sides at
        // the parent impurity, so the default gate stops at the root
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for bin in 0..4 {
            for class in 0..2u32 {
                values.push(bin as f64 + 0.25 + 0.5 * class as f64);
                labels.push(class);
            }
        }
        let d = Dataset::from_columns(
            vec![values],
            Targets::Classes { labels, n_classes: 2 },
            None,
            "y",
        )
        .unwrap();
        let node = NodeView::full(&d);
        let ledger = InsertionLedger::new_uncapped();
        let config =
            TreeConfig { max_depth: Some(3), bins: BinRule::Fixed(3), ..exact_config() };
        let tree = fit_tree(&node, &config, &ledger).unwrap();
        assert_eq!(tree.n_leaves, 1, "every candidate split fails the gate");
    }

    #[test]
    fn no_stopping_rule_is_rejected() {
        let d = stump_data();
        let node = NodeView::full(&d);
        let ledger = InsertionLedger::new_uncapped();
        let config = TreeConfig {
            max_depth: None,
            max_leaf_nodes: None,
            min_impurity_decrease: 0.0,
            ..exact_config()
        };
        assert!(fit_tree(&node, &config, &ledger).is_err());
    }

    #[test]
    fn fixed_feature_subsample_is_validated() {
        let d = stump_data();
        let node = NodeView::full(&d);
        let ledger = InsertionLedger::new_uncapped();
        for k in [0, 3] {
            let config =
                TreeConfig { feature_subsample: FeatureSubsample::Fixed(k), ..exact_config() };
            assert!(fit_tree(&node, &config, &ledger).is_err(), "k = {k}");
        }
    }

    #[test]
    fn impurity_task_mismatch_is_rejected() {
        let d = stump_data();
        let node = NodeView::full(&d);
        let ledger = InsertionLedger::new_uncapped();
        let config = TreeConfig { impurity: ImpurityKind::Mse, ..exact_config() };
        assert!(fit_tree(&node, &config, &ledger).is_err());
    }

    #[test]
    fn deeper_trees_fit_regression_signal() {
        let d = make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Regression,
            n_samples: 2000,
            n_features: 5,
            n_informative: 2,
            noise_scale: 0.2,
            seed: 31,
        })
        .unwrap();
        let node = NodeView::full(&d);
        let ledger = InsertionLedger::new_uncapped();
        let config = TreeConfig {
            max_depth: Some(4),
            solver: SolverKind::Exact,
            feature_subsample: FeatureSubsample::All,
            impurity: ImpurityKind::Mse,
            bins: BinRule::Fixed(16),
            ..TreeConfig::default()
        };
        let tree = fit_tree(&node, &config, &ledger).unwrap();
        let y = d.target_values().unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
        let mse: f64 = (0..d.n_rows())
            .map(|row| {
                let LeafValue::Mean(m) = tree.predict_with(|f| d.value(row, f)) else {
                    panic!("regression tree must yield means")
                };
                (y[row] - m).powi(2)
            })
            .sum::<f64>()
            / d.n_rows() as f64;
        assert!(mse < 0.5 * var, "training mse {mse} vs variance {var}");
        assert!(tree.depth > 1);
    }

    #[test]
    fn trees_are_deterministic_per_seed() {
        let d = make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Classification,
            n_samples: 500,
            n_features: 8,
            n_informative: 3,
            noise_scale: 0.5,
            seed: 17,
        })
        .unwrap();
        let node = NodeView::full(&d);
        let config = TreeConfig {
            max_depth: Some(4),
            solver: SolverKind::MabSplit,
            seed: 12,
            ..TreeConfig::default()
        };
        let l1 = InsertionLedger::new_uncapped();
        let l2 = InsertionLedger::new_uncapped();
        let a = fit_tree(&node, &config, &l1).unwrap();
        let b = fit_tree(&node, &config, &l2).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn exact_and_naive_grow_identical_trees() {
        let d = make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Classification,
            n_samples: 300,
            n_features: 6,
            n_informative: 2,
            noise_scale: 0.5,
            seed: 41,
        })
        .unwrap();
        let node = NodeView::full(&d);
        let base = TreeConfig { max_depth: Some(4), seed: 2, ..TreeConfig::default() };
        let l1 = InsertionLedger::new_uncapped();
        let l2 = InsertionLedger::new_uncapped();
        let exact = fit_tree(
            &node,
            &TreeConfig { solver: SolverKind::Exact, ..base.clone() },
            &l1,
        )
        .unwrap();
        let naive = fit_tree(
            &node,
            &TreeConfig { solver: SolverKind::Naive, ..base.clone() },
            &l2,
        )
        .unwrap();
        assert_eq!(exact.root, naive.root);
        assert!(naive.insertions_used > exact.insertions_used);
    }

    #[test]
    fn mabsplit_tree_matches_exact_on_small_nodes() {
        // every node fits in one batch, so the bandit solver's estimates
        // are exact and the trees coincide
        let d = make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Classification,
            n_samples: 80,
            n_features: 4,
            n_informative: 2,
            noise_scale: 0.3,
            seed: 43,
        })
        .unwrap();
        let node = NodeView::full(&d);
        let base = TreeConfig { max_depth: Some(3), seed: 8, ..TreeConfig::default() };
        let l1 = InsertionLedger::new_uncapped();
        let l2 = InsertionLedger::new_uncapped();
        let exact =
            fit_tree(&node, &TreeConfig { solver: SolverKind::Exact, ..base.clone() }, &l1)
                .unwrap();
        let mab =
            fit_tree(&node, &TreeConfig { solver: SolverKind::MabSplit, ..base.clone() }, &l2)
                .unwrap();
        assert_eq!(exact.root, mab.root);
    }

    #[test]
    fn best_first_respects_leaf_budget() {
        let d = make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Classification,
            n_samples: 1000,
            n_features: 6,
            n_informative: 3,
            noise_scale: 0.3,
            seed: 51,
        })
        .unwrap();
        let node = NodeView::full(&d);
        let ledger = InsertionLedger::new_uncapped();
        let config = TreeConfig {
            max_depth: None,
            max_leaf_nodes: Some(4),
            solver: SolverKind::Exact,
            ..TreeConfig::default()
        };
        let tree = fit_tree(&node, &config, &ledger).unwrap();
        assert_eq!(tree.n_leaves, 4);
        assert_eq!(tree.nodes_split, 3);

        let one = TreeConfig { max_leaf_nodes: Some(1), ..config };
        let tree = fit_tree(&node, &one, &ledger).unwrap();
        assert_eq!(tree.n_leaves, 1);
        assert_eq!(tree.nodes_split, 0);
    }

    #[test]
    fn ample_leaf_budget_reproduces_depth_first_tree() {
        let d = make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Classification,
            n_samples: 600,
            n_features: 5,
            n_informative: 2,
            noise_scale: 0.4,
            seed: 53,
        })
        .unwrap();
        let node = NodeView::full(&d);
        let base = TreeConfig {
            max_depth: Some(4),
            solver: SolverKind::Exact,
            seed: 3,
            ..TreeConfig::default()
        };
        let l1 = InsertionLedger::new_uncapped();
        let l2 = InsertionLedger::new_uncapped();
        let depth_first = fit_tree(&node, &base, &l1).unwrap();
        let best_first = fit_tree(
            &node,
            &TreeConfig { max_leaf_nodes: Some(10_000), ..base.clone() },
            &l2,
        )
        .unwrap();
        assert_eq!(depth_first.root, best_first.root);
    }

    #[test]
    fn budget_interruption_leaves_usable_tree() {
        let d = make_synthetic(&SyntheticSpec {
            kind: SyntheticKind::Classification,
            n_samples: 2000,
            n_features: 6,
            n_informative: 2,
            noise_scale: 0.4,
            seed: 61,
        })
        .unwrap();
        let node = NodeView::full(&d);
        let config = TreeConfig {
            max_depth: Some(6),
            solver: SolverKind::Exact,
            feature_subsample: FeatureSubsample::All,
            ..TreeConfig::default()
        };

        let unbounded = InsertionLedger::new_uncapped();
        let full = fit_tree(&node, &config, &unbounded).unwrap();
        assert!(!full.interrupted);

        let cap = full.insertions_used / 3;
        let ledger = InsertionLedger::with_cap(cap);
        let tree = fit_tree(&node, &config, &ledger).unwrap();
        assert!(tree.interrupted);
        assert!(tree.insertions_used <= cap);
        assert_eq!(tree.insertions_used, ledger.total());
        assert!(tree.n_leaves < full.n_leaves);
        // still answers queries
        let _ = tree.predict_with(|f| d.value(0, f));
    }
}
