//! Forests: bagged ensembles of trees with soft voting.
//!
//! Three sampling variants share one training loop. Random forests
//! bootstrap rows per tree; extra-trees additionally draw thresholds
//! uniformly at random instead of on a grid; random-patches forests fix a
//! single row/feature patch for the whole ensemble and bootstrap within
//! it. Tree seeds derive from the forest seed by tree index, so growing
//! the ensemble never changes the trees already grown, and parallel and
//! sequential training produce identical forests.
//!
//! An optional insertion budget turns training into an anytime procedure:
//! trees are fitted one by one against a capped ledger, the tree that hits
//! the cap keeps whatever splits it finished (if any), and everything
//! after it is skipped.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{bootstrap_sample, patch_subsample, Dataset, NodeView, Targets, TaskKind};
use crate::error::{Error, Result};
use crate::histogram::{EdgeStrategy, InsertionLedger};
use crate::seeding;
use crate::tree::{fit_tree, BinRule, DecisionTree, FeatureSubsample, LeafValue, TreeConfig};

/// Seed stream reserved for the patch draw, out of reach of tree indices.
const PATCH_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestKind {
    Rf,
    ExtraTrees,
    RandomPatches { alpha_n: f64, alpha_f: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub kind: ForestKind,
    pub n_trees: usize,
    pub tree: TreeConfig,
    /// Total histogram insertions the whole fit may spend.
    pub budget: Option<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: ForestConfig,
    pub trees: Vec<DecisionTree>,
    /// Per kept tree, the bootstrap row multiset it trained on.
    pub bootstraps: Vec<Vec<usize>>,
    pub patch_rows: Option<Vec<usize>>,
    pub patch_features: Option<Vec<usize>>,
    /// Trees that finished without interruption.
    pub completed_trees: usize,
    pub insertions_used: u64,
    pub wall_time_ms: u64,
    /// Training marginal, the prediction of an empty ensemble.
    pub fallback: LeafValue,
    pub n_features: usize,
    pub task: TaskKind,
    pub n_classes: Option<usize>,
    pub n_train_rows: usize,
}

/// Serialization envelope for a trained forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestDocument {
    pub config: ForestConfig,
    pub trees: Vec<DecisionTree>,
    pub metrics: ForestMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestMetrics {
    pub insertions_used: u64,
    pub completed_trees: usize,
    pub wall_time_ms: u64,
}

impl Forest {
    pub fn document(&self) -> ForestDocument {
        ForestDocument {
            config: self.config.clone(),
            trees: self.trees.clone(),
            metrics: ForestMetrics {
                insertions_used: self.insertions_used,
                completed_trees: self.completed_trees,
                wall_time_ms: self.wall_time_ms,
            },
        }
    }

    /// Soft-vote aggregate over the trees, or the training marginal when
    /// no trees were kept.
    pub fn predict_with(&self, value_of: impl Fn(usize) -> f64 + Copy) -> LeafValue {
        if self.trees.is_empty() {
            return self.fallback.clone();
        }
        match self.task {
            TaskKind::Classification => {
                let k = self.n_classes.unwrap_or(1);
                let mut mean = vec![0.0f64; k];
                for tree in &self.trees {
                    let LeafValue::Probabilities(p) = tree.predict_with(value_of) else {
                        unreachable!("classification forest holds classification trees")
                    };
                    for (m, &pi) in mean.iter_mut().zip(p) {
                        *m += pi;
                    }
                }
                let t = self.trees.len() as f64;
                for m in mean.iter_mut() {
                    *m /= t;
                }
                LeafValue::Probabilities(mean)
            }
            TaskKind::Regression => {
                let sum: f64 = self
                    .trees
                    .iter()
                    .map(|tree| {
                        let LeafValue::Mean(m) = tree.predict_with(value_of) else {
                            unreachable!("regression forest holds regression trees")
                        };
                        *m
                    })
                    .sum();
                LeafValue::Mean(sum / self.trees.len() as f64)
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<LeafValue> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got: row.len() });
        }
        Ok(self.predict_with(|f| row[f]))
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn marginal(data: &Dataset) -> LeafValue {
    match data.targets() {
        Targets::Classes { labels, n_classes } => {
            let mut counts = vec![0usize; *n_classes];
            for &l in labels {
                counts[l as usize] += 1;
            }
            let n = labels.len() as f64;
            LeafValue::Probabilities(counts.iter().map(|&c| c as f64 / n).collect())
        }
        Targets::Values(values) => {
            LeafValue::Mean(values.iter().sum::<f64>() / values.len() as f64)
        }
    }
}

/// The tree config a variant actually trains with: extra-trees forces
/// uniform random thresholds and its task's feature/bin conventions.
fn effective_tree_config(config: &ForestConfig, task: TaskKind) -> TreeConfig {
    let mut tc = config.tree.clone();
    if matches!(config.kind, ForestKind::ExtraTrees) {
        tc.edge_strategy = EdgeStrategy::RandomUniform;
        match task {
            TaskKind::Classification => {
                tc.feature_subsample = FeatureSubsample::Sqrt;
                tc.bins = BinRule::SqrtTotal;
            }
            TaskKind::Regression => {
                tc.feature_subsample = FeatureSubsample::All;
                tc.bins = BinRule::Total;
            }
        }
    }
    tc
}

struct PatchInfo {
    rows: Vec<usize>,
    features: Vec<usize>,
}

fn draw_patch(data: &Dataset, config: &ForestConfig) -> Result<Option<PatchInfo>> {
    match config.kind {
        ForestKind::RandomPatches { alpha_n, alpha_f } => {
            let view = patch_subsample(
                data,
                alpha_n,
                alpha_f,
                seeding::derive(config.seed, PATCH_STREAM),
            )?;
            Ok(Some(PatchInfo { rows: view.rows().to_vec(), features: view.features().to_vec() }))
        }
        _ => Ok(None),
    }
}

/// Bootstrap rows and feature pool for one tree.
fn tree_material(
    data: &Dataset,
    patch: &Option<PatchInfo>,
    tree_index: usize,
    forest_seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let tree_seed = seeding::derive(forest_seed, tree_index as u64);
    let boot_seed = seeding::derive(tree_seed, 1);
    match patch {
        None => {
            let view = bootstrap_sample(data, boot_seed);
            (view.rows().to_vec(), view.features().to_vec())
        }
        Some(p) => {
            use rand::Rng;
            let mut rng = seeding::rng(boot_seed);
            let np = p.rows.len();
            let rows = (0..np).map(|_| p.rows[rng.random_range(0..np)]).collect();
            (rows, p.features.clone())
        }
    }
}

fn fit_one_tree(
    data: &Dataset,
    config: &ForestConfig,
    tree_config: &TreeConfig,
    patch: &Option<PatchInfo>,
    tree_index: usize,
    ledger: &InsertionLedger,
) -> Result<(DecisionTree, Vec<usize>)> {
    let (rows, features) = tree_material(data, patch, tree_index, config.seed);
    let view = NodeView::new(data, rows.clone(), features)?;
    let tc = TreeConfig {
        seed: seeding::derive(seeding::derive(config.seed, tree_index as u64), 2),
        ..tree_config.clone()
    };
    let tree = fit_tree(&view, &tc, ledger)?;
    Ok((tree, rows))
}

/// Train a forest. With a budget set this is sequential and anytime;
/// otherwise trees fit in parallel against an uncapped ledger, collected
/// in index order.
pub fn fit_forest(data: &Dataset, config: &ForestConfig) -> Result<Forest> {
    if let Some(budget) = config.budget {
        return fit_forest_with_budget(data, config, budget);
    }
    if config.n_trees == 0 {
        return Err(Error::InvalidParam("forest needs at least one tree".into()));
    }
    let start = Instant::now();
    let patch = draw_patch(data, config)?;
    let tree_config = effective_tree_config(config, data.task());
    let ledger = InsertionLedger::new_uncapped();

    let fitted: Vec<(DecisionTree, Vec<usize>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|i| fit_one_tree(data, config, &tree_config, &patch, i, &ledger))
        .collect::<Result<Vec<_>>>()?;

    let (trees, bootstraps): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    Ok(Forest {
        completed_trees: trees.iter().filter(|t| !t.interrupted).count(),
        trees,
        bootstraps,
        patch_rows: patch.as_ref().map(|p| p.rows.clone()),
        patch_features: patch.as_ref().map(|p| p.features.clone()),
        insertions_used: ledger.total(),
        wall_time_ms: start.elapsed().as_millis() as u64,
        fallback: marginal(data),
        n_features: data.n_features(),
        task: data.task(),
        n_classes: data.n_classes(),
        n_train_rows: data.n_rows(),
        config: config.clone(),
    })
}

/// Train sequentially under a total insertion cap. The tree that exhausts
/// the cap is kept only if it finished at least one split; later trees are
/// not started.
pub fn fit_forest_with_budget(data: &Dataset, config: &ForestConfig, budget: u64) -> Result<Forest> {
    if config.n_trees == 0 {
        return Err(Error::InvalidParam("forest needs at least one tree".into()));
    }
    let start = Instant::now();
    let patch = draw_patch(data, config)?;
    let tree_config = effective_tree_config(config, data.task());
    let ledger = InsertionLedger::with_cap(budget);

    let mut trees = Vec::new();
    let mut bootstraps = Vec::new();
    let mut completed = 0usize;
    for i in 0..config.n_trees {
        let (tree, rows) = fit_one_tree(data, config, &tree_config, &patch, i, &ledger)?;
        let interrupted = tree.interrupted;
        if !interrupted {
            completed += 1;
        }
        if !interrupted || tree.nodes_split > 0 {
            trees.push(tree);
            bootstraps.push(rows);
        }
        if interrupted {
            break;
        }
    }

    Ok(Forest {
        trees,
        bootstraps,
        patch_rows: patch.as_ref().map(|p| p.rows.clone()),
        patch_features: patch.as_ref().map(|p| p.features.clone()),
        completed_trees: completed,
        insertions_used: ledger.total(),
        wall_time_ms: start.elapsed().as_millis() as u64,
        fallback: marginal(data),
        n_features: data.n_features(),
        task: data.task(),
        n_classes: data.n_classes(),
        n_train_rows: data.n_rows(),
        config: config.clone(),
    })
}

/// Aggregate prediction for every row of `data`.
pub fn predict_forest(forest: &Forest, data: &Dataset) -> Result<Vec<LeafValue>> {
    if data.n_features() != forest.n_features {
        return Err(Error::DimensionMismatch {
            expected: forest.n_features,
            got: data.n_features(),
        });
    }
    Ok((0..data.n_rows())
        .map(|row| forest.predict_with(|f| data.value(row, f)))
        .collect())
}

/// Fraction of rows whose argmax class matches the label; ties in the
/// vote go to the lowest class index.
pub fn forest_accuracy(forest: &Forest, data: &Dataset) -> Result<f64> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::InvalidParam("accuracy needs classification targets".into()))?;
    let predictions = predict_forest(forest, data)?;
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, &label)| {
            let LeafValue::Probabilities(p) = p else { return false };
            argmax_lowest(p) == label as usize
        })
        .count();
    Ok(hits as f64 / data.n_rows() as f64)
}

/// Mean squared error of the aggregate prediction.
pub fn forest_mse(forest: &Forest, data: &Dataset) -> Result<f64> {
    let targets = data
        .target_values()
        .ok_or_else(|| Error::InvalidParam("mse needs regression targets".into()))?;
    let predictions = predict_forest(forest, data)?;
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, &y)| {
            let LeafValue::Mean(m) = p else { unreachable!() };
            (m - y) * (m - y)
        })
        .sum();
    Ok(sum / data.n_rows() as f64)
}

/// Training rows the given tree never saw: the complement of its
/// bootstrap. Undefined for random-patches forests, whose rows were
/// already restricted before bootstrapping.
pub fn oob_indices(forest: &Forest, tree_index: usize) -> Result<Vec<usize>> {
    if matches!(forest.config.kind, ForestKind::RandomPatches { .. }) {
        return Err(Error::OobUndefined);
    }
    let bootstrap = forest
        .bootstraps
        .get(tree_index)
        .ok_or_else(|| Error::InvalidParam(format!("no tree {tree_index}")))?;
    let mut seen = vec![false; forest.n_train_rows];
    for &row in bootstrap {
        seen[row] = true;
    }
    Ok((0..forest.n_train_rows).filter(|&r| !seen[r]).collect())
}
