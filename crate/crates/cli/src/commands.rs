//! One function per subcommand. Commands load or generate the dataset,
//! run the requested experiment over its seeds, and return a document for
//! the caller to emit; CSV side outputs are written here.

use std::collections::BTreeMap;
use std::path::PathBuf;

use banditforest::{
    fit_forest, forest_accuracy, forest_mse, load_csv, make_synthetic, mdi_importance,
    nogueira_stability, permutation_importance_oob, scaling_experiment, seeding,
    train_test_split, write_scaling_csv, BinRule, Dataset, Error, ForestConfig, ForestKind,
    ImportanceMethod, LabelColumn, Result, ScalingConfig, SolverConfig, SolverKind,
    SyntheticKind, SyntheticSpec, Targets, TaskKind, TreeConfig,
};
use rand::Rng;

use crate::config::{KindKey, RunConfig};
use crate::document::{
    to_json, write_crossover_csv, CrossoverDocument, CrossoverRow, ImportanceDocument,
    MetricSeries, ResultDocument, ScalingDocument, ARTIFACT_VERSION,
};

/// Relative output paths land under `BANDITFOREST_OUT_DIR` when it is set.
pub fn resolve_out(path: &str) -> PathBuf {
    let p = PathBuf::from(path);
    if p.is_absolute() {
        return p;
    }
    match std::env::var_os("BANDITFOREST_OUT_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(p),
        _ => p,
    }
}

fn synthetic_spec(cfg: &RunConfig) -> SyntheticSpec {
    SyntheticSpec {
        kind: match cfg.task {
            TaskKind::Classification => SyntheticKind::Classification,
            TaskKind::Regression => SyntheticKind::Regression,
        },
        n_samples: cfg.synth_n,
        n_features: cfg.synth_features,
        n_informative: cfg.synth_informative,
        noise_scale: cfg.synth_noise,
        seed: cfg.seed,
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    if cfg.data.is_empty() {
        make_synthetic(&synthetic_spec(cfg))
    } else {
        load_csv(&cfg.data, &LabelColumn::Name(cfg.label.clone()), cfg.task)
    }
}

fn forest_config(cfg: &RunConfig, run_seed: u64) -> ForestConfig {
    ForestConfig {
        kind: match cfg.kind {
            KindKey::Rf => ForestKind::Rf,
            KindKey::ExtraTrees => ForestKind::ExtraTrees,
            KindKey::RandomPatches => ForestKind::RandomPatches {
                alpha_n: cfg.alpha_n,
                alpha_f: cfg.alpha_f,
            },
        },
        n_trees: cfg.trees,
        tree: TreeConfig {
            max_depth: cfg.max_depth,
            max_leaf_nodes: cfg.max_leaf_nodes,
            min_impurity_decrease: cfg.min_impurity_decrease,
            feature_subsample: cfg.features_per_node,
            edge_strategy: cfg.edges,
            bins: cfg.bins,
            solver: cfg.solver,
            impurity: cfg.resolved_impurity(),
            batch_size: cfg.batch,
            delta: cfg.delta,
            sampling: cfg.sampling,
            seed: 0,
        },
        budget: cfg.budget,
        seed: run_seed,
    }
}

fn solver_config(cfg: &RunConfig) -> SolverConfig {
    SolverConfig {
        batch_size: cfg.batch,
        delta: cfg.delta,
        sampling: cfg.sampling,
        min_impurity_decrease: cfg.min_impurity_decrease,
        seed: 0,
        instrument: false,
    }
}

fn test_metric_name(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Classification => "test_accuracy",
        TaskKind::Regression => "test_mse",
    }
}

fn run_forest_eval(cfg: &RunConfig, command: &str) -> Result<ResultDocument> {
    if cfg.trees == 0 {
        return Err(Error::InvalidParam("forest needs at least one tree".into()));
    }
    if cfg.seeds == 0 {
        return Err(Error::InvalidParam("need at least one seed".into()));
    }
    let d = load_dataset(cfg)?;
    let seeds: Vec<u64> = (0..cfg.seeds as u64).collect();
    let mut times = Vec::with_capacity(seeds.len());
    let mut insertions = Vec::with_capacity(seeds.len());
    let mut completed = Vec::with_capacity(seeds.len());
    let mut metric = Vec::with_capacity(seeds.len());
    for &s in &seeds {
        let (train, test) = train_test_split(&d, cfg.test_fraction, s)?;
        let forest = fit_forest(&train, &forest_config(cfg, s))?;
        times.push(forest.wall_time_ms as f64);
        insertions.push(forest.insertions_used as f64);
        completed.push(forest.completed_trees as f64);
        metric.push(match cfg.task {
            TaskKind::Classification => forest_accuracy(&forest, &test)?,
            TaskKind::Regression => forest_mse(&forest, &test)?,
        });
    }
    let mut metrics = BTreeMap::new();
    metrics.insert("train_time_ms".to_string(), MetricSeries::from_values(times));
    metrics.insert("insertions_used".to_string(), MetricSeries::from_values(insertions));
    metrics.insert("completed_trees".to_string(), MetricSeries::from_values(completed));
    metrics.insert(test_metric_name(cfg.task).to_string(), MetricSeries::from_values(metric));
    Ok(ResultDocument {
        artifact_version: ARTIFACT_VERSION.into(),
        command: command.into(),
        config: cfg.to_map(),
        seeds,
        metrics,
    })
}

pub fn cmd_train(cfg: &RunConfig) -> Result<ResultDocument> {
    run_forest_eval(cfg, "train")
}

pub fn cmd_budget(cfg: &RunConfig) -> Result<ResultDocument> {
    if cfg.budget.is_none() {
        return Err(Error::InvalidParam("budget command needs a budget value".into()));
    }
    run_forest_eval(cfg, "budget")
}

pub fn cmd_importance(cfg: &RunConfig) -> Result<ImportanceDocument> {
    if cfg.runs < 2 {
        return Err(Error::InvalidParam("stability needs at least 2 runs".into()));
    }
    if cfg.trees == 0 {
        return Err(Error::InvalidParam("forest needs at least one tree".into()));
    }
    let d = load_dataset(cfg)?;
    let m = d.n_features();
    if cfg.top_k == 0 || cfg.top_k >= m {
        return Err(Error::InvalidParam(format!(
            "top_k must be between 1 and {} exclusive, got {}",
            m, cfg.top_k
        )));
    }
    let mut run_seeds = Vec::with_capacity(cfg.runs);
    let mut selections = Vec::with_capacity(cfg.runs);
    let mut matrix = Vec::with_capacity(cfg.runs);
    for r in 0..cfg.runs as u64 {
        let s = cfg.seed.wrapping_add(cfg.run_seed_stride.wrapping_mul(r));
        run_seeds.push(s);
        let forest = fit_forest(&d, &forest_config(cfg, s))?;
        let report = match cfg.method {
            ImportanceMethod::Mdi => mdi_importance(&forest, cfg.top_k)?,
            ImportanceMethod::PermutationOob => {
                permutation_importance_oob(&forest, &d, cfg.top_k, s)?
            }
        };
        let mut row = vec![false; m];
        for &f in &report.top_k {
            row[f] = true;
        }
        selections.push(report.top_k);
        matrix.push(row);
    }
    let stability = nogueira_stability(&matrix, cfg.top_k)?;
    Ok(ImportanceDocument {
        artifact_version: ARTIFACT_VERSION.into(),
        command: "importance".into(),
        config: cfg.to_map(),
        run_seeds,
        method: cfg.method,
        k: cfg.top_k,
        selections,
        selection_matrix: matrix,
        stability,
    })
}

/// Thresholds per feature implied by the bin rule at `m` total features.
fn resolve_thresholds(bins: BinRule, m: usize) -> usize {
    match bins {
        BinRule::Fixed(t) => t,
        BinRule::SqrtTotal => (m as f64).sqrt().ceil() as usize,
        BinRule::Total => m,
    }
    .max(1)
}

pub fn cmd_scaling(cfg: &RunConfig) -> Result<ScalingDocument> {
    let d = load_dataset(cfg)?;
    let sc = ScalingConfig {
        subset_sizes: cfg.sizes.clone(),
        seeds: (0..cfg.seeds as u64).collect(),
        thresholds: resolve_thresholds(cfg.bins, d.n_features()),
        edge_strategy: cfg.edges,
        impurity: cfg.resolved_impurity(),
        solver_kind: cfg.solver,
        solver: solver_config(cfg),
    };
    let report = scaling_experiment(&d, &sc)?;
    if !cfg.csv_out.is_empty() {
        write_scaling_csv(&report, &resolve_out(&cfg.csv_out))?;
    }
    Ok(ScalingDocument {
        artifact_version: ARTIFACT_VERSION.into(),
        command: "scaling".into(),
        config: cfg.to_map(),
        report,
    })
}

fn subset_dataset(d: &Dataset, rows: &[usize]) -> Result<Dataset> {
    let columns: Vec<Vec<f64>> = (0..d.n_features())
        .map(|f| rows.iter().map(|&r| d.value(r, f)).collect())
        .collect();
    let targets = match d.targets() {
        Targets::Classes { labels, n_classes } => Targets::Classes {
            labels: rows.iter().map(|&r| labels[r]).collect(),
            n_classes: *n_classes,
        },
        Targets::Values(values) => Targets::Values(rows.iter().map(|&r| values[r]).collect()),
    };
    Dataset::from_columns(columns, targets, Some(d.feature_names().to_vec()), d.label_name())
}

pub fn cmd_crossover(cfg: &RunConfig) -> Result<CrossoverDocument> {
    if cfg.seeds == 0 {
        return Err(Error::InvalidParam("need at least one seed".into()));
    }
    if cfg.trees == 0 {
        return Err(Error::InvalidParam("forest needs at least one tree".into()));
    }
    let d = load_dataset(cfg)?;
    let n = d.n_rows();
    let mut sizes = cfg.sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "crossover needs at least 3 distinct sizes, got {}",
            sizes.len()
        )));
    }
    if let Some(&bad) = sizes.iter().find(|&&s| s < 2 || s > n) {
        return Err(Error::InvalidParam(format!(
            "size {bad} outside the valid range 2..={n}"
        )));
    }

    let mut rows_out = Vec::with_capacity(sizes.len());
    for &size in &sizes {
        let mut sums = [0.0f64; 4];
        for r in 0..cfg.seeds as u64 {
            let rows_seed = seeding::derive(seeding::derive(cfg.seed, size as u64), r);
            let mut rng = seeding::rng(rows_seed);
            let rows: Vec<usize> = (0..size).map(|_| rng.random_range(0..n)).collect();
            let sub = subset_dataset(&d, &rows)?;
            for (i, solver) in [SolverKind::Exact, SolverKind::MabSplit].iter().enumerate() {
                let mut fc = forest_config(cfg, r);
                fc.tree.solver = *solver;
                fc.budget = None;
                let forest = fit_forest(&sub, &fc)?;
                sums[2 * i] += forest.insertions_used as f64;
                sums[2 * i + 1] += forest.wall_time_ms as f64;
            }
        }
        let k = cfg.seeds as f64;
        rows_out.push(CrossoverRow {
            size,
            exact_insertions: sums[0] / k,
            exact_ms: sums[1] / k,
            mabsplit_insertions: sums[2] / k,
            mabsplit_ms: sums[3] / k,
        });
    }

    let crossover_size = (0..rows_out.len())
        .find(|&i| rows_out[i..].iter().all(|r| r.mabsplit_insertions < r.exact_insertions))
        .map(|i| rows_out[i].size);

    if !cfg.csv_out.is_empty() {
        write_crossover_csv(&rows_out, &resolve_out(&cfg.csv_out))?;
    }
    Ok(CrossoverDocument {
        artifact_version: ARTIFACT_VERSION.into(),
        command: "crossover".into(),
        config: cfg.to_map(),
        rows: rows_out,
        crossover_size,
    })
}

/// Returns the one-line diagnostic describing what was written.
pub fn cmd_gen_data(cfg: &RunConfig) -> Result<String> {
    if cfg.out.is_empty() {
        return Err(Error::InvalidParam("gen-data needs an output path (out)".into()));
    }
    let d = make_synthetic(&synthetic_spec(cfg))?;
    let path = resolve_out(&cfg.out);
    d.write_csv(&path)?;
    Ok(format!(
        "wrote {} rows x {} features to {}",
        d.n_rows(),
        d.n_features(),
        path.display()
    ))
}

/// Run one subcommand to its JSON text; gen-data returns an empty string
/// after writing its file and reporting on the error stream.
pub fn execute(command: &str, cfg: &RunConfig) -> Result<String> {
    match command {
        "gen-data" => {
            let line = cmd_gen_data(cfg)?;
            eprintln!("{line}");
            Ok(String::new())
        }
        "train" => to_json(&cmd_train(cfg)?),
        "budget" => to_json(&cmd_budget(cfg)?),
        "importance" => to_json(&cmd_importance(cfg)?),
        "scaling" => to_json(&cmd_scaling(cfg)?),
        "crossover" => to_json(&cmd_crossover(cfg)?),
        _ => Err(Error::InvalidParam(format!("unknown command: {command}"))),
    }
}
