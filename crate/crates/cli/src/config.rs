//! Flat run configuration. Every tunable is one `key = value` pair with a
//! default; flags override file entries, which override defaults, and an
//! unknown key anywhere is a hard error. Documents echo the full effective
//! config so any run can be replayed from its own output.

use std::collections::BTreeMap;
use std::path::Path;

use banditforest::{
    BinRule, EdgeStrategy, Error, FeatureSubsample, ImportanceMethod, ImpurityKind, Result,
    SamplingMode, SolverKind, TaskKind,
};

/// Forest flavor named by a config key; alpha fractions live in their own
/// keys so the document stays flat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindKey {
    Rf,
    ExtraTrees,
    RandomPatches,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// CSV path; empty selects the synthetic generator.
    pub data: String,
    pub label: String,
    pub task: TaskKind,
    pub kind: KindKey,
    pub alpha_n: f64,
    pub alpha_f: f64,
    pub solver: SolverKind,
    /// `None` resolves by task: gini for classification, mse for regression.
    pub impurity: Option<ImpurityKind>,
    pub trees: usize,
    pub max_depth: Option<usize>,
    pub max_leaf_nodes: Option<usize>,
    pub min_impurity_decrease: f64,
    pub features_per_node: FeatureSubsample,
    pub bins: BinRule,
    pub edges: EdgeStrategy,
    pub batch: Option<usize>,
    pub delta: Option<f64>,
    pub sampling: SamplingMode,
    pub budget: Option<u64>,
    /// Seeds the dataset generator; per-run seeds come from `seeds`.
    pub seed: u64,
    /// Number of evaluation runs; run r uses seed r.
    pub seeds: usize,
    pub test_fraction: f64,
    pub synth_n: usize,
    pub synth_features: usize,
    pub synth_informative: usize,
    pub synth_noise: f64,
    pub method: ImportanceMethod,
    pub top_k: usize,
    pub runs: usize,
    /// Importance run r trains with seed `seed + stride * r`; stride 0
    /// makes every run identical.
    pub run_seed_stride: u64,
    pub sizes: Vec<usize>,
    pub out: String,
    pub csv_out: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: String::new(),
            label: "y".into(),
            task: TaskKind::Classification,
            kind: KindKey::Rf,
            alpha_n: 0.7,
            alpha_f: 0.85,
            solver: SolverKind::MabSplit,
            impurity: None,
            trees: 5,
            max_depth: Some(5),
            max_leaf_nodes: None,
            min_impurity_decrease: 0.005,
            features_per_node: FeatureSubsample::Sqrt,
            bins: BinRule::Fixed(32),
            edges: EdgeStrategy::EqualWidth,
            batch: None,
            delta: None,
            sampling: SamplingMode::WithoutReplacement,
            budget: None,
            seed: 0,
            seeds: 5,
            test_fraction: 0.1,
            synth_n: 10_000,
            synth_features: 20,
            synth_informative: 5,
            synth_noise: 0.1,
            method: ImportanceMethod::Mdi,
            top_k: 5,
            runs: 5,
            run_seed_stride: 1,
            sizes: Vec::new(),
            out: String::new(),
            csv_out: String::new(),
        }
    }
}

fn bad(key: &str, value: &str) -> Error {
    Error::InvalidParam(format!("invalid value for {key}: {value:?}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| bad(key, value))
}

/// `none`, or a number.
fn opt_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "none" => Ok(None),
        v => Ok(Some(num(key, v)?)),
    }
}

/// `auto`, or a number.
fn auto_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "auto" => Ok(None),
        v => Ok(Some(num(key, v)?)),
    }
}

impl RunConfig {
    /// Set one field from its textual form. Unknown keys are hard errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "data" => self.data = v.into(),
            "label" => self.label = v.into(),
            "task" => {
                self.task = match v {
                    "classification" => TaskKind::Classification,
                    "regression" => TaskKind::Regression,
                    _ => return Err(bad(key, value)),
                }
            }
            "kind" => {
                self.kind = match v {
                    "rf" => KindKey::Rf,
                    "extra_trees" => KindKey::ExtraTrees,
                    "random_patches" => KindKey::RandomPatches,
                    _ => return Err(bad(key, value)),
                }
            }
            "alpha_n" => self.alpha_n = num(key, v)?,
            "alpha_f" => self.alpha_f = num(key, v)?,
            "solver" => {
                self.solver = match v {
                    "exact" => SolverKind::Exact,
                    "mabsplit" => SolverKind::MabSplit,
                    "naive" => SolverKind::Naive,
                    _ => return Err(bad(key, value)),
                }
            }
            "impurity" => {
                self.impurity = match v {
                    "auto" => None,
                    "gini" => Some(ImpurityKind::Gini),
                    "entropy" => Some(ImpurityKind::Entropy),
                    "mse" => Some(ImpurityKind::Mse),
                    _ => return Err(bad(key, value)),
                }
            }
            "trees" => self.trees = num(key, v)?,
            "max_depth" => self.max_depth = opt_num(key, v)?,
            "max_leaf_nodes" => self.max_leaf_nodes = opt_num(key, v)?,
            "min_impurity_decrease" => self.min_impurity_decrease = num(key, v)?,
            "features_per_node" => {
                self.features_per_node = match v {
                    "sqrt" => FeatureSubsample::Sqrt,
                    "all" => FeatureSubsample::All,
                    _ => FeatureSubsample::Fixed(num(key, v)?),
                }
            }
            "bins" => {
                self.bins = match v {
                    "sqrt_total" => BinRule::SqrtTotal,
                    "total" => BinRule::Total,
                    _ => BinRule::Fixed(num(key, v)?),
                }
            }
            "edges" => {
                self.edges = match v {
                    "equal" => EdgeStrategy::EqualWidth,
                    "random" => EdgeStrategy::RandomUniform,
                    _ => return Err(bad(key, value)),
                }
            }
            "batch" => self.batch = auto_num(key, v)?,
            "delta" => self.delta = auto_num(key, v)?,
            "sampling" => {
                self.sampling = match v {
                    "without" => SamplingMode::WithoutReplacement,
                    "with" => SamplingMode::WithReplacement,
                    _ => return Err(bad(key, value)),
                }
            }
            "budget" => self.budget = opt_num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "seeds" => self.seeds = num(key, v)?,
            "test_fraction" => self.test_fraction = num(key, v)?,
            "synth_n" => self.synth_n = num(key, v)?,
            "synth_features" => self.synth_features = num(key, v)?,
            "synth_informative" => self.synth_informative = num(key, v)?,
            "synth_noise" => self.synth_noise = num(key, v)?,
            "method" => {
                self.method = match v {
                    "mdi" => ImportanceMethod::Mdi,
                    "permutation_oob" => ImportanceMethod::PermutationOob,
                    _ => return Err(bad(key, value)),
                }
            }
            "top_k" => self.top_k = num(key, v)?,
            "runs" => self.runs = num(key, v)?,
            "run_seed_stride" => self.run_seed_stride = num(key, v)?,
            "sizes" => {
                self.sizes = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|s| num(key, s)).collect::<Result<_>>()?
                }
            }
            "out" => self.out = v.into(),
            "csv_out" => self.csv_out = v.into(),
            _ => return Err(Error::InvalidParam(format!("unknown config key: {key}"))),
        }
        Ok(())
    }

    /// Apply every `key = value` line of a config file. `#` lines and blank
    /// lines are skipped.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidParam(format!(
                    "config line {}: expected key = value, got {line:?}",
                    i + 1
                )));
            };
            self.apply(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn resolved_impurity(&self) -> ImpurityKind {
        self.impurity.unwrap_or(match self.task {
            TaskKind::Classification => ImpurityKind::Gini,
            TaskKind::Regression => ImpurityKind::Mse,
        })
    }

    /// The full effective config in textual form; `apply` round-trips every
    /// entry. The impurity echo is resolved, never `auto`.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("data", self.data.clone());
        put("label", self.label.clone());
        put(
            "task",
            match self.task {
                TaskKind::Classification => "classification",
                TaskKind::Regression => "regression",
            }
            .into(),
        );
        put(
            "kind",
            match self.kind {
                KindKey::Rf => "rf",
                KindKey::ExtraTrees => "extra_trees",
                KindKey::RandomPatches => "random_patches",
            }
            .into(),
        );
        put("alpha_n", format!("{}", self.alpha_n));
        put("alpha_f", format!("{}", self.alpha_f));
        put(
            "solver",
            match self.solver {
                SolverKind::Exact => "exact",
                SolverKind::MabSplit => "mabsplit",
                SolverKind::Naive => "naive",
            }
            .into(),
        );
        put(
            "impurity",
            match self.resolved_impurity() {
                ImpurityKind::Gini => "gini",
                ImpurityKind::Entropy => "entropy",
                ImpurityKind::Mse => "mse",
            }
            .into(),
        );
        put("trees", format!("{}", self.trees));
        let opt = |o: Option<u64>| o.map_or("none".to_string(), |v| format!("{v}"));
        put("max_depth", opt(self.max_depth.map(|v| v as u64)));
        put("max_leaf_nodes", opt(self.max_leaf_nodes.map(|v| v as u64)));
        put("min_impurity_decrease", format!("{}", self.min_impurity_decrease));
        put(
            "features_per_node",
            match self.features_per_node {
                FeatureSubsample::Sqrt => "sqrt".into(),
                FeatureSubsample::All => "all".into(),
                FeatureSubsample::Fixed(k) => format!("{k}"),
            },
        );
        put(
            "bins",
            match self.bins {
                BinRule::Fixed(t) => format!("{t}"),
                BinRule::SqrtTotal => "sqrt_total".into(),
                BinRule::Total => "total".into(),
            },
        );
        put(
            "edges",
            match self.edges {
                EdgeStrategy::EqualWidth => "equal",
                EdgeStrategy::RandomUniform => "random",
            }
            .into(),
        );
        put("batch", self.batch.map_or("auto".into(), |v| format!("{v}")));
        put("delta", self.delta.map_or("auto".into(), |v| format!("{v}")));
        put(
            "sampling",
            match self.sampling {
                SamplingMode::WithoutReplacement => "without",
                SamplingMode::WithReplacement => "with",
            }
            .into(),
        );
        put("budget", opt(self.budget));
        put("seed", format!("{}", self.seed));
        put("seeds", format!("{}", self.seeds));
        put("test_fraction", format!("{}", self.test_fraction));
        put("synth_n", format!("{}", self.synth_n));
        put("synth_features", format!("{}", self.synth_features));
        put("synth_informative", format!("{}", self.synth_informative));
        put("synth_noise", format!("{}", self.synth_noise));
        put(
            "method",
            match self.method {
                ImportanceMethod::Mdi => "mdi",
                ImportanceMethod::PermutationOob => "permutation_oob",
            }
            .into(),
        );
        put("top_k", format!("{}", self.top_k));
        put("runs", format!("{}", self.runs));
        put("run_seed_stride", format!("{}", self.run_seed_stride));
        put(
            "sizes",
            self.sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
        );
        put("out", self.out.clone());
        put("csv_out", self.csv_out.clone());
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = RunConfig::default();
        assert!(matches!(
            cfg.apply("tree_count", "5"),
            Err(Error::InvalidParam(msg)) if msg.contains("unknown config key")
        ));
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply("trees", "many").unwrap_err();
        assert!(err.to_string().contains("trees"));
        assert!(cfg.apply("task", "ranking").is_err());
        assert!(cfg.apply("sizes", "10,x,30").is_err());
    }

    #[test]
    fn every_echoed_entry_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.apply("task", "regression").unwrap();
        cfg.apply("kind", "random_patches").unwrap();
        cfg.apply("max_depth", "none").unwrap();
        cfg.apply("bins", "sqrt_total").unwrap();
        cfg.apply("batch", "250").unwrap();
        cfg.apply("delta", "0.01").unwrap();
        cfg.apply("budget", "123456").unwrap();
        cfg.apply("sizes", "1000,3000,10000").unwrap();
        cfg.apply("features_per_node", "7").unwrap();
        cfg.apply("test_fraction", "0.25").unwrap();

        let echo = cfg.to_map();
        let mut rebuilt = RunConfig::default();
        for (k, v) in &echo {
            rebuilt.apply(k, v).unwrap();
        }
        // the echo resolves impurity, so compare through a second echo
        assert_eq!(rebuilt.to_map(), echo);
        assert_eq!(rebuilt.sizes, vec![1000, 3000, 10000]);
        assert_eq!(rebuilt.max_depth, None);
        assert_eq!(rebuilt.impurity, Some(ImpurityKind::Mse));
    }

    #[test]
    fn config_files_skip_comments_and_reject_junk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\n\ntrees = 9\nsolver = exact\n").unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.trees, 9);
        assert_eq!(cfg.solver, SolverKind::Exact);

        std::fs::write(&path, "trees 9\n").unwrap();
        let err = RunConfig::default().apply_file(&path).unwrap_err();
        assert!(err.to_string().contains("config line 1"));
    }
}
