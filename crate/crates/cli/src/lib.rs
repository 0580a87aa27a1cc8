//! Command-line experiment runner: subcommands for dataset generation,
//! forest training, fixed-budget comparisons, importance stability,
//! split-cost scaling, and exact/mabsplit crossover grids. Configuration
//! resolves flags over a `key = value` file over defaults; results are
//! JSON documents that embed the full effective config.

pub mod commands;
pub mod config;
pub mod document;

use clap::Parser;

use banditforest::Result;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "banditforest", version, about = "Tree-ensemble experiments with bandit node splitting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Subcommand)]
pub enum Command {
    /// Write a synthetic dataset as CSV.
    GenData(Opts),
    /// Train forests across seeds; report time, insertions, and test metric.
    Train(Opts),
    /// Train under a fixed histogram-insertion budget.
    Budget(Opts),
    /// Feature-importance stability across repeated fits.
    Importance(Opts),
    /// Root-split sample counts across subset sizes, with linear and log fits.
    Scaling(Opts),
    /// Paired exact/mabsplit training cost across subset sizes.
    Crossover(Opts),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Budget(_) => "budget",
            Command::Importance(_) => "importance",
            Command::Scaling(_) => "scaling",
            Command::Crossover(_) => "crossover",
        }
    }

    pub fn opts(&self) -> &Opts {
        match self {
            Command::GenData(o)
            | Command::Train(o)
            | Command::Budget(o)
            | Command::Importance(o)
            | Command::Scaling(o)
            | Command::Crossover(o) => o,
        }
    }
}

/// Every config key as an optional flag. Values are parsed by the same
/// code that reads config files, so flags and file entries behave
/// identically; a flag simply wins.
#[derive(Debug, Default, clap::Args)]
pub struct Opts {
    /// Config file of `key = value` lines, applied before flags.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// CSV dataset path; omit to use the synthetic generator.
    #[arg(long)]
    pub data: Option<String>,
    /// Label column name.
    #[arg(long)]
    pub label: Option<String>,
    /// classification | regression
    #[arg(long)]
    pub task: Option<String>,
    /// rf | extra_trees | random_patches
    #[arg(long)]
    pub kind: Option<String>,
    /// Row fraction for random_patches.
    #[arg(long)]
    pub alpha_n: Option<String>,
    /// Feature fraction for random_patches.
    #[arg(long)]
    pub alpha_f: Option<String>,
    /// exact | mabsplit | naive
    #[arg(long)]
    pub solver: Option<String>,
    /// auto | gini | entropy | mse
    #[arg(long)]
    pub impurity: Option<String>,
    #[arg(long)]
    pub trees: Option<String>,
    /// none, or a depth limit.
    #[arg(long)]
    pub max_depth: Option<String>,
    /// none, or a best-first leaf limit.
    #[arg(long)]
    pub max_leaf_nodes: Option<String>,
    #[arg(long)]
    pub min_impurity_decrease: Option<String>,
    /// sqrt | all | a fixed count.
    #[arg(long)]
    pub features_per_node: Option<String>,
    /// Thresholds per feature: a count, sqrt_total, or total.
    #[arg(long)]
    pub bins: Option<String>,
    /// equal | random
    #[arg(long)]
    pub edges: Option<String>,
    /// auto, or rows per sampling round.
    #[arg(long)]
    pub batch: Option<String>,
    /// auto, or a per-interval failure probability.
    #[arg(long)]
    pub delta: Option<String>,
    /// without | with
    #[arg(long)]
    pub sampling: Option<String>,
    /// none, or a total insertion cap.
    #[arg(long)]
    pub budget: Option<String>,
    /// Dataset generator seed.
    #[arg(long)]
    pub seed: Option<String>,
    /// Number of runs; run r uses seed r.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub test_fraction: Option<String>,
    #[arg(long)]
    pub synth_n: Option<String>,
    #[arg(long)]
    pub synth_features: Option<String>,
    #[arg(long)]
    pub synth_informative: Option<String>,
    #[arg(long)]
    pub synth_noise: Option<String>,
    /// mdi | permutation_oob
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub top_k: Option<String>,
    /// Importance refits per stability estimate.
    #[arg(long)]
    pub runs: Option<String>,
    /// Seed step between importance runs; 0 repeats one run exactly.
    #[arg(long)]
    pub run_seed_stride: Option<String>,
    /// Comma-separated subset sizes for scaling and crossover.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Result path; stdout when omitted. Relative paths land under
    /// BANDITFOREST_OUT_DIR when that is set.
    #[arg(long)]
    pub out: Option<String>,
    /// Side CSV path for scaling and crossover series.
    #[arg(long)]
    pub csv_out: Option<String>,
}

impl Opts {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags: [(&str, &Option<String>); 32] = [
            ("data", &self.data),
            ("label", &self.label),
            ("task", &self.task),
            ("kind", &self.kind),
            ("alpha_n", &self.alpha_n),
            ("alpha_f", &self.alpha_f),
            ("solver", &self.solver),
            ("impurity", &self.impurity),
            ("trees", &self.trees),
            ("max_depth", &self.max_depth),
            ("max_leaf_nodes", &self.max_leaf_nodes),
            ("min_impurity_decrease", &self.min_impurity_decrease),
            ("features_per_node", &self.features_per_node),
            ("bins", &self.bins),
            ("edges", &self.edges),
            ("batch", &self.batch),
            ("delta", &self.delta),
            ("sampling", &self.sampling),
            ("budget", &self.budget),
            ("seed", &self.seed),
            ("seeds", &self.seeds),
            ("test_fraction", &self.test_fraction),
            ("synth_n", &self.synth_n),
            ("synth_features", &self.synth_features),
            ("synth_informative", &self.synth_informative),
            ("synth_noise", &self.synth_noise),
            ("method", &self.method),
            ("top_k", &self.top_k),
            ("runs", &self.runs),
            ("run_seed_stride", &self.run_seed_stride),
            ("sizes", &self.sizes),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.apply(key, v)?;
            }
        }
        if let Some(v) = &self.csv_out {
            cfg.apply("csv_out", v)?;
        }
        Ok(cfg)
    }
}

/// Run a parsed invocation: execute the subcommand and emit its JSON to
/// the configured path or stdout.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.command.opts().resolve()?;
    let json = commands::execute(cli.command.name(), &cfg)?;
    if json.is_empty() {
        return Ok(());
    }
    if cfg.out.is_empty() {
        print!("{json}");
    } else {
        std::fs::write(commands::resolve_out(&cfg.out), json)?;
    }
    Ok(())
}
