//! Node split solvers.
//!
//! All three solvers score the same candidate arms, one per (feature,
//! threshold) pair, and agree on the winner; they differ in how many row
//! insertions they spend. `solve_exact` inserts every row into every
//! feature histogram (n * m insertions). `solve_naive` recounts from
//! scratch per arm (n insertions per arm). `solve_mabsplit` samples rows in
//! batches, keeps a confidence interval per arm, and eliminates arms whose
//! interval lies above the best arm's upper bound, so easy nodes are
//! decided after a small fraction of the data; if several arms are still
//! standing when the samples run out it falls back to exact evaluation.
//!
//! Every solver applies the same acceptance gate: the winner is returned
//! only if its optimistic objective improves on the parent impurity by at
//! least `min_impurity_decrease`.

use rand::Rng;

use crate::data::{Dataset, NodeView, Targets};
use crate::error::{Error, Result};
use crate::histogram::{
    make_edges, BinEdges, EdgeStrategy, FeatureHistogram, HistogramKind, InsertionLedger,
    TargetValue,
};
use crate::impurity::{
    estimate_with_ci, node_impurity, split_objective, ImpurityKind, SideStats, ThetaVector,
};
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Batches are a growing prefix of a shuffled row order; estimates get
    /// the finite population correction and become exact at exhaustion.
    WithoutReplacement,
    /// Batches are independent uniform draws; exhaustion triggers a fresh
    /// exact pass over the surviving features.
    WithReplacement,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Rows per sampling round; `None` picks `max(2 * t_max, 100)`.
    pub batch_size: Option<usize>,
    /// Per-interval failure probability; `None` picks
    /// `1 / (n^2 * m * t_max)`, capped at 0.25.
    pub delta: Option<f64>,
    pub sampling: SamplingMode,
    /// Minimum impurity decrease a split must promise to be accepted.
    pub min_impurity_decrease: f64,
    pub seed: u64,
    /// Record per-arm pull counts and interval diagnostics.
    pub instrument: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            batch_size: None,
            delta: None,
            sampling: SamplingMode::WithoutReplacement,
            min_impurity_decrease: 0.005,
            seed: 0,
            instrument: false,
        }
    }
}

/// One candidate split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arm {
    /// Dataset feature index.
    pub feature: usize,
    pub threshold_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChosenSplit {
    /// Dataset feature index.
    pub feature: usize,
    pub threshold_index: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    /// The winning split, or `None` when the gate rejects it (or the node
    /// offers no candidate arms).
    pub best: Option<ChosenSplit>,
    /// Objective of the winning arm (parent impurity when no arms exist).
    pub mu: f64,
    pub parent_impurity: f64,
    /// `mu - parent_impurity`; negative when the split helps.
    pub reduction: f64,
    /// Rows drawn by the sampling loop (the full row count for exact and
    /// naive solves).
    pub samples_used: usize,
    /// Histogram insertions this solve charged to the ledger.
    pub insertions_used: u64,
    /// True when more than one arm was still active at sample exhaustion,
    /// so the winner came from exact evaluation of the survivors.
    pub fell_back_to_exact: bool,
    /// Active arms when the solve concluded.
    pub arms_surviving: usize,
    pub instrumentation: Option<PullInstrumentation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPullRecord {
    /// Dataset feature index.
    pub feature: usize,
    pub threshold_index: usize,
    pub threshold: f64,
    /// Rows this arm consumed: its feature's insertions while the arm was
    /// active, plus a full exact pass if it survived into a resampling
    /// fallback.
    pub samples: usize,
    pub survived: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullInstrumentation {
    pub records: Vec<ArmPullRecord>,
    /// Rows inserted by a with-replacement exact fallback.
    pub fallback_samples: usize,
    /// Largest observed `ci * sqrt(n_used / ln(1 / delta))`, an empirical
    /// stand-in for the subgaussian scale of the estimates.
    pub max_ci_scale: f64,
    /// Resolved per-interval failure probability.
    pub delta: f64,
    /// Resolved batch size.
    pub batch_size: usize,
}

fn target_of(data: &Dataset, row: usize) -> TargetValue {
    match data.targets() {
        Targets::Classes { labels, .. } => TargetValue::Class(labels[row]),
        Targets::Values(values) => TargetValue::Value(values[row]),
    }
}

fn histogram_kind(data: &Dataset) -> HistogramKind {
    match data.n_classes() {
        Some(n_classes) => HistogramKind::Classification { n_classes },
        None => HistogramKind::Regression,
    }
}

/// Impurity of the node itself, from one pass over its rows.
pub fn parent_impurity(node: &NodeView, kind: ImpurityKind) -> Result<f64> {
    let n = node.n_rows() as f64;
    let data = node.data();
    let stats = match data.targets() {
        Targets::Classes { labels, n_classes } => {
            let mut counts = vec![0u64; *n_classes];
            for &row in node.rows() {
                counts[labels[row] as usize] += 1;
            }
            SideStats::Classification {
                masses: counts.iter().map(|&c| c as f64 / n).collect(),
            }
        }
        Targets::Values(values) => {
            let mut s = [0.0f64; 5];
            for &row in node.rows() {
                let y = values[row];
                s[0] += 1.0;
                s[1] += y;
                s[2] += y * y;
                s[3] += y * y * y;
                s[4] += y * y * y * y;
            }
            SideStats::Regression {
                weight: s[0] / n,
                sum: s[1] / n,
                sum_sq: s[2] / n,
                sum_cube: s[3] / n,
                sum_quartic: s[4] / n,
            }
        }
    };
    node_impurity(kind, &stats)
}

/// Per-feature bin edges over the node's observed value ranges. Edge
/// randomness is seeded per dataset feature index, so a feature's
/// thresholds don't depend on which other features the node drew.
pub fn node_bin_edges(
    node: &NodeView,
    strategy: EdgeStrategy,
    count: usize,
    seed: u64,
) -> Result<Vec<BinEdges>> {
    let data = node.data();
    node.features()
        .iter()
        .map(|&feature| {
            let column = data.column(feature);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &row in node.rows() {
                let v = column[row];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            make_edges(strategy, lo, hi, count, seeding::derive(seed, feature as u64))
        })
        .collect()
}

/// Slot indices owning at least one threshold.
fn candidate_slots(edges: &[BinEdges]) -> Vec<usize> {
    (0..edges.len()).filter(|&s| !edges[s].is_degenerate()).collect()
}

fn resolve_batch(config: &SolverConfig, t_max: usize) -> usize {
    config.batch_size.unwrap_or_else(|| (2 * t_max).max(100)).max(1)
}

fn resolve_delta(config: &SolverConfig, n: usize, m: usize, t_max: usize) -> f64 {
    config.delta.unwrap_or_else(|| {
        let denom = (n as f64) * (n as f64) * (m as f64) * (t_max as f64);
        (1.0 / denom).min(0.25)
    })
}

/// True when `(mu, feature, t)` beats the incumbent: lower objective, ties
/// broken by lower dataset feature index, then lower threshold index.
fn improves(mu: f64, feature: usize, t: usize, best: Option<(f64, usize, usize)>) -> bool {
    match best {
        None => true,
        Some((bm, bf, bt)) => {
            mu < bm || (mu == bm && (feature < bf || (feature == bf && t < bt)))
        }
    }
}

/// Map a ledger refusal to an error carrying this solve's spend so far.
fn budget_err(e: Error, charged: u64) -> Error {
    match e {
        Error::BudgetExhausted { .. } => Error::BudgetExhausted { charged },
        other => other,
    }
}

struct Winner {
    slot: usize,
    threshold_index: usize,
    mu: f64,
    ci: f64,
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    node: &NodeView,
    edges: &[BinEdges],
    config: &SolverConfig,
    parent: f64,
    winner: Option<Winner>,
    samples_used: usize,
    insertions_used: u64,
    fell_back_to_exact: bool,
    arms_surviving: usize,
    instrumentation: Option<PullInstrumentation>,
) -> SplitResult {
    match winner {
        None => SplitResult {
            best: None,
            mu: parent,
            parent_impurity: parent,
            reduction: 0.0,
            samples_used,
            insertions_used,
            fell_back_to_exact,
            arms_surviving,
            instrumentation,
        },
        Some(w) => {
            // gate on the optimistic end of the winner's interval; exact
            // winners have zero width so this is just their objective
            let passes = parent - (w.mu - w.ci) >= config.min_impurity_decrease;
            let feature = node.features()[w.slot];
            SplitResult {
                best: passes.then(|| ChosenSplit {
                    feature,
                    threshold_index: w.threshold_index,
                    threshold: edges[w.slot].thresholds[w.threshold_index],
                }),
                mu: w.mu,
                parent_impurity: parent,
                reduction: w.mu - parent,
                samples_used,
                insertions_used,
                fell_back_to_exact,
                arms_surviving,
                instrumentation,
            }
        }
    }
}

/// Exact solver: every row into every candidate feature's histogram, one
/// prefix scan per feature, `n * m` insertions.
pub fn solve_exact(
    node: &NodeView,
    kind: ImpurityKind,
    edges: &[BinEdges],
    config: &SolverConfig,
    ledger: &InsertionLedger,
) -> Result<SplitResult> {
    if edges.len() != node.features().len() {
        return Err(Error::InvalidParam("one BinEdges per node feature required".into()));
    }
    let parent = parent_impurity(node, kind)?;
    let data = node.data();
    let hkind = histogram_kind(data);
    let slots = candidate_slots(edges);
    let n = node.n_rows();
    let t_max = slots.iter().map(|&s| edges[s].thresholds.len()).max().unwrap_or(0);

    let mut charged = 0u64;
    let mut best: Option<(f64, usize, usize)> = None;
    let mut best_slot = 0usize;
    let mut records = Vec::new();

    for &slot in &slots {
        let mut hist = FeatureHistogram::new(edges[slot].clone(), hkind)?;
        for &row in node.rows() {
            hist.insert(data.value(row, node.features()[slot]), target_of(data, row), ledger)
                .map_err(|e| budget_err(e, charged))?;
            charged += 1;
        }
        let feature = node.features()[slot];
        for (t, (left, right)) in hist.prefix_scan()?.iter().enumerate() {
            let theta = ThetaVector::from_sides(left, right)?;
            let mu = split_objective(kind, &theta)?;
            if improves(mu, feature, t, best) {
                best = Some((mu, feature, t));
                best_slot = slot;
            }
            if config.instrument {
                records.push(ArmPullRecord {
                    feature,
                    threshold_index: t,
                    threshold: edges[slot].thresholds[t],
                    samples: n,
                    survived: true,
                });
            }
        }
    }

    let arms: usize = slots.iter().map(|&s| edges[s].thresholds.len()).sum();
    let instrumentation = config.instrument.then(|| PullInstrumentation {
        records,
        fallback_samples: 0,
        max_ci_scale: 0.0,
        delta: resolve_delta(config, n, slots.len().max(1), t_max.max(1)),
        batch_size: resolve_batch(config, t_max.max(1)),
    });
    let winner = best.map(|(mu, _, t)| Winner { slot: best_slot, threshold_index: t, mu, ci: 0.0 });
    let samples_used = if slots.is_empty() { 0 } else { n };
    Ok(assemble(node, edges, config, parent, winner, samples_used, charged, false, arms, instrumentation))
}

/// Brute-force solver: recounts both sides from scratch for every arm,
/// `n` insertions per arm. Deliberately shares no accumulation path with
/// the histogram scan, so it serves as an independent check.
pub fn solve_naive(
    node: &NodeView,
    kind: ImpurityKind,
    edges: &[BinEdges],
    config: &SolverConfig,
    ledger: &InsertionLedger,
) -> Result<SplitResult> {
    if edges.len() != node.features().len() {
        return Err(Error::InvalidParam("one BinEdges per node feature required".into()));
    }
    let parent = parent_impurity(node, kind)?;
    let data = node.data();
    let n = node.n_rows();
    let slots = candidate_slots(edges);
    let t_max = slots.iter().map(|&s| edges[s].thresholds.len()).max().unwrap_or(0);

    let mut charged = 0u64;
    let mut arms = 0usize;
    let mut best: Option<(f64, usize, usize)> = None;
    let mut best_slot = 0usize;
    let mut records = Vec::new();

    for &slot in &slots {
        let feature = node.features()[slot];
        let column = data.column(feature);
        for (t, &threshold) in edges[slot].thresholds.iter().enumerate() {
            ledger.try_charge(n as u64).map_err(|e| budget_err(e, charged))?;
            charged += n as u64;
            arms += 1;
            let theta = recount_arm(node, column, threshold)?;
            let mu = split_objective(kind, &theta)?;
            if improves(mu, feature, t, best) {
                best = Some((mu, feature, t));
                best_slot = slot;
            }
            if config.instrument {
                records.push(ArmPullRecord {
                    feature,
                    threshold_index: t,
                    threshold,
                    samples: n,
                    survived: true,
                });
            }
        }
    }

    let instrumentation = config.instrument.then(|| PullInstrumentation {
        records,
        fallback_samples: 0,
        max_ci_scale: 0.0,
        delta: resolve_delta(config, n, slots.len().max(1), t_max.max(1)),
        batch_size: resolve_batch(config, t_max.max(1)),
    });
    let winner = best.map(|(mu, _, t)| Winner { slot: best_slot, threshold_index: t, mu, ci: 0.0 });
    let samples_used = if slots.is_empty() { 0 } else { n };
    Ok(assemble(node, edges, config, parent, winner, samples_used, charged, false, arms, instrumentation))
}

/// Tally one arm by walking every node row once.
fn recount_arm(node: &NodeView, column: &[f64], threshold: f64) -> Result<ThetaVector> {
    let data = node.data();
    let n = node.n_rows() as f64;
    match data.targets() {
        Targets::Classes { labels, n_classes } => {
            let k = *n_classes;
            let mut left = vec![0u64; k];
            let mut right = vec![0u64; k];
            for &row in node.rows() {
                let side = if column[row] < threshold { &mut left } else { &mut right };
                side[labels[row] as usize] += 1;
            }
            ThetaVector::from_sides(
                &SideStats::Classification {
                    masses: left.iter().map(|&c| c as f64 / n).collect(),
                },
                &SideStats::Classification {
                    masses: right.iter().map(|&c| c as f64 / n).collect(),
                },
            )
        }
        Targets::Values(values) => {
            let mut acc = [[0.0f64; 5]; 2];
            for &row in node.rows() {
                let y = values[row];
                let side = &mut acc[(column[row] >= threshold) as usize];
                side[0] += 1.0;
                side[1] += y;
                side[2] += y * y;
                side[3] += y * y * y;
                side[4] += y * y * y * y;
            }
            let stats = |s: &[f64; 5]| SideStats::Regression {
                weight: s[0] / n,
                sum: s[1] / n,
                sum_sq: s[2] / n,
                sum_cube: s[3] / n,
                sum_quartic: s[4] / n,
            };
            ThetaVector::from_sides(&stats(&acc[0]), &stats(&acc[1]))
        }
    }
}

struct ArmState {
    slot: usize,
    threshold_index: usize,
    active: bool,
    mu: f64,
    ci: f64,
    /// Rows inserted into this arm's feature while the arm was active.
    samples: usize,
}

enum RowStream {
    WithoutReplacement { pool: Vec<usize>, consumed: usize },
    WithReplacement,
}

impl RowStream {
    /// Positions (into the node's row list) for the next batch.
    fn next_batch(&mut self, b: usize, n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
        match self {
            RowStream::WithoutReplacement { pool, consumed } => {
                // extend the lazily shuffled prefix
                for i in *consumed..*consumed + b {
                    let j = rng.random_range(i..n);
                    pool.swap(i, j);
                }
                let out = pool[*consumed..*consumed + b].to_vec();
                *consumed += b;
                out
            }
            RowStream::WithReplacement => (0..b).map(|_| rng.random_range(0..n)).collect(),
        }
    }
}

/// Bandit solver: successive elimination over split arms with delta-method
/// confidence intervals, batched sampling, and shared histograms per
/// feature.
pub fn solve_mabsplit(
    node: &NodeView,
    kind: ImpurityKind,
    edges: &[BinEdges],
    config: &SolverConfig,
    ledger: &InsertionLedger,
) -> Result<SplitResult> {
    if edges.len() != node.features().len() {
        return Err(Error::InvalidParam("one BinEdges per node feature required".into()));
    }
    let parent = parent_impurity(node, kind)?;
    let data = node.data();
    let hkind = histogram_kind(data);
    let n = node.n_rows();
    let slots = candidate_slots(edges);

    if slots.is_empty() {
        let instrumentation = config.instrument.then(|| PullInstrumentation {
            records: Vec::new(),
            fallback_samples: 0,
            max_ci_scale: 0.0,
            delta: resolve_delta(config, n, 1, 1),
            batch_size: resolve_batch(config, 1),
        });
        return Ok(assemble(node, edges, config, parent, None, 0, 0, false, 0, instrumentation));
    }

    let t_max = slots.iter().map(|&s| edges[s].thresholds.len()).max().unwrap();
    let batch = resolve_batch(config, t_max);
    let delta = resolve_delta(config, n, slots.len(), t_max);
    let finite_population = config.sampling == SamplingMode::WithoutReplacement;

    let mut hists: Vec<Option<FeatureHistogram>> = vec![None; edges.len()];
    for &slot in &slots {
        hists[slot] = Some(FeatureHistogram::new(edges[slot].clone(), hkind)?);
    }

    let mut arms: Vec<ArmState> = Vec::new();
    for &slot in &slots {
        for t in 0..edges[slot].thresholds.len() {
            arms.push(ArmState {
                slot,
                threshold_index: t,
                active: true,
                mu: f64::INFINITY,
                ci: f64::INFINITY,
                samples: 0,
            });
        }
    }

    let mut rng = seeding::rng(config.seed);
    let mut stream = match config.sampling {
        SamplingMode::WithoutReplacement => {
            RowStream::WithoutReplacement { pool: (0..n).collect(), consumed: 0 }
        }
        SamplingMode::WithReplacement => RowStream::WithReplacement,
    };

    let mut charged = 0u64;
    let mut n_used = 0usize;
    let mut active_count = arms.len();
    let mut max_ci_scale = 0.0f64;
    let ln_inv_delta = (1.0 / delta).ln();

    while n_used < n && (active_count > 1 || n_used == 0) {
        let b = batch.min(n - n_used);
        let positions = stream.next_batch(b, n, &mut rng);

        // insert the batch into every feature that still owns an active arm
        let mut live_slots: Vec<usize> = arms
            .iter()
            .filter(|a| a.active)
            .map(|a| a.slot)
            .collect();
        live_slots.dedup();
        for &slot in &live_slots {
            let feature = node.features()[slot];
            let column = data.column(feature);
            let hist = hists[slot].as_mut().unwrap();
            for &pos in &positions {
                let row = node.rows()[pos];
                hist.insert(column[row], target_of(data, row), ledger)
                    .map_err(|e| budget_err(e, charged))?;
                charged += 1;
            }
        }
        n_used += b;
        for arm in arms.iter_mut().filter(|a| a.active) {
            arm.samples = n_used;
        }

        // refresh every active arm's estimate from its feature's scan
        for &slot in &live_slots {
            let scan = hists[slot].as_ref().unwrap().prefix_scan()?;
            for arm in arms.iter_mut().filter(|a| a.active && a.slot == slot) {
                let (left, right) = &scan[arm.threshold_index];
                let theta = ThetaVector::from_sides(left, right)?;
                let est =
                    estimate_with_ci(kind, &theta, n_used, n, delta, finite_population)?;
                arm.mu = est.mu_hat;
                arm.ci = est.ci_half_width;
                if est.ci_half_width.is_finite() {
                    let scale = est.ci_half_width * ((n_used as f64) / ln_inv_delta).sqrt();
                    max_ci_scale = max_ci_scale.max(scale);
                }
            }
        }

        // eliminate arms whose whole interval sits above the best upper bound
        let best_ucb = arms
            .iter()
            .filter(|a| a.active)
            .map(|a| a.mu + a.ci)
            .fold(f64::INFINITY, f64::min);
        for arm in arms.iter_mut().filter(|a| a.active) {
            if arm.mu - arm.ci > best_ucb {
                arm.active = false;
            }
        }
        active_count = arms.iter().filter(|a| a.active).count();
    }

    let exhausted_with_contest = active_count > 1;
    let mut fallback_samples = 0usize;

    if exhausted_with_contest && config.sampling == SamplingMode::WithReplacement {
        // resampled histograms don't describe the population; survivors get
        // a fresh exact pass
        let mut survivor_slots: Vec<usize> = arms
            .iter()
            .filter(|a| a.active)
            .map(|a| a.slot)
            .collect();
        survivor_slots.dedup();
        for &slot in &survivor_slots {
            let feature = node.features()[slot];
            let column = data.column(feature);
            let mut hist = FeatureHistogram::new(edges[slot].clone(), hkind)?;
            for &row in node.rows() {
                hist.insert(column[row], target_of(data, row), ledger)
                    .map_err(|e| budget_err(e, charged))?;
                charged += 1;
            }
            fallback_samples += n;
            let scan = hist.prefix_scan()?;
            for arm in arms.iter_mut().filter(|a| a.active && a.slot == slot) {
                let (left, right) = &scan[arm.threshold_index];
                let theta = ThetaVector::from_sides(left, right)?;
                arm.mu = split_objective(kind, &theta)?;
                arm.ci = 0.0;
                arm.samples += n;
            }
        }
    }

    // winner: lowest objective among the active arms
    let mut best: Option<(f64, usize, usize)> = None;
    let mut winner: Option<Winner> = None;
    for arm in arms.iter().filter(|a| a.active) {
        let feature = node.features()[arm.slot];
        if improves(arm.mu, feature, arm.threshold_index, best) {
            best = Some((arm.mu, feature, arm.threshold_index));
            winner = Some(Winner {
                slot: arm.slot,
                threshold_index: arm.threshold_index,
                mu: arm.mu,
                ci: arm.ci,
            });
        }
    }

    let instrumentation = config.instrument.then(|| PullInstrumentation {
        records: arms
            .iter()
            .map(|a| ArmPullRecord {
                feature: node.features()[a.slot],
                threshold_index: a.threshold_index,
                threshold: edges[a.slot].thresholds[a.threshold_index],
                samples: a.samples,
                survived: a.active,
            })
            .collect(),
        fallback_samples,
        max_ci_scale,
        delta,
        batch_size: batch,
    });

    Ok(assemble(
        node,
        edges,
        config,
        parent,
        winner,
        n_used,
        charged,
        exhausted_with_contest,
        active_count,
        instrumentation,
    ))
}

/// The solve's pull records, if it ran with `instrument: true`.
pub fn record_pull_counts(result: &SplitResult) -> Result<&PullInstrumentation> {
    result.instrumentation.as_ref().ok_or(Error::InstrumentationDisabled)
}

/// Exact objective of every arm by brute-force recount, charging nothing.
/// A reference table for tests and sample-complexity analysis.
pub fn arm_objectives_naive(
    node: &NodeView,
    kind: ImpurityKind,
    edges: &[BinEdges],
) -> Result<Vec<(Arm, f64)>> {
    if edges.len() != node.features().len() {
        return Err(Error::InvalidParam("one BinEdges per node feature required".into()));
    }
    let data = node.data();
    let mut out = Vec::new();
    for slot in candidate_slots(edges) {
        let feature = node.features()[slot];
        let column = data.column(feature);
        for (t, &threshold) in edges[slot].thresholds.iter().enumerate() {
            let theta = recount_arm(node, column, threshold)?;
            let mu = split_objective(kind, &theta)?;
            out.push((Arm { feature, threshold_index: t }, mu));
        }
    }
    Ok(out)
}
