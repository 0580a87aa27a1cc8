//! Fixed-bin feature histograms and the global insertion ledger.
//!
//! A histogram's thresholds double as the node's candidate split points:
//! inserting a row updates one bin's class counts (or running moments for
//! regression), and a prefix scan over bins yields both sides' statistics
//! for every threshold at once. Inserting is the unit of work the whole
//! crate accounts in: each insert charges one unit to an `InsertionLedger`
//! before touching the bins, so a budget cap stops work mid-node with
//! nothing half-counted.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impurity::SideStats;
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStrategy {
    /// Thresholds at `min + i * (max - min) / (count + 1)`, evenly spaced.
    EqualWidth,
    /// Thresholds drawn uniformly from the open interval (min, max).
    RandomUniform,
}

/// Sorted, strictly increasing thresholds strictly inside [min, max].
/// A feature whose observed range is a single point gets no thresholds and
/// is degenerate: it offers no candidate splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinEdges {
    pub strategy: EdgeStrategy,
    pub thresholds: Vec<f64>,
    pub feature_min: f64,
    pub feature_max: f64,
}

impl BinEdges {
    pub fn is_degenerate(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn n_bins(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// Bin holding `v`: the number of thresholds at or below it. Values
    /// outside [min, max] land in the first or last bin.
    pub fn bin_index(&self, v: f64) -> usize {
        let t = self.thresholds.len();
        if t == 0 {
            return 0;
        }
        match self.strategy {
            EdgeStrategy::EqualWidth => {
                // arithmetic guess, then walk to where the stored
                // thresholds actually put it
                let step = (self.feature_max - self.feature_min) / (t + 1) as f64;
                let mut idx = if step > 0.0 {
                    (((v - self.feature_min) / step) as isize).clamp(0, t as isize) as usize
                } else {
                    0
                };
                while idx > 0 && self.thresholds[idx - 1] > v {
                    idx -= 1;
                }
                while idx < t && self.thresholds[idx] <= v {
                    idx += 1;
                }
                idx
            }
            EdgeStrategy::RandomUniform => self.thresholds.partition_point(|&e| e <= v),
        }
    }
}

/// Build up to `count` thresholds for a feature spanning [min, max].
/// Random draws that collide with min or an earlier draw are retried a few
/// times, then deduplicated, so the result can be shorter than `count`.
pub fn make_edges(
    strategy: EdgeStrategy,
    feature_min: f64,
    feature_max: f64,
    count: usize,
    seed: u64,
) -> Result<BinEdges> {
    if !(feature_min.is_finite() && feature_max.is_finite()) || feature_min > feature_max {
        return Err(Error::InvalidParam(format!(
            "invalid feature range [{feature_min}, {feature_max}]"
        )));
    }
    if count == 0 {
        return Err(Error::InvalidParam("need at least one threshold".into()));
    }
    let mut thresholds = Vec::with_capacity(count);
    if feature_min < feature_max {
        match strategy {
            EdgeStrategy::EqualWidth => {
                let step = (feature_max - feature_min) / (count + 1) as f64;
                for i in 1..=count {
                    thresholds.push(feature_min + step * i as f64);
                }
            }
            EdgeStrategy::RandomUniform => {
                let mut rng = seeding::rng(seed);
                for _ in 0..count {
                    for _attempt in 0..100 {
                        let v = rng.random_range(feature_min..feature_max);
                        if v > feature_min && !thresholds.contains(&v) {
                            thresholds.push(v);
                            break;
                        }
                    }
                }
                thresholds.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            }
        }
    }
    thresholds.retain(|&e| e > feature_min && e < feature_max);
    thresholds.dedup();
    Ok(BinEdges { strategy, thresholds, feature_min, feature_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistogramKind {
    Classification { n_classes: usize },
    Regression,
}

/// One regression bin's running sums of y powers 0 through 4.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RegressionCell {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
    pub sum_cube: f64,
    pub sum_quartic: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Cells {
    /// Flat (bin, class) counts, bin-major.
    Classes(Vec<u64>),
    Moments(Vec<RegressionCell>),
}

/// The target of one inserted row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetValue {
    Class(u32),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistogram {
    edges: BinEdges,
    kind: HistogramKind,
    cells: Cells,
    total: u64,
}

impl FeatureHistogram {
    pub fn new(edges: BinEdges, kind: HistogramKind) -> Result<FeatureHistogram> {
        let n_bins = edges.n_bins();
        let cells = match kind {
            HistogramKind::Classification { n_classes } => {
                if n_classes == 0 {
                    return Err(Error::InvalidParam("histogram needs at least one class".into()));
                }
                Cells::Classes(vec![0; n_bins * n_classes])
            }
            HistogramKind::Regression => Cells::Moments(vec![RegressionCell::default(); n_bins]),
        };
        Ok(FeatureHistogram { edges, kind, cells, total: 0 })
    }

    pub fn edges(&self) -> &BinEdges {
        &self.edges
    }

    /// Rows inserted so far.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Insert one row. The ledger is charged one unit before any state
    /// changes, so a budget failure leaves the histogram untouched.
    pub fn insert(
        &mut self,
        value: f64,
        target: TargetValue,
        ledger: &InsertionLedger,
    ) -> Result<()> {
        ledger.try_charge(1)?;
        let bin = self.edges.bin_index(value);
        match (&mut self.cells, target) {
            (Cells::Classes(counts), TargetValue::Class(c)) => {
                let HistogramKind::Classification { n_classes } = self.kind else {
                    unreachable!()
                };
                if (c as usize) >= n_classes {
                    return Err(Error::InvalidParam(format!(
                        "class {c} out of range for {n_classes} classes"
                    )));
                }
                counts[bin * n_classes + c as usize] += 1;
            }
            (Cells::Moments(cells), TargetValue::Value(y)) => {
                let cell = &mut cells[bin];
                cell.count += 1;
                cell.sum += y;
                cell.sum_sq += y * y;
                cell.sum_cube += y * y * y;
                cell.sum_quartic += y * y * y * y;
            }
            _ => {
                return Err(Error::InvalidParam(
                    "target kind does not match histogram kind".into(),
                ))
            }
        }
        self.total += 1;
        Ok(())
    }

    /// Side statistics for every threshold: entry `t` summarizes rows left
    /// of `thresholds[t]` (bins `0..=t`) and everything else, both
    /// mass-normalized by the inserted total. One pass, cumulative lefts,
    /// rights by subtraction from the grand totals.
    pub fn prefix_scan(&self) -> Result<Vec<(SideStats, SideStats)>> {
        if self.total == 0 {
            return Err(Error::EmptyHistogram);
        }
        let n = self.total as f64;
        let t = self.edges.thresholds.len();
        let mut out = Vec::with_capacity(t);
        match &self.cells {
            Cells::Classes(counts) => {
                let HistogramKind::Classification { n_classes } = self.kind else {
                    unreachable!()
                };
                let mut grand = vec![0u64; n_classes];
                for bin in 0..self.edges.n_bins() {
                    for c in 0..n_classes {
                        grand[c] += counts[bin * n_classes + c];
                    }
                }
                let mut left = vec![0u64; n_classes];
                for bin in 0..t {
                    for c in 0..n_classes {
                        left[c] += counts[bin * n_classes + c];
                    }
                    let left_masses: Vec<f64> = left.iter().map(|&c| c as f64 / n).collect();
                    let right_masses: Vec<f64> = grand
                        .iter()
                        .zip(&left)
                        .map(|(&g, &l)| (g - l) as f64 / n)
                        .collect();
                    out.push((
                        SideStats::Classification { masses: left_masses },
                        SideStats::Classification { masses: right_masses },
                    ));
                }
            }
            Cells::Moments(cells) => {
                let mut grand = RegressionCell::default();
                for cell in cells {
                    grand.count += cell.count;
                    grand.sum += cell.sum;
                    grand.sum_sq += cell.sum_sq;
                    grand.sum_cube += cell.sum_cube;
                    grand.sum_quartic += cell.sum_quartic;
                }
                let mut left = RegressionCell::default();
                for cell in cells.iter().take(t) {
                    left.count += cell.count;
                    left.sum += cell.sum;
                    left.sum_sq += cell.sum_sq;
                    left.sum_cube += cell.sum_cube;
                    left.sum_quartic += cell.sum_quartic;
                    out.push((
                        SideStats::Regression {
                            weight: left.count as f64 / n,
                            sum: left.sum / n,
                            sum_sq: left.sum_sq / n,
                            sum_cube: left.sum_cube / n,
                            sum_quartic: left.sum_quartic / n,
                        },
                        SideStats::Regression {
                            weight: (grand.count - left.count) as f64 / n,
                            sum: (grand.sum - left.sum) / n,
                            sum_sq: (grand.sum_sq - left.sum_sq) / n,
                            sum_cube: (grand.sum_cube - left.sum_cube) / n,
                            sum_quartic: (grand.sum_quartic - left.sum_quartic) / n,
                        },
                    ));
                }
            }
        }
        Ok(out)
    }
}

/// Thread-safe counter of histogram insertions, optionally capped. The
/// whole training stack shares one ledger, so the cap bounds total work
/// across trees and nodes.
#[derive(Debug)]
pub struct InsertionLedger {
    count: AtomicU64,
    cap: Option<u64>,
}

impl InsertionLedger {
    pub fn new_uncapped() -> InsertionLedger {
        InsertionLedger { count: AtomicU64::new(0), cap: None }
    }

    pub fn with_cap(cap: u64) -> InsertionLedger {
        InsertionLedger { count: AtomicU64::new(0), cap: Some(cap) }
    }

    pub fn cap(&self) -> Option<u64> {
        self.cap
    }

    /// Atomically add `k` units, failing without any effect if that would
    /// push the count past the cap.
    pub fn try_charge(&self, k: u64) -> Result<()> {
        match self.cap {
            None => {
                self.count.fetch_add(k, Ordering::Relaxed);
                Ok(())
            }
            Some(cap) => {
                let mut current = self.count.load(Ordering::Relaxed);
                loop {
                    if current + k > cap {
                        return Err(Error::BudgetExhausted { charged: 0 });
                    }
                    match self.count.compare_exchange_weak(
                        current,
                        current + k,
                        Ordering::Relaxed,
                        Ordering::Relaxed,
                    ) {
                        Ok(_) => return Ok(()),
                        Err(seen) => current = seen,
                    }
                }
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}
