//! Machine-readable run outputs. Every document embeds the full effective
//! config, so feeding that echo back as a config file replays the run;
//! only timing fields are expected to differ between replays.

use std::collections::BTreeMap;

use banditforest::{ImportanceMethod, Result, ScalingReport};
use serde::{Deserialize, Serialize};

pub const ARTIFACT_VERSION: &str = "0.1.0";

/// One metric across run seeds, with its mean and sample standard
/// deviation (0 for a single run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl MetricSeries {
    pub fn from_values(per_seed: Vec<f64>) -> MetricSeries {
        let n = per_seed.len() as f64;
        let mean = per_seed.iter().sum::<f64>() / n;
        let std = if per_seed.len() < 2 {
            0.0
        } else {
            (per_seed.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MetricSeries { per_seed, mean, std }
    }
}

/// Output of `train` and `budget`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub artifact_version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    /// `train_time_ms`, `insertions_used`, `completed_trees`, and
    /// `test_accuracy` or `test_mse`.
    pub metrics: BTreeMap<String, MetricSeries>,
}

/// Output of `importance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceDocument {
    pub artifact_version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub run_seeds: Vec<u64>,
    pub method: ImportanceMethod,
    pub k: usize,
    /// Per-run top-k feature indices, ascending.
    pub selections: Vec<Vec<usize>>,
    /// Runs by features; true marks a selected feature.
    pub selection_matrix: Vec<Vec<bool>>,
    pub stability: f64,
}

/// Output of `scaling`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingDocument {
    pub artifact_version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub report: ScalingReport,
}

/// One size of a paired exact/mabsplit comparison; insertion and time
/// fields are means over run seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverRow {
    pub size: usize,
    pub exact_insertions: f64,
    pub mabsplit_insertions: f64,
    pub exact_ms: f64,
    pub mabsplit_ms: f64,
}

/// Output of `crossover`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverDocument {
    pub artifact_version: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub rows: Vec<CrossoverRow>,
    /// Smallest grid size from which mabsplit uses fewer insertions at
    /// every size, if any.
    pub crossover_size: Option<usize>,
}

/// Serialize to pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)
        .map_err(|e| banditforest::Error::InvalidParam(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_crossover_csv(rows: &[CrossoverRow], path: &std::path::Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "size,exact_insertions,mabsplit_insertions,exact_ms,mabsplit_ms")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{}",
            r.size, r.exact_insertions, r.mabsplit_insertions, r.exact_ms, r.mabsplit_ms
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_series_mean_and_std() {
        let s = MetricSeries::from_values(vec![1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
        let single = MetricSeries::from_values(vec![7.0]);
        assert_eq!(single.mean, 7.0);
        assert_eq!(single.std, 0.0);
    }

    #[test]
    fn result_documents_round_trip() {
        let mut metrics = BTreeMap::new();
        metrics.insert("test_accuracy".to_string(), MetricSeries::from_values(vec![0.9, 0.95]));
        let doc = ResultDocument {
            artifact_version: ARTIFACT_VERSION.into(),
            command: "train".into(),
            config: BTreeMap::from([("trees".to_string(), "5".to_string())]),
            seeds: vec![0, 1],
            metrics,
        };
        let json = to_json(&doc).unwrap();
        assert!(json.ends_with('\n'));
        let back: ResultDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn crossover_csv_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let rows = vec![CrossoverRow {
            size: 100,
            exact_insertions: 4000.0,
            mabsplit_insertions: 5000.0,
            exact_ms: 1.0,
            mabsplit_ms: 2.0,
        }];
        write_crossover_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "size,exact_insertions,mabsplit_insertions,exact_ms,mabsplit_ms\n100,4000,5000,1,2\n"
        );
    }
}
