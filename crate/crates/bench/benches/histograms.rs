use banditforest::seeding;
use banditforest::{
    make_edges, EdgeStrategy, FeatureHistogram, HistogramKind, InsertionLedger, TargetValue,
};
use core::time::Duration;
use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;

const N: usize = 10_000;
const BINS: usize = 32;

pub fn bench_inserts(c: &mut Criterion) {
    let mut rng = seeding::rng(23);
    let values: Vec<f64> = (0..N).map(|_| rng.random()).collect();
    let labels: Vec<u32> = (0..N).map(|_| rng.random_range(0..3)).collect();
    let edges = make_edges(EdgeStrategy::EqualWidth, 0.0, 1.0, BINS - 1, 0).unwrap();

    c.bench_function("insert_10k_classification", |b| {
        b.iter(|| {
            let ledger = InsertionLedger::new_uncapped();
            let mut h = FeatureHistogram::new(
                edges.clone(),
                HistogramKind::Classification { n_classes: 3 },
            )
            .unwrap();
            for (&v, &l) in values.iter().zip(&labels) {
                h.insert(v, TargetValue::Class(l), &ledger).unwrap();
            }
            h
        })
    });
    c.bench_function("insert_10k_regression", |b| {
        b.iter(|| {
            let ledger = InsertionLedger::new_uncapped();
            let mut h = FeatureHistogram::new(edges.clone(), HistogramKind::Regression).unwrap();
            for &v in &values {
                h.insert(v, TargetValue::Value(v * 2.0 - 1.0), &ledger).unwrap();
            }
            h
        })
    });

    let ledger = InsertionLedger::new_uncapped();
    let mut filled = FeatureHistogram::new(
        edges.clone(),
        HistogramKind::Classification { n_classes: 3 },
    )
    .unwrap();
    for (&v, &l) in values.iter().zip(&labels) {
        filled.insert(v, TargetValue::Class(l), &ledger).unwrap();
    }
    c.bench_function("prefix_scan_32_bins", |b| b.iter(|| filled.prefix_scan().unwrap()));
}

criterion_group! {
    name = histograms;
    config = Criterion::default()
        .sample_size(50)
        .warm_up_time(Duration::from_millis(500))
        .measurement_time(Duration::from_secs(2));
    targets = bench_inserts
}

criterion_main!(histograms);
