#![allow(clippy::needless_range_loop)]

use std::hint::black_box;

use criterion::{Criterion, criterion_group, criterion_main};

use riskcal_core::baseline::conformal_pvalues;
use riskcal_core::calibration::{build_curve, calibrate, select_threshold};
use riskcal_core::evaluation::{RiskFunction, SyntheticModel, gen_population};
use riskcal_core::model::{BoundMethod, RiskConfig};
use riskcal_core::scorers::{eigenvalue_score, laplacian_spectrum, normalize};

fn bench_calibration(c: &mut Criterion) {
    let model = SyntheticModel::new(RiskFunction::Linear).unwrap();
    let records = gen_population(5000, &model, 7);

    c.bench_function("build_curve cp n=5000", |b| {
        b.iter(|| build_curve(black_box(&records), 0.05, BoundMethod::CpExact).unwrap())
    });
    c.bench_function("build_curve hfd n=5000", |b| {
        b.iter(|| build_curve(black_box(&records), 0.05, BoundMethod::Hoeffding).unwrap())
    });

    let curve = build_curve(&records, 0.05, BoundMethod::CpExact).unwrap();
    c.bench_function("select_threshold n=5000", |b| {
        b.iter(|| select_threshold(black_box(&curve), black_box(0.15)))
    });

    let config = RiskConfig::new(0.15);
    c.bench_function("calibrate cp n=5000", |b| {
        b.iter(|| calibrate(black_box(&records), black_box(&config)).unwrap())
    });
}

fn bench_baseline(c: &mut Criterion) {
    let model = SyntheticModel::new(RiskFunction::Linear).unwrap();
    let population = gen_population(10_000, &model, 11);
    let (cal, test) = population.split_at(5000);
    c.bench_function("conformal_pvalues 5000x5000", |b| {
        b.iter(|| conformal_pvalues(black_box(cal), black_box(test)))
    });
}

fn bench_spectral(c: &mut Criterion) {
    // A 10-response similarity matrix, the size the scorers typically see.
    let n = 10;
    let mut raw = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            raw[i][j] = if i == j {
                1.0
            } else {
                0.5 + 0.4 * ((i * 7 + j * 3) % 10) as f64 / 10.0
            };
        }
    }
    let w = normalize(&raw).unwrap();
    c.bench_function("laplacian_spectrum n=10", |b| {
        b.iter(|| laplacian_spectrum(black_box(&w)))
    });
    c.bench_function("eigenvalue_score n=10", |b| {
        b.iter(|| eigenvalue_score(black_box(&w)))
    });
}

criterion_group!(benches, bench_calibration, bench_baseline, bench_spectral);
criterion_main!(benches);
