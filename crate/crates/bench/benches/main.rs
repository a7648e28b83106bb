use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use lrcp_bench::{decomposed, environment, window};
use lrcp_core::contact::{run_contact, sample_rep};
use lrcp_core::cutpoints::scan_cut_points;
use lrcp_core::exploration::ExplorationLaw;
use lrcp_core::renorm::{classify_good, detect_semicircuit};
use lrcp_core::stretched::{sample_bond_config, Orientation, Rect};
use std::time::Duration;

fn bench_graph(c: &mut Criterion) {
    c.bench_function("sample_window_n2000", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            window(2000, seed)
        })
    });
    let w = window(2000, 1);
    c.bench_function("scan_cut_points_n2000", |b| {
        b.iter(|| scan_cut_points(&w).unwrap())
    });
}

fn bench_contact(c: &mut Criterion) {
    let (w, d) = decomposed(500, 3);
    c.bench_function("sample_rep_n500_h40", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            sample_rep(&w, 0.5, 40.0, seed).unwrap()
        })
    });
    let rep = sample_rep(&w, 0.5, 40.0, 9).unwrap();
    c.bench_function("run_contact_n500", |b| {
        b.iter(|| run_contact(&rep, &w, &[0]).unwrap())
    });
    let rep_cold = sample_rep(&w, 0.05, 40.0, 11).unwrap();
    c.bench_function("classify_and_detect_n500", |b| {
        b.iter_batched(
            || rep_cold.clone(),
            |r| {
                let grid = classify_good(&r, &d, 4.0).unwrap();
                detect_semicircuit(&grid)
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_exploration(c: &mut Criterion) {
    c.bench_function("exploration_law_s3_n500", |b| {
        b.iter(|| ExplorationLaw::build_with_cutoff(3.0, 1, 500, 400_000).unwrap())
    });
}

fn bench_stretched(c: &mut Criterion) {
    let env = environment(256, 5);
    c.bench_function("bond_config_512x64", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            sample_bond_config(&env, 0.8, (-256, 256), 64, seed).unwrap()
        })
    });
    let config = sample_bond_config(&env, 0.8, (-256, 256), 64, 2).unwrap();
    let rect = Rect {
        x_lo: -256,
        x_hi: 256,
        row_lo: 0,
        row_hi: 64,
    };
    c.bench_function("crossing_512x64", |b| {
        b.iter(|| config.crossing(&rect, Orientation::Horizontal).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default()
        .sample_size(20)
        .measurement_time(Duration::from_secs(4))
        .warm_up_time(Duration::from_secs(1));
    targets = bench_graph, bench_contact, bench_exploration, bench_stretched
}
criterion_main!(benches);
