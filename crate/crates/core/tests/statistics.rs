//! Cross-module statistical invariants that need larger samples than the
//! per-module unit tests.

use lrcp_core::experiment::{harvest_windows, survival_sweep, ExperimentConfig};
use lrcp_core::rng;
use rand_distr::{Binomial, Distribution};

#[test]
fn cut_gap_sequence_has_no_lag_one_correlation() {
    // consecutive cut-point gaps behave as an i.i.d. sequence
    let mut pairs: Vec<(u64, u64)> = Vec::new();
    let mut batch = 0u64;
    while pairs.len() < 100_000 && batch < 40 {
        let h = harvest_windows(3.0, 1500, 300, 40, rng::stream_seed(33, 0xCC, batch)).unwrap();
        pairs.extend(h.gap_pairs);
        batch += 1;
    }
    assert!(pairs.len() >= 100_000, "only {} gap pairs", pairs.len());
    let n = pairs.len() as f64;
    let mean_x: f64 = pairs.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let mean_y: f64 = pairs.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for &(a, b) in &pairs {
        let (dx, dy) = (a as f64 - mean_x, b as f64 - mean_y);
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    let corr = cov / (var_x * var_y).sqrt();
    let se = 1.0 / n.sqrt();
    assert!(
        corr.abs() < 4.0 * se,
        "lag-1 autocorrelation {corr:.5} at {} pairs (se {se:.5})",
        pairs.len()
    );
}

#[test]
fn edge_count_exceedance_obeys_chebyshev_bound() {
    // Law-level sampler: the count of open edges with minimum endpoint in
    // [[1, M]] is a sum of independent binomials over edge lengths.
    let s = 3.0f64;
    let m = 1000u64;
    let alpha = 0.5f64;
    let cap = 200u64; // truncation; tail expectation ~ M/(2 cap^2) is negligible here
    let replicas = 100_000usize;
    let threshold = 2.0 * (m as f64).powf(1.0 + alpha);
    let mut exceed = 0usize;
    let mut total = 0f64;
    let mut rng = rng::chacha(7, 0xED6E, 0);
    let laws: Vec<Binomial> = (2..=cap)
        .map(|l| Binomial::new(m, (l as f64).powf(-s)).unwrap())
        .collect();
    for _ in 0..replicas {
        let mut count = m; // unit edges are always open
        for law in &laws {
            count += law.sample(&mut rng);
        }
        total += count as f64;
        if count as f64 >= threshold {
            exceed += 1;
        }
    }
    let freq = exceed as f64 / replicas as f64;
    let se = (freq * (1.0 - freq) / replicas as f64).sqrt();
    let bound = (m as f64).powf(-(1.0 + 1.5 * alpha));
    assert!(
        freq <= bound + 3.0 * se,
        "exceedance {freq} vs bound {bound}"
    );

    // mean sanity: M * partial zeta sum over the sampled lengths
    let expected: f64 = m as f64 * (1..=cap).map(|l| (l as f64).powf(-s)).sum::<f64>();
    let var: f64 = m as f64
        * (1..=cap)
            .map(|l| {
                let p = (l as f64).powf(-s);
                p * (1.0 - p)
            })
            .sum::<f64>();
    let sigma_mean = (var / replicas as f64).sqrt();
    let mean = total / replicas as f64;
    assert!(
        (mean - expected).abs() < 4.0 * sigma_mean,
        "mean {mean} vs {expected}"
    );
}

#[test]
fn survival_frequencies_separate_across_the_rate_grid() {
    let config = ExperimentConfig {
        name: "survival-separation".into(),
        s: 3.0,
        half_width: 500,
        buffer: 50,
        replicas: 1000,
        lambda_grid: vec![0.02, 2.0],
        horizon: Some(50.0),
        seed: 424_242,
        ..Default::default()
    };
    let report = survival_sweep(&config).unwrap();
    let f = &report.aggregate.survival_frequency;
    let se = &report.aggregate.stderr;
    assert_eq!(report.aggregate.monotonicity_violations, 0);
    assert!(
        f[0] + 3.0 * se[0] < f[1] - 3.0 * se[1],
        "bands overlap: {f:?} +- {se:?}"
    );
}
