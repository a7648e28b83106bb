//! The acceptance suite: eleven checks pinning the quantitative behaviour
//! of every subsystem, each with its tolerance and runtime budget fixed in
//! code. `run_all` powers both the CLI `lemma-suite` subcommand and the
//! acceptance integration test.

use crate::contact::{coupled_thinning, oracle, run_contact, sample_rep, two_vertex_occupation};
use crate::cutpoints::empirical_moment;
use crate::experiment::{harvest_windows, pipeline_end_to_end, ExperimentConfig};
use crate::exploration::{Convolution, ExplorationLaw};
use crate::graph::{GraphParams, GraphWindow};
use crate::renorm::{block_length, good_probability_closed_form};
use crate::rng::{chacha, keyed_u64, open_threshold, stream_seed, tag};
use crate::series;
use crate::stretched::{
    build_scales, check_fk, coupling_inequality_check, fk_rectangles, p_k_estimate,
    sample_bond_config, sample_renewal, site_field_sample, GapLaw, Orientation, RenewalMode,
    ScaleMode,
};
use rand::Rng;
use serde::Serialize;

/// Safety factor applied to the constant fitted at single steps before the
/// multi-step tail bound is checked; must be >= 1 and is reported.
pub const STEP_TAIL_SAFETY: f64 = 2.0;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} ({}): {} ({:.1}s / budget {:.0}s) - {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.seconds,
            self.budget_seconds,
            self.details
        )
    }
}

fn report(
    id: usize,
    name: &'static str,
    budget: f64,
    start: std::time::Instant,
    passed: bool,
    details: String,
) -> CriterionReport {
    CriterionReport {
        id,
        name,
        passed,
        details,
        seconds: start.elapsed().as_secs_f64(),
        budget_seconds: budget,
    }
}

/// Criterion 1: Edge-law fidelity: empirical open frequency of each length within
/// 4 binomial sigma of its power-law probability.
pub fn criterion_edge_law(seed: u64) -> CriterionReport {
    let start = std::time::Instant::now();
    let s = 3.0;
    let samples = 1_000_000u64;
    let stream = stream_seed(seed, tag::GRAPH_PAIR, 0);
    let mut worst_z = 0.0f64;
    let mut pass = true;
    for len in 1..=10u64 {
        if len == 1 {
            continue; // unit edges are open surely and drawn without uniforms
        }
        let p = (len as f64).powf(-s);
        let thr = open_threshold(p);
        let mut count = 0u64;
        for i in 0..samples {
            if keyed_u64(stream, (i << 24) ^ len) < thr {
                count += 1;
            }
        }
        let sigma = (samples as f64 * p * (1.0 - p)).sqrt();
        let z = (count as f64 - samples as f64 * p) / sigma;
        worst_z = worst_z.max(z.abs());
        pass &= z.abs() < 4.0;
    }
    report(
        1,
        "edge-law fidelity",
        10.0,
        start,
        pass,
        format!("lengths 2-10 at 1e6 samples, worst |z| = {worst_z:.2}; length 1 exact"),
    )
}

/// Criterion 2: Certified cut-point density against the closed-form lower bound.
/// The declared certification threshold (exterior error below 1e-6 at
/// half-width 1e4) is provably unreachable: every unsampled-edge union
/// bound at distance d behaves like 1/(2d), so the best achievable error
/// is about 1e-4. The density assertion itself is checked at the tightest
/// available buffer and reported separately.
pub fn criterion_cut_density(seed: u64) -> CriterionReport {
    let start = std::time::Instant::now();
    let s = 3.0;
    let n = 10_000i64;
    let required = 1e-6;

    // Best achievable exterior error over admissible buffers: even the
    // smallest certified region (buffer n - 1) contains positions within one
    // step of the origin, where both window edges sit ~n away.
    let best = series::straddle_tail(s, n as u64).unwrap().hi
        + series::straddle_tail(s, n as u64 + 2).unwrap().hi;
    let rider_pass = best < required;

    let buffer = 2000i64;
    let windows = 50usize;
    let harvest = harvest_windows(s, n, buffer, windows, stream_seed(seed, 0x2, 0)).unwrap();
    let bound = crate::cutpoints::cut_point_probability_lower_bound(s).unwrap();
    let mean: f64 = harvest.cut_density.iter().sum::<f64>() / harvest.cut_density.len() as f64;
    let var: f64 = harvest
        .cut_density
        .iter()
        .map(|d| (d - mean) * (d - mean))
        .sum::<f64>()
        / (harvest.cut_density.len() as f64 - 1.0);
    let se = (var / harvest.cut_density.len() as f64).sqrt();
    let density_pass = mean >= bound - 3.0 * se && harvest.excluded == 0;

    report(
        2,
        "cut-point density",
        60.0,
        start,
        density_pass && rider_pass,
        format!(
            "density {mean:.4} >= {bound:.4} - 3se (se {se:.5}): {}; certification rider: best \
             achievable exterior error {best:.3e} vs required {required:.0e}: {} (union bound \
             scales as 1/(2 distance), so the requirement cannot be met at this half-width)",
            if density_pass { "ok" } else { "violated" },
            if rider_pass { "ok" } else { "unattainable" },
        ),
    )
}

/// Criterion 3: Multi-step tail bound: exact convolutions of the backward-exploration
/// law satisfy C^m / n^2 with C fitted at m = 1 times a pinned safety
/// factor; no tolerance.
pub fn criterion_step_tail(_seed: u64) -> CriterionReport {
    let start = std::time::Instant::now();
    let law = ExplorationLaw::build(3.0, 1, 2000).unwrap();
    let conv = Convolution::build(&law, 4);
    let mut c1 = 0.0f64;
    for n in 1..=200usize {
        c1 = c1.max(law.pmf_at(n).unwrap() * (n * n) as f64);
    }
    let c = STEP_TAIL_SAFETY * c1;
    let mut min_margin = f64::INFINITY;
    let mut pass = true;
    for m in 1..=4usize {
        for n in 1..=200usize {
            let value = conv.tail(m, n).unwrap();
            let bound = c.powi(m as i32) / (n * n) as f64;
            if value > bound {
                pass = false;
            }
            if value > 0.0 {
                min_margin = min_margin.min(bound / value);
            }
        }
    }
    report(
        3,
        "step-sum tail bound",
        30.0,
        start,
        pass && STEP_TAIL_SAFETY >= 1.0,
        format!(
            "fit C1 = {c1:.4}, safety {STEP_TAIL_SAFETY:.1} (>= 1), C = {c:.4}; \
             min bound/value margin over m <= 4, n <= 200: {min_margin:.2}"
        ),
    )
}

/// Criterion 4: Moment stability of the four gap statistics between 1e5 and 1e6
/// samples.
pub fn criterion_moment_stability(seed: u64) -> CriterionReport {
    let start = std::time::Instant::now();
    let s = 3.5;
    let delta = 0.5;
    let eps = delta / (6.0 + 5.0 * delta);
    let small = 100_000usize;
    let large = 1_000_000usize;

    let mut pooled = crate::experiment::Harvest::default();
    let mut batch = 0u64;
    while [
        pooled.cut_gaps.len(),
        pooled.strong_gaps.len(),
        pooled.interval_sizes.len(),
        pooled.family_sizes.len(),
    ]
    .iter()
    .any(|&l| l < large)
        && batch < 64
    {
        let h = harvest_windows(s, 1500, 300, 192, stream_seed(seed, 0x4, batch)).unwrap();
        pooled.cut_gaps.extend(h.cut_gaps);
        pooled.strong_gaps.extend(h.strong_gaps);
        pooled.interval_sizes.extend(h.interval_sizes);
        pooled.family_sizes.extend(h.family_sizes);
        batch += 1;
    }

    let mut pass = true;
    let mut details = String::new();
    for (label, samples, power) in [
        ("cut-gap", &pooled.cut_gaps, 1.0 + delta),
        ("strong-gap", &pooled.strong_gaps, 1.0 + delta),
        ("interval", &pooled.interval_sizes, 1.0 + delta),
        ("family", &pooled.family_sizes, 1.0 + eps),
    ] {
        if samples.len() < large {
            pass = false;
            details.push_str(&format!("{label}: only {} samples; ", samples.len()));
            continue;
        }
        let a = empirical_moment(&samples[..small], power).estimate;
        let b = empirical_moment(&samples[..large], power).estimate;
        let rel = (a - b).abs() / b;
        pass &= rel < 0.10;
        details.push_str(&format!(
            "{label}^{power:.3}: rel diff {:.2}%; ",
            100.0 * rel
        ));
    }
    report(4, "gap moment stability", 300.0, start, pass, details)
}

fn good_box_frequency(nv: u64, ne: u64, lambda: f64, t: f64, reps: usize, seed: u64) -> f64 {
    let mut good = 0usize;
    for r in 0..reps {
        let mut rng = chacha(seed, tag::REPLICA, r as u64);
        let mut ok = true;
        for _ in 0..nv {
            // first recovery arrival must land inside the block
            let e: f64 = -(1.0 - rng.gen::<f64>()).ln();
            ok &= e < t;
        }
        for _ in 0..ne {
            if lambda > 0.0 {
                let e: f64 = -(1.0 - rng.gen::<f64>()).ln() / lambda;
                ok &= e >= t;
            }
        }
        if ok {
            good += 1;
        }
    }
    good as f64 / reps as f64
}

/// Criterion 5: Good-box law: Monte Carlo versus the closed form, and the exhaustive
/// domination of the per-column site bound.
pub fn criterion_good_box(seed: u64) -> CriterionReport {
    let start = std::time::Instant::now();
    let reps = 100_000usize;
    let mut worst_z = 0.0f64;
    let mut pass = true;
    for (i, &(nv, ne)) in [(1u64, 1u64), (2, 3), (4, 9)].iter().enumerate() {
        for (j, &lambda) in [0.04f64, 1.0].iter().enumerate() {
            let t = block_length(lambda).unwrap();
            let law = good_probability_closed_form(nv, ne, lambda, t).unwrap();
            let f = good_box_frequency(
                nv,
                ne,
                lambda,
                t,
                reps,
                stream_seed(seed, 0x5, (i * 2 + j) as u64),
            );
            let sigma = (law.closed_form * (1.0 - law.closed_form) / reps as f64).sqrt();
            let z = (f - law.closed_form) / sigma;
            worst_z = worst_z.max(z.abs());
            pass &= z.abs() < 3.0;
        }
    }
    // exact domination sweep
    let mut domination = true;
    for &lambda in &[0.04f64, 1.0] {
        let t = block_length(lambda).unwrap();
        for nv in 1..=10u64 {
            for ne in nv..=10 {
                let law = good_probability_closed_form(nv, ne, lambda, t).unwrap();
                domination &= law.dominates();
            }
        }
    }
    report(
        5,
        "good-box law",
        60.0,
        start,
        pass && domination,
        format!(
            "MC vs closed form at 1e5 reps, worst |z| = {worst_z:.2}; \
             closed form >= p^edges exhaustively: {domination}"
        ),
    )
}

/// Criterion 6: Barrier soundness: every detected certificate over the pipeline
/// replicas passes direct-simulation confinement, with no tolerance.
pub fn criterion_barrier_soundness(seed: u64) -> CriterionReport {
    let start = std::time::Instant::now();
    let config = ExperimentConfig {
        name: "barrier-soundness".into(),
        s: 3.0,
        lambda: 0.01,
        half_width: 2000,
        buffer: 200,
        rows: 8,
        replicas: 1000,
        seed: stream_seed(seed, 0x6, 0),
        ..Default::default()
    };
    match pipeline_end_to_end(&config) {
        Ok(rep) => {
            let pass = rep.aggregate.certificates > 0
                && rep.aggregate.verified == rep.aggregate.certificates;
            report(
                6,
                "barrier soundness",
                600.0,
                start,
                pass,
                format!(
                    "{} replicas ({} excluded), {} certificates, {} verified",
                    rep.aggregate.replicas,
                    rep.aggregate.excluded,
                    rep.aggregate.certificates,
                    rep.aggregate.verified
                ),
            )
        }
        Err(e) => report(
            6,
            "barrier soundness",
            600.0,
            start,
            false,
            format!("error: {e}"),
        ),
    }
}

/// Criterion 7: Site-to-bond domination by exhaustive exact enumeration.
pub fn criterion_site_bond(_seed: u64) -> CriterionReport {
    let start = std::time::Instant::now();
    let mut cases = 0usize;
    let mut violations = 0usize;
    let mut min_margin = f64::INFINITY;
    for &p in &[(1i64, 2i64), (4, 5), (19, 20)] {
        for m in 2..=3usize {
            for r in 2..=3usize {
                let gaps = m - 1;
                for assignment in 0..(1usize << gaps) {
                    let phis: Vec<u64> = (0..gaps)
                        .map(|g| if assignment >> g & 1 == 1 { 2 } else { 1 })
                        .collect();
                    let rep = coupling_inequality_check(&phis, p, m, r).unwrap();
                    cases += 1;
                    if !rep.holds() {
                        violations += 1;
                    }
                    min_margin = min_margin
                        .min(rep.margin_horizontal)
                        .min(rep.margin_vertical);
                }
            }
        }
    }
    report(
        7,
        "site-bond domination",
        300.0,
        start,
        violations == 0,
        format!("{cases} exact enumerations, {violations} violations, min margin {min_margin:.4}"),
    )
}

/// Criterion 8: Environment control: exact bottom-scale bad probability versus Monte
/// Carlo, and the multiscale bound at the largest desk-reachable level.
pub fn criterion_environment_control(seed: u64) -> CriterionReport {
    let start = std::time::Instant::now();
    let law = GapLaw::ShiftedGeometric {
        shift: 1,
        success: 0.5,
    };
    if !law.is_aperiodic() {
        return report(
            8,
            "environment control",
            300.0,
            start,
            false,
            "law not aperiodic".into(),
        );
    }
    let scales = build_scales(16, 4, 4.0, 4, ScaleMode::Derived).unwrap();
    let est0 = p_k_estimate(&law, &scales, 0, 2_000_000, stream_seed(seed, 0x8, 0)).unwrap();
    let exact = est0.exact_scale0.unwrap();
    let sigma = (exact * (1.0 - exact) / 2_000_000f64).sqrt();
    let z = (est0.estimate - exact) / sigma;
    let exact_pass = z.abs() < 3.0;

    let k_top = scales.lengths.len() - 1;
    let est_top = p_k_estimate(&law, &scales, k_top, 20_000, stream_seed(seed, 0x8, 1)).unwrap();
    report(
        8,
        "environment control",
        300.0,
        start,
        exact_pass && est_top.pass,
        format!(
            "scale 0: exact {exact:.3e} vs MC {:.3e} (z = {z:.2}); scale {k_top} \
             (L = {}): estimate {:.2e} <= bound {:.2e} within CI: {}",
            est0.estimate, scales.lengths[k_top], est_top.estimate, est_top.bound, est_top.pass
        ),
    )
}

/// Criterion 9: Contact-process oracles: the event sweep equals the path-search oracle
/// on small systems, and two-vertex marginals match the uniformized chain.
pub fn criterion_contact_oracles(seed: u64) -> CriterionReport {
    let start = std::time::Instant::now();
    // (a) sweep vs path search on systems of three to five vertices with a
    // handful of marks each
    let mut mismatches = 0usize;
    for r in 0..1000u64 {
        let wseed = stream_seed(seed, 0x9, r);
        let window = if r % 2 == 0 {
            GraphWindow::from_edges(GraphParams::new(3.0, 1, 0, wseed).unwrap(), &[(-1, 1)])
                .unwrap()
        } else {
            GraphWindow::from_edges(
                GraphParams::new(3.0, 2, 0, wseed).unwrap(),
                &[(-2, 0), (-1, 1), (0, 2)],
            )
            .unwrap()
        };
        let rep = sample_rep(&window, 1.0, 1.5, wseed).unwrap();
        let trace = run_contact(&rep, &window, &[0]).unwrap();
        for &t in &[0.3, 0.9, 1.49] {
            let mut got = trace.infected_at(t);
            got.sort_unstable();
            let mut want = oracle::infected_at(&rep, &window, &[0], 0.0, t);
            want.sort_unstable();
            if got != want {
                mismatches += 1;
            }
        }
    }

    // (b) two-vertex occupation law vs Monte Carlo through the full sweep
    let lambda = 1.0;
    let t = 1.0;
    let expected = two_vertex_occupation(lambda, t, [true, false]).unwrap();
    let mut window = GraphWindow::from_edges(GraphParams::new(3.0, 1, 0, 7).unwrap(), &[]).unwrap();
    window.edges = vec![(0, 1)]; // detach vertex -1: a genuine two-vertex system
    let runs = 100_000usize;
    let mut counts = [0usize; 4];
    for r in 0..runs {
        let rep = sample_rep(&window, lambda, t, stream_seed(seed, 0x9A, r as u64)).unwrap();
        let trace = run_contact(&rep, &window, &[0]).unwrap();
        let inf = trace.infected_at(t - 1e-12);
        let a = inf.contains(&0);
        let b = inf.contains(&1);
        counts[match (a, b) {
            (false, false) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (true, true) => 3,
        }] += 1;
    }
    let mut worst_z = 0.0f64;
    for (i, &c) in counts.iter().enumerate() {
        let p = expected[i];
        let sigma = (p * (1.0 - p) / runs as f64).sqrt().max(1e-12);
        worst_z = worst_z.max(((c as f64 / runs as f64) - p).abs() / sigma);
    }
    let pass = mismatches == 0 && worst_z < 3.0;
    report(
        9,
        "contact oracles",
        300.0,
        start,
        pass,
        format!("sweep/path mismatches: {mismatches}; two-vertex worst |z| = {worst_z:.2}"),
    )
}

/// Criterion 10: Monotonicity suite: thinning-coupled survival, shared-uniform
/// monotonicity in the tail exponent and in p, and crossing stability
/// under extra open edges. All exact.
pub fn criterion_monotonicity(seed: u64) -> CriterionReport {
    let start = std::time::Instant::now();
    // coupled thinning: survival of the thinned run implies survival of the
    // original, checked on 1e4 coupled pairs
    let mut violations = 0usize;
    for r in 0..10_000u64 {
        let wseed = stream_seed(seed, 0xA, r);
        let window = GraphWindow::sample(GraphParams::new(3.0, 25, 2, wseed).unwrap()).unwrap();
        let rep = sample_rep(&window, 1.2, 8.0, wseed ^ 0x55).unwrap();
        let thin = coupled_thinning(&rep, 0.4, wseed ^ 0xAA).unwrap();
        let full = run_contact(&rep, &window, &[0]).unwrap();
        let reduced = run_contact(&thin, &window, &[0]).unwrap();
        if reduced.survived() && !full.survived() {
            violations += 1;
        }
    }

    // monotone in s with shared uniforms
    let mut s_ok = true;
    for w in 0..20u64 {
        let mk = |s: f64| {
            GraphWindow::sample(GraphParams::new(s, 200, 10, stream_seed(seed, 0xA1, w)).unwrap())
                .unwrap()
                .edges
        };
        let loose = mk(2.5);
        for e in mk(3.5) {
            s_ok &= loose.binary_search(&e).is_ok();
        }
    }

    // monotone in p: site field and bond configuration
    let mut p_ok = true;
    let phis = vec![1u64, 2, 1, 3];
    let lo = site_field_sample(&phis, 0.4, 400, stream_seed(seed, 0xA2, 0)).unwrap();
    let hi = site_field_sample(&phis, 0.9, 400, stream_seed(seed, 0xA2, 0)).unwrap();
    for (a, b) in lo.open.iter().zip(hi.open.iter()) {
        for (x, y) in a.iter().zip(b.iter()) {
            p_ok &= !x || *y;
        }
    }
    let env = sample_renewal(
        &GapLaw::uniform(&[1, 2]),
        RenewalMode::OriginStarted,
        (0, 120),
        stream_seed(seed, 0xA3, 0),
    )
    .unwrap();
    let cfg_lo = sample_bond_config(&env, 0.3, (0, 120), 24, stream_seed(seed, 0xA4, 0)).unwrap();
    let cfg_hi = sample_bond_config(&env, 0.8, (0, 120), 24, stream_seed(seed, 0xA4, 0)).unwrap();
    for c in 0..cfg_lo.columns.len() {
        for r in 0..23 {
            p_ok &= !cfg_lo.vertical_open(c, r) || cfg_hi.vertical_open(c, r);
        }
    }
    for g in 0..cfg_lo.columns.len() - 1 {
        for r in 0..24 {
            p_ok &= !cfg_lo.horizontal_open(g, r) || cfg_hi.horizontal_open(g, r);
        }
    }

    // crossings are monotone under opening extra edges
    let mut crossing_ok = true;
    let rect = crate::stretched::Rect {
        x_lo: 0,
        x_hi: 40,
        row_lo: 0,
        row_hi: 12,
    };
    for r in 0..100u64 {
        let env = sample_renewal(
            &GapLaw::uniform(&[1, 2]),
            RenewalMode::OriginStarted,
            (0, 40),
            stream_seed(seed, 0xA5, r),
        )
        .unwrap();
        let mut cfg =
            sample_bond_config(&env, 0.5, (0, 40), 12, stream_seed(seed, 0xA6, r)).unwrap();
        let before_h = cfg.crossing(&rect, Orientation::Horizontal).unwrap();
        let before_v = cfg.crossing(&rect, Orientation::Vertical).unwrap();
        for i in 0..5 {
            cfg.open_vertical(((r as usize) * 7 + i) % cfg.columns.len(), (i * 3) % 11);
            cfg.open_horizontal(
                ((r as usize) * 5 + i) % (cfg.columns.len() - 1),
                (i * 5) % 12,
            );
        }
        crossing_ok &= !before_h || cfg.crossing(&rect, Orientation::Horizontal).unwrap();
        crossing_ok &= !before_v || cfg.crossing(&rect, Orientation::Vertical).unwrap();
    }

    let pass = violations == 0 && s_ok && p_ok && crossing_ok;
    report(
        10,
        "monotonicity suite",
        300.0,
        start,
        pass,
        format!(
            "thinning violations {violations}/10000; exponent coupling {s_ok}; \
             p couplings {p_ok}; crossing stability {crossing_ok}"
        ),
    )
}

/// Criterion 11: Seven-crossing recomposition: the conjunction equals independent
/// re-evaluation of its constituents on random configurations.
pub fn criterion_fk_recomposition(seed: u64) -> CriterionReport {
    let start = std::time::Instant::now();
    let scales = build_scales(
        4,
        4,
        1.0,
        1,
        ScaleMode::Desk {
            gamma: 1.5,
            mu: 0.35,
        },
    )
    .unwrap();
    let mut mismatches = 0usize;
    let mut occurrences = 0usize;
    for r in 0..1000u64 {
        let k = (r % 2) as usize;
        let l = scales.lengths[k] as i64;
        let h = scales.heights[k] as usize;
        let env = sample_renewal(
            &GapLaw::uniform(&[1, 2]),
            RenewalMode::OriginStarted,
            (-2 * l, 2 * l),
            stream_seed(seed, 0xB, r),
        )
        .unwrap();
        let cfg = sample_bond_config(
            &env,
            0.8,
            (-2 * l, 2 * l),
            2 * h,
            stream_seed(seed, 0xB1, r),
        )
        .unwrap();
        let fk = check_fk(&cfg, &scales, k).unwrap();
        let (hs, vs) = fk_rectangles(&scales, k);
        let mut all = true;
        for rect in &hs {
            all &= cfg.crossing(rect, Orientation::Horizontal).unwrap();
        }
        for rect in &vs {
            all &= cfg.crossing(rect, Orientation::Vertical).unwrap();
        }
        if fk != all {
            mismatches += 1;
        }
        if fk {
            occurrences += 1;
        }
    }
    report(
        11,
        "seven-crossing recomposition",
        60.0,
        start,
        mismatches == 0,
        format!("1000 configurations, {occurrences} occurrences, {mismatches} mismatches"),
    )
}

pub fn run_all(seed: u64) -> Vec<CriterionReport> {
    vec![
        criterion_edge_law(seed),
        criterion_cut_density(seed),
        criterion_step_tail(seed),
        criterion_moment_stability(seed),
        criterion_good_box(seed),
        criterion_barrier_soundness(seed),
        criterion_site_bond(seed),
        criterion_environment_control(seed),
        criterion_contact_oracles(seed),
        criterion_monotonicity(seed),
        criterion_fk_recomposition(seed),
    ]
}
