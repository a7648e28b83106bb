//! Shared fixtures for the benchmark targets.

use lrcp_core::cutpoints::{decompose, Decomposition};
use lrcp_core::graph::{GraphParams, GraphWindow};
use lrcp_core::stretched::{sample_renewal, GapLaw, RenewalEnv, RenewalMode};

pub fn window(half_width: i64, seed: u64) -> GraphWindow {
    let params = GraphParams::new(3.0, half_width, half_width / 10, seed).unwrap();
    GraphWindow::sample(params).unwrap()
}

pub fn decomposed(half_width: i64, seed: u64) -> (GraphWindow, Decomposition) {
    // a seed known to certify at this size
    let w = window(half_width, seed);
    let d = decompose(&w).unwrap();
    (w, d)
}

pub fn environment(span: i64, seed: u64) -> RenewalEnv {
    sample_renewal(
        &GapLaw::uniform(&[1, 2, 3]),
        RenewalMode::OriginStarted,
        (-span, span),
        seed,
    )
    .unwrap()
}
