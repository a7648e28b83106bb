//! Long-range percolation on a finite window of the integer line.
//!
//! Every unordered pair {i, j} inside [-N, N] is open independently with
//! probability |i-j|^{-s}; length-one edges are open surely. One uniform is
//! attached to each pair through a keyed hash, so resampling is bit-identical
//! and windows sampled at different tail exponents from the same seed are
//! coupled monotonely. Edges with an endpoint outside the window are never
//! revealed; `exterior_error_at` bounds the probability that such an edge
//! straddles a given interior position.

use crate::rng::{keyed_u64, open_threshold, stream_seed, tag};
use crate::series;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vertex = i64;
pub type Edge = (Vertex, Vertex);

/// Window half-widths above this would not fit the sampling budget.
const MAX_HALF_WIDTH: i64 = 1 << 22;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("tail exponent must be positive, got {0}")]
    NonPositiveExponent(f64),
    #[error("half-width must be >= 1, got {0}")]
    BadHalfWidth(i64),
    #[error("buffer {buffer} must be smaller than half-width {half_width}")]
    BufferTooLarge { buffer: i64, half_width: i64 },
    #[error("window with half-width {0} exceeds the sampling memory budget")]
    WindowTooLarge(i64),
    #[error("distance 0 has no edge (self-loop)")]
    SelfLoop,
    #[error("position {position} lies outside the certified inner window [{lo}, {hi}]")]
    OutsideInnerWindow { position: i64, lo: i64, hi: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    /// Tail exponent of the connection probability.
    pub s: f64,
    /// Window is [-half_width, half_width].
    #[serde(rename = "halfWidth")]
    pub half_width: i64,
    /// Positions within `buffer` of the window edge are not certified.
    pub buffer: i64,
    pub seed: u64,
}

impl GraphParams {
    pub fn new(s: f64, half_width: i64, buffer: i64, seed: u64) -> Result<Self, GraphError> {
        if !s.is_finite() || s <= 0.0 {
            return Err(GraphError::NonPositiveExponent(s));
        }
        if half_width < 1 {
            return Err(GraphError::BadHalfWidth(half_width));
        }
        if buffer < 0 || buffer >= half_width {
            return Err(GraphError::BufferTooLarge { buffer, half_width });
        }
        Ok(GraphParams {
            s,
            half_width,
            buffer,
            seed,
        })
    }

    /// Certified inner window [-(N-B), N-B].
    pub fn inner_range(&self) -> (i64, i64) {
        (
            -(self.half_width - self.buffer),
            self.half_width - self.buffer,
        )
    }
}

/// P(edge of the given length is open) = distance^{-s}.
pub fn edge_open_probability(distance: u64, s: f64) -> Result<f64, GraphError> {
    if distance == 0 {
        return Err(GraphError::SelfLoop);
    }
    if !s.is_finite() || s <= 0.0 {
        return Err(GraphError::NonPositiveExponent(s));
    }
    Ok((distance as f64).powf(-s))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphWindow {
    pub params: GraphParams,
    /// Open pairs (i, j) with i < j, sorted lexicographically.
    pub edges: Vec<Edge>,
}

impl GraphWindow {
    /// Sample the full window. All pairs are enumerated by (left endpoint,
    /// length); each pair consumes one keyed uniform, so the edge set is a
    /// deterministic function of (seed, i, j) alone.
    pub fn sample(params: GraphParams) -> Result<Self, GraphError> {
        if params.half_width > MAX_HALF_WIDTH {
            return Err(GraphError::WindowTooLarge(params.half_width));
        }
        let n = params.half_width;
        let stream = stream_seed(params.seed, tag::GRAPH_PAIR, 0);
        let mut edges: Vec<Edge> = Vec::with_capacity((2.6 * (2 * n) as f64) as usize);
        // Length-one edges are open with probability 1; no uniform consumed.
        for i in -n..n {
            edges.push((i, i + 1));
        }
        for len in 2..=(2 * n) {
            let p = (len as f64).powf(-params.s);
            let thr = open_threshold(p);
            if thr == 0 {
                continue;
            }
            for i in -n..=(n - len) {
                if keyed_u64(stream, pair_key(i, len)) < thr {
                    edges.push((i, i + len));
                }
            }
        }
        edges.sort_unstable();
        Ok(GraphWindow { params, edges })
    }

    /// Build a window from an explicit edge list (test configurations,
    /// deserialization). Length-one edges inside the window are added if
    /// missing; everything is normalized to (i < j) sorted order.
    pub fn from_edges(params: GraphParams, extra: &[Edge]) -> Result<Self, GraphError> {
        let n = params.half_width;
        let mut edges: Vec<Edge> = Vec::new();
        for i in -n..n {
            edges.push((i, i + 1));
        }
        for &(a, b) in extra {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            assert!(i >= -n && j <= n && i != j, "edge ({i},{j}) outside window");
            if j - i > 1 {
                edges.push((i, j));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(GraphWindow { params, edges })
    }

    pub fn vertex_count(&self) -> usize {
        (2 * self.params.half_width + 1) as usize
    }

    pub fn vertex_index(&self, v: Vertex) -> usize {
        (v + self.params.half_width) as usize
    }

    pub fn vertex_at(&self, idx: usize) -> Vertex {
        idx as i64 - self.params.half_width
    }

    pub fn contains_edge(&self, a: Vertex, b: Vertex) -> bool {
        let e = if a < b { (a, b) } else { (b, a) };
        self.edges.binary_search(&e).is_ok()
    }

    /// Rigorous upper bound on the probability that some unsampled edge
    /// (at least one endpoint outside the window) straddles `position`.
    pub fn exterior_error_at(&self, position: i64) -> Result<f64, GraphError> {
        let (lo, hi) = self.params.inner_range();
        if position < lo || position > hi {
            return Err(GraphError::OutsideInnerWindow { position, lo, hi });
        }
        Ok(exterior_crossing_bound(position, &self.params))
    }

    /// JSON export in the documented schema.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("window serialization cannot fail")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[inline(always)]
fn pair_key(left: Vertex, len: i64) -> u64 {
    ((left as u64) << 24) ^ (len as u64)
}

/// Union bound over all pairs straddling `position` with an endpoint beyond
/// either window edge, summed in closed form with an integral-comparison
/// remainder. Degenerate exponents (s <= 2) return 1.
pub fn exterior_crossing_bound(position: i64, params: &GraphParams) -> f64 {
    let d_right = (params.half_width - position) as u64;
    let d_left = (params.half_width + position) as u64;
    let side = |d: u64| match series::straddle_tail(params.s, d + 1) {
        Ok(b) => b.hi,
        Err(_) => 1.0,
    };
    (side(d_left) + side(d_right)).min(1.0)
}
