//! Cut-point structure of a sampled window: the first straddle-free bounds
//! around the origin, the bi-infinite cut-point scan, strong cut-points and
//! the every-other selection driving the interval partition and edge
//! families, plus the gap statistics extracted from them.

use crate::graph::{Edge, GraphWindow, Vertex};
use crate::series;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CutpointError {
    #[error("decomposition requires s > 2, got {0}")]
    ExponentTooSmall(f64),
    #[error("window uncertifiable: straddle-free bound {position} escapes the inner window (exterior error {exterior_bound:.3e})")]
    Uncertifiable { position: i64, exterior_bound: f64 },
    #[error("no strong cut-point inside the certified region on the {side} side")]
    NoStrongCutPoint { side: &'static str },
    #[error("count {m} exceeds the certified window")]
    CountOutsideWindow { m: i64 },
    #[error(transparent)]
    Series(#[from] series::SeriesError),
}

/// Largest j > 0 reached by an edge from i < 0, and smallest such i; 0 when
/// no edge straddles the origin. Errors when either escapes the certified
/// inner window.
pub fn find_x_plus_minus(window: &GraphWindow) -> Result<(Vertex, Vertex), CutpointError> {
    let mut x_plus: Vertex = 0;
    let mut x_minus: Vertex = 0;
    for &(i, j) in &window.edges {
        if i < 0 && j > 0 {
            x_plus = x_plus.max(j);
            x_minus = x_minus.min(i);
        }
    }
    let (lo, hi) = window.params.inner_range();
    for &x in &[x_plus, x_minus] {
        if x < lo || x > hi {
            let clamped = x.clamp(lo, hi);
            return Err(CutpointError::Uncertifiable {
                position: x,
                exterior_bound: window.exterior_error_at(clamped).unwrap_or(1.0),
            });
        }
    }
    Ok((x_minus, x_plus))
}

/// Cut-points on both sides of the origin, in exploration order:
/// `right` ascending from just past x_plus, `left` descending from just
/// before x_minus. Both lists stay inside the certified inner window.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CutPoints {
    pub right: Vec<Vertex>,
    pub left: Vec<Vertex>,
}

impl CutPoints {
    pub fn total(&self) -> usize {
        self.right.len() + self.left.len()
    }
}

/// Scan for positions with no open window edge straddling them.
pub fn scan_cut_points(window: &GraphWindow) -> Result<CutPoints, CutpointError> {
    if window.params.s <= 2.0 {
        return Err(CutpointError::ExponentTooSmall(window.params.s));
    }
    let (x_minus, x_plus) = find_x_plus_minus(window)?;
    let (lo, hi) = window.params.inner_range();
    let n = window.params.half_width;

    // reach[x] = max j over open edges with left endpoint <= x - 1.
    let mut right = Vec::new();
    {
        let mut idx = 0usize;
        let mut reach = i64::MIN;
        for x in (x_plus + 1)..=hi {
            while idx < window.edges.len() && window.edges[idx].0 < x {
                reach = reach.max(window.edges[idx].1);
                idx += 1;
            }
            if reach <= x {
                right.push(x);
            }
        }
    }
    // Mirror for the left side: min i over edges with right endpoint >= x + 1.
    let mut left = Vec::new();
    {
        let mut by_right: Vec<Edge> = window.edges.clone();
        by_right.sort_unstable_by_key(|&(i, j)| (std::cmp::Reverse(j), std::cmp::Reverse(i)));
        let mut idx = 0usize;
        let mut reach = i64::MAX;
        for x in (lo..x_minus).rev() {
            while idx < by_right.len() && by_right[idx].1 > x {
                reach = reach.min(by_right[idx].0);
                idx += 1;
            }
            if reach >= x {
                left.push(x);
            }
        }
    }
    debug_assert!(right.iter().all(|&x| x > x_plus && x <= n));
    Ok(CutPoints { right, left })
}

/// Consecutive cut-point gaps on one side (positive integers).
pub fn gaps(cuts: &[Vertex]) -> Vec<u64> {
    cuts.windows(2)
        .map(|w| (w[1] - w[0]).unsigned_abs())
        .collect()
}

/// Strong cut-points: interior entries whose gaps to both neighbours are 1.
/// On Figure-style configurations these are the marked "surrounded" vertices.
pub fn strong_cut_points(cuts: &[Vertex]) -> Vec<Vertex> {
    let mut out = Vec::new();
    for k in 1..cuts.len().saturating_sub(1) {
        if cuts[k] - cuts[k - 1] == 1 && cuts[k + 1] - cuts[k] == 1 {
            out.push(cuts[k]);
        }
    }
    out
}

/// Every-other selection: indices n_1 < n_2 < ... with n_1 > 1 and gaps
/// theta_{2n-1} = theta_{2n} = 1; the selected points are x_{2n_k}. The same
/// recursion applies to either side when `cuts` is listed in exploration
/// order.
pub fn select_strong_cut_points(cuts: &[Vertex]) -> Vec<Vertex> {
    let g = gaps(cuts);
    let mut out = Vec::new();
    let mut n = 2usize; // n > 1
    while 2 * n <= g.len() {
        // theta indices are 1-based: theta_m = g[m-1].
        if g[2 * n - 2] == 1 && g[2 * n - 1] == 1 {
            out.push(cuts[2 * n - 1]); // x_{2n} is the (2n)-th cut, 0-based 2n-1
        }
        n += 1;
    }
    out
}

/// Certified lower bound (1/2) exp(-Sigma_{m>=2}(m-1) m^{-s}) on the
/// probability that a fixed vertex is a cut-point.
pub fn cut_point_probability_lower_bound(s: f64) -> Result<f64, CutpointError> {
    if s <= 2.0 {
        return Err(CutpointError::ExponentTooSmall(s));
    }
    let sum = series::over_point_sum(s)?;
    Ok(0.5 * (-sum.hi).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub lo: Vertex,
    pub hi: Vertex,
}

impl Interval {
    pub fn len(&self) -> u64 {
        (self.hi - self.lo + 1) as u64
    }
    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }
    pub fn contains(&self, v: Vertex) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// The full decomposition of a window.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub x_minus: Vertex,
    pub x_plus: Vertex,
    pub cut_points: CutPoints,
    /// Selected strong cut-points v_k, keyed by k in Z \ {0}.
    pub strong: BTreeMap<i64, Vertex>,
    /// Interval V_k per index k; odd k are singletons.
    pub intervals: BTreeMap<i64, Interval>,
    /// Edge family per index k.
    pub edge_families: BTreeMap<i64, Vec<Edge>>,
    /// Consecutive cut-point gaps pooled from both sides.
    pub cut_gap_samples: Vec<u64>,
    /// Consecutive selected strong cut-point gaps pooled from both sides.
    pub strong_gap_samples: Vec<u64>,
    /// Max exterior-crossing bound over all reported cut-points.
    pub certification: f64,
    /// True when at least two strong cut-points were found on each side.
    pub complete: bool,
}

impl Decomposition {
    pub fn interval_sizes_even(&self) -> Vec<u64> {
        self.intervals
            .iter()
            .filter(|(k, _)| **k != 0 && *k % 2 == 0)
            .map(|(_, iv)| iv.len())
            .collect()
    }

    pub fn family_sizes_even(&self) -> Vec<u64> {
        self.edge_families
            .iter()
            .filter(|(k, _)| **k != 0 && *k % 2 == 0)
            .map(|(_, es)| es.len() as u64)
            .collect()
    }

    pub fn column_span(&self) -> (i64, i64) {
        let lo = *self.intervals.keys().next().unwrap();
        let hi = *self.intervals.keys().last().unwrap();
        (lo, hi)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("decomposition serialization cannot fail")
    }
}

/// Run the whole pipeline on a window.
pub fn decompose(window: &GraphWindow) -> Result<Decomposition, CutpointError> {
    let (x_minus, x_plus) = find_x_plus_minus(window)?;
    let cut_points = scan_cut_points(window)?;

    let v_right = select_strong_cut_points(&cut_points.right);
    let v_left = select_strong_cut_points(&cut_points.left);
    if v_right.is_empty() {
        return Err(CutpointError::NoStrongCutPoint { side: "right" });
    }
    if v_left.is_empty() {
        return Err(CutpointError::NoStrongCutPoint { side: "left" });
    }

    let mut strong = BTreeMap::new();
    for (k, &v) in v_right.iter().enumerate() {
        strong.insert(k as i64 + 1, v);
    }
    for (k, &v) in v_left.iter().enumerate() {
        strong.insert(-(k as i64) - 1, v);
    }

    let intervals = build_intervals(&strong);
    let edge_families = build_edge_families(window, &strong, &intervals);

    let mut cut_gap_samples = gaps(&cut_points.right);
    cut_gap_samples.extend(gaps(&cut_points.left));
    let mut strong_gap_samples = gaps(&v_right);
    strong_gap_samples.extend(gaps(&v_left));

    // The per-position bound f(N-x) + f(N+x) is convex in x (each straddle
    // tail is convex), so its maximum over the reported points sits at an
    // extreme position; two evaluations suffice.
    let mut certification = 0.0f64;
    let mut extremes = vec![x_minus, x_plus];
    extremes.extend(cut_points.right.last());
    extremes.extend(cut_points.left.last());
    for &x in &extremes {
        if let Ok(e) = window.exterior_error_at(x) {
            certification = certification.max(e);
        }
    }

    let complete = v_right.len() >= 2 && v_left.len() >= 2;
    Ok(Decomposition {
        x_minus,
        x_plus,
        cut_points,
        strong,
        intervals,
        edge_families,
        cut_gap_samples,
        strong_gap_samples,
        certification,
        complete,
    })
}

fn build_intervals(strong: &BTreeMap<i64, Vertex>) -> BTreeMap<i64, Interval> {
    let mut out = BTreeMap::new();
    let v = |k: i64| strong[&k];
    let m_pos = *strong.keys().last().unwrap();
    let m_neg = -*strong.keys().next().unwrap();
    out.insert(
        0,
        Interval {
            lo: v(-1) + 1,
            hi: v(1) - 1,
        },
    );
    for k in 1..=m_pos {
        out.insert(2 * k - 1, Interval { lo: v(k), hi: v(k) });
        if k < m_pos {
            out.insert(
                2 * k,
                Interval {
                    lo: v(k) + 1,
                    hi: v(k + 1) - 1,
                },
            );
        }
    }
    for k in 1..=m_neg {
        out.insert(
            -(2 * k - 1),
            Interval {
                lo: v(-k),
                hi: v(-k),
            },
        );
        if k < m_neg {
            out.insert(
                -2 * k,
                Interval {
                    lo: v(-(k + 1)) + 1,
                    hi: v(-k) - 1,
                },
            );
        }
    }
    out
}

fn build_edge_families(
    window: &GraphWindow,
    strong: &BTreeMap<i64, Vertex>,
    intervals: &BTreeMap<i64, Interval>,
) -> BTreeMap<i64, Vec<Edge>> {
    let span_lo = strong[strong.keys().next().unwrap()];
    let span_hi = strong[strong.keys().last().unwrap()];
    let v0 = &intervals[&0];

    // Position -> interval index, for positions in [span_lo, span_hi].
    let boundaries: Vec<(i64, Interval)> = intervals.iter().map(|(k, iv)| (*k, *iv)).collect();
    let index_of = |x: Vertex| -> i64 {
        let pos = boundaries
            .binary_search_by(|(_, iv)| {
                if iv.hi < x {
                    std::cmp::Ordering::Less
                } else if iv.lo > x {
                    std::cmp::Ordering::Greater
                } else {
                    std::cmp::Ordering::Equal
                }
            })
            .expect("position inside span must land in an interval");
        boundaries[pos].0
    };

    let mut out: BTreeMap<i64, Vec<Edge>> = BTreeMap::new();
    for k in intervals.keys() {
        out.insert(*k, Vec::new());
    }
    for &(i, j) in &window.edges {
        let touches_v0 = v0.contains(i) || v0.contains(j);
        if touches_v0 {
            out.get_mut(&0).unwrap().push((i, j));
            continue;
        }
        if i >= span_lo && i <= span_hi && i > v0.hi {
            // fully on the positive side: key on the minimum endpoint
            let k = index_of(i);
            debug_assert!(k > 0 && j <= span_hi + 1);
            out.get_mut(&k).unwrap().push((i, j));
        } else if j <= span_hi && j >= span_lo && j < v0.lo {
            // negative side: key on the maximum endpoint
            let k = index_of(j);
            debug_assert!(k < 0);
            out.get_mut(&k).unwrap().push((i, j));
        }
        // Edges outside the strong span are not part of any family.
    }
    out
}

/// Sample mean of x^power with jackknife standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentEstimate {
    pub power: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub sample_size: usize,
}

pub fn empirical_moment(samples: &[u64], power: f64) -> MomentEstimate {
    assert!(
        !samples.is_empty(),
        "empirical_moment needs a nonempty sample"
    );
    let n = samples.len() as f64;
    let transformed: Vec<f64> = samples.iter().map(|&x| (x as f64).powf(power)).collect();
    let total: f64 = transformed.iter().sum();
    let mean = total / n;
    let stderr = if samples.len() == 1 {
        0.0
    } else {
        // Jackknife over leave-one-out means.
        let mut acc = 0.0f64;
        for &t in &transformed {
            let loo = (total - t) / (n - 1.0);
            acc += (loo - mean) * (loo - mean);
        }
        ((n - 1.0) / n * acc).sqrt()
    };
    MomentEstimate {
        power,
        estimate: mean,
        stderr,
        sample_size: samples.len(),
    }
}

/// Number of open edges whose minimum endpoint lies in [[1, M]].
pub fn edge_count_window(window: &GraphWindow, m: i64) -> Result<usize, CutpointError> {
    if m < 1 || m >= window.params.half_width {
        return Err(CutpointError::CountOutsideWindow { m });
    }
    Ok(window
        .edges
        .iter()
        .filter(|&&(i, _)| i >= 1 && i <= m)
        .count())
}

/// Exact mean and variance of the window-free edge count over [[1, M]]:
/// mean = M zeta(s), variance = M (zeta(s) - zeta(2s)).
pub fn edge_count_law_moments(s: f64, m: u64) -> Result<(f64, f64), CutpointError> {
    let z1 = series::zeta(s)?.mid();
    let z2 = series::zeta(2.0 * s)?.mid();
    Ok((m as f64 * z1, m as f64 * (z1 - z2)))
}
