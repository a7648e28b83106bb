//! Bond percolation on the stretched lattice spanned by a renewal
//! environment: vertical edges open with probability p, horizontal edges
//! between consecutive columns with probability p^{gap}. Crossing events of
//! position-space rectangles, their seven-fold conjunction around the
//! origin, and conditional failure estimates live here.

use super::renewal::{sample_renewal, GapLaw, RenewalEnv, RenewalMode};
use super::scales::{classify_intervals, ScaleError, ScaleHierarchy};
use crate::rng::{keyed_u64, open_threshold, stream_seed, tag};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BondError {
    #[error("p must lie in (0, 1), got {0}")]
    BadP(f64),
    #[error("rectangle {0:?} not contained in the configuration window")]
    RectOutsideWindow(Rect),
    #[error(
        "configuration window misses the required span (need x in [{x_lo}, {x_hi}), rows < {rows})"
    )]
    InsufficientWindow { x_lo: i64, x_hi: i64, rows: usize },
    #[error("environment conditioning rejected more than {0} candidates")]
    ConditioningStalled(usize),
    #[error("configuration of {columns} columns x {rows} rows exceeds the sampling budget")]
    ConfigTooLarge { columns: usize, rows: usize },
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Renewal(#[from] super::renewal::RenewalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    /// Positions x with x_lo <= x < x_hi.
    pub x_lo: i64,
    pub x_hi: i64,
    /// Rows r with row_lo <= r < row_hi.
    pub row_lo: usize,
    pub row_hi: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Serialize)]
pub struct BondConfig {
    pub p: f64,
    /// Sampled position range (half-open).
    pub window: (i64, i64),
    /// Column positions, ascending (renewal points inside the sample window).
    pub columns: Vec<i64>,
    pub rows: usize,
    /// vertical[c][r]: edge (c, r)-(c, r+1) open; rows-1 entries per column.
    vertical: Vec<Vec<bool>>,
    /// horizontal[g][r]: edge (g, r)-(g+1, r) open.
    horizontal: Vec<Vec<bool>>,
}

/// Heights grow doubly exponentially with the scale; refuse lattices whose
/// cell count cannot fit a desk run.
const MAX_CELLS: u128 = 1 << 26;

/// Sample every edge of the stretched lattice restricted to `x_range` and
/// `rows`. Edge states are keyed by position so configurations sampled at
/// larger p from the same seed dominate pointwise.
pub fn sample_bond_config(
    env: &RenewalEnv,
    p: f64,
    x_range: (i64, i64),
    rows: usize,
    seed: u64,
) -> Result<BondConfig, BondError> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(BondError::BadP(p));
    }
    let columns: Vec<i64> = env
        .points
        .iter()
        .copied()
        .filter(|&x| x >= x_range.0 && x < x_range.1)
        .collect();
    if columns.len() as u128 * rows as u128 > MAX_CELLS {
        return Err(BondError::ConfigTooLarge {
            columns: columns.len(),
            rows,
        });
    }
    let v_stream = stream_seed(seed, tag::BOND_V, 0);
    let h_stream = stream_seed(seed, tag::BOND_H, 0);
    let v_thr = open_threshold(p);
    let key = |x: i64, r: usize| ((x as u64) << 24) ^ r as u64;
    let vertical = columns
        .iter()
        .map(|&x| {
            (0..rows.saturating_sub(1))
                .map(|r| keyed_u64(v_stream, key(x, r)) < v_thr)
                .collect()
        })
        .collect();
    let horizontal = columns
        .windows(2)
        .map(|w| {
            let gap = (w[1] - w[0]) as i32;
            let thr = open_threshold(p.powi(gap));
            (0..rows)
                .map(|r| keyed_u64(h_stream, key(w[0], r)) < thr)
                .collect()
        })
        .collect();
    Ok(BondConfig {
        p,
        window: x_range,
        columns,
        rows,
        vertical,
        horizontal,
    })
}

impl BondConfig {
    pub fn vertical_open(&self, c: usize, r: usize) -> bool {
        self.vertical[c][r]
    }
    pub fn horizontal_open(&self, g: usize, r: usize) -> bool {
        self.horizontal[g][r]
    }

    /// Force edges open (used by monotonicity tests).
    pub fn open_vertical(&mut self, c: usize, r: usize) {
        self.vertical[c][r] = true;
    }
    pub fn open_horizontal(&mut self, g: usize, r: usize) {
        self.horizontal[g][r] = true;
    }

    fn column_range(&self, rect: &Rect) -> (usize, usize) {
        let a = self.columns.partition_point(|&x| x < rect.x_lo);
        let b = self.columns.partition_point(|&x| x < rect.x_hi);
        (a, b)
    }

    /// Does an open-edge path span the rectangle in the given orientation?
    /// Horizontal means leftmost column to rightmost column inside the rect;
    /// vertical means bottom row to top row.
    pub fn crossing(&self, rect: &Rect, orientation: Orientation) -> Result<bool, BondError> {
        Ok(self.crossing_witness(rect, orientation)?.is_some())
    }

    /// Same decision, returning one witness path of (column index, row).
    pub fn crossing_witness(
        &self,
        rect: &Rect,
        orientation: Orientation,
    ) -> Result<Option<Vec<(usize, usize)>>, BondError> {
        if rect.row_hi > self.rows
            || rect.row_lo >= rect.row_hi
            || rect.x_lo < self.window.0
            || rect.x_hi > self.window.1
        {
            return Err(BondError::RectOutsideWindow(*rect));
        }
        let (c_lo, c_hi) = self.column_range(rect);
        if c_lo >= c_hi {
            return Ok(None); // no columns: nothing can cross
        }
        let width = c_hi - c_lo;
        let height = rect.row_hi - rect.row_lo;
        let idx = |c: usize, r: usize| (c - c_lo) * height + (r - rect.row_lo);
        let mut parent = vec![usize::MAX; width * height];
        let mut queue = std::collections::VecDeque::new();
        let start: Vec<(usize, usize)> = match orientation {
            Orientation::Horizontal => (rect.row_lo..rect.row_hi).map(|r| (c_lo, r)).collect(),
            Orientation::Vertical => (c_lo..c_hi).map(|c| (c, rect.row_lo)).collect(),
        };
        let is_goal = |c: usize, r: usize| match orientation {
            Orientation::Horizontal => c == c_hi - 1,
            Orientation::Vertical => r == rect.row_hi - 1,
        };
        for &(c, r) in &start {
            parent[idx(c, r)] = idx(c, r);
            if is_goal(c, r) {
                return Ok(Some(vec![(c, r)]));
            }
            queue.push_back((c, r));
        }
        while let Some((c, r)) = queue.pop_front() {
            let push = |nc: usize,
                        nr: usize,
                        parent_vec: &mut Vec<usize>,
                        q: &mut std::collections::VecDeque<(usize, usize)>| {
                if parent_vec[idx(nc, nr)] == usize::MAX {
                    parent_vec[idx(nc, nr)] = idx(c, r);
                    q.push_back((nc, nr));
                }
            };
            // up / down
            if r + 1 < rect.row_hi && self.vertical[c][r] {
                push(c, r + 1, &mut parent, &mut queue);
            }
            if r > rect.row_lo && self.vertical[c][r - 1] {
                push(c, r - 1, &mut parent, &mut queue);
            }
            // left / right
            if c + 1 < c_hi && self.horizontal[c][r] {
                push(c + 1, r, &mut parent, &mut queue);
            }
            if c > c_lo && self.horizontal[c - 1][r] {
                push(c - 1, r, &mut parent, &mut queue);
            }
        }
        // find a reached goal and reconstruct
        let goals: Vec<(usize, usize)> = match orientation {
            Orientation::Horizontal => (rect.row_lo..rect.row_hi).map(|r| (c_hi - 1, r)).collect(),
            Orientation::Vertical => (c_lo..c_hi).map(|c| (c, rect.row_hi - 1)).collect(),
        };
        for (c, r) in goals {
            if parent[idx(c, r)] == usize::MAX {
                continue;
            }
            let mut path = vec![(c, r)];
            let (mut cc, mut rr) = (c, r);
            while parent[idx(cc, rr)] != idx(cc, rr) {
                let p = parent[idx(cc, rr)];
                cc = p / height + c_lo;
                rr = p % height + rect.row_lo;
                path.push((cc, rr));
            }
            path.reverse();
            return Ok(Some(path));
        }
        Ok(None)
    }
}

/// The crossing rectangles entering the seven-event conjunction at scale k.
pub fn fk_rectangles(scales: &ScaleHierarchy, k: usize) -> (Vec<Rect>, Vec<Rect>) {
    let l = scales.lengths[k] as i64;
    let h = scales.heights[k] as usize;
    let horizontal = (-2..=0)
        .map(|i| Rect {
            x_lo: i * l,
            x_hi: (i + 2) * l,
            row_lo: h,
            row_hi: 2 * h,
        })
        .collect();
    let vertical = (-2..=1)
        .map(|i| Rect {
            x_lo: i * l,
            x_hi: (i + 1) * l,
            row_lo: 0,
            row_hi: 2 * h,
        })
        .collect();
    (horizontal, vertical)
}

/// Conjunction of the three horizontal crossings in the upper band and the
/// four floor-to-top vertical crossings around the origin.
pub fn check_fk(config: &BondConfig, scales: &ScaleHierarchy, k: usize) -> Result<bool, BondError> {
    let l = scales.lengths[k] as i64;
    let h = scales.heights[k] as usize;
    if config.rows < 2 * h || config.window.0 > -2 * l || config.window.1 < 2 * l {
        return Err(BondError::InsufficientWindow {
            x_lo: -2 * l,
            x_hi: 2 * l,
            rows: 2 * h,
        });
    }
    let (hs, vs) = fk_rectangles(scales, k);
    for r in &hs {
        if !config.crossing(r, Orientation::Horizontal)? {
            return Ok(false);
        }
    }
    for r in &vs {
        if !config.crossing(r, Orientation::Vertical)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// When the seven crossings hold, their union of witness paths blocks every
/// lattice path from the origin cell to the top row. Verified by direct
/// flood fill; used as a structural self-check.
pub fn fk_blocks_escape(
    config: &BondConfig,
    scales: &ScaleHierarchy,
    k: usize,
) -> Result<bool, BondError> {
    let (hs, vs) = fk_rectangles(scales, k);
    let mut barrier = std::collections::HashSet::new();
    for (r, o) in hs
        .iter()
        .map(|r| (r, Orientation::Horizontal))
        .chain(vs.iter().map(|r| (r, Orientation::Vertical)))
    {
        match config.crossing_witness(r, o)? {
            Some(path) => barrier.extend(path),
            None => return Ok(true), // F_k did not occur; nothing to block
        }
    }
    let h = scales.heights[k] as usize;
    let rows = 2 * h;
    // origin cell: the column holding position 0 (environments here are
    // origin-anchored), bottom row
    let origin_col = config.columns.partition_point(|&x| x < 0);
    if origin_col >= config.columns.len() {
        return Ok(true);
    }
    if barrier.contains(&(origin_col, 0)) {
        return Ok(true);
    }
    let ncols = config.columns.len();
    let mut seen = vec![false; ncols * rows];
    let idx = |c: usize, r: usize| c * rows + r;
    seen[idx(origin_col, 0)] = true;
    let mut stack = vec![(origin_col, 0usize)];
    while let Some((c, r)) = stack.pop() {
        if r + 1 == rows {
            return Ok(false); // escaped to the top row
        }
        let mut neighbours = Vec::with_capacity(4);
        if c > 0 {
            neighbours.push((c - 1, r));
        }
        if c + 1 < ncols {
            neighbours.push((c + 1, r));
        }
        if r > 0 {
            neighbours.push((c, r - 1));
        }
        if r + 1 < rows {
            neighbours.push((c, r + 1));
        }
        for (nc, nr) in neighbours {
            if !seen[idx(nc, nr)] && !barrier.contains(&(nc, nr)) {
                seen[idx(nc, nr)] = true;
                stack.push((nc, nr));
            }
        }
    }
    Ok(true)
}

/// Per-column site percolation: site (c, r) open with probability p^{phi_c}.
#[derive(Debug, Clone, Serialize)]
pub struct SiteField {
    pub p: f64,
    pub exponents: Vec<u64>,
    pub rows: usize,
    pub open: Vec<Vec<bool>>,
}

pub fn site_field_sample(
    exponents: &[u64],
    p: f64,
    rows: usize,
    seed: u64,
) -> Result<SiteField, BondError> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(BondError::BadP(p));
    }
    let stream = stream_seed(seed, tag::SITE, 0);
    let open = exponents
        .iter()
        .enumerate()
        .map(|(c, &phi)| {
            let thr = open_threshold(p.powi(phi as i32));
            (0..rows)
                .map(|r| keyed_u64(stream, ((c as u64) << 24) ^ r as u64) < thr)
                .collect()
        })
        .collect();
    Ok(SiteField {
        p,
        exponents: exponents.to_vec(),
        rows,
        open,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct QkReport {
    pub k: usize,
    pub p: f64,
    /// Average conditional failure frequency of the horizontal event.
    pub fail_h: f64,
    /// Average conditional failure frequency of the vertical event.
    pub fail_v: f64,
    /// max(fail_h, fail_v): the reported estimate.
    pub estimate: f64,
    pub stderr: f64,
    /// Worst per-environment failure frequency observed (the definition takes
    /// a supremum over environments, which sampling cannot reach).
    pub per_env_max: f64,
    /// exp(-L_k^beta)
    pub bound: f64,
    pub env_replicas: usize,
    pub config_replicas: usize,
    pub rejected_envs: usize,
}

/// Conditional Monte Carlo for the crossing-failure probabilities at scale k:
/// environments are rejection-sampled until the relevant intervals are good,
/// then bond configurations are drawn per environment.
pub fn q_k_estimate(
    law: &GapLaw,
    p: f64,
    scales: &ScaleHierarchy,
    k: usize,
    env_replicas: usize,
    config_replicas: usize,
    seed: u64,
) -> Result<QkReport, BondError> {
    if !p.is_finite() || p <= 0.0 || p >= 1.0 {
        return Err(BondError::BadP(p));
    }
    let l = scales.lengths[k] as i64;
    let h = scales.heights[k] as usize;
    if 2 * l as u128 * (2 * h as u128) > MAX_CELLS {
        return Err(BondError::ConfigTooLarge {
            columns: 2 * l as usize,
            rows: 2 * h,
        });
    }
    let window = (0i64, 2 * l);
    let rect_h = Rect {
        x_lo: 0,
        x_hi: 2 * l,
        row_lo: 0,
        row_hi: h,
    };
    let rect_v = Rect {
        x_lo: 0,
        x_hi: l,
        row_lo: 0,
        row_hi: 2 * h,
    };
    let max_rejects = 1000 * env_replicas.max(1);
    let mut rejected = 0usize;
    let mut per_env_max = 0.0f64;
    let mut env_seed = 0u64;
    // Each event conditions on its own intervals: the horizontal crossing
    // needs both base intervals good, the vertical one only the first.
    let run_event = |needs_second: bool,
                     rect: &Rect,
                     orientation: Orientation,
                     rejected: &mut usize,
                     per_env_max: &mut f64,
                     env_seed: &mut u64|
     -> Result<f64, BondError> {
        let mut fail_total = 0.0f64;
        for e in 0..env_replicas {
            let env = loop {
                let candidate = sample_renewal(
                    law,
                    RenewalMode::StationaryDelay,
                    window,
                    stream_seed(seed, tag::RENEWAL, *env_seed),
                )?;
                *env_seed += 1;
                let cls = classify_intervals(&candidate, scales, k)?;
                let good =
                    cls.bad(k, 0) == Some(false) && (!needs_second || cls.bad(k, 1) == Some(false));
                if good {
                    break candidate;
                }
                *rejected += 1;
                if *rejected > max_rejects {
                    return Err(BondError::ConditioningStalled(max_rejects));
                }
            };
            let mut failures = 0usize;
            for c in 0..config_replicas {
                let config = sample_bond_config(
                    &env,
                    p,
                    window,
                    2 * h,
                    stream_seed(seed, tag::REPLICA, (e * config_replicas + c) as u64),
                )?;
                if !config.crossing(rect, orientation)? {
                    failures += 1;
                }
            }
            let freq = failures as f64 / config_replicas as f64;
            fail_total += freq;
            *per_env_max = per_env_max.max(freq);
        }
        Ok(fail_total / env_replicas as f64)
    };
    let fail_h = run_event(
        true,
        &rect_h,
        Orientation::Horizontal,
        &mut rejected,
        &mut per_env_max,
        &mut env_seed,
    )?;
    let fail_v = run_event(
        false,
        &rect_v,
        Orientation::Vertical,
        &mut rejected,
        &mut per_env_max,
        &mut env_seed,
    )?;
    let estimate = fail_h.max(fail_v);
    let n = (env_replicas * config_replicas) as f64;
    let stderr = (estimate * (1.0 - estimate) / n).sqrt();
    let bound = (-(scales.lengths[k] as f64).powf(scales.beta)).exp();
    Ok(QkReport {
        k,
        p,
        fail_h,
        fail_v,
        estimate,
        stderr,
        per_env_max,
        bound,
        env_replicas,
        config_replicas,
        rejected_envs: rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stretched::scales::{build_scales, ScaleMode};

    fn desk_scales() -> ScaleHierarchy {
        build_scales(
            4,
            4,
            1.0,
            1,
            ScaleMode::Desk {
                gamma: 1.5,
                mu: 0.35,
            },
        )
        .unwrap()
    }

    fn line_env(window: (i64, i64)) -> RenewalEnv {
        sample_renewal(&GapLaw::constant(1), RenewalMode::OriginStarted, window, 7).unwrap()
    }

    #[test]
    fn bond_frequencies_match_probabilities() {
        let env = sample_renewal(
            &GapLaw::constant(3),
            RenewalMode::OriginStarted,
            (0, 3000),
            1,
        )
        .unwrap();
        let p = 0.9f64;
        let config = sample_bond_config(&env, p, (0, 3000), 40, 2).unwrap();
        let mut v_open = 0usize;
        let mut v_tot = 0usize;
        for col in &config.vertical {
            for &b in col {
                v_open += usize::from(b);
                v_tot += 1;
            }
        }
        let fv = v_open as f64 / v_tot as f64;
        let sv = (p * (1.0 - p) / v_tot as f64).sqrt();
        assert!((fv - p).abs() < 4.0 * sv, "vertical freq {fv}");

        let ph = p.powi(3); // every gap is 3: open probability 0.729
        let mut h_open = 0usize;
        let mut h_tot = 0usize;
        for gap in &config.horizontal {
            for &b in gap {
                h_open += usize::from(b);
                h_tot += 1;
            }
        }
        let fh = h_open as f64 / h_tot as f64;
        let sh = (ph * (1.0 - ph) / h_tot as f64).sqrt();
        assert!((fh - ph).abs() < 4.0 * sh, "horizontal freq {fh} vs {ph}");
    }

    #[test]
    fn monotone_coupling_in_p() {
        let env = line_env((0, 200));
        let lo = sample_bond_config(&env, 0.4, (0, 200), 20, 5).unwrap();
        let hi = sample_bond_config(&env, 0.8, (0, 200), 20, 5).unwrap();
        for (a, b) in lo.vertical.iter().zip(hi.vertical.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!(!x || *y);
            }
        }
        for (a, b) in lo.horizontal.iter().zip(hi.horizontal.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!(!x || *y);
            }
        }
    }

    #[test]
    fn single_cell_crossing() {
        let env = line_env((0, 2));
        let mut config = sample_bond_config(&env, 0.5, (0, 2), 2, 3).unwrap();
        let rect = Rect {
            x_lo: 0,
            x_hi: 2,
            row_lo: 0,
            row_hi: 1,
        };
        // one relevant edge: the horizontal edge between the two columns
        let open = config.horizontal_open(0, 0);
        assert_eq!(
            config.crossing(&rect, Orientation::Horizontal).unwrap(),
            open
        );
        config.open_horizontal(0, 0);
        assert!(config.crossing(&rect, Orientation::Horizontal).unwrap());
    }

    /// Exhaustive simple-path enumeration oracle on a tiny rectangle.
    fn crossing_oracle(config: &BondConfig, rect: &Rect, o: Orientation) -> bool {
        let a = config.columns.partition_point(|&x| x < rect.x_lo);
        let b = config.columns.partition_point(|&x| x < rect.x_hi);
        if a >= b {
            return false;
        }
        let cells: Vec<(usize, usize)> = (a..b)
            .flat_map(|c| (rect.row_lo..rect.row_hi).map(move |r| (c, r)))
            .collect();
        let starts: Vec<(usize, usize)> = match o {
            Orientation::Horizontal => (rect.row_lo..rect.row_hi).map(|r| (a, r)).collect(),
            Orientation::Vertical => (a..b).map(|c| (c, rect.row_lo)).collect(),
        };
        let goal = |(c, r): (usize, usize)| match o {
            Orientation::Horizontal => c == b - 1,
            Orientation::Vertical => r == rect.row_hi - 1,
        };
        let adj = |(c, r): (usize, usize), (c2, r2): (usize, usize)| -> bool {
            if c == c2 && r2 == r + 1 {
                config.vertical_open(c, r)
            } else if c == c2 && r == r2 + 1 {
                config.vertical_open(c, r2)
            } else if r == r2 && c2 == c + 1 {
                config.horizontal_open(c, r)
            } else if r == r2 && c == c2 + 1 {
                config.horizontal_open(c2, r)
            } else {
                false
            }
        };
        // DFS over all simple paths from each start
        fn dfs(
            at: (usize, usize),
            cells: &[(usize, usize)],
            visited: &mut Vec<(usize, usize)>,
            goal: &dyn Fn((usize, usize)) -> bool,
            adj: &dyn Fn((usize, usize), (usize, usize)) -> bool,
        ) -> bool {
            if goal(at) {
                return true;
            }
            for &next in cells {
                if !visited.contains(&next) && adj(at, next) {
                    visited.push(next);
                    if dfs(next, cells, visited, goal, adj) {
                        return true;
                    }
                    visited.pop();
                }
            }
            false
        }
        starts.iter().any(|&s| {
            let mut visited = vec![s];
            dfs(s, &cells, &mut visited, &goal, &adj)
        })
    }

    #[test]
    fn crossing_matches_enumeration_oracle_on_2x2() {
        let rect = Rect {
            x_lo: 0,
            x_hi: 2,
            row_lo: 0,
            row_hi: 2,
        };
        for seed in 0..100 {
            let env = line_env((0, 2));
            let config = sample_bond_config(&env, 0.5, (0, 2), 2, seed).unwrap();
            for &o in &[Orientation::Horizontal, Orientation::Vertical] {
                assert_eq!(
                    config.crossing(&rect, o).unwrap(),
                    crossing_oracle(&config, &rect, o),
                    "seed {seed} {o:?}"
                );
            }
        }
    }

    #[test]
    fn opening_edges_preserves_crossings() {
        let rect = Rect {
            x_lo: 0,
            x_hi: 6,
            row_lo: 0,
            row_hi: 5,
        };
        for seed in 0..50 {
            let env = line_env((0, 6));
            let mut config = sample_bond_config(&env, 0.55, (0, 6), 5, seed).unwrap();
            let before_h = config.crossing(&rect, Orientation::Horizontal).unwrap();
            let before_v = config.crossing(&rect, Orientation::Vertical).unwrap();
            config.open_vertical(seed as usize % 6, seed as usize % 4);
            config.open_horizontal(seed as usize % 5, (seed as usize + 2) % 5);
            if before_h {
                assert!(config.crossing(&rect, Orientation::Horizontal).unwrap());
            }
            if before_v {
                assert!(config.crossing(&rect, Orientation::Vertical).unwrap());
            }
        }
    }

    #[test]
    fn rect_outside_window_is_rejected() {
        let env = line_env((0, 10));
        let config = sample_bond_config(&env, 0.5, (0, 10), 4, 1).unwrap();
        let rect = Rect {
            x_lo: 0,
            x_hi: 10,
            row_lo: 0,
            row_hi: 9,
        };
        assert!(config.crossing(&rect, Orientation::Vertical).is_err());
    }

    #[test]
    fn fk_trivial_cases_and_recomposition() {
        let scales = desk_scales();
        let l = scales.lengths[1] as i64;
        let h = scales.heights[1] as usize;
        let env = line_env((-2 * l, 2 * l));
        // p close to 1: everything open, F_k true
        let config = sample_bond_config(&env, 0.999_999, (-2 * l, 2 * l), 2 * h, 3).unwrap();
        assert!(check_fk(&config, &scales, 1).unwrap());
        // p tiny: F_k false
        let config = sample_bond_config(&env, 1e-9, (-2 * l, 2 * l), 2 * h, 3).unwrap();
        assert!(!check_fk(&config, &scales, 1).unwrap());
        // recomposition: conjunction of the seven events computed separately
        for seed in 0..40 {
            let config = sample_bond_config(&env, 0.7, (-2 * l, 2 * l), 2 * h, seed).unwrap();
            let fk = check_fk(&config, &scales, 1).unwrap();
            let (hs, vs) = fk_rectangles(&scales, 1);
            let mut all = true;
            for r in &hs {
                all &= config.crossing(r, Orientation::Horizontal).unwrap();
            }
            for r in &vs {
                all &= config.crossing(r, Orientation::Vertical).unwrap();
            }
            assert_eq!(fk, all, "seed {seed}");
        }
    }

    #[test]
    fn fk_implies_dual_blocking() {
        let scales = desk_scales();
        let l = scales.lengths[0] as i64;
        let h = scales.heights[0] as usize;
        let mut occurrences = 0;
        for seed in 0..300 {
            let env = sample_renewal(
                &GapLaw::uniform(&[1, 2]),
                RenewalMode::OriginStarted,
                (-2 * l, 2 * l),
                seed,
            )
            .unwrap();
            let config = sample_bond_config(&env, 0.85, (-2 * l, 2 * l), 2 * h, seed).unwrap();
            if check_fk(&config, &scales, 0).unwrap() {
                occurrences += 1;
                assert!(
                    fk_blocks_escape(&config, &scales, 0).unwrap(),
                    "seed {seed}"
                );
            }
        }
        assert!(occurrences > 10, "F_k too rare to test: {occurrences}");
    }

    #[test]
    fn site_field_frequencies_and_coupling() {
        let phis = vec![1u64, 2, 3];
        let field = site_field_sample(&phis, 0.8, 20_000, 4).unwrap();
        for (c, &phi) in phis.iter().enumerate() {
            let q = 0.8f64.powi(phi as i32);
            let f = field.open[c].iter().filter(|&&b| b).count() as f64 / 20_000.0;
            let s = (q * (1.0 - q) / 20_000.0).sqrt();
            assert!((f - q).abs() < 4.0 * s, "col {c}: {f} vs {q}");
        }
        let lo = site_field_sample(&phis, 0.5, 500, 4).unwrap();
        let hi = site_field_sample(&phis, 0.9, 500, 4).unwrap();
        for (a, b) in lo.open.iter().zip(hi.open.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!(!x || *y);
            }
        }
    }

    #[test]
    fn qk_decreases_toward_zero_as_p_grows() {
        let scales = desk_scales();
        let law = GapLaw::uniform(&[1, 2]);
        let mut last = 1.1f64;
        for &p in &[0.5, 0.75, 0.95] {
            let rep = q_k_estimate(&law, p, &scales, 0, 20, 50, 8).unwrap();
            assert!(rep.estimate <= last + 0.05, "p={p}: {}", rep.estimate);
            last = rep.estimate;
        }
        let rep = q_k_estimate(&law, 0.999, &scales, 0, 10, 50, 8).unwrap();
        assert!(rep.estimate < 0.05);
    }

    #[test]
    fn qk_matches_enumeration_on_tiny_instance() {
        // L0 = 2, H0 = 2: conditioned environments on [0, 4) with intervals
        // [0,2) and [2,4) good; exact failure probability by edge enumeration.
        let scales = build_scales(
            2,
            2,
            1.0,
            0,
            ScaleMode::Desk {
                gamma: 1.5,
                mu: 0.35,
            },
        )
        .unwrap();
        let law = GapLaw::constant(1); // deterministic environment, all good
        let p = 0.6;
        let rep = q_k_estimate(&law, p, &scales, 0, 1, 60_000, 17).unwrap();

        // enumeration oracle for the vertical event on the same fixed
        // environment: columns at 0 and 1 (rect x in [0, 2)), rows 0..4
        let env = sample_renewal(&law, RenewalMode::StationaryDelay, (0, 4), 99).unwrap();
        let config = sample_bond_config(&env, p, (0, 4), 4, 0).unwrap();
        let rect_v = Rect {
            x_lo: 0,
            x_hi: 2,
            row_lo: 0,
            row_hi: 4,
        };
        let (a, b) = config.column_range(&rect_v);
        let ncols = b - a;
        let n_vert = ncols * 3;
        let n_horz = (ncols - 1) * 4;
        let mut fail_weight = 0.0f64;
        for mask in 0u32..(1 << (n_vert + n_horz)) {
            let mut cfg = config.clone();
            let mut bit = 0;
            let mut weight = 1.0f64;
            for c in 0..ncols {
                for r in 0..3 {
                    let open = mask >> bit & 1 == 1;
                    cfg.vertical[a + c][r] = open;
                    weight *= if open { p } else { 1.0 - p };
                    bit += 1;
                }
            }
            for g in 0..ncols - 1 {
                let gap = (config.columns[a + g + 1] - config.columns[a + g]) as i32;
                let pe = p.powi(gap);
                for r in 0..4 {
                    let open = mask >> bit & 1 == 1;
                    cfg.horizontal[a + g][r] = open;
                    weight *= if open { pe } else { 1.0 - pe };
                    bit += 1;
                }
            }
            if !cfg.crossing(&rect_v, Orientation::Vertical).unwrap() {
                fail_weight += weight;
            }
        }
        let sigma = (fail_weight * (1.0 - fail_weight) / 60_000.0).sqrt();
        assert!(
            (rep.fail_v - fail_weight).abs() < 4.0 * sigma.max(1e-3),
            "MC {} vs exact {fail_weight}",
            rep.fail_v
        );
    }
}
