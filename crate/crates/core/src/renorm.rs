//! One-step space-time renormalization: cut the time axis into blocks of
//! length T, call a box (interval index, block) good when every vertex of
//! its interval recovers inside the block and none of its assigned edges
//! fires there, and look for a barrier of good boxes whose enclosed region
//! traps the infection started at the origin.

use crate::contact::{run_contact, ContactError, GraphicalRep, InfectionTrace};
use crate::cutpoints::Decomposition;
use crate::graph::GraphWindow;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RenormError {
    #[error("block length requires lambda > 0")]
    ZeroRate,
    #[error("block length must be positive, got {0}")]
    BadBlockLength(f64),
    #[error("edge count {edges} below vertex count {vertices} violates the family invariant")]
    FewerEdgesThanVertices { vertices: u64, edges: u64 },
    #[error("representation horizon {horizon} shorter than one block {t}")]
    HorizonTooShort { horizon: f64, t: f64 },
    #[error("representation does not match the decomposition's window")]
    WindowMismatch,
    #[error(transparent)]
    Contact(#[from] ContactError),
}

/// T = lambda^{-1/2}.
pub fn block_length(lambda: f64) -> Result<f64, RenormError> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(RenormError::ZeroRate);
    }
    Ok(1.0 / lambda.sqrt())
}

/// p = (1 - e^{-T}) e^{-1/T}.
pub fn p_of_t(t: f64) -> Result<f64, RenormError> {
    if !t.is_finite() || t <= 0.0 {
        return Err(RenormError::BadBlockLength(t));
    }
    Ok((-(-t).exp_m1()) * (-1.0 / t).exp())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GoodBoxLaw {
    /// (1 - e^{-T})^{nV} e^{-lambda T nE}
    pub closed_form: f64,
    /// p(T)^{nE}
    pub site_bound: f64,
}

impl GoodBoxLaw {
    /// closed form >= bound. At the canonical block length the two sides
    /// coincide exactly when the counts match, so equality is accepted up
    /// to a few units in the last place of independent rounding.
    pub fn dominates(&self) -> bool {
        self.closed_form >= self.site_bound * (1.0 - 1e-12)
    }
}

/// Closed-form good-box probability and the per-column site bound. At the
/// canonical block length T = lambda^{-1/2} the closed form dominates the
/// bound; this is checked when applicable.
pub fn good_probability_closed_form(
    n_vertices: u64,
    n_edges: u64,
    lambda: f64,
    t: f64,
) -> Result<GoodBoxLaw, RenormError> {
    if n_vertices < 1 || n_edges < n_vertices {
        return Err(RenormError::FewerEdgesThanVertices {
            vertices: n_vertices,
            edges: n_edges,
        });
    }
    if !t.is_finite() || t <= 0.0 {
        return Err(RenormError::BadBlockLength(t));
    }
    let closed_form =
        (-(-t).exp_m1()).powi(n_vertices as i32) * (-lambda * t * n_edges as f64).exp();
    let site_bound = p_of_t(t)?.powi(n_edges as i32);
    let law = GoodBoxLaw {
        closed_form,
        site_bound,
    };
    if (t - 1.0 / lambda.sqrt()).abs() < 1e-12 * t {
        debug_assert!(law.dominates());
    }
    Ok(law)
}

#[derive(Debug, Clone, Serialize)]
pub struct RenormGrid {
    pub block_len: f64,
    pub rows: usize,
    /// Interval indices (columns), ascending.
    pub columns: Vec<i64>,
    /// good[c][j] for column index c, block j.
    pub good: Vec<Vec<bool>>,
    /// Per-column lower bound p^{|E_k|}.
    pub p_column: Vec<f64>,
}

impl RenormGrid {
    pub fn col_of(&self, k: i64) -> Option<usize> {
        self.columns.binary_search(&k).ok()
    }

    pub fn is_good(&self, k: i64, j: usize) -> bool {
        self.col_of(k)
            .map(|c| j < self.rows && self.good[c][j])
            .unwrap_or(false)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,j,good\n");
        for (c, &k) in self.columns.iter().enumerate() {
            for j in 0..self.rows {
                out.push_str(&format!("{k},{j},{}\n", u8::from(self.good[c][j])));
            }
        }
        out
    }
}

/// Classify every box of the decomposition against the representation.
pub fn classify_good(
    rep: &GraphicalRep,
    decomposition: &Decomposition,
    t: f64,
) -> Result<RenormGrid, RenormError> {
    if !t.is_finite() || t <= 0.0 {
        return Err(RenormError::BadBlockLength(t));
    }
    if rep.horizon < t {
        return Err(RenormError::HorizonTooShort {
            horizon: rep.horizon,
            t,
        });
    }
    let rows = (rep.horizon / t).floor() as usize;
    let half = rep.tag.half_width;
    let p = p_of_t(t)?;

    let mut columns = Vec::new();
    let mut good = Vec::new();
    let mut p_column = Vec::new();
    for (k, interval) in &decomposition.intervals {
        let family = &decomposition.edge_families[k];
        let mut ok = vec![true; rows];
        // every vertex needs a recovery mark in each block
        for v in interval.lo..=interval.hi {
            let vi = (v + half) as usize;
            if vi >= rep.recoveries.len() {
                return Err(RenormError::WindowMismatch);
            }
            let mut seen = vec![false; rows];
            for &time in &rep.recoveries[vi] {
                let j = (time / t) as usize;
                if j < rows {
                    seen[j] = true;
                }
            }
            for j in 0..rows {
                ok[j] &= seen[j];
            }
        }
        // no transmission mark on any family edge in the block
        for e in family {
            let ei = rep
                .edges
                .binary_search(e)
                .map_err(|_| RenormError::WindowMismatch)?;
            for &time in &rep.transmissions[ei] {
                let j = (time / t) as usize;
                if j < rows {
                    ok[j] = false;
                }
            }
        }
        columns.push(*k);
        good.push(ok);
        p_column.push(p.powi(family.len() as i32));
    }
    Ok(RenormGrid {
        block_len: t,
        rows,
        columns,
        good,
        p_column,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtinctionCertificate {
    /// Ordered 4-adjacent path of good boxes from a bottom box left of the
    /// origin column to a bottom box right of it.
    pub circuit: Vec<(i64, usize)>,
    /// Boxes reachable from the origin box without crossing the circuit,
    /// origin box included.
    pub enclosed: Vec<(i64, usize)>,
    pub verified: bool,
}

impl ExtinctionCertificate {
    fn region(&self) -> impl Iterator<Item = &(i64, usize)> {
        self.circuit.iter().chain(self.enclosed.iter())
    }

    /// Column range covered by circuit plus enclosure.
    pub fn column_span(&self) -> (i64, i64) {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for &(k, _) in self.region() {
            lo = lo.min(k);
            hi = hi.max(k);
        }
        (lo, hi)
    }

    /// First block index above every region box.
    pub fn top_row(&self) -> usize {
        self.region().map(|&(_, j)| j).max().unwrap_or(0) + 1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("certificate serialization cannot fail")
    }
}

/// Breadth-first search in the good-box graph for a barrier from the bottom
/// boundary left of column 0 to the bottom boundary right of it; the first
/// barrier in deterministic scan order is returned together with the region
/// it traps around the origin box.
pub fn detect_semicircuit(grid: &RenormGrid) -> Option<ExtinctionCertificate> {
    let ncols = grid.columns.len();
    let rows = grid.rows;
    if ncols == 0 || rows == 0 {
        return None;
    }
    let origin_col = grid.col_of(0)?;

    let idx = |c: usize, j: usize| c * rows + j;
    let mut parent: Vec<usize> = vec![usize::MAX; ncols * rows];
    let mut queue = std::collections::VecDeque::new();
    for c in 0..ncols {
        if grid.columns[c] < 0 && grid.good[c][0] {
            parent[idx(c, 0)] = idx(c, 0);
            queue.push_back((c, 0usize));
        }
    }
    let mut hit: Option<(usize, usize)> = None;
    'bfs: while let Some((c, j)) = queue.pop_front() {
        // fixed neighbour order keeps the scan deterministic
        let neighbours = [
            (c.wrapping_sub(1), j),
            (c + 1, j),
            (c, j.wrapping_sub(1)),
            (c, j + 1),
        ];
        for &(nc, nj) in &neighbours {
            if nc >= ncols || nj >= rows || !grid.good[nc][nj] {
                continue;
            }
            if parent[idx(nc, nj)] != usize::MAX {
                continue;
            }
            parent[idx(nc, nj)] = idx(c, j);
            if nj == 0 && grid.columns[nc] > 0 {
                hit = Some((nc, nj));
                break 'bfs;
            }
            queue.push_back((nc, nj));
        }
    }
    let (mut c, mut j) = hit?;
    let mut circuit = Vec::new();
    loop {
        circuit.push((grid.columns[c], j));
        let p = parent[idx(c, j)];
        if p == idx(c, j) {
            break;
        }
        c = p / rows;
        j = p % rows;
    }
    circuit.reverse();

    // Flood fill from the origin box through non-barrier boxes.
    let barrier: std::collections::HashSet<(usize, usize)> = circuit
        .iter()
        .map(|&(k, j)| (grid.col_of(k).unwrap(), j))
        .collect();
    let mut enclosed = vec![(0i64, 0usize)];
    if !barrier.contains(&(origin_col, 0)) {
        let mut seen = vec![false; ncols * rows];
        seen[idx(origin_col, 0)] = true;
        let mut stack = vec![(origin_col, 0usize)];
        while let Some((c, j)) = stack.pop() {
            for &(nc, nj) in &[
                (c.wrapping_sub(1), j),
                (c + 1, j),
                (c, j.wrapping_sub(1)),
                (c, j + 1),
            ] {
                if j == 0 && nj == usize::MAX {
                    continue; // floor
                }
                if nc >= ncols || nj >= rows {
                    // a barrier between two bottom boxes on opposite sides of
                    // the origin seals the region; reaching the grid edge
                    // means the invariant broke, so refuse to certify
                    debug_assert!(false, "flood fill escaped the barrier");
                    return None;
                }
                if seen[idx(nc, nj)] || barrier.contains(&(nc, nj)) {
                    continue;
                }
                seen[idx(nc, nj)] = true;
                stack.push((nc, nj));
            }
        }
        enclosed = (0..ncols)
            .flat_map(|c| (0..rows).map(move |j| (c, j)))
            .filter(|&(c, j)| seen[idx(c, j)])
            .map(|(c, j)| (grid.columns[c], j))
            .collect();
    }

    Some(ExtinctionCertificate {
        circuit,
        enclosed,
        verified: false,
    })
}

/// Thin the good flags into an independent site field with per-column
/// probability p^{|E_k|}. Requires the closed-form box probability to
/// dominate the column bound (which holds at the canonical block length);
/// by construction an open field site implies a good box.
pub fn dominated_field(
    grid: &RenormGrid,
    decomposition: &Decomposition,
    lambda: f64,
    seed: u64,
) -> Result<Vec<Vec<bool>>, RenormError> {
    use crate::rng::{keyed_unit, stream_seed, tag};
    let stream = stream_seed(seed, tag::FIELD_THIN, 0);
    let mut field = Vec::with_capacity(grid.columns.len());
    for (c, &k) in grid.columns.iter().enumerate() {
        let nv = decomposition.intervals[&k].len();
        let ne = decomposition.edge_families[&k].len() as u64;
        let law = good_probability_closed_form(nv, ne, lambda, grid.block_len)?;
        let keep = (law.site_bound / law.closed_form).min(1.0);
        debug_assert!(law.dominates());
        let col = (0..grid.rows)
            .map(|j| grid.good[c][j] && keyed_unit(stream, ((c as u64) << 24) ^ j as u64) < keep)
            .collect();
        field.push(col);
    }
    Ok(field)
}

/// Re-derive every good flag from the marks; true when the grid is untampered.
pub fn recheck_grid(
    rep: &GraphicalRep,
    decomposition: &Decomposition,
    grid: &RenormGrid,
) -> Result<bool, RenormError> {
    let fresh = classify_good(rep, decomposition, grid.block_len)?;
    Ok(fresh.columns == grid.columns && fresh.good == grid.good && fresh.rows == grid.rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfinementReport {
    pub confined: bool,
    pub extinction_time: Option<f64>,
    pub deadline: f64,
    pub allowed_vertices: (i64, i64),
    pub escaped_vertex: Option<i64>,
}

/// Run the infection from the origin and verify it never leaves the spatial
/// span of the certificate region and dies before the region's top.
pub fn verify_confinement(
    window: &GraphWindow,
    rep: &GraphicalRep,
    decomposition: &Decomposition,
    grid: &RenormGrid,
    certificate: &ExtinctionCertificate,
) -> Result<ConfinementReport, RenormError> {
    if !rep.matches_window(window) {
        return Err(RenormError::WindowMismatch);
    }
    let trace = run_contact(rep, window, &[0])?;
    Ok(confinement_of(&trace, decomposition, grid, certificate))
}

/// Judge an existing trace against a certificate.
pub fn confinement_of(
    trace: &InfectionTrace,
    decomposition: &Decomposition,
    grid: &RenormGrid,
    certificate: &ExtinctionCertificate,
) -> ConfinementReport {
    let (klo, khi) = certificate.column_span();
    let lo = decomposition.intervals[&klo].lo;
    let hi = decomposition.intervals[&khi].hi;
    let deadline = certificate.top_row() as f64 * grid.block_len;

    let mut escaped_vertex = None;
    for &(_, v, _) in &trace.events {
        if v < lo || v > hi {
            escaped_vertex = Some(v);
            break;
        }
    }
    let in_time = matches!(trace.extinction_time, Some(t) if t < deadline);
    ConfinementReport {
        confined: escaped_vertex.is_none() && in_time,
        extinction_time: trace.extinction_time,
        deadline,
        allowed_vertices: (lo, hi),
        escaped_vertex,
    }
}
