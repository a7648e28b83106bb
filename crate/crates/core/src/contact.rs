//! Graphical representation of the contact process on a sampled window:
//! rate-1 recovery marks per vertex, rate-lambda transmission marks per
//! open edge, and an event-driven sweep of the resulting mark diagram.
//! Ties between equal mark times are broken by carrier id; mark times are
//! almost surely distinct so the choice is irrelevant in law.

use crate::graph::{Edge, GraphWindow, Vertex};
use crate::rng::{chacha, keyed_unit, stream_seed, tag};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ContactError {
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("infection rate must be nonnegative and finite, got {0}")]
    BadRate(f64),
    #[error("thinning target rate {target} exceeds source rate {available}")]
    ThinningAboveSource { target: f64, available: f64 },
    #[error("initial vertex {0} outside the window")]
    VertexOutsideWindow(Vertex),
    #[error("representation and decomposition come from different windows")]
    WindowMismatch,
}

/// Identity of the window a representation was sampled on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepTag {
    pub graph_seed: u64,
    pub half_width: i64,
    pub edge_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphicalRep {
    pub horizon: f64,
    pub lambda: f64,
    pub seed: u64,
    pub tag: RepTag,
    /// Sorted recovery times per vertex index.
    pub recoveries: Vec<Vec<f64>>,
    /// Edge list mirrored from the window, with sorted transmission times.
    pub edges: Vec<Edge>,
    pub transmissions: Vec<Vec<f64>>,
}

fn poisson_times(rng: &mut impl Rng, rate: f64, horizon: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let mut t = 0.0f64;
    loop {
        let u: f64 = rng.gen::<f64>();
        t += -(1.0 - u).ln() / rate;
        if t >= horizon {
            return out;
        }
        out.push(t);
    }
}

/// Sample recovery and transmission marks for a window.
pub fn sample_rep(
    window: &GraphWindow,
    lambda: f64,
    horizon: f64,
    seed: u64,
) -> Result<GraphicalRep, ContactError> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(ContactError::BadHorizon(horizon));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(ContactError::BadRate(lambda));
    }
    let recoveries = (0..window.vertex_count())
        .map(|v| poisson_times(&mut chacha(seed, tag::RECOVERY, v as u64), 1.0, horizon))
        .collect();
    let transmissions = (0..window.edges.len())
        .map(|e| {
            poisson_times(
                &mut chacha(seed, tag::TRANSMISSION, e as u64),
                lambda,
                horizon,
            )
        })
        .collect();
    Ok(GraphicalRep {
        horizon,
        lambda,
        seed,
        tag: RepTag {
            graph_seed: window.params.seed,
            half_width: window.params.half_width,
            edge_count: window.edges.len(),
        },
        recoveries,
        edges: window.edges.clone(),
        transmissions,
    })
}

impl GraphicalRep {
    pub fn mark_count(&self) -> usize {
        self.recoveries.iter().map(Vec::len).sum::<usize>()
            + self.transmissions.iter().map(Vec::len).sum::<usize>()
    }

    pub fn matches_window(&self, window: &GraphWindow) -> bool {
        self.tag.graph_seed == window.params.seed
            && self.tag.half_width == window.params.half_width
            && self.tag.edge_count == window.edges.len()
    }

    /// JSON export: one (carrier, time) record per mark.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Export {
            horizon: f64,
            lambda: f64,
            seed: u64,
            marks: Vec<(String, f64)>,
        }
        let mut marks = Vec::with_capacity(self.mark_count());
        for (v, ts) in self.recoveries.iter().enumerate() {
            for &t in ts {
                marks.push((format!("v{}", v), t));
            }
        }
        for (e, ts) in self.transmissions.iter().enumerate() {
            let (i, j) = self.edges[e];
            for &t in ts {
                marks.push((format!("e{},{}", i, j), t));
            }
        }
        serde_json::to_string(&Export {
            horizon: self.horizon,
            lambda: self.lambda,
            seed: self.seed,
            marks,
        })
        .expect("rep serialization cannot fail")
    }
}

/// Keep each transmission mark independently with probability lambda'/lambda;
/// recoveries are untouched. The output is a valid representation at the
/// smaller rate, pathwise dominated by the source.
pub fn coupled_thinning(
    rep: &GraphicalRep,
    lambda_prime: f64,
    seed: u64,
) -> Result<GraphicalRep, ContactError> {
    if !lambda_prime.is_finite() || lambda_prime < 0.0 || lambda_prime > rep.lambda {
        return Err(ContactError::ThinningAboveSource {
            target: lambda_prime,
            available: rep.lambda,
        });
    }
    let keep = if rep.lambda == 0.0 {
        1.0
    } else {
        lambda_prime / rep.lambda
    };
    let transmissions = rep
        .transmissions
        .iter()
        .enumerate()
        .map(|(e, ts)| {
            let stream = stream_seed(seed, tag::THINNING, e as u64);
            ts.iter()
                .enumerate()
                .filter(|(m, _)| keyed_unit(stream, *m as u64) < keep)
                .map(|(_, &t)| t)
                .collect()
        })
        .collect();
    Ok(GraphicalRep {
        lambda: lambda_prime,
        transmissions,
        recoveries: rep.recoveries.clone(),
        edges: rep.edges.clone(),
        ..*rep
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Infected,
    Recovered,
}

#[derive(Debug, Clone, Serialize)]
pub struct InfectionTrace {
    pub initial: Vec<Vertex>,
    pub start_time: f64,
    pub horizon: f64,
    /// State changes only, time-ordered.
    pub events: Vec<(f64, Vertex, EventKind)>,
    /// None when the infected set is still nonempty at the horizon.
    pub extinction_time: Option<f64>,
}

impl InfectionTrace {
    pub fn survived(&self) -> bool {
        self.extinction_time.is_none()
    }

    /// Infected set at a query time (events strictly before or at `t`).
    pub fn infected_at(&self, t: f64) -> Vec<Vertex> {
        let mut state = std::collections::BTreeSet::new();
        for &v in &self.initial {
            state.insert(v);
        }
        for &(time, v, kind) in &self.events {
            if time > t {
                break;
            }
            match kind {
                EventKind::Infected => {
                    state.insert(v);
                }
                EventKind::Recovered => {
                    state.remove(&v);
                }
            }
        }
        state.into_iter().collect()
    }

    pub fn events_csv(&self) -> String {
        let mut out = String::from("time,vertex,event\n");
        for &(t, v, kind) in &self.events {
            let k = match kind {
                EventKind::Infected => "infected",
                EventKind::Recovered => "recovered",
            };
            out.push_str(&format!("{t},{v},{k}\n"));
        }
        out
    }
}

pub fn run_contact(
    rep: &GraphicalRep,
    window: &GraphWindow,
    initial: &[Vertex],
) -> Result<InfectionTrace, ContactError> {
    run_contact_from(rep, window, initial, 0.0)
}

/// Sweep the merged mark sequence from `start_time`, starting with `initial`
/// infected. Only marks strictly after `start_time` are consumed, so a trace
/// restarted from an intermediate state reproduces the tail of the original.
pub fn run_contact_from(
    rep: &GraphicalRep,
    window: &GraphWindow,
    initial: &[Vertex],
    start_time: f64,
) -> Result<InfectionTrace, ContactError> {
    if !rep.matches_window(window) {
        return Err(ContactError::WindowMismatch);
    }
    let vcount = window.vertex_count();
    let mut infected = vec![false; vcount];
    let mut infected_count = 0usize;
    for &v in initial {
        if v < -window.params.half_width || v > window.params.half_width {
            return Err(ContactError::VertexOutsideWindow(v));
        }
        let idx = window.vertex_index(v);
        if !infected[idx] {
            infected[idx] = true;
            infected_count += 1;
        }
    }

    let mut events = Vec::new();
    if infected_count == 0 {
        return Ok(InfectionTrace {
            initial: initial.to_vec(),
            start_time,
            horizon: rep.horizon,
            events,
            extinction_time: Some(start_time),
        });
    }

    // Lazy k-way merge over per-carrier sorted mark lists. Carrier ids:
    // vertices first, then edges; ties resolved by id.
    #[derive(PartialEq)]
    struct Head {
        time: f64,
        carrier: usize,
        cursor: usize,
    }
    impl Eq for Head {}
    impl Ord for Head {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            other
                .time
                .total_cmp(&self.time)
                .then(other.carrier.cmp(&self.carrier))
        }
    }
    impl PartialOrd for Head {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    let marks_of = |carrier: usize| -> &[f64] {
        if carrier < vcount {
            &rep.recoveries[carrier]
        } else {
            &rep.transmissions[carrier - vcount]
        }
    };
    let mut heap = std::collections::BinaryHeap::with_capacity(vcount + rep.edges.len());
    for carrier in 0..vcount + rep.edges.len() {
        let ms = marks_of(carrier);
        let cursor = ms.partition_point(|&t| t <= start_time);
        if cursor < ms.len() {
            heap.push(Head {
                time: ms[cursor],
                carrier,
                cursor,
            });
        }
    }

    let mut extinction_time = None;
    while let Some(Head {
        time,
        carrier,
        cursor,
    }) = heap.pop()
    {
        if carrier < vcount {
            if infected[carrier] {
                infected[carrier] = false;
                infected_count -= 1;
                events.push((time, window.vertex_at(carrier), EventKind::Recovered));
                if infected_count == 0 {
                    extinction_time = Some(time);
                    break;
                }
            }
        } else {
            let (a, b) = rep.edges[carrier - vcount];
            let (ia, ib) = (window.vertex_index(a), window.vertex_index(b));
            match (infected[ia], infected[ib]) {
                (true, false) => {
                    infected[ib] = true;
                    infected_count += 1;
                    events.push((time, b, EventKind::Infected));
                }
                (false, true) => {
                    infected[ia] = true;
                    infected_count += 1;
                    events.push((time, a, EventKind::Infected));
                }
                _ => {}
            }
        }
        let ms = marks_of(carrier);
        if cursor + 1 < ms.len() {
            heap.push(Head {
                time: ms[cursor + 1],
                carrier,
                cursor: cursor + 1,
            });
        }
    }

    Ok(InfectionTrace {
        initial: initial.to_vec(),
        start_time,
        horizon: rep.horizon,
        events,
        extinction_time,
    })
}

/// Brute-force infection-path search over the mark diagram, independent of
/// the event sweep. Intended for small systems; cost grows with the square
/// of the mark count.
pub mod oracle {
    use super::*;

    /// Vertices infected at time `t` according to an explicit path search:
    /// a path starts in `initial` at `start`, moves up a vertex line until a
    /// recovery mark, and may hop across any transmission mark it meets.
    pub fn infected_at(
        rep: &GraphicalRep,
        window: &GraphWindow,
        initial: &[Vertex],
        start: f64,
        t: f64,
    ) -> Vec<Vertex> {
        let vcount = window.vertex_count();
        // Segment boundaries per vertex: recovery times partition the line.
        let seg_of =
            |v: usize, time: f64| -> usize { rep.recoveries[v].partition_point(|&r| r <= time) };
        let seg_end = |v: usize, seg: usize| -> f64 {
            rep.recoveries[v].get(seg).copied().unwrap_or(f64::INFINITY)
        };
        // Earliest entry time per (vertex, segment).
        let mut best: std::collections::HashMap<(usize, usize), f64> =
            std::collections::HashMap::new();
        let mut queue = std::collections::VecDeque::new();
        for &v in initial {
            let vi = window.vertex_index(v);
            let seg = seg_of(vi, start);
            best.insert((vi, seg), start);
            queue.push_back((vi, seg));
        }
        // Collect transmission marks once, sorted by time.
        let mut marks: Vec<(f64, usize, usize)> = Vec::new();
        for (e, ts) in rep.transmissions.iter().enumerate() {
            let (a, b) = rep.edges[e];
            for &tm in ts {
                marks.push((tm, window.vertex_index(a), window.vertex_index(b)));
            }
        }
        marks.sort_by(|x, y| x.0.total_cmp(&y.0));

        while let Some((v, seg)) = queue.pop_front() {
            let enter = best[&(v, seg)];
            let leave = seg_end(v, seg);
            for &(tm, a, b) in &marks {
                if tm <= enter {
                    continue;
                }
                if tm >= leave {
                    break;
                }
                let other = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                let oseg = seg_of(other, tm);
                let entry = best.entry((other, oseg)).or_insert(f64::INFINITY);
                if tm < *entry {
                    *entry = tm;
                    queue.push_back((other, oseg));
                }
            }
        }

        let mut out = Vec::new();
        for v in 0..vcount {
            let seg = seg_of(v, t);
            if let Some(&enter) = best.get(&(v, seg)) {
                if enter <= t {
                    out.push(window.vertex_at(v));
                }
            }
        }
        out
    }
}

/// Exact occupation law of the two-vertex chain (one edge, recovery rate 1,
/// symmetric transmission rate lambda) via uniformization with a certified
/// Poisson-tail cutoff. State order: [none, first, second, both].
pub fn two_vertex_occupation(
    lambda: f64,
    t: f64,
    start: [bool; 2],
) -> Result<[f64; 4], ContactError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(ContactError::BadRate(lambda));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(ContactError::BadHorizon(t));
    }
    let start_idx = match start {
        [false, false] => 0,
        [true, false] => 1,
        [false, true] => 2,
        [true, true] => 3,
    };
    if t == 0.0 {
        let mut out = [0.0; 4];
        out[start_idx] = 1.0;
        return Ok(out);
    }
    // Generator rows (from-state): none absorbing; single states recover at 1
    // and fire the edge at lambda; both loses either vertex at rate 1.
    let uni = 2.0 + lambda;
    let p_step = |row: usize| -> [f64; 4] {
        let mut r = [0.0; 4];
        match row {
            0 => r[0] = 1.0,
            1 => {
                r[0] = 1.0 / uni;
                r[3] = lambda / uni;
                r[1] = 1.0 - (1.0 + lambda) / uni;
            }
            2 => {
                r[0] = 1.0 / uni;
                r[3] = lambda / uni;
                r[2] = 1.0 - (1.0 + lambda) / uni;
            }
            _ => {
                r[1] = 1.0 / uni;
                r[2] = 1.0 / uni;
                r[3] = 1.0 - 2.0 / uni;
            }
        }
        r
    };
    let mut dist = [0.0f64; 4];
    dist[start_idx] = 1.0;
    let mut out = [0.0f64; 4];
    let mut poisson = (-uni * t).exp();
    let mut cumulative = 0.0f64;
    let mut k = 0u32;
    while cumulative < 1.0 - 1e-14 && k < 100_000 {
        for i in 0..4 {
            out[i] += poisson * dist[i];
        }
        cumulative += poisson;
        // advance the chain one uniformized step
        let mut next = [0.0f64; 4];
        for (row, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let r = p_step(row);
            for i in 0..4 {
                next[i] += mass * r[i];
            }
        }
        dist = next;
        k += 1;
        poisson *= uni * t / k as f64;
    }
    // Remaining Poisson mass is below 1e-14; distribute nothing and let the
    // caller see probabilities summing to 1 within that tolerance.
    Ok(out)
}
