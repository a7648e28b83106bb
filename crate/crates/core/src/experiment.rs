//! Reproducible experiment harness: configuration, derived seed streams,
//! the end-to-end pipeline (window -> decomposition -> marks -> grid ->
//! certificate -> verification), survival sweeps under coupled thinning,
//! and deterministic report emission.

use crate::contact::{coupled_thinning, run_contact, sample_rep};
use crate::cutpoints::{decompose, CutpointError, Decomposition};
use crate::graph::{GraphParams, GraphWindow};
use crate::renorm::{block_length, classify_good, confinement_of, detect_semicircuit};
use crate::rng::{stream_seed, tag};
use crate::stretched::{build_scales, GapLaw, ScaleHierarchy, ScaleMode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Contact(#[from] crate::contact::ContactError),
    #[error(transparent)]
    Renorm(#[from] crate::renorm::RenormError),
}

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub s: f64,
    pub lambda: f64,
    /// Ascending rates for survival sweeps.
    pub lambda_grid: Vec<f64>,
    /// Block length override; None means lambda^{-1/2}.
    pub t_override: Option<f64>,
    pub half_width: i64,
    pub buffer: i64,
    /// Time horizon; None means 50 / lambda.
    pub horizon: Option<f64>,
    /// Renormalization rows (blocks) per replica.
    pub rows: usize,
    pub replicas: usize,
    pub seed: u64,
    /// Initial infected set for contact runs.
    pub initial: Vec<i64>,
    pub out_dir: String,
    /// Bond / site parameter for stretched-lattice experiments.
    pub p: f64,
    pub scales: ScalesSpec,
    /// Interarrival law for renewal environments.
    pub gap_law: GapLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalesSpec {
    pub l0: u64,
    pub h0: u64,
    pub epsilon: f64,
    pub k_max: usize,
    /// Supplying both switches to desk mode.
    pub gamma: Option<f64>,
    pub mu: Option<f64>,
}

impl Default for ScalesSpec {
    fn default() -> Self {
        ScalesSpec {
            l0: 16,
            h0: 4,
            epsilon: 4.0,
            k_max: 3,
            gamma: None,
            mu: None,
        }
    }
}

impl ScalesSpec {
    pub fn build(&self) -> Result<ScaleHierarchy, crate::stretched::ScaleError> {
        let mode = match (self.gamma, self.mu) {
            (Some(gamma), Some(mu)) => ScaleMode::Desk { gamma, mu },
            _ => ScaleMode::Derived,
        };
        build_scales(self.l0, self.h0, self.epsilon, self.k_max, mode)
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            s: 3.0,
            lambda: 0.01,
            lambda_grid: vec![0.02, 0.1, 0.5, 2.0],
            t_override: None,
            half_width: 2000,
            buffer: 200,
            horizon: None,
            rows: 8,
            replicas: 100,
            seed: 1,
            initial: vec![0],
            out_dir: "out".into(),
            p: 0.9,
            scales: ScalesSpec::default(),
            gap_law: GapLaw::ShiftedGeometric {
                shift: 1,
                success: 0.5,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn block_len(&self) -> Result<f64, ExperimentError> {
        match self.t_override {
            Some(t) if t > 0.0 => Ok(t),
            Some(t) => Err(ExperimentError::BadConfig(format!("t_override {t} <= 0"))),
            None => Ok(block_length(self.lambda)?),
        }
    }

    pub fn horizon_or_default(&self) -> f64 {
        self.horizon.unwrap_or(50.0 / self.lambda.max(1e-9))
    }

    /// Seed for the window / representation of a replica; replicas are
    /// reproducible in isolation.
    pub fn window_seed(&self, replica: usize) -> u64 {
        stream_seed(self.seed, tag::REPLICA, 2 * replica as u64)
    }
    pub fn rep_seed(&self, replica: usize) -> u64 {
        stream_seed(self.seed, tag::REPLICA, 2 * replica as u64 + 1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineRecord {
    pub replica: usize,
    /// "ok" or the exclusion reason.
    pub status: String,
    pub certificate: bool,
    pub verified: bool,
    pub extinction_time: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineAggregate {
    pub replicas: usize,
    pub excluded: usize,
    pub certificates: usize,
    pub verified: usize,
    pub certificate_frequency: f64,
    pub verification_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub records: Vec<PipelineRecord>,
    pub aggregate: PipelineAggregate,
    /// Wall-clock seconds; the only nondeterministic field.
    pub wall_clock_seconds: f64,
}

pub fn recompute_pipeline_aggregate(records: &[PipelineRecord]) -> PipelineAggregate {
    let replicas = records.len();
    let excluded = records.iter().filter(|r| r.status != "ok").count();
    let certificates = records.iter().filter(|r| r.certificate).count();
    let verified = records.iter().filter(|r| r.verified).count();
    let ok = replicas - excluded;
    PipelineAggregate {
        replicas,
        excluded,
        certificates,
        verified,
        certificate_frequency: if ok > 0 {
            certificates as f64 / ok as f64
        } else {
            0.0
        },
        verification_rate: if certificates > 0 {
            verified as f64 / certificates as f64
        } else {
            1.0
        },
    }
}

fn decomposition_status(err: &CutpointError) -> String {
    match err {
        CutpointError::Uncertifiable { .. } => "excluded:uncertifiable".into(),
        CutpointError::NoStrongCutPoint { side } => {
            format!("excluded:no-strong-cut-point-{side}")
        }
        other => format!("excluded:{other}"),
    }
}

fn pipeline_replica(
    config: &ExperimentConfig,
    replica: usize,
) -> Result<PipelineRecord, ExperimentError> {
    let params = GraphParams::new(
        config.s,
        config.half_width,
        config.buffer,
        config.window_seed(replica),
    )?;
    let window = GraphWindow::sample(params)?;
    let decomposition: Decomposition = match decompose(&window) {
        Ok(d) => d,
        Err(e) => {
            return Ok(PipelineRecord {
                replica,
                status: decomposition_status(&e),
                certificate: false,
                verified: false,
                extinction_time: None,
            })
        }
    };
    let t = config.block_len()?;
    let horizon = config.rows as f64 * t;
    let rep = sample_rep(&window, config.lambda, horizon, config.rep_seed(replica))?;
    let grid = classify_good(&rep, &decomposition, t)?;
    let trace = run_contact(&rep, &window, &config.initial)?;
    let (certificate, verified) = match detect_semicircuit(&grid) {
        Some(cert) => {
            let report = confinement_of(&trace, &decomposition, &grid, &cert);
            (true, report.confined)
        }
        None => (false, false),
    };
    Ok(PipelineRecord {
        replica,
        status: "ok".into(),
        certificate,
        verified,
        extinction_time: trace.extinction_time,
    })
}

/// Per replica: sample window, decompose, draw marks, classify, detect a
/// blocking barrier and verify confinement by direct simulation.
/// Uncertifiable decompositions are counted and excluded, never dropped.
pub fn pipeline_end_to_end(config: &ExperimentConfig) -> Result<PipelineReport, ExperimentError> {
    let start = std::time::Instant::now();
    let records: Result<Vec<PipelineRecord>, ExperimentError> = (0..config.replicas)
        .into_par_iter()
        .map(|r| pipeline_replica(config, r))
        .collect();
    let records = records?;
    let aggregate = recompute_pipeline_aggregate(&records);
    Ok(PipelineReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        records,
        aggregate,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

impl PipelineReport {
    pub fn records_csv(&self) -> String {
        let mut out = String::from("replica,status,certificate,verified,extinction_time\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.replica,
                r.status,
                u8::from(r.certificate),
                u8::from(r.verified),
                r.extinction_time.map(|t| t.to_string()).unwrap_or_default()
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub replica: usize,
    /// survived-to-horizon flag per grid rate, aligned with lambda_grid.
    pub survived: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepAggregate {
    pub lambda_grid: Vec<f64>,
    pub survival_frequency: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Coupled-pair monotonicity violations (0 by construction).
    pub monotonicity_violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub records: Vec<SweepRecord>,
    pub aggregate: SweepAggregate,
    pub wall_clock_seconds: f64,
}

pub fn recompute_sweep_aggregate(grid: &[f64], records: &[SweepRecord]) -> SweepAggregate {
    let n = records.len().max(1) as f64;
    let mut survival_frequency = Vec::with_capacity(grid.len());
    let mut stderr = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let k = records.iter().filter(|r| r.survived[i]).count() as f64;
        let f = k / n;
        survival_frequency.push(f);
        stderr.push((f * (1.0 - f) / n).sqrt());
    }
    let mut violations = 0usize;
    for r in records {
        for w in r.survived.windows(2) {
            if w[0] && !w[1] {
                violations += 1;
            }
        }
    }
    SweepAggregate {
        lambda_grid: grid.to_vec(),
        survival_frequency,
        stderr,
        monotonicity_violations: violations,
    }
}

/// Survival-to-horizon frequency along an ascending rate grid, using one
/// mark set per replica thinned down the ladder so each survival curve is
/// monotone pathwise.
pub fn survival_sweep(config: &ExperimentConfig) -> Result<SweepReport, ExperimentError> {
    let start = std::time::Instant::now();
    let mut grid = config.lambda_grid.clone();
    if grid.is_empty() {
        return Err(ExperimentError::BadConfig("empty lambda grid".into()));
    }
    grid.sort_by(|a, b| a.total_cmp(b));
    let lambda_max = *grid.last().unwrap();
    let horizon = config.horizon_or_default();
    let records: Result<Vec<SweepRecord>, ExperimentError> = (0..config.replicas)
        .into_par_iter()
        .map(|replica| {
            let params = GraphParams::new(
                config.s,
                config.half_width,
                config.buffer,
                config.window_seed(replica),
            )?;
            let window = GraphWindow::sample(params)?;
            let rep_full = sample_rep(&window, lambda_max, horizon, config.rep_seed(replica))?;
            let mut survived = vec![false; grid.len()];
            let mut current = rep_full;
            for (i, &lambda) in grid.iter().enumerate().rev() {
                let thin_seed = stream_seed(
                    config.seed,
                    tag::FIELD_THIN,
                    (replica * grid.len() + i) as u64,
                );
                current = coupled_thinning(&current, lambda, thin_seed)?;
                let trace = run_contact(&current, &window, &config.initial)?;
                survived[i] = trace.survived();
            }
            Ok(SweepRecord { replica, survived })
        })
        .collect();
    let records = records?;
    let aggregate = recompute_sweep_aggregate(&grid, &records);
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        records,
        aggregate,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

impl SweepReport {
    pub fn records_csv(&self) -> String {
        let mut out = String::from("replica,lambda,survived\n");
        for r in &self.records {
            for (i, &s) in r.survived.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{}\n",
                    r.replica,
                    self.aggregate.lambda_grid[i],
                    u8::from(s)
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Pooled decomposition statistics harvested across independently seeded
/// windows, for density and moment experiments.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Harvest {
    pub windows: usize,
    pub excluded: usize,
    pub cut_gaps: Vec<u64>,
    pub strong_gaps: Vec<u64>,
    pub interval_sizes: Vec<u64>,
    pub family_sizes: Vec<u64>,
    /// Per-window certified cut-point frequency.
    pub cut_density: Vec<f64>,
    /// Largest exterior certification bound seen.
    pub max_certification: f64,
    /// Lag-1 pairs of consecutive cut gaps (within a window side).
    pub gap_pairs: Vec<(u64, u64)>,
}

pub fn harvest_windows(
    s: f64,
    half_width: i64,
    buffer: i64,
    windows: usize,
    seed: u64,
) -> Result<Harvest, ExperimentError> {
    let per_window: Vec<Result<Option<(Decomposition, f64)>, ExperimentError>> = (0..windows)
        .into_par_iter()
        .map(|w| {
            let params = GraphParams::new(
                s,
                half_width,
                buffer,
                stream_seed(seed, tag::REPLICA, w as u64),
            )?;
            let window = GraphWindow::sample(params)?;
            match decompose(&window) {
                Ok(d) => {
                    let certified_positions = 2 * (half_width - buffer) + 1;
                    let density = d.cut_points.total() as f64 / certified_positions as f64;
                    Ok(Some((d, density)))
                }
                Err(_) => Ok(None),
            }
        })
        .collect();
    let mut harvest = Harvest::default();
    for item in per_window {
        harvest.windows += 1;
        match item? {
            None => harvest.excluded += 1,
            Some((d, density)) => {
                for side in [&d.cut_points.right, &d.cut_points.left] {
                    for w in side.windows(3) {
                        // sides are stored in exploration order; gaps are the
                        // absolute steps between consecutive cut-points
                        harvest
                            .gap_pairs
                            .push(((w[1] - w[0]).unsigned_abs(), (w[2] - w[1]).unsigned_abs()));
                    }
                }
                harvest.cut_gaps.extend(&d.cut_gap_samples);
                harvest.strong_gaps.extend(&d.strong_gap_samples);
                harvest.interval_sizes.extend(d.interval_sizes_even());
                harvest.family_sizes.extend(d.family_sizes_even());
                harvest.cut_density.push(density);
                harvest.max_certification = harvest.max_certification.max(d.certification);
            }
        }
    }
    Ok(harvest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            half_width: 150,
            buffer: 30,
            replicas: 8,
            lambda: 0.05,
            rows: 5,
            ..Default::default()
        }
    }

    #[test]
    fn pipeline_reports_are_reproducible() {
        let config = tiny_config();
        let mut a = pipeline_end_to_end(&config).unwrap();
        let mut b = pipeline_end_to_end(&config).unwrap();
        a.wall_clock_seconds = 0.0;
        b.wall_clock_seconds = 0.0;
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.records.len(), 8);
    }

    #[test]
    fn pipeline_aggregate_recomputes_from_records() {
        let report = pipeline_end_to_end(&tiny_config()).unwrap();
        let again = recompute_pipeline_aggregate(&report.records);
        assert_eq!(
            serde_json::to_string(&report.aggregate).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn zero_rate_with_override_goes_trivially_extinct() {
        let config = ExperimentConfig {
            lambda: 0.0,
            t_override: Some(3.0),
            half_width: 100,
            buffer: 20,
            replicas: 6,
            rows: 4,
            ..Default::default()
        };
        let report = pipeline_end_to_end(&config).unwrap();
        for r in &report.records {
            if r.status == "ok" {
                assert!(r.extinction_time.is_some());
            }
        }
        // with no transmissions most grids are good everywhere, so barrier
        // detection should be near-universal among certified replicas
        assert!(report.aggregate.certificate_frequency > 0.8);
        assert_eq!(report.aggregate.verified, report.aggregate.certificates);
    }

    #[test]
    fn sweep_is_monotone_by_construction() {
        let config = ExperimentConfig {
            half_width: 60,
            buffer: 10,
            replicas: 40,
            lambda_grid: vec![0.05, 0.3, 1.0],
            horizon: Some(12.0),
            ..Default::default()
        };
        let report = survival_sweep(&config).unwrap();
        assert_eq!(report.aggregate.monotonicity_violations, 0);
        let f = &report.aggregate.survival_frequency;
        assert!(f[0] <= f[1] + 1e-12 && f[1] <= f[2] + 1e-12);
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = tiny_config();
        let back = ExperimentConfig::from_json(&config.to_json()).unwrap();
        assert_eq!(config.to_json(), back.to_json());
        // defaults fill missing fields
        let partial = ExperimentConfig::from_json("{\"s\": 2.5}").unwrap();
        assert_eq!(partial.s, 2.5);
        assert_eq!(partial.rows, ExperimentConfig::default().rows);
    }

    #[test]
    fn harvest_collects_samples() {
        let h = harvest_windows(3.0, 200, 40, 6, 9).unwrap();
        assert!(h.windows == 6);
        assert!(!h.cut_gaps.is_empty());
        assert!(!h.family_sizes.is_empty());
        assert!(h.max_certification > 0.0 && h.max_certification < 1.0);
    }
}
