//! `lrcp` drives the toolkit end to end: graph sampling, decomposition,
//! contact runs, renormalization, stretched-lattice estimates, the
//! site-bond coupling check, the full pipeline, survival sweeps and the
//! acceptance suite. Every run is determined by (config, seed); results
//! land as CSV / JSON under the output directory. Exit status 0 means all
//! declared checks passed.

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use lrcp_core::cutpoints::{decompose, empirical_moment};
use lrcp_core::experiment::{pipeline_end_to_end, survival_sweep, ExperimentConfig};
use lrcp_core::graph::{GraphParams, GraphWindow};
use lrcp_core::renorm::{classify_good, detect_semicircuit, verify_confinement};
use lrcp_core::stretched::{
    coupling_inequality_check, p_k_estimate, q_k_estimate, sample_renewal, RenewalMode,
};
use lrcp_core::suite;
use lrcp_core::{contact, rng};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "lrcp",
    version,
    about = "Contact process on long-range percolation: simulation and verification"
)]
struct Cli {
    /// JSON experiment configuration; missing fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replica count override.
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a percolation window and export it as JSON.
    SampleGraph,
    /// Decompose a sampled window into cut-point intervals and families.
    Decompose,
    /// Run the contact process on a sampled window and export the trace.
    ContactRun,
    /// Classify space-time boxes and search for a blocking barrier.
    Renorm,
    /// Renewal environment, interval classification and crossing estimates.
    Stretched,
    /// Exact site-to-bond domination check over the standard grid.
    CoupleCheck,
    /// End-to-end pipeline over replicas.
    Pipeline,
    /// Survival sweep over the rate grid with coupled thinning.
    Sweep,
    /// Run the full acceptance suite and print one line per criterion.
    LemmaSuite,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            ExperimentConfig::from_json(&text).context("parsing config")?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(replicas) = cli.replicas {
        config.replicas = replicas;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.display().to_string();
    }
    Ok(config)
}

fn write(out_dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn sampled_window(config: &ExperimentConfig) -> Result<GraphWindow> {
    let params = GraphParams::new(config.s, config.half_width, config.buffer, config.seed)?;
    Ok(GraphWindow::sample(params)?)
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let config = load_config(cli)?;
    let out_dir = PathBuf::from(&config.out_dir);
    match cli.command {
        Command::SampleGraph => {
            let window = sampled_window(&config)?;
            let path = write(&out_dir, "window.json", &window.to_json())?;
            println!(
                "window [-{n}, {n}]: {e} open edges, exterior error at origin {err:.3e} -> {path}",
                n = config.half_width,
                e = window.edges.len(),
                err = window.exterior_error_at(0)?,
                path = path.display()
            );
            Ok(true)
        }
        Command::Decompose => {
            let window = sampled_window(&config)?;
            let d = decompose(&window)?;
            write(&out_dir, "decomposition.json", &d.to_json())?;
            let mut csv = String::from("statistic,power,estimate,stderr,sampleSize\n");
            let delta = 0.5;
            let eps = delta / (6.0 + 5.0 * delta);
            for (label, samples, power) in [
                ("cut_gap", &d.cut_gap_samples, 1.0 + delta),
                ("strong_gap", &d.strong_gap_samples, 1.0 + delta),
                ("interval_size", &d.interval_sizes_even(), 1.0 + delta),
                ("family_size", &d.family_sizes_even(), 1.0 + eps),
            ] {
                if samples.is_empty() {
                    continue;
                }
                let m = empirical_moment(samples, power);
                csv.push_str(&format!(
                    "{label},{},{},{},{}\n",
                    m.power, m.estimate, m.stderr, m.sample_size
                ));
            }
            let path = write(&out_dir, "moments.csv", &csv)?;
            println!(
                "decomposition: {} cut-points, {} selected strong points, certification {:.3e} -> {}",
                d.cut_points.total(),
                d.strong.len(),
                d.certification,
                path.display()
            );
            Ok(true)
        }
        Command::ContactRun => {
            let window = sampled_window(&config)?;
            let horizon = config.horizon_or_default();
            let rep = contact::sample_rep(
                &window,
                config.lambda,
                horizon,
                rng::stream_seed(config.seed, rng::tag::REPLICA, 1),
            )?;
            write(&out_dir, "rep.json", &rep.to_json())?;
            let trace = contact::run_contact(&rep, &window, &config.initial)?;
            let path = write(&out_dir, "trace.csv", &trace.events_csv())?;
            match trace.extinction_time {
                Some(t) => println!(
                    "extinct at {t:.4} ({} events) -> {}",
                    trace.events.len(),
                    path.display()
                ),
                None => println!(
                    "survived to horizon {horizon} ({} events) -> {}",
                    trace.events.len(),
                    path.display()
                ),
            }
            Ok(true)
        }
        Command::Renorm => {
            let window = sampled_window(&config)?;
            let d = decompose(&window)?;
            let t = config.block_len()?;
            let horizon = config.rows as f64 * t;
            let rep = contact::sample_rep(
                &window,
                config.lambda,
                horizon,
                rng::stream_seed(config.seed, rng::tag::REPLICA, 1),
            )?;
            let grid = classify_good(&rep, &d, t)?;
            write(&out_dir, "grid.csv", &grid.to_csv())?;
            let good_fraction = grid
                .good
                .iter()
                .flat_map(|c| c.iter())
                .filter(|&&g| g)
                .count() as f64
                / (grid.columns.len() * grid.rows) as f64;
            match detect_semicircuit(&grid) {
                Some(mut cert) => {
                    let report = verify_confinement(&window, &rep, &d, &grid, &cert)?;
                    cert.verified = report.confined;
                    let path = write(&out_dir, "certificate.json", &cert.to_json())?;
                    println!(
                        "grid {}x{} (good fraction {good_fraction:.3}): barrier of {} boxes, verified {} -> {}",
                        grid.columns.len(),
                        grid.rows,
                        cert.circuit.len(),
                        report.confined,
                        path.display()
                    );
                    Ok(report.confined)
                }
                None => {
                    write(&out_dir, "certificate.json", "null")?;
                    println!(
                        "grid {}x{} (good fraction {good_fraction:.3}): no blocking barrier found",
                        grid.columns.len(),
                        grid.rows
                    );
                    Ok(true)
                }
            }
        }
        Command::Stretched => {
            let scales = config.scales.build()?;
            let law = &config.gap_law;
            let env = sample_renewal(
                law,
                RenewalMode::OriginStarted,
                (
                    -(scales.lengths[0] as i64) * 8,
                    scales.lengths[0] as i64 * 8,
                ),
                config.seed,
            )?;
            write(&out_dir, "environment.json", &env.to_json())?;
            let mut csv = String::from("k,p,event,estimate,stderr,bound,pass\n");
            let mut all_pass = true;
            for k in 0..scales.lengths.len().min(config.scales.k_max + 1) {
                let est = p_k_estimate(law, &scales, k, config.replicas.max(1000), config.seed)?;
                all_pass &= est.pass;
                csv.push_str(&format!(
                    "{k},,bad-interval,{},{},{},{}\n",
                    est.estimate, est.stderr, est.bound, est.pass
                ));
            }
            for k in 0..scales.heights.len().min(2) {
                match q_k_estimate(
                    law,
                    config.p,
                    &scales,
                    k,
                    20,
                    config.replicas.max(100),
                    config.seed,
                ) {
                    Ok(q) => {
                        let pass = q.estimate <= q.bound + 3.0 * q.stderr;
                        csv.push_str(&format!(
                            "{k},{},crossing-failure,{},{},{},{}\n",
                            config.p, q.estimate, q.stderr, q.bound, pass
                        ));
                    }
                    Err(lrcp_core::stretched::BondError::ConfigTooLarge { columns, rows }) => {
                        println!(
                            "scale {k}: crossing estimate skipped ({columns} columns x {rows} rows exceeds the sampling budget)"
                        );
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let path = write(&out_dir, "crossing.csv", &csv)?;
            println!(
                "scales L = {:?}, H = {:?}; estimates -> {}",
                scales.lengths,
                scales.heights,
                path.display()
            );
            Ok(all_pass)
        }
        Command::CoupleCheck => {
            let mut csv =
                String::from("p_num,p_den,cols,rows,exponents,site_h,bond_h,site_v,bond_v,holds\n");
            let mut violations = 0usize;
            for &p in &[(1i64, 2i64), (4, 5), (19, 20)] {
                for m in 2..=3usize {
                    for r in 2..=3usize {
                        for assignment in 0..(1usize << (m - 1)) {
                            let phis: Vec<u64> = (0..m - 1)
                                .map(|g| if assignment >> g & 1 == 1 { 2 } else { 1 })
                                .collect();
                            let rep = coupling_inequality_check(&phis, p, m, r)?;
                            if !rep.holds() {
                                violations += 1;
                            }
                            csv.push_str(&format!(
                                "{},{},{m},{r},{:?},{},{},{},{},{}\n",
                                p.0,
                                p.1,
                                phis,
                                rep.site_horizontal,
                                rep.bond_horizontal_hi,
                                rep.site_vertical,
                                rep.bond_vertical_hi,
                                rep.holds()
                            ));
                        }
                    }
                }
            }
            let path = write(&out_dir, "couple.csv", &csv)?;
            println!(
                "site-bond domination: {violations} violations -> {}",
                path.display()
            );
            Ok(violations == 0)
        }
        Command::Pipeline => {
            let report = pipeline_end_to_end(&config)?;
            write(&out_dir, "pipeline_records.csv", &report.records_csv())?;
            let path = write(&out_dir, "pipeline.json", &report.to_json())?;
            let a = &report.aggregate;
            println!(
                "{} replicas: {} excluded, certificate frequency {:.3}, verification rate {:.3} -> {}",
                a.replicas,
                a.excluded,
                a.certificate_frequency,
                a.verification_rate,
                path.display()
            );
            Ok(a.certificates == a.verified)
        }
        Command::Sweep => {
            let report = survival_sweep(&config)?;
            write(&out_dir, "sweep_records.csv", &report.records_csv())?;
            let path = write(&out_dir, "sweep.json", &report.to_json())?;
            for (lambda, (f, se)) in report.aggregate.lambda_grid.iter().zip(
                report
                    .aggregate
                    .survival_frequency
                    .iter()
                    .zip(report.aggregate.stderr.iter()),
            ) {
                println!("lambda {lambda}: survival {f:.4} +- {se:.4}");
            }
            println!(
                "monotonicity violations: {} -> {}",
                report.aggregate.monotonicity_violations,
                path.display()
            );
            Ok(report.aggregate.monotonicity_violations == 0)
        }
        Command::LemmaSuite => {
            let reports = suite::run_all(config.seed);
            let mut all = true;
            let mut csv = String::from("id,name,passed,seconds,details\n");
            for r in &reports {
                println!("{}", r.line());
                csv.push_str(&format!(
                    "{},{},{},{:.2},\"{}\"\n",
                    r.id, r.name, r.passed, r.seconds, r.details
                ));
                all &= r.passed;
            }
            write(&out_dir, "lemma_suite.csv", &csv)?;
            if !all {
                eprintln!("one or more criteria failed");
            }
            Ok(all)
        }
    }
}
