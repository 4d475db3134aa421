use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use aerocap::aero::{AeroFit, AeroPolynomial};
use aerocap::config::Manifest;
use aerocap::guidance::Algorithm;
use aerocap::montecarlo::{self, CampaignStats, DispersionSpec, EntrySet};
use aerocap::optimal_control::{self, BranchCrossing, CostateRow};
use aerocap::sim::{self, RunSummary};
use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;

use crate::output;

fn load(config: Option<&Path>, algo: Option<Algorithm>) -> Result<Manifest> {
    let mut m = match config {
        Some(dir) => Manifest::load_dir(dir)?,
        None => Manifest::default(),
    };
    if let Some(a) = algo {
        m.guidance.algorithm = a;
    }
    Ok(m)
}

fn out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

#[derive(Serialize)]
struct SingleSummary {
    algorithm: Algorithm,
    #[serde(flatten)]
    run: RunSummary,
}

pub fn single(
    config: Option<&Path>,
    algo: Option<Algorithm>,
    efpa: Option<f64>,
    trace_every: usize,
    out: &Path,
) -> Result<ExitCode> {
    let m = load(config, algo)?;
    let mut spec = m.run_spec();
    if let Some(e) = efpa {
        spec.efpa_deg = e;
    }
    spec.plant.trace_every = trace_every;
    spec.guidance.log = true;
    out_dir(out)?;

    let start = Instant::now();
    let run = sim::run(&spec)?;
    info!("run finished in {:.2?}", start.elapsed());
    output::write_trace(&out.join("trace.csv"), &run.trace)?;
    output::write_guidance_log(&out.join("guidance_log.csv"), &run.guidance_log)?;
    let s = run.summary;
    output::write_json(&out.join("summary.json"), &SingleSummary { algorithm: spec.guidance.algorithm, run: s })?;

    let dv = s.delta_v.map_or("n/a".to_string(), |d| format!("{d:.2} m/s"));
    println!(
        "{} efpa {:.3} deg: {:?}, V_exit {:.2} m/s (target {:.2}), dV {dv}, {}",
        spec.guidance.algorithm,
        spec.efpa_deg,
        s.outcome,
        s.v_exit,
        s.v_target,
        if s.pass { "captured" } else { "not captured" },
    );
    Ok(if s.pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

pub struct CampaignArgs {
    pub n: usize,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub entry_set: Option<EntrySet>,
}

#[derive(Serialize)]
struct CampaignSummary {
    algorithm: Algorithm,
    master_seed: u64,
    #[serde(flatten)]
    stats: CampaignStats,
}

pub fn campaign(config: Option<&Path>, algo: Option<Algorithm>, args: CampaignArgs, out: &Path) -> Result<ExitCode> {
    let mut m = load(config, algo)?;
    let mut d = match m.dispersion {
        Some(d) => d,
        None => DispersionSpec::for_entry_set(args.entry_set.unwrap_or_default(), &m.mission, 0),
    };
    if let Some(set) = args.entry_set {
        d.efpa = set.efpa(&m.mission);
    }
    if let Some(seed) = args.seed {
        d.master_seed = seed;
    }
    m.dispersion = Some(d);
    out_dir(out)?;
    m.write_dir(&out.join("config"))?;

    let start = Instant::now();
    let records = montecarlo::run_campaign(&m.run_spec(), &d, args.n, args.jobs)?;
    info!("{} runs in {:.2?}", args.n, start.elapsed());
    let stats = montecarlo::compute_stats(&records)?;
    montecarlo::write_records_csv(output::create(&out.join("records.csv"))?, &records)?;
    let summary = CampaignSummary { algorithm: m.guidance.algorithm, master_seed: d.master_seed, stats };
    output::write_json(&out.join("stats.json"), &summary)?;

    let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.2}"));
    println!(
        "{}: {} runs, pass {:.1}%, dV mean {} / 3-sigma {} / p99 {} m/s, corridor width {} deg",
        m.guidance.algorithm,
        stats.n_runs,
        stats.pass_pct,
        fmt(stats.dv_mean),
        fmt(stats.dv_3sigma),
        fmt(stats.dv_p99),
        fmt(stats.corridor.map(|c| c.width)),
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SwitchingSummary {
    sigma_switch_times: Vec<f64>,
    alpha_switch_times: Vec<f64>,
    crossings: Vec<BranchCrossing>,
}

/// Linear and quadratic fits for the switching functions: a configured
/// polynomial replaces its own kind, the other keeps the default fit.
fn switching_fits(m: &Manifest) -> (AeroPolynomial, AeroPolynomial) {
    match &m.aero.fit {
        AeroFit::Linear(p) => (*p, AeroPolynomial::QUADRATIC_FIT),
        AeroFit::Quadratic(p) => (AeroPolynomial::LINEAR_FIT, *p),
        AeroFit::Table(_) => (AeroPolynomial::LINEAR_FIT, AeroPolynomial::QUADRATIC_FIT),
    }
}

pub fn verify_switching(costates: &Path, config: Option<&Path>, out: &Path) -> Result<ExitCode> {
    let m = load(config, None)?;
    let mut reader = csv::Reader::from_path(costates).with_context(|| format!("opening {}", costates.display()))?;
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<CostateRow>, _>>()
        .with_context(|| format!("reading {}", costates.display()))?;
    if rows.is_empty() {
        bail!("{} has no rows", costates.display());
    }
    if rows.windows(2).any(|w| !(w[1].t >= w[0].t)) {
        bail!("{}: time column must be non-decreasing", costates.display());
    }
    let (linear, quadratic) = switching_fits(&m);
    let report = optimal_control::analyze_switching(&rows, &linear, &quadratic, &m.vehicle);
    out_dir(out)?;
    output::write_switching(&out.join("switching.csv"), &report.rows)?;
    let summary = SwitchingSummary {
        sigma_switch_times: report.sigma_switch_times,
        alpha_switch_times: report.alpha_switch_times,
        crossings: report.crossings,
    };
    output::write_json(&out.join("switching_summary.json"), &summary)?;
    println!("sigma switches at {:?} s", summary.sigma_switch_times);
    println!("alpha switches at {:?} s", summary.alpha_switch_times);
    Ok(ExitCode::SUCCESS)
}

pub fn write_config(dir: &Path) -> Result<ExitCode> {
    Manifest::default().write_dir(dir)?;
    println!("wrote nominal configuration to {}", dir.display());
    Ok(ExitCode::SUCCESS)
}
