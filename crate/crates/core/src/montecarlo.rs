//! Dispersed Monte Carlo campaigns: per-run sampling, parallel execution,
//! summary statistics and CSV/JSON persistence.
//!
//! Every run draws from its own ChaCha8 stream, selected by the run index on
//! a generator seeded with the campaign's master seed, so a record depends
//! only on `(master_seed, run_index)` and never on scheduling.

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Outcome;
use crate::guidance::StateNoise;
use crate::mission::Mission;
use crate::planet::{AtmoPerturbation, DensityWave};
use crate::sim::{self, RunSpec};

/// Version of the records CSV and stats JSON layouts.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum McError {
    #[error("a campaign needs at least one run")]
    NoRuns,
    #[error("dispersion spread must be non-negative and finite: {0}")]
    InvalidSpread(&'static str),
    #[error("wavelength range must satisfy 0 < lo <= hi, got {0:?}")]
    WavelengthRange((f64, f64)),
    #[error("no records to summarize")]
    NoRecords,
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Gaussian given by its mean and 3-σ spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gaussian3 {
    pub mean: f64,
    pub three_sigma: f64,
}

impl Gaussian3 {
    pub fn fixed(mean: f64) -> Self {
        Self { mean, three_sigma: 0.0 }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.three_sigma / 3.0 * z
    }
}

/// Distribution of the true-atmosphere perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtmoDispersion {
    /// 3-σ of the natural log of the density bias.
    pub ln_bias_three_sigma: f64,
    pub n_waves: usize,
    /// 3-σ of each wave amplitude.
    pub amplitude_three_sigma: f64,
    /// Vertical wavelengths are uniform on this range [m].
    pub wavelength_range: (f64, f64),
    /// Cap on the summed absolute wave amplitudes; larger draws are scaled down.
    pub max_total_amplitude: f64,
}

impl Default for AtmoDispersion {
    fn default() -> Self {
        Self {
            ln_bias_three_sigma: 0.3,
            n_waves: 3,
            amplitude_three_sigma: 0.1,
            wavelength_range: (10e3, 60e3),
            max_total_amplitude: 0.5,
        }
    }
}

impl AtmoDispersion {
    pub fn none() -> Self {
        Self { ln_bias_three_sigma: 0.0, amplitude_three_sigma: 0.0, ..Self::default() }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, seed: u64) -> AtmoPerturbation {
        let z: f64 = StandardNormal.sample(rng);
        let bias = (self.ln_bias_three_sigma / 3.0 * z).exp();
        // The stream is consumed the same way whether or not waves are kept.
        let (lo, hi) = self.wavelength_range;
        let mut waves: Vec<DensityWave> = (0..self.n_waves)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                let u: f64 = rng.random();
                let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                DensityWave { amplitude: self.amplitude_three_sigma / 3.0 * z, wavelength: lo + u * (hi - lo), phase }
            })
            .collect();
        if self.amplitude_three_sigma == 0.0 {
            waves.clear();
        }
        let total: f64 = waves.iter().map(|w| w.amplitude.abs()).sum();
        if total > self.max_total_amplitude {
            let k = self.max_total_amplitude / total;
            waves.iter_mut().for_each(|w| w.amplitude *= k);
        }
        AtmoPerturbation { seed, bias, waves }
    }
}

/// Named entry flight-path angle spreads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntrySet {
    Baseline,
    #[default]
    Conservative,
}

impl EntrySet {
    pub fn efpa(self, mission: &Mission) -> Gaussian3 {
        let three_sigma = match self {
            EntrySet::Baseline => mission.efpa_3sigma_baseline_deg,
            EntrySet::Conservative => mission.efpa_3sigma_conservative_deg,
        };
        Gaussian3 { mean: mission.inertial_efpa_deg, three_sigma }
    }
}

impl std::str::FromStr for EntrySet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(EntrySet::Baseline),
            "conservative" => Ok(EntrySet::Conservative),
            _ => Err(format!("unknown entry set '{s}' (expected baseline or conservative)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionSpec {
    /// Inertial entry flight-path angle [deg].
    pub efpa: Gaussian3,
    pub k_cl: Gaussian3,
    pub k_cd: Gaussian3,
    pub atmosphere: AtmoDispersion,
    #[serde(default)]
    pub state_noise: Option<StateNoise>,
    pub master_seed: u64,
}

impl DispersionSpec {
    /// Entry, aerodynamic and atmospheric dispersions for an entry set.
    pub fn for_entry_set(set: EntrySet, mission: &Mission, master_seed: u64) -> Self {
        Self {
            efpa: set.efpa(mission),
            k_cl: Gaussian3 { mean: 1.0, three_sigma: 0.02 },
            k_cd: Gaussian3 { mean: 1.0, three_sigma: 0.03 },
            atmosphere: AtmoDispersion::default(),
            state_noise: None,
            master_seed,
        }
    }

    /// Every spread zero: each run is the nominal mission.
    pub fn none(mission: &Mission) -> Self {
        Self {
            efpa: Gaussian3::fixed(mission.inertial_efpa_deg),
            k_cl: Gaussian3::fixed(1.0),
            k_cd: Gaussian3::fixed(1.0),
            atmosphere: AtmoDispersion::none(),
            state_noise: None,
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), McError> {
        let spreads = [
            (self.efpa.three_sigma, "efpa"),
            (self.k_cl.three_sigma, "k_cl"),
            (self.k_cd.three_sigma, "k_cd"),
            (self.atmosphere.ln_bias_three_sigma, "atmosphere.ln_bias_three_sigma"),
            (self.atmosphere.amplitude_three_sigma, "atmosphere.amplitude_three_sigma"),
        ];
        for (s, name) in spreads {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(McError::InvalidSpread(name));
            }
        }
        let a = self.atmosphere.max_total_amplitude;
        if !(0.0..1.0).contains(&a) {
            return Err(McError::InvalidSpread("atmosphere.max_total_amplitude"));
        }
        let (lo, hi) = self.atmosphere.wavelength_range;
        if self.atmosphere.n_waves > 0 && !(lo > 0.0 && lo <= hi) {
            return Err(McError::WavelengthRange((lo, hi)));
        }
        Ok(())
    }
}

/// Inputs of one dispersed run.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersedInputs {
    pub run_id: usize,
    /// Seed derived for this run; it also seeds the navigation noise.
    pub seed: u64,
    pub efpa_deg: f64,
    pub k_cl: f64,
    pub k_cd: f64,
    pub atmosphere: AtmoPerturbation,
}

fn run_rng(master_seed: u64, run_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index as u64);
    rng
}

/// Draw the dispersed inputs of run `run_index`.
pub fn sample_run(spec: &DispersionSpec, run_index: usize) -> DispersedInputs {
    let mut rng = run_rng(spec.master_seed, run_index);
    let seed: u64 = rng.random();
    let efpa_deg = spec.efpa.sample(&mut rng);
    let k_cl = spec.k_cl.sample(&mut rng);
    let k_cd = spec.k_cd.sample(&mut rng);
    let atmo_seed: u64 = rng.random();
    let atmosphere = spec.atmosphere.sample(&mut rng, atmo_seed);
    DispersedInputs { run_id: run_index, seed, efpa_deg, k_cl, k_cd, atmosphere }
}

/// Build the run specification for one dispersed sample. The onboard models
/// stay nominal.
pub fn dispersed_spec(base: &RunSpec, inputs: &DispersedInputs, noise: Option<StateNoise>) -> RunSpec {
    let mut spec = base.clone();
    spec.efpa_deg = inputs.efpa_deg;
    spec.truth.aero = spec.truth.aero.clone().with_dispersion(inputs.k_cl, inputs.k_cd);
    spec.truth.planet.atmosphere.perturbation = inputs.atmosphere.clone();
    spec.guidance.log = false;
    spec.plant.trace_every = 0;
    if noise.is_some() {
        spec.guidance.noise = noise;
    }
    spec.guidance.noise_seed = inputs.seed;
    spec
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordOutcome {
    Exited,
    Crashed,
    Timeout,
    /// The run failed with an error or panic.
    Error,
}

impl RecordOutcome {
    pub fn name(self) -> &'static str {
        match self {
            RecordOutcome::Exited => "exited",
            RecordOutcome::Crashed => "crashed",
            RecordOutcome::Timeout => "timeout",
            RecordOutcome::Error => "error",
        }
    }
}

impl From<Outcome> for RecordOutcome {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::Exited => RecordOutcome::Exited,
            Outcome::Crashed => RecordOutcome::Crashed,
            Outcome::Timeout => RecordOutcome::Timeout,
        }
    }
}

/// One campaign row. Quantities that do not exist for the outcome are NaN.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloRecord {
    pub run_id: usize,
    pub seed: u64,
    pub efpa_deg: f64,
    pub k_cl: f64,
    pub k_cd: f64,
    pub atmo_bias: f64,
    pub atmo_seed: u64,
    pub outcome: RecordOutcome,
    pub t_final: f64,
    pub exit_altitude: f64,
    pub v_exit: f64,
    pub gamma_exit_deg: f64,
    pub delta_v: f64,
    pub period: f64,
    pub eccentricity: f64,
    pub peak_load_g: f64,
    pub pass: bool,
    pub ordering_violations: u64,
    pub accepted_solutions: u64,
    pub diagnostic: String,
}

impl MonteCarloRecord {
    fn failed(inputs: &DispersedInputs, diagnostic: String) -> Self {
        Self {
            run_id: inputs.run_id,
            seed: inputs.seed,
            efpa_deg: inputs.efpa_deg,
            k_cl: inputs.k_cl,
            k_cd: inputs.k_cd,
            atmo_bias: inputs.atmosphere.bias,
            atmo_seed: inputs.atmosphere.seed,
            outcome: RecordOutcome::Error,
            t_final: f64::NAN,
            exit_altitude: f64::NAN,
            v_exit: f64::NAN,
            gamma_exit_deg: f64::NAN,
            delta_v: f64::NAN,
            period: f64::NAN,
            eccentricity: f64::NAN,
            peak_load_g: f64::NAN,
            pass: false,
            ordering_violations: 0,
            accepted_solutions: 0,
            diagnostic,
        }
    }
}

/// Fly one dispersed sample, turning errors and panics into error records.
pub fn run_one(base: &RunSpec, spec: &DispersionSpec, run_index: usize) -> MonteCarloRecord {
    let inputs = sample_run(spec, run_index);
    let run_spec = dispersed_spec(base, &inputs, spec.state_noise);
    let result = panic::catch_unwind(AssertUnwindSafe(|| sim::run(&run_spec)));
    let out = match result {
        Ok(Ok(out)) => out,
        Ok(Err(e)) => return MonteCarloRecord::failed(&inputs, e.to_string()),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "run panicked".to_string());
            return MonteCarloRecord::failed(&inputs, format!("panic: {msg}"));
        }
    };
    let s = out.summary;
    MonteCarloRecord {
        outcome: s.outcome.into(),
        t_final: s.t_final,
        exit_altitude: s.exit_altitude,
        v_exit: s.v_exit,
        gamma_exit_deg: s.gamma_exit_deg,
        delta_v: s.delta_v.unwrap_or(f64::NAN),
        period: s.orbit.and_then(|o| o.period).unwrap_or(f64::NAN),
        eccentricity: s.orbit.map(|o| o.eccentricity).unwrap_or(f64::NAN),
        peak_load_g: s.peak_load_g,
        pass: s.pass,
        ordering_violations: s.stats.ordering_violations,
        accepted_solutions: s.stats.accepted_solutions,
        diagnostic: String::new(),
        ..MonteCarloRecord::failed(&inputs, String::new())
    }
}

/// Run `n_runs` dispersed samples on `jobs` threads (0 uses rayon's default).
/// Records come back ordered by run id.
pub fn run_campaign(
    base: &RunSpec,
    spec: &DispersionSpec,
    n_runs: usize,
    jobs: usize,
) -> Result<Vec<MonteCarloRecord>, McError> {
    if n_runs == 0 {
        return Err(McError::NoRuns);
    }
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(|| (0..n_runs).into_par_iter().map(|i| run_one(base, spec, i)).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub efpa_lo: f64,
    pub efpa_hi: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub schema_version: u32,
    pub n_runs: usize,
    pub n_pass: usize,
    pub n_fail: usize,
    /// Runs that errored; also counted in `n_fail`.
    pub n_error: usize,
    pub pass_pct: f64,
    /// ΔV statistics over passing runs [m/s]; `None` without passing runs.
    pub dv_mean: Option<f64>,
    pub dv_3sigma: Option<f64>,
    pub dv_p99: Option<f64>,
    /// EFPA interval holding the central 99.7 % of passing runs [deg].
    pub corridor: Option<Corridor>,
}

/// Nearest-rank percentile of sorted data, `p` in percent.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Percentile of sorted data by linear interpolation between order
/// statistics at positions `(n - 1) p / 100`.
pub fn interpolated_percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let pos = (p / 100.0) * (n - 1) as f64;
    let i = (pos.floor() as usize).min(n - 1);
    let j = (i + 1).min(n - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

pub fn compute_stats(records: &[MonteCarloRecord]) -> Result<CampaignStats, McError> {
    if records.is_empty() {
        return Err(McError::NoRecords);
    }
    let passing: Vec<&MonteCarloRecord> = records.iter().filter(|r| r.pass).collect();
    let n_runs = records.len();
    let n_pass = passing.len();
    let n_error = records.iter().filter(|r| r.outcome == RecordOutcome::Error).count();

    let mut dv: Vec<f64> = passing.iter().map(|r| r.delta_v).filter(|d| d.is_finite()).collect();
    dv.sort_by(f64::total_cmp);
    let (dv_mean, dv_3sigma, dv_p99) = if dv.is_empty() {
        (None, None, None)
    } else {
        let n = dv.len() as f64;
        let mean = dv.iter().sum::<f64>() / n;
        let var = if dv.len() > 1 { dv.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        (Some(mean), Some(3.0 * var.sqrt()), Some(nearest_rank(&dv, 99.0)))
    };

    let mut efpa: Vec<f64> = passing.iter().map(|r| r.efpa_deg).collect();
    efpa.sort_by(f64::total_cmp);
    let corridor = (!efpa.is_empty()).then(|| {
        let lo = interpolated_percentile(&efpa, 0.15);
        let hi = interpolated_percentile(&efpa, 99.85);
        Corridor { efpa_lo: lo, efpa_hi: hi, width: hi - lo }
    });

    Ok(CampaignStats {
        schema_version: SCHEMA_VERSION,
        n_runs,
        n_pass,
        n_fail: n_runs - n_pass,
        n_error,
        pass_pct: 100.0 * n_pass as f64 / n_runs as f64,
        dv_mean,
        dv_3sigma,
        dv_p99,
        corridor,
    })
}

/// Float formatting used in every CSV: 9 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

pub const RECORD_COLUMNS: [&str; 20] = [
    "run_id",
    "seed",
    "efpa_deg",
    "k_cl",
    "k_cd",
    "atmo_bias",
    "atmo_seed",
    "outcome",
    "t_final",
    "exit_altitude",
    "v_exit",
    "gamma_exit_deg",
    "delta_v",
    "period",
    "eccentricity",
    "peak_load_g",
    "pass",
    "ordering_violations",
    "accepted_solutions",
    "diagnostic",
];

pub fn write_records_csv<W: Write>(w: W, records: &[MonteCarloRecord]) -> Result<(), McError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORD_COLUMNS)?;
    for r in records {
        out.write_record([
            r.run_id.to_string(),
            r.seed.to_string(),
            fmt_f64(r.efpa_deg),
            fmt_f64(r.k_cl),
            fmt_f64(r.k_cd),
            fmt_f64(r.atmo_bias),
            r.atmo_seed.to_string(),
            r.outcome.name().to_string(),
            fmt_f64(r.t_final),
            fmt_f64(r.exit_altitude),
            fmt_f64(r.v_exit),
            fmt_f64(r.gamma_exit_deg),
            fmt_f64(r.delta_v),
            fmt_f64(r.period),
            fmt_f64(r.eccentricity),
            fmt_f64(r.peak_load_g),
            r.pass.to_string(),
            r.ordering_violations.to_string(),
            r.accepted_solutions.to_string(),
            r.diagnostic.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_stats_json<W: Write>(w: W, stats: &CampaignStats) -> Result<(), McError> {
    serde_json::to_writer_pretty(w, stats)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(efpa: f64, dv: f64, pass: bool) -> MonteCarloRecord {
        let inputs = DispersedInputs {
            run_id: 0,
            seed: 0,
            efpa_deg: efpa,
            k_cl: 1.0,
            k_cd: 1.0,
            atmosphere: AtmoPerturbation::none(),
        };
        MonteCarloRecord {
            outcome: RecordOutcome::Exited,
            delta_v: dv,
            pass,
            ..MonteCarloRecord::failed(&inputs, String::new())
        }
    }

    #[test]
    fn zero_spread_is_nominal() {
        let m = Mission::uranus_orbiter();
        let spec = DispersionSpec::none(&m);
        for i in 0..5 {
            let s = sample_run(&spec, i);
            assert_eq!(s.efpa_deg, m.inertial_efpa_deg);
            assert_eq!((s.k_cl, s.k_cd), (1.0, 1.0));
            assert_eq!(s.atmosphere.bias, 1.0);
            assert!(s.atmosphere.waves.is_empty());
        }
    }

    #[test]
    fn sampling_is_deterministic_per_index() {
        let m = Mission::uranus_orbiter();
        let spec = DispersionSpec::for_entry_set(EntrySet::Conservative, &m, 42);
        assert_eq!(sample_run(&spec, 7), sample_run(&spec, 7));
        assert_ne!(sample_run(&spec, 7), sample_run(&spec, 8));
        let other = DispersionSpec { master_seed: 43, ..spec };
        assert_ne!(sample_run(&spec, 7), sample_run(&other, 7));
    }

    #[test]
    fn efpa_sample_moments() {
        let m = Mission::uranus_orbiter();
        let spec = DispersionSpec::for_entry_set(EntrySet::Conservative, &m, 1);
        let xs: Vec<f64> = (0..10_000).map(|i| sample_run(&spec, i).efpa_deg).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean + 10.79).abs() < 0.01, "mean {mean}");
        let expect = 0.622 / 3.0;
        assert!((sd / expect - 1.0).abs() < 0.05, "sd {sd} vs {expect}");
    }

    #[test]
    fn waves_respect_amplitude_cap() {
        let m = Mission::uranus_orbiter();
        let mut spec = DispersionSpec::for_entry_set(EntrySet::Baseline, &m, 3);
        spec.atmosphere.amplitude_three_sigma = 3.0;
        for i in 0..200 {
            let a = sample_run(&spec, i).atmosphere;
            assert!(a.validate().is_ok());
            let total: f64 = a.waves.iter().map(|w| w.amplitude.abs()).sum();
            assert!(total <= spec.atmosphere.max_total_amplitude * (1.0 + 1e-12));
        }
    }

    #[test]
    fn stats_identical_dv() {
        let recs: Vec<_> = (0..10).map(|i| record(-10.8 + 0.01 * i as f64, 20.0, true)).collect();
        let s = compute_stats(&recs).unwrap();
        assert_eq!(s.dv_mean, Some(20.0));
        assert_eq!(s.dv_3sigma, Some(0.0));
        assert_eq!(s.dv_p99, Some(20.0));
        assert_eq!(s.pass_pct, 100.0);
    }

    #[test]
    fn stats_three_values() {
        let recs = [record(-10.8, 10.0, true), record(-10.7, 20.0, true), record(-10.9, 30.0, true)];
        let s = compute_stats(&recs).unwrap();
        assert!((s.dv_mean.unwrap() - 20.0).abs() < 1e-12);
        assert!((s.dv_3sigma.unwrap() - 30.0).abs() < 1e-12);
        assert_eq!(s.dv_p99, Some(30.0));
    }

    #[test]
    fn stats_ignore_failures() {
        let recs = [record(-10.8, 10.0, true), record(-11.5, 900.0, false), record(-10.7, f64::NAN, false)];
        let s = compute_stats(&recs).unwrap();
        assert_eq!((s.n_pass, s.n_fail), (1, 2));
        assert_eq!(s.dv_mean, Some(10.0));
        let none = compute_stats(&recs[1..]).unwrap();
        assert_eq!(none.pass_pct, 0.0);
        assert!(none.dv_mean.is_none() && none.corridor.is_none());
        assert!(compute_stats(&[]).is_err());
    }

    #[test]
    fn corridor_of_uniform_efpa() {
        // Order statistics of a regular grid on [-11.0, -10.6]: the central
        // 99.7 % spans 0.997 of the range.
        let n = 2001;
        let recs: Vec<_> = (0..n).map(|i| record(-11.0 + 0.4 * i as f64 / (n - 1) as f64, 20.0, true)).collect();
        let c = compute_stats(&recs).unwrap().corridor.unwrap();
        assert!((c.width - 0.4 * 0.997).abs() < 1e-9, "{c:?}");
        assert!((c.efpa_lo - (-11.0 + 0.4 * 0.0015)).abs() < 1e-9);
    }

    #[test]
    fn nearest_rank_examples() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&xs, 99.0), 99.0);
        assert_eq!(nearest_rank(&xs[..10], 99.0), 10.0);
        assert_eq!(nearest_rank(&[5.0], 99.0), 5.0);
    }

    #[test]
    fn csv_has_fixed_precision() {
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &[record(-10.79, 18.7, true)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), RECORD_COLUMNS.len());
        let row = lines.next().unwrap();
        assert!(row.contains("-1.07900000e1"), "{row}");
        assert!(row.contains("1.87000000e1"));
        assert!(row.contains("NaN"));
    }

    #[test]
    fn invalid_spreads_rejected() {
        let m = Mission::uranus_orbiter();
        let mut spec = DispersionSpec::for_entry_set(EntrySet::Baseline, &m, 0);
        spec.k_cd.three_sigma = -0.1;
        assert!(matches!(spec.validate(), Err(McError::InvalidSpread("k_cd"))));
    }
}
