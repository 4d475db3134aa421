//! Single closed-loop aerocapture run: entry state, guided plant propagation
//! to the exit interface, and the capture figures of merit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    self, AeroSense, ControlCommand, ControlPolicy, DynamicsError, ModelBundle, Outcome, PropagateOptions, SimState,
    TraceRow,
};
use crate::guidance::{Guidance, GuidanceConfig, GuidanceLogRow, GuidanceStats, G0};
use crate::mission::Mission;
use crate::orbits::{self, ExitOrbit, OrbitError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Integration step [s].
    pub dt: f64,
    /// Crash altitude [m].
    pub h_floor: f64,
    /// Flight-time limit [s].
    pub t_max: f64,
    /// Trace decimation; 0 disables the trace.
    pub trace_every: usize,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self { dt: 0.01, h_floor: 0.0, t_max: 5000.0, trace_every: 0 }
    }
}

/// Everything needed for one run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    /// Models the plant flies through (perturbed atmosphere, dispersed aero).
    pub truth: ModelBundle,
    /// Models guidance believes in.
    pub onboard: ModelBundle,
    pub mission: Mission,
    pub guidance: GuidanceConfig,
    pub plant: PlantConfig,
    /// Inertial entry flight-path angle [deg].
    pub efpa_deg: f64,
}

impl RunSpec {
    pub fn nominal(mission: Mission, models: ModelBundle, guidance: GuidanceConfig) -> Self {
        Self {
            onboard: models.clone(),
            truth: models,
            efpa_deg: mission.inertial_efpa_deg,
            mission,
            guidance,
            plant: PlantConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub efpa_deg: f64,
    /// Time of exit, crash or timeout [s].
    pub t_final: f64,
    pub exit_altitude: f64,
    /// Inertial speed at exit [m/s].
    pub v_exit: f64,
    /// Inertial flight-path angle at exit [deg].
    pub gamma_exit_deg: f64,
    pub v_target: f64,
    pub orbit: Option<ExitOrbit>,
    /// Total correction ΔV to the target orbit; `None` when not captured into an ellipse.
    pub delta_v: Option<f64>,
    pub pass: bool,
    pub peak_load_g: f64,
    pub stats: GuidanceStats,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: Vec<TraceRow>,
    pub guidance_log: Vec<GuidanceLogRow>,
}

/// Records the peak sensed load around another policy.
struct PeakLoad<'a> {
    inner: &'a mut dyn ControlPolicy,
    peak: f64,
}

impl ControlPolicy for PeakLoad<'_> {
    fn update(&mut self, state: &SimState, sensed: &AeroSense, control: &mut ControlCommand) {
        self.peak = self.peak.max(sensed.lift.hypot(sensed.drag));
        self.inner.update(state, sensed, control);
    }

    fn phase(&self) -> u8 {
        self.inner.phase()
    }
}

/// Fly one guided trajectory.
pub fn run(spec: &RunSpec) -> Result<RunOutput, SimError> {
    let planet = &spec.truth.planet;
    let target = spec.mission.target(planet)?;
    let v_target = orbits::exit_velocity_target(&target, planet.mu);
    let initial = (spec.mission.initial_alpha_deg, spec.mission.initial_sigma_deg);
    let mut guidance = Guidance::new(spec.guidance, &spec.onboard, target.r_exit, v_target, initial);
    let entry = spec.mission.entry_state(planet, spec.efpa_deg);
    let control = ControlCommand::settled(initial.0, initial.1);
    let opts = PropagateOptions {
        dt: spec.plant.dt,
        r_exit: target.r_exit,
        h_floor: spec.plant.h_floor,
        t_max: spec.plant.t_max,
        trace_every: spec.plant.trace_every,
    };
    let mut policy = PeakLoad { inner: &mut guidance, peak: 0.0 };
    let prop = dynamics::propagate_to_exit(&entry, control, &mut policy, &spec.truth, &opts)?;
    let peak = policy.peak;
    let summary = summarize(spec, &prop.state, prop.outcome, &target, v_target, peak / G0, guidance.stats());
    Ok(RunOutput { summary, trace: prop.trace, guidance_log: guidance.take_log() })
}

fn summarize(
    spec: &RunSpec,
    s: &SimState,
    outcome: Outcome,
    target: &orbits::TargetOrbit,
    v_target: f64,
    peak_load_g: f64,
    stats: GuidanceStats,
) -> RunSummary {
    let planet = &spec.truth.planet;
    let (v, gamma, _) = orbits::inertial_from_relative(s, planet.omega);
    let (orbit, delta_v, pass) = if outcome == Outcome::Exited {
        let window = spec.mission.window();
        let o = orbits::period_and_classify(s.r, v, gamma, planet.mu, &window);
        let dv = match (o.apoapsis, o.semi_major_axis) {
            (Some(ra), Some(a)) => orbits::delta_v(ra, a, target, planet.mu).ok(),
            _ => None,
        };
        (Some(o), dv, o.pass)
    } else {
        (None, None, false)
    };
    RunSummary {
        outcome,
        efpa_deg: spec.efpa_deg,
        t_final: s.t,
        exit_altitude: planet.altitude(s.r),
        v_exit: v,
        gamma_exit_deg: gamma.to_degrees(),
        v_target,
        orbit,
        delta_v,
        pass,
        peak_load_g,
        stats,
    }
}
