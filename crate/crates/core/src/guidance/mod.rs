//! Closed-loop numerical predictor-corrector guidance.
//!
//! Three algorithms share the predictor, the load trigger and the density
//! filter:
//!
//! * [`Algorithm::AbamguidPlus`]: two-channel bang-bang profile with three
//!   switching times, solved by Nelder-Mead (phases 1 and 2) and the secant
//!   method (phase 3), then the constant-attitude search in phase 4.
//! * [`Algorithm::Abamguid`]: the same profile, but phase 4 holds `α_min` and
//!   only modulates the bank with Brent's method.
//! * [`Algorithm::Fnpag`]: bank-only guidance at a fixed angle of attack: a
//!   lift-up/lift-down bank switch solved by the secant method, then a
//!   constant bank from Brent's method.
//!
//! [`Algorithm::CasmOnly`] runs the constant-attitude search from the trigger on.

pub mod casm;
pub mod predictor;

use std::fmt;
use std::str::FromStr;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::aero::VehicleModel;
use crate::dynamics::{AeroSense, ControlCommand, ControlPolicy, ModelBundle, SimState};
use crate::optimal_control::{default_levels, BangBangProfile, Phase3Alpha, Phase4Policy};
use crate::rootfind::{self, BrentConfig, NmConfig, RootError, SecantConfig};

pub use casm::{casm, CasmPoint, CasmResult};
pub use predictor::{Plan, PredictStart, Prediction, Predictor, PredictorConfig, PredictorModel};

/// Standard gravity used to express the load trigger [m/s²].
pub const G0: f64 = 9.80665;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    AbamguidPlus,
    Abamguid,
    Fnpag,
    CasmOnly,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] =
        [Algorithm::AbamguidPlus, Algorithm::Abamguid, Algorithm::Fnpag, Algorithm::CasmOnly];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AbamguidPlus => "abamguid_plus",
            Algorithm::Abamguid => "abamguid",
            Algorithm::Fnpag => "fnpag",
            Algorithm::CasmOnly => "casm_only",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm '{s}' (expected abamguid_plus, abamguid, fnpag or casm_only)"))
    }
}

/// First-order filter on the ratio of sensed to modeled drag, used to scale
/// the onboard density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub gain: f64,
    /// Modeled drag below which the estimate is held [m/s²].
    pub min_drag: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { gain: 0.2, min_drag: 0.05, min_ratio: 0.1, max_ratio: 10.0 }
    }
}

impl FilterConfig {
    pub fn update(&self, estimate: f64, sensed_drag: f64, model_drag: f64) -> f64 {
        if !(model_drag >= self.min_drag) || !sensed_drag.is_finite() {
            return estimate;
        }
        let ratio = sensed_drag / model_drag;
        ((1.0 - self.gain) * estimate + self.gain * ratio).clamp(self.min_ratio, self.max_ratio)
    }
}

/// Gaussian navigation error added to the state handed to guidance (1-σ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateNoise {
    /// [m]
    pub r: f64,
    /// [m/s]
    pub v: f64,
    /// [deg]
    pub gamma_deg: f64,
}

impl Default for StateNoise {
    fn default() -> Self {
        Self { r: 100.0, v: 0.5, gamma_deg: 0.005 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    pub algorithm: Algorithm,
    /// Guidance call rate [Hz]; commands are held between calls.
    pub rate_hz: f64,
    /// Aerodynamic load that starts closed-loop guidance [g].
    pub load_trigger_g: f64,
    /// Initial switching times relative to the trigger [s].
    pub initial_offsets: [f64; 3],
    /// Initial bank switch time of the bank-only algorithm, relative to the trigger [s].
    pub fnpag_switch_offset: f64,
    /// Angle of attack flown by the bank-only algorithm [deg].
    pub fnpag_alpha: f64,
    pub phase3_alpha: Phase3Alpha,
    /// Add the `(σ_max or σ_min, α_prev)` candidate to the constant-attitude search.
    pub casm_extra_point: bool,
    /// Offset of the second secant seed from the current estimate [s].
    pub secant_seed_offset: f64,
    /// Weight on the time left before the third switch in the switching-time
    /// objective [m/s per s]. The exit-speed residual alone leaves a family of
    /// solutions; this picks the one that hands over to the closed-loop
    /// terminal phase earliest. Zero gives the bare residual objective.
    pub handover_weight: f64,
    /// Stop updating once the load falls below the trigger on the way out.
    pub freeze_on_exit: bool,
    pub predictor: PredictorConfig,
    pub nelder_mead: NmConfig,
    pub secant: SecantConfig,
    pub brent: BrentConfig,
    pub filter: FilterConfig,
    pub noise: Option<StateNoise>,
    /// Seed for the navigation noise stream.
    pub noise_seed: u64,
    /// Keep a per-call log.
    pub log: bool,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::AbamguidPlus,
            rate_hz: 2.0,
            load_trigger_g: 0.1,
            initial_offsets: [20.0, 60.0, 120.0],
            fnpag_switch_offset: 60.0,
            fnpag_alpha: -17.0,
            phase3_alpha: Phase3Alpha::Max,
            casm_extra_point: true,
            secant_seed_offset: 5.0,
            handover_weight: 0.05,
            freeze_on_exit: true,
            predictor: PredictorConfig::default(),
            nelder_mead: NmConfig::default(),
            secant: SecantConfig::default(),
            brent: BrentConfig::default(),
            filter: FilterConfig::default(),
            noise: None,
            noise_seed: 0,
            log: false,
        }
    }
}

/// Guidance phase. Phases 1-4 follow the switching times; `Exit` means the
/// commands are frozen after the pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Standby,
    One,
    Two,
    Three,
    Four,
    Exit,
}

impl Phase {
    pub fn label(self) -> u8 {
        self as u8
    }

    fn from_index(i: usize) -> Self {
        [Phase::One, Phase::Two, Phase::Three, Phase::Four][i.min(3)]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidanceStats {
    pub calls: u64,
    pub predictions: u64,
    /// Switching-time solutions that converged and were adopted.
    pub accepted_solutions: u64,
    /// Adopted solutions whose switching times were out of order.
    pub ordering_violations: u64,
    /// Solver runs that did not converge (previous solution kept).
    pub unconverged: u64,
    pub casm_calls: u64,
    pub casm_fallbacks: u64,
}

/// One row of the per-call guidance log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuidanceLogRow {
    pub t: f64,
    pub phase: u8,
    pub ts1: f64,
    pub ts2: f64,
    pub ts3: f64,
    pub alpha_cmd: f64,
    pub sigma_cmd: f64,
    #[serde(rename = "V_pred")]
    pub v_pred: f64,
    pub residual: f64,
    pub density_ratio_estimate: f64,
}

/// Guidance as a plant control policy.
#[derive(Debug, Clone)]
pub struct Guidance {
    cfg: GuidanceConfig,
    predictor: Predictor,
    onboard: ModelBundle,
    vehicle: VehicleModel,
    v_target: f64,
    levels: [(f64, f64); 4],
    sigma_sign: f64,
    phase: Phase,
    ts: [f64; 3],
    /// Current command `(α, |σ|)`.
    command: (f64, f64),
    v_pred: f64,
    density_ratio: f64,
    calls: u64,
    stats: GuidanceStats,
    rng: Option<ChaCha8Rng>,
    log: Vec<GuidanceLogRow>,
}

impl Guidance {
    /// `onboard` holds the models guidance believes in; its atmosphere
    /// perturbation and aerodynamic dispersions are ignored.
    pub fn new(cfg: GuidanceConfig, onboard: &ModelBundle, r_exit: f64, v_target: f64, initial: (f64, f64)) -> Self {
        let sigma_sign = if initial.1 < 0.0 { -1.0 } else { 1.0 };
        let predictor = Predictor::new(
            onboard.planet.clone(),
            onboard.aero.clone(),
            onboard.vehicle,
            r_exit,
            sigma_sign,
            cfg.predictor,
        );
        let onboard =
            ModelBundle { planet: onboard.planet.nominal(), aero: onboard.aero.nominal(), vehicle: onboard.vehicle };
        Self {
            levels: default_levels(&onboard.vehicle, cfg.phase3_alpha),
            vehicle: onboard.vehicle,
            predictor,
            onboard,
            v_target,
            sigma_sign,
            phase: Phase::Standby,
            ts: [f64::NAN; 3],
            command: (initial.0, initial.1.abs()),
            v_pred: f64::NAN,
            density_ratio: 1.0,
            calls: 0,
            stats: GuidanceStats::default(),
            rng: cfg.noise.map(|_| ChaCha8Rng::seed_from_u64(cfg.noise_seed)),
            log: Vec::new(),
            cfg,
        }
    }

    pub fn stats(&self) -> GuidanceStats {
        self.stats
    }

    pub fn log(&self) -> &[GuidanceLogRow] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<GuidanceLogRow> {
        std::mem::take(&mut self.log)
    }

    pub fn switching_times(&self) -> [f64; 3] {
        self.ts
    }

    pub fn current_phase(&self) -> Phase {
        self.phase
    }

    pub fn density_ratio(&self) -> f64 {
        self.density_ratio
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    fn noisy(&mut self, s: &SimState) -> SimState {
        let (Some(n), Some(rng)) = (self.cfg.noise, self.rng.as_mut()) else {
            return *s;
        };
        let mut z = || -> f64 { StandardNormal.sample(rng) };
        SimState { r: s.r + n.r * z(), v: s.v + n.v * z(), gamma: s.gamma + n.gamma_deg.to_radians() * z(), ..*s }
    }

    fn predict(&mut self, start: &PredictStart, plan: &Plan) -> f64 {
        self.stats.predictions += 1;
        self.predictor.exit_speed(start, plan) - self.v_target
    }

    fn profile(&self, ts: [f64; 3]) -> Plan {
        Plan::Profile(BangBangProfile { ts, levels: self.levels, phase4: Phase4Policy::HoldSaturated })
    }

    fn trigger(&mut self, t: f64) {
        let o = self.cfg.initial_offsets;
        match self.cfg.algorithm {
            Algorithm::AbamguidPlus | Algorithm::Abamguid => {
                self.ts = [t + o[0], t + o[1], t + o[2]];
                self.phase = Phase::One;
            }
            Algorithm::Fnpag => {
                let ts = t + self.cfg.fnpag_switch_offset;
                self.ts = [ts, ts, ts];
                self.phase = Phase::One;
            }
            Algorithm::CasmOnly => {
                self.ts = [t, t, t];
                self.phase = Phase::Four;
            }
        }
        debug!("guidance triggered at t = {t:.2} s, ts = {:?}", self.ts);
    }

    /// Adopt a switching-time solution if it converged, counting ordering
    /// violations among adopted solutions.
    fn adopt(&mut self, ts: [f64; 3], converged: bool, t: f64) {
        if !converged {
            self.stats.unconverged += 1;
            debug!("switching-time solve did not converge at t = {t:.2} s; keeping {:?}", self.ts);
            return;
        }
        self.stats.accepted_solutions += 1;
        if rootfind::ordering_violation(&ts) > 0.0 {
            self.stats.ordering_violations += 1;
        }
        self.ts = ts;
    }

    /// A switch due before the next call is taken now: flying it up to one
    /// period early leaves the following phase room to correct, while
    /// flying it late can leave that phase saturated.
    fn switch_due(&self, t: f64, ts: f64) -> bool {
        t + 1.0 / self.cfg.rate_hz > ts
    }

    fn advance_phase(&mut self, t: f64) {
        let p = Phase::from_index(self.ts.iter().take_while(|&&ts| self.switch_due(t, ts)).count());
        if p > self.phase {
            debug!("phase {:?} -> {:?} at t = {t:.2} s", self.phase, p);
            self.phase = p;
        }
    }

    fn abam_step(&mut self, start: &PredictStart) {
        let t = start.state.t;
        let w = self.cfg.handover_weight;
        let handover = |ts3: f64| 0.5 * (w * (ts3 - t).max(0.0)).powi(2);
        match self.phase {
            Phase::One => {
                let nm = self.cfg.nelder_mead;
                let x0 = self.phase_one_seed(start);
                let res = rootfind::nelder_mead(
                    |x| {
                        if nm.ordering && x[0] < t {
                            return nm.penalty * (1.0 + t - x[0]);
                        }
                        let z = self.predict(start, &self.profile([x[0], x[1], x[2]]));
                        0.5 * z * z + handover(x[2])
                    },
                    &x0,
                    &nm,
                );
                self.adopt([res.x[0], res.x[1], res.x[2]], res.converged, t);
            }
            Phase::Two => {
                let nm = self.cfg.nelder_mead;
                let [ts1, ts2, ts3] = self.ts;
                let res = rootfind::nelder_mead(
                    |x| {
                        let v = rootfind::ordering_violation(&[ts1.max(t), x[0], x[1]]);
                        if nm.ordering && v > 0.0 {
                            return nm.penalty * (1.0 + v);
                        }
                        let z = self.predict(start, &self.profile([ts1, x[0], x[1]]));
                        0.5 * z * z + handover(x[1])
                    },
                    &[ts2, ts3],
                    &nm,
                );
                self.adopt([ts1, res.x[0], res.x[1]], res.converged, t);
            }
            Phase::Three => {
                let (ts1, ts2) = (self.ts[0], self.ts[1]);
                let x0 = self.ts[2].max(t);
                let bounds = (t.max(ts2), t + self.cfg.predictor.horizon);
                let (offset, secant) = (self.cfg.secant_seed_offset, self.cfg.secant);
                let res = rootfind::newton_secant(
                    |x| self.predict(start, &self.profile([ts1, ts2, x])),
                    x0,
                    x0 + offset,
                    &secant,
                    Some(bounds),
                );
                self.secant_outcome(res, bounds, |g, x| g.adopt([ts1, ts2, x], true, t), t);
            }
            Phase::Four => {
                if self.cfg.algorithm == Algorithm::AbamguidPlus {
                    self.casm_step(start);
                } else {
                    let a = self.vehicle.alpha_min();
                    self.bank_search(start, a);
                }
                return;
            }
            Phase::Standby | Phase::Exit => return,
        }
        self.advance_phase(t);
        let (a, s) = self.levels[self.phase as usize - 1];
        self.command = (a, s);
        self.v_pred = self.v_target + self.predict(start, &self.profile(self.ts));
    }

    /// Starting simplex vertex for phase 1. When the current switching times
    /// do not reach the exit, the initial offsets stretched by 2, 3 and 4 are
    /// tried as well and the smallest residual wins: a crashing seed sends the
    /// search toward whatever delays the crash, not toward the exit.
    fn phase_one_seed(&mut self, start: &PredictStart) -> [f64; 3] {
        let t = start.state.t;
        let current = self.ts.map(|x| x.max(t));
        let plan = self.profile(current);
        if self.predictor.predict(start, &plan).exited() {
            return current;
        }
        self.stats.predictions += 1;
        let o = self.cfg.initial_offsets;
        let mut best = (current, f64::INFINITY);
        for k in [2.0, 3.0, 4.0] {
            let ts = [t + k * o[0], t + k * o[1], t + k * o[2]];
            let z = self.predict(start, &self.profile(ts)).abs();
            if z < best.1 {
                best = (ts, z);
            }
        }
        best.0
    }

    /// Shared handling of secant results on a switching time.
    fn secant_outcome(
        &mut self,
        res: Result<rootfind::SecantResult, RootError>,
        bounds: (f64, f64),
        mut accept: impl FnMut(&mut Self, f64),
        t: f64,
    ) {
        match res {
            Ok(r) if r.converged => accept(self, r.x),
            // Pinned at a bound: the saturated answer is the best available.
            Ok(r) if r.x == bounds.0 || r.x == bounds.1 => accept(self, r.x),
            Ok(_) => {
                self.stats.unconverged += 1;
                debug!("secant did not converge at t = {t:.2} s");
            }
            Err(e) => {
                self.stats.unconverged += 1;
                debug!("secant failed at t = {t:.2} s: {e}");
            }
        }
    }

    fn casm_step(&mut self, start: &PredictStart) {
        self.stats.casm_calls += 1;
        let (alpha_limits, sigma_limits) = (self.vehicle.alpha_limits, self.vehicle.sigma_limits);
        let (extra, brent) = (self.cfg.casm_extra_point, self.cfg.brent);
        let prev = self.command;
        let r = casm(
            |a, s| self.predict(start, &Plan::Constant { alpha: a, sigma: s }),
            prev,
            alpha_limits,
            sigma_limits,
            extra,
            &brent,
        );
        if r.fallback {
            self.stats.casm_fallbacks += 1;
        }
        self.command = (r.alpha, r.sigma);
        self.v_pred = self.v_target + r.f;
    }

    /// Constant bank at a fixed angle of attack by Brent's method; without a
    /// sign change the better end of the bank range is flown.
    fn bank_search(&mut self, start: &PredictStart, alpha: f64) {
        let (smin, smax) = self.vehicle.sigma_limits;
        let fa = self.predict(start, &Plan::Constant { alpha, sigma: smin });
        let fb = self.predict(start, &Plan::Constant { alpha, sigma: smax });
        let brent = self.cfg.brent;
        let (s, f) = match rootfind::brent_with_values(
            |s| self.predict(start, &Plan::Constant { alpha, sigma: s }),
            smin,
            fa,
            smax,
            fb,
            &brent,
        ) {
            Ok(r) => (r.x, r.fx),
            Err(_) => {
                if fa.abs() <= fb.abs() {
                    (smin, fa)
                } else {
                    (smax, fb)
                }
            }
        };
        self.command = (alpha, s);
        self.v_pred = self.v_target + f;
    }

    fn fnpag_step(&mut self, start: &PredictStart) {
        let t = start.state.t;
        let alpha = self.cfg.fnpag_alpha;
        let (smin, smax) = self.vehicle.sigma_limits;
        if self.phase == Phase::One {
            let x0 = self.ts[0].max(t);
            let bounds = (t, t + self.cfg.predictor.horizon);
            let plan = |x: f64| Plan::TwoStage { t_switch: x, first: (alpha, smin), second: (alpha, smax) };
            let (offset, secant) = (self.cfg.secant_seed_offset, self.cfg.secant);
            let res =
                rootfind::newton_secant(|x| self.predict(start, &plan(x)), x0, x0 + offset, &secant, Some(bounds));
            self.secant_outcome(res, bounds, |g, x| g.adopt([x, x, x], true, t), t);
            if self.switch_due(t, self.ts[0]) {
                self.phase = Phase::Two;
            } else {
                self.command = (alpha, smin);
                self.v_pred = self.v_target + self.predict(start, &plan(self.ts[0]));
                return;
            }
        }
        self.bank_search(start, alpha);
    }

    fn record(&mut self, t: f64, residual: f64) {
        if !self.cfg.log {
            return;
        }
        self.log.push(GuidanceLogRow {
            t,
            phase: self.phase.label(),
            ts1: self.ts[0],
            ts2: self.ts[1],
            ts3: self.ts[2],
            alpha_cmd: self.command.0,
            sigma_cmd: self.sigma_sign * self.command.1,
            v_pred: self.v_pred,
            residual,
            density_ratio_estimate: self.density_ratio,
        });
    }
}

impl ControlPolicy for Guidance {
    fn update(&mut self, state: &SimState, sensed: &AeroSense, control: &mut ControlCommand) {
        if state.t + 1e-9 < self.calls as f64 / self.cfg.rate_hz {
            return;
        }
        self.calls += 1;
        self.stats.calls += 1;
        let t = state.t;
        let load = sensed.lift.hypot(sensed.drag);
        let trigger = self.cfg.load_trigger_g * G0;

        match self.phase {
            Phase::Exit => return,
            Phase::Standby => {
                if load < trigger {
                    return;
                }
                self.trigger(t);
            }
            _ => {
                if self.cfg.freeze_on_exit && state.gamma > 0.0 && load < trigger {
                    debug!("guidance frozen at t = {t:.2} s");
                    self.phase = Phase::Exit;
                    self.record(t, self.v_pred - self.v_target);
                    return;
                }
            }
        }

        let est = self.noisy(state);
        let alpha_now = control.alpha_actual;
        if let Ok(model) = crate::dynamics::sense(&est, alpha_now, &self.onboard) {
            self.density_ratio = self.cfg.filter.update(self.density_ratio, sensed.drag, model.drag);
        }
        let start = PredictStart {
            state: est,
            alpha: alpha_now,
            sigma: control.sigma_actual.abs(),
            density_ratio: self.density_ratio,
        };

        match self.cfg.algorithm {
            Algorithm::AbamguidPlus | Algorithm::Abamguid => {
                self.advance_phase(t);
                self.abam_step(&start);
            }
            Algorithm::Fnpag => self.fnpag_step(&start),
            Algorithm::CasmOnly => self.casm_step(&start),
        }

        let (a, s) = self.command;
        control.alpha_cmd = a.clamp(self.vehicle.alpha_min(), self.vehicle.alpha_max());
        control.sigma_cmd = self.sigma_sign * s.clamp(self.vehicle.sigma_min(), self.vehicle.sigma_max());
        self.record(t, self.v_pred - self.v_target);
    }

    fn phase(&self) -> u8 {
        self.phase.label()
    }
}
