//! Onboard trajectory predictor: propagates a candidate control plan from the
//! current state to the exit interface with the nominal onboard models.

use serde::{Deserialize, Serialize};

use crate::aero::{AeroModel, VehicleModel};
use crate::dynamics::{self, LonState, SimState};
use crate::optimal_control::BangBangProfile;
use crate::orbits;
use crate::planet::PlanetModel;

/// Equations used by the predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorModel {
    /// Rotating oblate-planet equations with lateral states propagated.
    #[default]
    Full,
    /// `(r, V, γ)` only, spherical gravity, no rotation; lateral states are
    /// frozen at their current values for the inertial conversion at exit.
    Longitudinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub model: PredictorModel,
    /// Integration step inside the sensible atmosphere [s].
    pub dt: f64,
    /// Step used once drag falls below `coast_drag` [s].
    pub coast_dt: f64,
    /// Drag acceleration below which the coarse step is used [m/s²].
    pub coast_drag: f64,
    /// Predicted flight longer than this counts as not exiting [s].
    pub horizon: f64,
    /// Altitude treated as ground impact [m].
    pub h_floor: f64,
    /// Apply the actuator rate limits to the predicted attitude.
    pub rate_limits: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            model: PredictorModel::Full,
            dt: 2.0,
            coast_dt: 10.0,
            coast_drag: 1e-4,
            horizon: 3000.0,
            h_floor: 0.0,
            rate_limits: true,
        }
    }
}

/// Control history assumed by one prediction; `(α, |σ|)` in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Plan {
    Constant {
        alpha: f64,
        sigma: f64,
    },
    /// `first` until `t_switch`, then `second`.
    TwoStage {
        t_switch: f64,
        first: (f64, f64),
        second: (f64, f64),
    },
    Profile(BangBangProfile),
}

impl Plan {
    pub fn at(&self, t: f64) -> (f64, f64) {
        match self {
            Plan::Constant { alpha, sigma } => (*alpha, *sigma),
            Plan::TwoStage { t_switch, first, second } => {
                if t < *t_switch {
                    *first
                } else {
                    *second
                }
            }
            Plan::Profile(p) => p.control_at(t),
        }
    }

    /// First switch strictly after `t`.
    fn next_switch(&self, t: f64) -> Option<f64> {
        match self {
            Plan::Constant { .. } => None,
            Plan::TwoStage { t_switch, .. } => (*t_switch > t).then_some(*t_switch),
            Plan::Profile(p) => p.ts.iter().copied().find(|&ts| ts > t),
        }
    }
}

/// Where a prediction starts: estimated state, actual attitude (|σ|) and the
/// current density-ratio estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictStart {
    pub state: SimState,
    pub alpha: f64,
    pub sigma: f64,
    pub density_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    /// Inertial speed and flight-path angle at the exit radius.
    Exit { v: f64, gamma: f64, t: f64 },
    /// Ground impact after `elapsed` seconds of predicted flight.
    Crashed { elapsed: f64 },
    /// Still inside the atmosphere at the end of the horizon.
    TimedOut,
}

impl Prediction {
    /// Predicted exit speed. Non-exiting trajectories map to non-positive
    /// pseudo-speeds: zero at the horizon, and 1 m/s lower for every second
    /// the crash comes earlier, so residuals keep pointing the solvers
    /// toward the exiting side.
    pub fn exit_speed(&self, horizon: f64) -> f64 {
        match self {
            Prediction::Exit { v, .. } => *v,
            Prediction::Crashed { elapsed } => -(horizon - elapsed).max(0.0),
            Prediction::TimedOut => 0.0,
        }
    }

    pub fn exited(&self) -> bool {
        matches!(self, Prediction::Exit { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Predictor {
    pub planet: PlanetModel,
    pub aero: AeroModel,
    pub vehicle: VehicleModel,
    pub r_exit: f64,
    /// Sign applied to the bank magnitude (no reversals are flown).
    pub sigma_sign: f64,
    pub cfg: PredictorConfig,
    s_over_2m: f64,
}

impl Predictor {
    /// `planet` and `aero` are the onboard (nominal) models.
    pub fn new(
        planet: PlanetModel,
        aero: AeroModel,
        vehicle: VehicleModel,
        r_exit: f64,
        sigma_sign: f64,
        cfg: PredictorConfig,
    ) -> Self {
        let s_over_2m = 0.5 * vehicle.area / vehicle.mass;
        Self { planet: planet.nominal(), aero: aero.nominal(), vehicle, r_exit, sigma_sign, cfg, s_over_2m }
    }

    /// Gravitational potential including the zonal term.
    fn potential(&self, r: f64, phi: f64) -> f64 {
        let s = phi.sin();
        let p2 = 0.5 * (3.0 * s * s - 1.0);
        -self.planet.mu / r * (1.0 - self.planet.j2 * (self.planet.r0 / r).powi(2) * p2)
    }

    /// Inertial exit speed and flight-path angle from a state just beyond the
    /// exit radius, moved back onto `r_exit` along the conic.
    fn exit_from(&self, s: &SimState, omega: f64, j2_energy: bool) -> Prediction {
        let (v, g, _) = orbits::inertial_from_relative(s, omega);
        let dphi = if j2_energy {
            self.potential(s.r, s.phi) - self.potential(self.r_exit, s.phi)
        } else {
            -self.planet.mu / s.r + self.planet.mu / self.r_exit
        };
        let v2 = v * v + 2.0 * dphi;
        if !(v2 > 0.0) {
            return Prediction::TimedOut;
        }
        let ve = v2.sqrt();
        let cg = (s.r * v * g.cos() / (self.r_exit * ve)).min(1.0);
        Prediction::Exit { v: ve, gamma: cg.acos(), t: s.t }
    }

    pub fn predict(&self, start: &PredictStart, plan: &Plan) -> Prediction {
        match self.cfg.model {
            PredictorModel::Full => self.predict_full(start, plan),
            PredictorModel::Longitudinal => self.predict_lon(start, plan),
        }
    }

    pub fn exit_speed(&self, start: &PredictStart, plan: &Plan) -> f64 {
        self.predict(start, plan).exit_speed(self.cfg.horizon)
    }

    /// Attitude profile over the next step, starting from the current actuals.
    fn ramp(&self, plan: &Plan, t: f64, alpha: f64, sigma: f64) -> Ramp {
        let (ac, sc) = plan.at(t);
        if self.cfg.rate_limits {
            Ramp {
                a0: alpha,
                s0: sigma,
                da: ac - alpha,
                ds: sc - sigma,
                ra: self.vehicle.alpha_rate_limit,
                rs: self.vehicle.sigma_rate_limit,
            }
        } else {
            Ramp { a0: ac, s0: sc, da: 0.0, ds: 0.0, ra: 0.0, rs: 0.0 }
        }
    }

    /// Lift and drag per unit dynamic pressure `ρV²` at angle of attack `alpha`.
    #[inline]
    fn lift_drag_factors(&self, alpha: f64) -> (f64, f64) {
        let (cl, cd) = self.aero.coefficients(alpha).unwrap_or((0.0, 0.0));
        (cl * self.s_over_2m, cd * self.s_over_2m)
    }

    fn drag(&self, alpha: f64, ratio: f64, r: f64, v: f64) -> f64 {
        let kd = self.lift_drag_factors(alpha).1;
        kd * ratio * self.planet.atmosphere.density(self.planet.altitude(r), false) * v * v
    }

    fn step_length(&self, plan: &Plan, t: f64, drag: f64) -> f64 {
        let mut h = if drag < self.cfg.coast_drag { self.cfg.coast_dt } else { self.cfg.dt };
        if let Some(ts) = plan.next_switch(t) {
            if ts - t < h {
                h = (ts - t).max(1e-6);
            }
        }
        h
    }

    fn predict_full(&self, start: &PredictStart, plan: &Plan) -> Prediction {
        let planet = &self.planet;
        let ratio = start.density_ratio;
        let mut s = start.state;
        let (mut alpha, mut sigma) = (start.alpha, start.sigma);
        let t0 = s.t;
        let mut drag_now = self.drag(alpha, ratio, s.r, s.v);
        loop {
            let h = self.step_length(plan, s.t, drag_now);
            let ramp = self.ramp(plan, s.t, alpha, sigma);
            let fixed = ramp.settled().then(|| self.lift_drag_factors(ramp.a0));
            let t = s.t;
            let rhs = |y: &[f64; 7]| {
                let (a, sg) = ramp.at(y[6]);
                let (kl, kd) = fixed.unwrap_or_else(|| self.lift_drag_factors(a));
                let st = SimState { t, r: y[0], theta: y[1], phi: y[2], v: y[3], gamma: y[4], psi: y[5] };
                let q = ratio * planet.atmosphere.density(y[0] - planet.r0, false) * st.v * st.v;
                let d = dynamics::full_rhs(&st, self.sigma_sign * sg, kl * q, kd * q, planet)?;
                Ok::<_, dynamics::DynamicsError>([d[0], d[1], d[2], d[3], d[4], d[5], 1.0])
            };
            let y0 = [s.r, s.theta, s.phi, s.v, s.gamma, s.psi, 0.0];
            let y = match dynamics::rk4(&y0, h, rhs) {
                Ok(y) => y,
                Err(_) => return Prediction::Crashed { elapsed: t - t0 },
            };
            (alpha, sigma) = ramp.at(h);
            let next = SimState { t: t + h, r: y[0], theta: y[1], phi: y[2], v: y[3], gamma: y[4], psi: y[5] };
            if next.r >= self.r_exit && next.gamma > 0.0 {
                return self.exit_from(&next, planet.omega, true);
            }
            if planet.altitude(next.r) <= self.cfg.h_floor || !(next.v > 0.0) {
                return Prediction::Crashed { elapsed: next.t - t0 };
            }
            if next.t - t0 > self.cfg.horizon {
                return Prediction::TimedOut;
            }
            s = next;
            drag_now = self.drag(alpha, ratio, s.r, s.v);
        }
    }

    fn predict_lon(&self, start: &PredictStart, plan: &Plan) -> Prediction {
        let planet = &self.planet;
        let mu = planet.mu;
        let ratio = start.density_ratio;
        let mut x = start.state.lon();
        let mut t = start.state.t;
        let (mut alpha, mut sigma) = (start.alpha, start.sigma);
        let t0 = t;
        let mut drag_now = self.drag(alpha, ratio, x.r, x.v);
        loop {
            let h = self.step_length(plan, t, drag_now);
            let ramp = self.ramp(plan, t, alpha, sigma);
            let fixed = ramp.settled().then(|| self.lift_drag_factors(ramp.a0));
            let rhs = |y: &[f64; 4]| -> Result<[f64; 4], ()> {
                let (a, sg) = ramp.at(y[3]);
                let (kl, kd) = fixed.unwrap_or_else(|| self.lift_drag_factors(a));
                let s = LonState { r: y[0], v: y[1], gamma: y[2] };
                let q = ratio * planet.atmosphere.density(y[0] - planet.r0, false) * s.v * s.v;
                let d = dynamics::lon_rhs(&s, sg.to_radians().cos(), kl * q, kd * q, mu);
                Ok([d[0], d[1], d[2], 1.0])
            };
            let y = dynamics::rk4(&[x.r, x.v, x.gamma, 0.0], h, rhs).unwrap_or([f64::NAN; 4]);
            (alpha, sigma) = ramp.at(h);
            let next = LonState { r: y[0], v: y[1], gamma: y[2] };
            t += h;
            if next.r >= self.r_exit && next.gamma > 0.0 {
                let frozen = SimState { t, r: next.r, v: next.v, gamma: next.gamma, ..start.state };
                return self.exit_from(&frozen, planet.omega, false);
            }
            if !(next.v > 0.0) || planet.altitude(next.r) <= self.cfg.h_floor {
                return Prediction::Crashed { elapsed: t - t0 };
            }
            if t - t0 > self.cfg.horizon {
                return Prediction::TimedOut;
            }
            x = next;
            drag_now = self.drag(alpha, ratio, x.r, x.v);
        }
    }
}

/// Rate-limited slew of `(α, |σ|)` toward the commanded values.
#[derive(Debug, Clone, Copy)]
struct Ramp {
    a0: f64,
    s0: f64,
    da: f64,
    ds: f64,
    ra: f64,
    rs: f64,
}

impl Ramp {
    #[inline]
    fn at(&self, tau: f64) -> (f64, f64) {
        (self.a0 + self.da.clamp(-self.ra * tau, self.ra * tau), self.s0 + self.ds.clamp(-self.rs * tau, self.rs * tau))
    }

    fn settled(&self) -> bool {
        self.da == 0.0 && self.ds == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planet::AtmosphereModel;
    use approx::assert_relative_eq;

    fn predictor(planet: PlanetModel, model: PredictorModel) -> Predictor {
        let r_exit = planet.radius(1000e3);
        Predictor::new(
            planet,
            AeroModel::quadratic(),
            VehicleModel::uop(),
            r_exit,
            -1.0,
            PredictorConfig { model, ..Default::default() },
        )
    }

    #[test]
    fn vacuum_prediction_follows_vis_viva() {
        let mut planet = PlanetModel::uranus();
        planet.j2 = 0.0;
        planet.omega = 0.0;
        planet.atmosphere = AtmosphereModel::exponential(1.0, 1.0, -1.0);
        for model in [PredictorModel::Full, PredictorModel::Longitudinal] {
            let p = predictor(planet.clone(), model);
            let s = SimState { t: 0.0, r: planet.radius(400e3), theta: 0.0, phi: -0.2, v: 20e3, gamma: 0.08, psi: 2.0 };
            let start = PredictStart { state: s, alpha: -17.0, sigma: 165.0, density_ratio: 1.0 };
            let v = p.exit_speed(&start, &Plan::Constant { alpha: -17.0, sigma: 165.0 });
            let expect = (s.v * s.v + 2.0 * planet.mu * (1.0 / p.r_exit - 1.0 / s.r)).sqrt();
            assert_relative_eq!(v, expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn state_at_exit_predicts_its_own_speed() {
        let planet = PlanetModel::uranus();
        let mut p = predictor(planet.clone(), PredictorModel::Full);
        p.cfg.coast_dt = 0.1;
        let s = SimState { t: 5.0, r: p.r_exit - 1.0, theta: 0.0, phi: -0.2, v: 20e3, gamma: 0.08, psi: 2.0 };
        let start = PredictStart { state: s, alpha: -17.0, sigma: 165.0, density_ratio: 1.0 };
        let v = p.exit_speed(&start, &Plan::Constant { alpha: -17.0, sigma: 165.0 });
        let (vi, _, _) = orbits::inertial_from_relative(&s, planet.omega);
        assert!((v - vi).abs() < 0.05, "{v} vs {vi}");
    }

    #[test]
    fn steep_dive_crashes() {
        let planet = PlanetModel::uranus();
        let p = predictor(planet.clone(), PredictorModel::Full);
        let s = SimState { t: 0.0, r: planet.radius(300e3), theta: 0.0, phi: -0.2, v: 20e3, gamma: -0.6, psi: 2.0 };
        let start = PredictStart { state: s, alpha: -10.0, sigma: 165.0, density_ratio: 1.0 };
        let plan = Plan::Constant { alpha: -10.0, sigma: 165.0 };
        let pred = p.predict(&start, &plan);
        assert!(matches!(pred, Prediction::Crashed { .. }), "{pred:?}");
        assert!(p.exit_speed(&start, &plan) < 0.0);
    }

    #[test]
    fn plan_switches() {
        let plan = Plan::TwoStage { t_switch: 10.0, first: (-17.0, 15.0), second: (-17.0, 165.0) };
        assert_eq!(plan.at(9.9), (-17.0, 15.0));
        assert_eq!(plan.at(10.0), (-17.0, 165.0));
        assert_eq!(plan.next_switch(3.0), Some(10.0));
        assert_eq!(plan.next_switch(10.0), None);
    }
}
