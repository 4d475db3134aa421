//! Equations of motion, fixed-step integration and actuator rate limiting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aero::{AeroError, AeroModel, VehicleModel};
use crate::planet::PlanetModel;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("heading equation singular: cos(gamma) = {0:e}")]
    VerticalFlight(f64),
    #[error("longitude equation singular at the pole: cos(phi) = {0:e}")]
    Pole(f64),
    #[error("non-positive speed {0}")]
    Stalled(f64),
    #[error(transparent)]
    Aero(#[from] AeroError),
}

/// Planet-relative state. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
    pub v: f64,
    pub gamma: f64,
    pub psi: f64,
}

impl SimState {
    pub fn lon(&self) -> LonState {
        LonState { r: self.r, v: self.v, gamma: self.gamma }
    }

    fn to_array(self) -> [f64; 6] {
        [self.r, self.theta, self.phi, self.v, self.gamma, self.psi]
    }

    fn from_array(t: f64, y: [f64; 6]) -> Self {
        Self { t, r: y[0], theta: y[1], phi: y[2], v: y[3], gamma: y[4], psi: y[5] }
    }

    /// Componentwise linear blend `self + w (other - self)`.
    pub fn lerp(&self, other: &Self, w: f64) -> Self {
        let f = |a: f64, b: f64| a + w * (b - a);
        Self {
            t: f(self.t, other.t),
            r: f(self.r, other.r),
            theta: f(self.theta, other.theta),
            phi: f(self.phi, other.phi),
            v: f(self.v, other.v),
            gamma: f(self.gamma, other.gamma),
            psi: f(self.psi, other.psi),
        }
    }
}

/// Longitudinal state `(r, V, γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonState {
    pub r: f64,
    pub v: f64,
    pub gamma: f64,
}

/// Commanded and actual attitude, degrees. Bank is signed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub alpha_cmd: f64,
    pub sigma_cmd: f64,
    pub alpha_actual: f64,
    pub sigma_actual: f64,
}

impl ControlCommand {
    /// Actuators already sitting at the command.
    pub fn settled(alpha: f64, sigma: f64) -> Self {
        Self { alpha_cmd: alpha, sigma_cmd: sigma, alpha_actual: alpha, sigma_actual: sigma }
    }

    /// Clamp the commands to the vehicle envelope, keeping the sign of the bank.
    pub fn clamp_commands(&mut self, vehicle: &VehicleModel) {
        self.alpha_cmd = self.alpha_cmd.clamp(vehicle.alpha_min(), vehicle.alpha_max());
        let mag = self.sigma_cmd.abs().clamp(vehicle.sigma_min(), vehicle.sigma_max());
        self.sigma_cmd = if self.sigma_cmd < 0.0 { -mag } else { mag };
    }

    /// Move the actuators toward the (clamped) commands by at most one step of rate.
    pub fn rate_limit(&mut self, vehicle: &VehicleModel, dt: f64) {
        self.clamp_commands(vehicle);
        let da = vehicle.alpha_rate_limit * dt;
        let ds = vehicle.sigma_rate_limit * dt;
        self.alpha_actual += (self.alpha_cmd - self.alpha_actual).clamp(-da, da);
        self.sigma_actual += (self.sigma_cmd - self.sigma_actual).clamp(-ds, ds);
    }
}

/// Everything the plant needs besides the state and control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub planet: PlanetModel,
    pub aero: AeroModel,
    pub vehicle: VehicleModel,
}

/// Aerodynamic environment at a state.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AeroSense {
    pub rho: f64,
    pub lift: f64,
    pub drag: f64,
}

/// Density and lift/drag accelerations seen by the plant (perturbed atmosphere).
pub fn sense(state: &SimState, alpha: f64, models: &ModelBundle) -> Result<AeroSense, AeroError> {
    let rho = models.planet.density(models.planet.altitude(state.r), true);
    let (lift, drag) = crate::aero::lift_drag(&models.aero, &models.vehicle, rho, state.v, alpha)?;
    Ok(AeroSense { rho, lift, drag })
}

/// Time derivatives of `(r, θ, φ, V, γ, ψ)` on a rotating oblate planet.
pub fn full_derivatives(
    state: &SimState,
    alpha: f64,
    sigma: f64,
    models: &ModelBundle,
) -> Result<[f64; 6], DynamicsError> {
    let a = sense(state, alpha, models)?;
    full_rhs(state, sigma, a.lift, a.drag, &models.planet)
}

/// Derivatives given the lift and drag accelerations; `sigma` in degrees.
pub fn full_rhs(
    s: &SimState,
    sigma: f64,
    lift: f64,
    drag: f64,
    planet: &PlanetModel,
) -> Result<[f64; 6], DynamicsError> {
    let (r, v) = (s.r, s.v);
    if !(v > 0.0) {
        return Err(DynamicsError::Stalled(v));
    }
    let (sg, cg) = s.gamma.sin_cos();
    let (sp, cp) = s.phi.sin_cos();
    let (ss, cs) = s.psi.sin_cos();
    let (s_sig, c_sig) = sigma.to_radians().sin_cos();
    if cg.abs() < 1e-12 {
        return Err(DynamicsError::VerticalFlight(cg));
    }
    if cp.abs() < 1e-12 {
        return Err(DynamicsError::Pole(cp));
    }
    let (g_r, g_phi) = planet.gravity(r, s.phi);
    let om = planet.omega;
    let om2r = om * om * r;

    let r_dot = v * sg;
    let theta_dot = v * cg * ss / (r * cp);
    let phi_dot = v * cg * cs / r;
    let v_dot = -drag - g_r * sg - g_phi * cg * cs + om2r * cp * (sg * cp - cg * sp * cs);
    let gamma_dot = (lift * c_sig
        + (v * v / r - g_r) * cg
        + g_phi * sg * cs
        + 2.0 * om * v * cp * ss
        + om2r * cp * (cg * cp + sg * cs * sp))
        / v;
    let psi_dot = (lift * s_sig / cg + v * v / r * cg * ss * (sp / cp) + g_phi * ss / cg
        - 2.0 * om * v * (sg / cg * cs * cp - sp)
        + om2r / cg * ss * sp * cp)
        / v;
    Ok([r_dot, theta_dot, phi_dot, v_dot, gamma_dot, psi_dot])
}

/// Longitudinal derivatives with spherical gravity and no rotation, given the
/// lift and drag accelerations directly.
#[inline]
pub fn lon_rhs(s: &LonState, u1: f64, lift: f64, drag: f64, mu: f64) -> [f64; 3] {
    let (sg, cg) = s.gamma.sin_cos();
    let r = s.r;
    [s.v * sg, -drag - mu * sg / (r * r), (lift * u1 + (s.v * s.v - mu / r) * cg / r) / s.v]
}

/// Longitudinal derivatives `(ṙ, V̇, γ̇)` with the nominal atmosphere.
pub fn lon_derivatives(
    state: &LonState,
    u1: f64,
    alpha: f64,
    planet: &PlanetModel,
    aero: &AeroModel,
    vehicle: &VehicleModel,
) -> Result<[f64; 3], AeroError> {
    let rho = planet.density(planet.altitude(state.r), false);
    let (lift, drag) = crate::aero::lift_drag(aero, vehicle, rho, state.v, alpha)?;
    Ok(lon_rhs(state, u1, lift, drag, planet.mu))
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4<const N: usize, E>(
    y: &[f64; N],
    dt: f64,
    mut f: impl FnMut(&[f64; N]) -> Result<[f64; N], E>,
) -> Result<[f64; N], E> {
    let add = |a: &[f64; N], k: &[f64; N], h: f64| -> [f64; N] {
        let mut out = *a;
        for i in 0..N {
            out[i] += h * k[i];
        }
        out
    };
    let k1 = f(y)?;
    let k2 = f(&add(y, &k1, 0.5 * dt))?;
    let k3 = f(&add(y, &k2, 0.5 * dt))?;
    let k4 = f(&add(y, &k3, dt))?;
    let mut out = *y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Advance the plant by `dt`: rate-limit the actuators, then take one RK4
/// step with the resulting actual attitude held constant.
pub fn step(
    state: &SimState,
    control: &mut ControlCommand,
    dt: f64,
    models: &ModelBundle,
) -> Result<SimState, DynamicsError> {
    control.rate_limit(&models.vehicle, dt);
    let (alpha, sigma) = (control.alpha_actual, control.sigma_actual);
    let t = state.t;
    let y = rk4(&state.to_array(), dt, |y| full_derivatives(&SimState::from_array(t, *y), alpha, sigma, models))?;
    Ok(SimState::from_array(t + dt, y))
}

/// Closed-loop command source, called once per plant step before the
/// actuators are rate limited.
pub trait ControlPolicy {
    /// Update `control.alpha_cmd` / `control.sigma_cmd` given the current
    /// state and the sensed aerodynamic environment.
    fn update(&mut self, state: &SimState, sensed: &AeroSense, control: &mut ControlCommand);

    /// Phase label recorded in traces.
    fn phase(&self) -> u8 {
        0
    }
}

/// Holds whatever is commanded initially.
#[derive(Debug, Clone, Copy, Default)]
pub struct HoldCommand;

impl ControlPolicy for HoldCommand {
    fn update(&mut self, _: &SimState, _: &AeroSense, _: &mut ControlCommand) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Exited,
    Crashed,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagateOptions {
    /// Plant step [s].
    pub dt: f64,
    /// Exit interface radius [m].
    pub r_exit: f64,
    /// Altitude below which the run counts as crashed [m].
    pub h_floor: f64,
    /// Elapsed-time limit [s].
    pub t_max: f64,
    /// Record every n-th plant step in the trace; 0 disables the trace.
    pub trace_every: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub h: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub gamma_deg: f64,
    pub alpha_deg: f64,
    pub sigma_deg: f64,
    pub rho: f64,
    #[serde(rename = "L")]
    pub lift: f64,
    #[serde(rename = "D")]
    pub drag: f64,
    pub phase: u8,
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub outcome: Outcome,
    pub state: SimState,
    pub control: ControlCommand,
    pub trace: Vec<TraceRow>,
}

/// Integrate until the vehicle climbs back through `r_exit`, hits the floor,
/// or runs out of time. The exit state is linearly interpolated onto `r_exit`.
pub fn propagate_to_exit(
    initial: &SimState,
    control: ControlCommand,
    policy: &mut dyn ControlPolicy,
    models: &ModelBundle,
    opts: &PropagateOptions,
) -> Result<Propagation, DynamicsError> {
    let mut state = *initial;
    let mut control = control;
    let mut trace = Vec::new();
    let t0 = initial.t;
    let mut n: usize = 0;
    let row = |s: &SimState, c: &ControlCommand, a: &AeroSense, phase: u8| TraceRow {
        t: s.t,
        h: models.planet.altitude(s.r),
        v: s.v,
        gamma_deg: s.gamma.to_degrees(),
        alpha_deg: c.alpha_actual,
        sigma_deg: c.sigma_actual,
        rho: a.rho,
        lift: a.lift,
        drag: a.drag,
        phase,
    };
    loop {
        let sensed = sense(&state, control.alpha_actual, models)?;
        if opts.trace_every > 0 && n.is_multiple_of(opts.trace_every) {
            trace.push(row(&state, &control, &sensed, policy.phase()));
        }
        policy.update(&state, &sensed, &mut control);
        let next = step(&state, &mut control, opts.dt, models)?;
        n += 1;

        let outcome = if next.r >= opts.r_exit && next.gamma > 0.0 && next.r > state.r {
            let w = (opts.r_exit - state.r) / (next.r - state.r);
            state = state.lerp(&next, w.clamp(0.0, 1.0));
            Some(Outcome::Exited)
        } else if models.planet.altitude(next.r) <= opts.h_floor {
            state = next;
            Some(Outcome::Crashed)
        } else if next.t - t0 > opts.t_max {
            state = next;
            Some(Outcome::Timeout)
        } else {
            state = next;
            None
        };
        if let Some(outcome) = outcome {
            if opts.trace_every > 0 {
                let sensed = sense(&state, control.alpha_actual, models).unwrap_or_default();
                trace.push(row(&state, &control, &sensed, policy.phase()));
            }
            return Ok(Propagation { outcome, state, control, trace });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planet::AtmosphereModel;
    use approx::assert_relative_eq;

    fn bundle() -> ModelBundle {
        ModelBundle { planet: PlanetModel::uranus(), aero: AeroModel::quadratic(), vehicle: VehicleModel::uop() }
    }

    fn vacuum() -> ModelBundle {
        let mut m = bundle();
        m.planet.j2 = 0.0;
        m.planet.omega = 0.0;
        m.planet.atmosphere = AtmosphereModel::exponential(1.0, 1.0, -1.0);
        m
    }

    fn state(h: f64, v: f64, gamma_deg: f64) -> SimState {
        SimState {
            t: 0.0,
            r: PlanetModel::URANUS_R0 + h,
            theta: 262.12f64.to_radians(),
            phi: (-16.02f64).to_radians(),
            v,
            gamma: gamma_deg.to_radians(),
            psi: 117.45f64.to_radians(),
        }
    }

    #[test]
    fn level_flight_has_no_climb_rate() {
        let d = full_derivatives(&state(300e3, 2e4, 0.0), -17.0, -165.0, &bundle()).unwrap();
        assert_eq!(d[0], 0.0);
    }

    #[test]
    fn circular_orbit_is_an_equilibrium() {
        let m = vacuum();
        let mut s = state(2000e3, 0.0, 0.0);
        s.v = (m.planet.mu / s.r).sqrt();
        let d = full_derivatives(&s, -17.0, 15.0, &m).unwrap();
        assert!(d[4].abs() < 1e-15, "gamma_dot = {}", d[4]);
        let dl = lon_rhs(&s.lon(), 1.0, 0.0, 0.0, m.planet.mu);
        assert!(dl[2].abs() < 1e-15);
        assert_eq!(lon_rhs(&s.lon(), 1.0, 0.3, 0.0, m.planet.mu)[1], 0.0);
    }

    #[test]
    fn vertical_flight_is_rejected() {
        let s = state(300e3, 2e4, 90.0);
        assert!(matches!(full_derivatives(&s, -17.0, -165.0, &bundle()), Err(DynamicsError::VerticalFlight(_))));
    }

    #[test]
    fn full_model_reduces_to_longitudinal_without_rotation() {
        let mut m = bundle();
        m.planet.j2 = 0.0;
        m.planet.omega = 0.0;
        for (h, v, g, sigma) in [(300e3, 22e3, -8.0, -165.0), (150e3, 18e3, 2.0, 40.0), (500e3, 21e3, -1.0, 15.0)] {
            let s = state(h, v, g);
            let full = full_derivatives(&s, -20.0, sigma, &m).unwrap();
            let lon =
                lon_derivatives(&s.lon(), sigma.to_radians().cos(), -20.0, &m.planet, &m.aero, &m.vehicle).unwrap();
            assert_relative_eq!(full[0], lon[0], max_relative = 1e-14);
            assert_relative_eq!(full[3], lon[1], max_relative = 1e-12);
            assert_relative_eq!(full[4], lon[2], max_relative = 1e-12, epsilon = 1e-16);
        }
    }

    #[test]
    fn rate_limit_moves_bank_by_one_step() {
        let v = VehicleModel::uop();
        let mut c = ControlCommand::settled(-17.0, -15.0);
        c.sigma_cmd = -165.0;
        c.rate_limit(&v, 0.01);
        assert_relative_eq!(c.sigma_actual, -15.15, max_relative = 1e-14);
        c.alpha_cmd = -40.0;
        c.rate_limit(&v, 0.01);
        assert_eq!(c.alpha_cmd, -25.0);
        assert_relative_eq!(c.alpha_actual, -17.05, max_relative = 1e-14);
    }

    #[test]
    fn zero_derivatives_leave_state_unchanged() {
        let y = [1.0, -2.0, 3.5];
        let out = rk4(&y, 0.01, |_| Ok::<_, ()>([0.0; 3])).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn rk4_is_fourth_order() {
        // y' = -y², exact y = 1/(1+t).
        let one = |dt: f64| rk4(&[1.0], dt, |y| Ok::<_, ()>([-y[0] * y[0]])).unwrap()[0];
        let e1 = (one(0.04) - 1.0 / 1.04).abs();
        let e2 = (one(0.02) - 1.0 / 1.02).abs();
        // Local error is O(dt^5): halving dt shrinks it by ~32.
        let ratio = e1 / e2;
        assert!((28.0..36.0).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn ballistic_vertical_dive_crashes() {
        let m = bundle();
        let s = state(1000e3, 23e3, -89.9);
        let opts =
            PropagateOptions { dt: 0.05, r_exit: m.planet.radius(1000e3), h_floor: 0.0, t_max: 5000.0, trace_every: 0 };
        let p = propagate_to_exit(&s, ControlCommand::settled(-17.0, -165.0), &mut HoldCommand, &m, &opts).unwrap();
        assert_eq!(p.outcome, Outcome::Crashed);
    }
}
