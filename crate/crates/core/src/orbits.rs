//! Two-body orbit quantities evaluated at atmospheric exit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::SimState;

pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const SECONDS_PER_YEAR: f64 = 365.25 * SECONDS_PER_DAY;

#[derive(Debug, Error, PartialEq)]
pub enum OrbitError {
    #[error("orbit is not elliptical (V^2 = {v2:e}, escape^2 = {esc2:e})")]
    NotElliptical { v2: f64, esc2: f64 },
    #[error("target orbit invalid: {0}")]
    InvalidTarget(&'static str),
}

/// Target orbit radii measured from the planet center [m].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetOrbit {
    pub ra: f64,
    pub rp: f64,
    pub r_exit: f64,
}

impl TargetOrbit {
    pub fn new(ra: f64, rp: f64, r_exit: f64) -> Result<Self, OrbitError> {
        let t = Self { ra, rp, r_exit };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), OrbitError> {
        if !(self.rp > 0.0 && self.r_exit > 0.0) {
            return Err(OrbitError::InvalidTarget("radii must be positive"));
        }
        if !(self.rp < self.ra) {
            return Err(OrbitError::InvalidTarget("periapsis must be below apoapsis"));
        }
        if !(self.r_exit < self.ra + self.rp) {
            return Err(OrbitError::InvalidTarget("exit radius must be below ra + rp"));
        }
        Ok(())
    }

    pub fn semi_major_axis(&self) -> f64 {
        0.5 * (self.ra + self.rp)
    }
}

pub fn semi_major_axis(r: f64, v: f64, mu: f64) -> Result<f64, OrbitError> {
    let esc2 = 2.0 * mu / r;
    let v2 = v * v;
    if !(v2 < esc2) {
        return Err(OrbitError::NotElliptical { v2, esc2 });
    }
    Ok(mu / (esc2 - v2))
}

/// Apoapsis radius from radius, inertial speed and inertial flight-path angle.
pub fn apoapsis(r: f64, v: f64, gamma: f64, mu: f64) -> Result<f64, OrbitError> {
    let a = semi_major_axis(r, v, mu)?;
    let c = gamma.cos();
    let disc = (1.0 - v * v * r * r * c * c / (mu * a)).max(0.0);
    Ok(a * (1.0 + disc.sqrt()))
}

/// Eccentricity; defined for any energy.
pub fn eccentricity(r: f64, v: f64, gamma: f64, mu: f64) -> f64 {
    let energy = 0.5 * v * v - mu / r;
    let h = r * v * gamma.cos();
    (1.0 + 2.0 * energy * h * h / (mu * mu)).max(0.0).sqrt()
}

/// Propellant needed to raise periapsis at the achieved apoapsis and then
/// correct apoapsis at the target periapsis.
pub fn delta_v(ra: f64, a: f64, target: &TargetOrbit, mu: f64) -> Result<f64, OrbitError> {
    if !(a > 0.0 && ra > 0.0 && ra <= 2.0 * a * (1.0 + 1e-12)) {
        return Err(OrbitError::NotElliptical { v2: f64::NAN, esc2: f64::NAN });
    }
    let rp = target.rp;
    let root = |x: f64| x.max(0.0).sqrt();
    let raise = (root(1.0 / ra - 1.0 / (ra + rp)) - root(1.0 / ra - 1.0 / (2.0 * a))).abs();
    let trim = (root(1.0 / rp - 1.0 / (target.ra + rp)) - root(1.0 / rp - 1.0 / (ra + rp))).abs();
    Ok((2.0 * mu).sqrt() * (raise + trim))
}

/// Exit speed that puts the vehicle on the target orbit's energy.
pub fn exit_velocity_target(target: &TargetOrbit, mu: f64) -> f64 {
    (2.0 * mu * (1.0 / target.r_exit - 0.5 / target.semi_major_axis())).sqrt()
}

pub fn period(a: f64, mu: f64) -> f64 {
    2.0 * std::f64::consts::PI * (a * a * a / mu).sqrt()
}

/// Accepted post-capture period range [s].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessWindow {
    pub min_period: f64,
    pub max_period: f64,
}

impl Default for SuccessWindow {
    fn default() -> Self {
        Self { min_period: 10.0 * SECONDS_PER_DAY, max_period: 2.5 * SECONDS_PER_YEAR }
    }
}

/// Orbit reached after exit, from inertial exit quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitOrbit {
    pub eccentricity: f64,
    /// `None` when the exit orbit is not elliptical.
    pub semi_major_axis: Option<f64>,
    pub apoapsis: Option<f64>,
    pub period: Option<f64>,
    pub pass: bool,
}

/// Period, eccentricity and capture classification. Hyperbolic exits fail.
pub fn period_and_classify(r: f64, v: f64, gamma: f64, mu: f64, window: &SuccessWindow) -> ExitOrbit {
    let e = eccentricity(r, v, gamma, mu);
    match semi_major_axis(r, v, mu) {
        Ok(a) => {
            let p = period(a, mu);
            let ra = apoapsis(r, v, gamma, mu).ok();
            ExitOrbit {
                eccentricity: e,
                semi_major_axis: Some(a),
                apoapsis: ra,
                period: Some(p),
                pass: p >= window.min_period && p <= window.max_period,
            }
        }
        Err(_) => ExitOrbit { eccentricity: e, semi_major_axis: None, apoapsis: None, period: None, pass: false },
    }
}

/// Inertial speed, flight-path angle and heading from a planet-relative state.
///
/// The rotation velocity `Ω r cos φ` is added to the east component of the
/// local east-north-up velocity.
pub fn inertial_from_relative(state: &SimState, omega: f64) -> (f64, f64, f64) {
    let (sg, cg) = state.gamma.sin_cos();
    let (sp, cp) = state.psi.sin_cos();
    let e = state.v * cg * sp + omega * state.r * state.phi.cos();
    let n = state.v * cg * cp;
    let u = state.v * sg;
    let horiz = e.hypot(n);
    (horiz.hypot(u), u.atan2(horiz), e.atan2(n))
}

/// Planet-relative speed, flight-path angle and heading from inertial ones.
pub fn relative_from_inertial(r: f64, phi: f64, v: f64, gamma: f64, psi: f64, omega: f64) -> (f64, f64, f64) {
    let (sg, cg) = gamma.sin_cos();
    let (sp, cp) = psi.sin_cos();
    let e = v * cg * sp - omega * r * phi.cos();
    let n = v * cg * cp;
    let u = v * sg;
    let horiz = e.hypot(n);
    (horiz.hypot(u), u.atan2(horiz), e.atan2(n))
}
