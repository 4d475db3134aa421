//! Entry interface conditions and capture targets.

use serde::{Deserialize, Serialize};

use crate::dynamics::SimState;
use crate::orbits::{self, OrbitError, SuccessWindow, TargetOrbit};
use crate::planet::PlanetModel;

/// Mission definition. Angles are in degrees, distances in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mission {
    pub entry_altitude: f64,
    pub inertial_speed: f64,
    pub inertial_efpa_deg: f64,
    /// Entry flight-path angle 3-σ of the baseline entry set.
    pub efpa_3sigma_baseline_deg: f64,
    /// Entry flight-path angle 3-σ of the conservative entry set.
    pub efpa_3sigma_conservative_deg: f64,
    pub longitude_deg: f64,
    pub latitude_deg: f64,
    pub inertial_azimuth_deg: f64,
    pub target_apoapsis_altitude: f64,
    pub target_periapsis_altitude: f64,
    pub exit_altitude: f64,
    pub initial_alpha_deg: f64,
    /// Signed initial bank; its sign is kept for the whole run.
    pub initial_sigma_deg: f64,
    #[serde(default = "default_min_period")]
    pub min_period_days: f64,
    #[serde(default = "default_max_period")]
    pub max_period_years: f64,
}

fn default_min_period() -> f64 {
    10.0
}
fn default_max_period() -> f64 {
    2.5
}

impl Default for Mission {
    fn default() -> Self {
        Self::uranus_orbiter()
    }
}

impl Mission {
    pub fn uranus_orbiter() -> Self {
        Self {
            entry_altitude: 1000e3,
            inertial_speed: 23.78e3,
            inertial_efpa_deg: -10.79,
            efpa_3sigma_baseline_deg: 0.189,
            efpa_3sigma_conservative_deg: 0.622,
            longitude_deg: 262.12,
            latitude_deg: -16.02,
            inertial_azimuth_deg: 117.45,
            target_apoapsis_altitude: 2.0e9,
            target_periapsis_altitude: 4.0e6,
            exit_altitude: 1000e3,
            initial_alpha_deg: -17.0,
            initial_sigma_deg: -165.0,
            min_period_days: default_min_period(),
            max_period_years: default_max_period(),
        }
    }

    pub fn target(&self, planet: &PlanetModel) -> Result<TargetOrbit, OrbitError> {
        TargetOrbit::new(
            planet.radius(self.target_apoapsis_altitude),
            planet.radius(self.target_periapsis_altitude),
            planet.radius(self.exit_altitude),
        )
    }

    pub fn window(&self) -> SuccessWindow {
        SuccessWindow {
            min_period: self.min_period_days * orbits::SECONDS_PER_DAY,
            max_period: self.max_period_years * orbits::SECONDS_PER_YEAR,
        }
    }

    /// Planet-relative state at the entry interface for the given inertial
    /// entry flight-path angle [deg].
    pub fn entry_state(&self, planet: &PlanetModel, inertial_efpa_deg: f64) -> SimState {
        let r = planet.radius(self.entry_altitude);
        let phi = self.latitude_deg.to_radians();
        let (v, gamma, psi) = orbits::relative_from_inertial(
            r,
            phi,
            self.inertial_speed,
            inertial_efpa_deg.to_radians(),
            self.inertial_azimuth_deg.to_radians(),
            planet.omega,
        );
        SimState { t: 0.0, r, theta: self.longitude_deg.to_radians(), phi, v, gamma, psi }
    }

    pub fn nominal_entry(&self, planet: &PlanetModel) -> SimState {
        self.entry_state(planet, self.inertial_efpa_deg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn entry_state_round_trips_to_inertial() {
        let p = PlanetModel::uranus();
        let m = Mission::uranus_orbiter();
        let s = m.nominal_entry(&p);
        let (v, g, psi) = orbits::inertial_from_relative(&s, p.omega);
        assert_relative_eq!(v, 23.78e3, max_relative = 1e-12);
        assert_relative_eq!(g.to_degrees(), -10.79, max_relative = 1e-10);
        assert_relative_eq!(psi.to_degrees(), 117.45, max_relative = 1e-10);
        assert!(s.v < v);
    }
}
