//! Planet constants, J2 gravity and the analytic atmosphere.
//!
//! Altitude is always measured from the reference radius: `r = R0 + h`.
//! [`PlanetModel::radius`] and [`PlanetModel::altitude`] are the only
//! conversion points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanetError {
    #[error("gravitational parameter must be positive, got {0}")]
    InvalidMu(f64),
    #[error("reference radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("atmosphere scale height must be positive, got {0}")]
    InvalidScaleHeight(f64),
    #[error("reference density must be positive, got {0}")]
    InvalidDensity(f64),
    #[error("piecewise atmosphere needs at least one segment")]
    NoSegments,
    #[error("atmosphere segments must start at strictly increasing altitudes")]
    UnorderedSegments,
    #[error("atmosphere density not finite at altitude {0} m")]
    NonFiniteDensity(f64),
    #[error("atmosphere density increases with altitude near {0} m")]
    NonMonotoneDensity(f64),
    #[error("perturbation bias must be positive, got {0}")]
    InvalidBias(f64),
    #[error("perturbation wave amplitudes must sum to less than 1 in magnitude, got {0}")]
    WaveAmplitudeTooLarge(f64),
    #[error("perturbation wavelength must be positive, got {0}")]
    InvalidWavelength(f64),
}

/// One vertical density wave: `amplitude * sin(2π h / wavelength + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityWave {
    pub amplitude: f64,
    pub wavelength: f64,
    pub phase: f64,
}

/// Multiplicative density perturbation, `bias * (1 + Σ waves(h))`.
///
/// The factor stays strictly positive because the wave amplitudes are
/// required to sum to less than one in magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmoPerturbation {
    /// Seed the wave set was drawn from (informational).
    pub seed: u64,
    pub bias: f64,
    pub waves: Vec<DensityWave>,
}

impl Default for AtmoPerturbation {
    fn default() -> Self {
        Self::none()
    }
}

impl AtmoPerturbation {
    pub fn none() -> Self {
        Self { seed: 0, bias: 1.0, waves: Vec::new() }
    }

    pub fn bias_only(bias: f64) -> Self {
        Self { seed: 0, bias, waves: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), PlanetError> {
        if !(self.bias > 0.0) || !self.bias.is_finite() {
            return Err(PlanetError::InvalidBias(self.bias));
        }
        let total: f64 = self.waves.iter().map(|w| w.amplitude.abs()).sum();
        if total >= 1.0 {
            return Err(PlanetError::WaveAmplitudeTooLarge(total));
        }
        if let Some(w) = self.waves.iter().find(|w| !(w.wavelength > 0.0)) {
            return Err(PlanetError::InvalidWavelength(w.wavelength));
        }
        Ok(())
    }

    /// Density multiplier at altitude `h` [m].
    pub fn factor(&self, h: f64) -> f64 {
        let waves: f64 =
            self.waves.iter().map(|w| w.amplitude * (std::f64::consts::TAU * h / w.wavelength + w.phase).sin()).sum();
        self.bias * (1.0 + waves)
    }
}

/// A polynomial in `(h - start)` for `ln ρ`, valid from `start` up to the next
/// segment's start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPolySegment {
    pub start: f64,
    /// Coefficients in increasing power order.
    pub coeffs: Vec<f64>,
}

impl LogPolySegment {
    fn ln_rho(&self, h: f64) -> f64 {
        let x = h - self.start;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AtmosphereProfile {
    /// `ρ = rho0 * exp(-h / scale_height)`.
    Exponential {
        rho0: f64,
        scale_height: f64,
    },
    PiecewiseLogPolynomial {
        segments: Vec<LogPolySegment>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereModel {
    pub profile: AtmosphereProfile,
    /// Altitude above which the atmosphere is treated as vacuum [m].
    pub ceiling: f64,
    #[serde(default)]
    pub perturbation: AtmoPerturbation,
}

impl AtmosphereModel {
    pub fn exponential(rho0: f64, scale_height: f64, ceiling: f64) -> Self {
        Self {
            profile: AtmosphereProfile::Exponential { rho0, scale_height },
            ceiling,
            perturbation: AtmoPerturbation::none(),
        }
    }

    pub fn validate(&self) -> Result<(), PlanetError> {
        match &self.profile {
            AtmosphereProfile::Exponential { rho0, scale_height } => {
                if !(*rho0 > 0.0) {
                    return Err(PlanetError::InvalidDensity(*rho0));
                }
                if !(*scale_height > 0.0) {
                    return Err(PlanetError::InvalidScaleHeight(*scale_height));
                }
            }
            AtmosphereProfile::PiecewiseLogPolynomial { segments } => {
                if segments.is_empty() {
                    return Err(PlanetError::NoSegments);
                }
                if segments.windows(2).any(|w| w[1].start <= w[0].start) {
                    return Err(PlanetError::UnorderedSegments);
                }
                // Sampled check of finiteness and monotonicity over the envelope.
                let n = 2000;
                let mut prev = f64::INFINITY;
                for i in 0..=n {
                    let h = self.ceiling * i as f64 / n as f64;
                    let rho = self.nominal(h);
                    if !rho.is_finite() || rho <= 0.0 {
                        return Err(PlanetError::NonFiniteDensity(h));
                    }
                    if rho > prev * (1.0 + 1e-12) {
                        return Err(PlanetError::NonMonotoneDensity(h));
                    }
                    prev = rho;
                }
            }
        }
        self.perturbation.validate()
    }

    /// Nominal density, ignoring the ceiling.
    fn nominal(&self, h: f64) -> f64 {
        match &self.profile {
            AtmosphereProfile::Exponential { rho0, scale_height } => rho0 * (-h / scale_height).exp(),
            AtmosphereProfile::PiecewiseLogPolynomial { segments } => {
                let idx = segments.partition_point(|s| s.start <= h).saturating_sub(1);
                segments[idx].ln_rho(h).exp()
            }
        }
    }

    /// Density at altitude `h` [m]; zero above the ceiling.
    pub fn density(&self, h: f64, perturbed: bool) -> f64 {
        if h > self.ceiling {
            return 0.0;
        }
        let rho = self.nominal(h);
        if perturbed {
            rho * self.perturbation.factor(h)
        } else {
            rho
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanetModel {
    /// Gravitational parameter [m³/s²].
    pub mu: f64,
    /// Reference equatorial radius [m].
    pub r0: f64,
    pub j2: f64,
    /// Rotation rate [rad/s].
    pub omega: f64,
    pub atmosphere: AtmosphereModel,
}

impl PlanetModel {
    pub const URANUS_MU: f64 = 5.7939e15;
    pub const URANUS_R0: f64 = 25_559e3;
    pub const URANUS_J2: f64 = 3.34343e-3;
    pub const URANUS_OMEGA: f64 = 1.012e-4;

    /// Uranus constants with the default exponential upper atmosphere.
    pub fn uranus() -> Self {
        Self {
            mu: Self::URANUS_MU,
            r0: Self::URANUS_R0,
            j2: Self::URANUS_J2,
            omega: Self::URANUS_OMEGA,
            atmosphere: AtmosphereModel::exponential(DEFAULT_RHO0, DEFAULT_SCALE_HEIGHT, DEFAULT_CEILING),
        }
    }

    pub fn validate(&self) -> Result<(), PlanetError> {
        if !(self.mu > 0.0) {
            return Err(PlanetError::InvalidMu(self.mu));
        }
        if !(self.r0 > 0.0) {
            return Err(PlanetError::InvalidRadius(self.r0));
        }
        self.atmosphere.validate()
    }

    #[inline]
    pub fn radius(&self, h: f64) -> f64 {
        self.r0 + h
    }

    #[inline]
    pub fn altitude(&self, r: f64) -> f64 {
        r - self.r0
    }

    /// Radial and latitudinal gravity components at radius `r` and latitude `phi`.
    pub fn gravity(&self, r: f64, phi: f64) -> (f64, f64) {
        let base = self.mu / (r * r);
        let k = self.j2 * (self.r0 / r).powi(2);
        let (s, c) = phi.sin_cos();
        let g_r = base * (1.0 + k * (1.5 - 4.5 * s * s));
        let g_phi = base * k * 3.0 * s * c;
        (g_r, g_phi)
    }

    #[inline]
    pub fn density(&self, h: f64, perturbed: bool) -> f64 {
        self.atmosphere.density(h, perturbed)
    }

    /// A copy with the perturbation removed (the onboard view of the planet).
    pub fn nominal(&self) -> Self {
        let mut p = self.clone();
        p.atmosphere.perturbation = AtmoPerturbation::none();
        p
    }
}

/// Default reference density of the exponential upper atmosphere [kg/m³].
pub const DEFAULT_RHO0: f64 = 2.0e-3;
/// Default scale height [m].
pub const DEFAULT_SCALE_HEIGHT: f64 = 50e3;
/// Default atmosphere ceiling, equal to the entry interface altitude [m].
pub const DEFAULT_CEILING: f64 = 1000e3;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spherical_limit() {
        let mut p = PlanetModel::uranus();
        p.j2 = 0.0;
        let (gr, gphi) = p.gravity(p.r0, 0.3);
        assert_relative_eq!(gr, p.mu / (p.r0 * p.r0), max_relative = 1e-15);
        assert_eq!(gphi, 0.0);
    }

    #[test]
    fn equator_has_no_latitudinal_gravity() {
        let p = PlanetModel::uranus();
        for r in [p.r0, p.r0 + 1e5, p.r0 + 1e6] {
            assert_eq!(p.gravity(r, 0.0).1, 0.0);
        }
    }

    #[test]
    fn gravity_matches_termwise_evaluation() {
        // Hand-expanded J2 terms for the entry-latitude case.
        let mu: f64 = 5.7939e15;
        let r0: f64 = 25_559e3;
        let j2: f64 = 3.343e-3;
        let r = r0 + 1000e3;
        let phi = (-16.02f64).to_radians();
        let p = PlanetModel { mu, r0, j2, ..PlanetModel::uranus() };
        let mu_r2 = mu / r / r;
        let ratio2 = (r0 / r) * (r0 / r);
        let sin_phi = phi.sin();
        let expect_r = mu_r2 + mu_r2 * j2 * ratio2 * 1.5 - mu_r2 * j2 * ratio2 * 4.5 * sin_phi * sin_phi;
        let expect_phi = 3.0 * mu_r2 * j2 * ratio2 * sin_phi * phi.cos();
        let (gr, gphi) = p.gravity(r, phi);
        assert_relative_eq!(gr, expect_r, max_relative = 1e-13);
        assert_relative_eq!(gphi, expect_phi, max_relative = 1e-13);
        assert!(gphi < 0.0, "southern latitude pulls toward the equator plane sign");
    }

    #[test]
    fn exponential_reference_points() {
        let atm = AtmosphereModel::exponential(2.0, 40e3, 1e6);
        assert_eq!(atm.density(0.0, false), 2.0);
        assert_relative_eq!(atm.density(40e3, false), 2.0 / std::f64::consts::E, max_relative = 1e-14);
        assert_eq!(atm.density(1.1e6, false), 0.0);
    }

    #[test]
    fn pure_bias_scales_density() {
        let mut atm = AtmosphereModel::exponential(2.0, 40e3, 1e6);
        atm.perturbation = AtmoPerturbation::bias_only(1.2);
        for h in [0.0, 1e4, 2.5e5, 9e5] {
            assert_relative_eq!(atm.density(h, true), 1.2 * atm.density(h, false), max_relative = 1e-15);
        }
    }

    #[test]
    fn empty_perturbation_is_identity() {
        let p = AtmoPerturbation::none();
        for h in [0.0, 123.0, 5e5] {
            assert_eq!(p.factor(h), 1.0);
        }
    }

    #[test]
    fn rejects_oversized_waves() {
        let p = AtmoPerturbation {
            seed: 1,
            bias: 1.0,
            waves: vec![
                DensityWave { amplitude: 0.6, wavelength: 1e4, phase: 0.0 },
                DensityWave { amplitude: -0.5, wavelength: 2e4, phase: 0.0 },
            ],
        };
        assert!(matches!(p.validate(), Err(PlanetError::WaveAmplitudeTooLarge(_))));
    }

    #[test]
    fn piecewise_profile_evaluates_and_validates() {
        let atm = AtmosphereModel {
            profile: AtmosphereProfile::PiecewiseLogPolynomial {
                segments: vec![
                    LogPolySegment { start: 0.0, coeffs: vec![0.0, -1.0 / 30e3] },
                    LogPolySegment { start: 300e3, coeffs: vec![-10.0, -1.0 / 60e3, -1e-12] },
                ],
            },
            ceiling: 1e6,
            perturbation: AtmoPerturbation::none(),
        };
        atm.validate().unwrap();
        assert_relative_eq!(atm.density(0.0, false), 1.0);
        assert_relative_eq!(atm.density(300e3, false), (-10.0f64).exp(), max_relative = 1e-14);

        let bad = AtmosphereModel {
            profile: AtmosphereProfile::PiecewiseLogPolynomial {
                segments: vec![LogPolySegment { start: 0.0, coeffs: vec![0.0, 1e-5] }],
            },
            ..atm
        };
        assert!(matches!(bad.validate(), Err(PlanetError::NonMonotoneDensity(_))));
    }

    #[test]
    fn default_planet_is_valid() {
        PlanetModel::uranus().validate().unwrap();
    }
}
