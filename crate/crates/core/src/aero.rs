//! Aerodynamic coefficient models and lift/drag accelerations.
//!
//! Angle of attack is carried in degrees throughout this module because the
//! fitted slopes are per degree.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AeroError {
    #[error("angle of attack {alpha} deg outside table range [{lo}, {hi}]")]
    OutOfEnvelope { alpha: f64, lo: f64, hi: f64 },
    #[error("aerodynamic table needs at least two rows")]
    TableTooShort,
    #[error("aerodynamic table angles must be strictly increasing")]
    TableUnordered,
    #[error("dispersion factors must be positive (k_cl = {k_cl}, k_cd = {k_cd})")]
    InvalidDispersion { k_cl: f64, k_cd: f64 },
    #[error("drag coefficient {cd} is not positive at alpha = {alpha} deg")]
    NonPositiveDrag { alpha: f64, cd: f64 },
    #[error("model has no polynomial slopes (table model)")]
    NoSlopes,
    #[error("table csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("table csv: expected {expected} columns, found {found}")]
    Columns { expected: String, found: usize },
}

/// Polynomial coefficients of `C_D(α)` and `C_L(α)`, α in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeroPolynomial {
    pub cd0: f64,
    pub cd_a: f64,
    #[serde(default)]
    pub cd_a2: f64,
    pub cl0: f64,
    pub cl_a: f64,
    #[serde(default)]
    pub cl_a2: f64,
}

impl AeroPolynomial {
    /// Linear fit coefficients.
    pub const LINEAR_FIT: Self =
        Self { cd0: 1.72, cd_a: 1.87e-2, cd_a2: 0.0, cl0: 7.07e-2, cl_a: -1.62e-2, cl_a2: 0.0 };

    /// Quadratic fit coefficients.
    pub const QUADRATIC_FIT: Self =
        Self { cd0: 1.59, cd_a: 3.83e-3, cd_a2: -4.25e-4, cl0: -2.71e-2, cl_a: -2.82e-2, cl_a2: -3.43e-4 };

    #[inline]
    fn eval(&self, alpha: f64) -> (f64, f64) {
        let cl = (self.cl_a2 * alpha + self.cl_a) * alpha + self.cl0;
        let cd = (self.cd_a2 * alpha + self.cd_a) * alpha + self.cd0;
        (cl, cd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeroTableRow {
    pub alpha: f64,
    pub cl: f64,
    pub cd: f64,
}

/// Piecewise-linear coefficient table sorted by angle of attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroTable {
    rows: Vec<AeroTableRow>,
}

impl AeroTable {
    pub fn new(rows: Vec<AeroTableRow>) -> Result<Self, AeroError> {
        if rows.len() < 2 {
            return Err(AeroError::TableTooShort);
        }
        if rows.windows(2).any(|w| w[1].alpha <= w[0].alpha) {
            return Err(AeroError::TableUnordered);
        }
        Ok(Self { rows })
    }

    /// Sample a polynomial model on a uniform grid.
    pub fn from_polynomial(poly: &AeroPolynomial, lo: f64, hi: f64, n: usize) -> Result<Self, AeroError> {
        let rows = (0..n)
            .map(|i| {
                let alpha = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                let (cl, cd) = poly.eval(alpha);
                AeroTableRow { alpha, cl, cd }
            })
            .collect();
        Self::new(rows)
    }

    /// Three-column CSV with header: `alpha_deg, C_L, C_D`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, AeroError> {
        let mut rows = Vec::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(AeroError::Columns { expected: "3".into(), found: rec.len() });
            }
            let parse = |i: usize| -> Result<f64, AeroError> {
                rec[i].parse::<f64>().map_err(|_| AeroError::Columns { expected: "numeric".into(), found: rec.len() })
            };
            rows.push(AeroTableRow { alpha: parse(0)?, cl: parse(1)?, cd: parse(2)? });
        }
        Self::new(rows)
    }

    /// Two two-column CSVs (`alpha_deg, C_L` and `alpha_deg, C_D`) on the same grid.
    pub fn from_csv_pair<R1: Read, R2: Read>(lift: R1, drag: R2) -> Result<Self, AeroError> {
        let read_pairs = |r: Box<dyn Read + '_>| -> Result<Vec<(f64, f64)>, AeroError> {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
            let mut out = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                if rec.len() != 2 {
                    return Err(AeroError::Columns { expected: "2".into(), found: rec.len() });
                }
                let a = rec[0].parse::<f64>();
                let c = rec[1].parse::<f64>();
                match (a, c) {
                    (Ok(a), Ok(c)) => out.push((a, c)),
                    _ => return Err(AeroError::Columns { expected: "numeric".into(), found: 2 }),
                }
            }
            Ok(out)
        };
        let cl = read_pairs(Box::new(lift))?;
        let cd = read_pairs(Box::new(drag))?;
        if cl.len() != cd.len() || cl.iter().zip(&cd).any(|(a, b)| a.0 != b.0) {
            return Err(AeroError::TableUnordered);
        }
        Self::new(cl.into_iter().zip(cd).map(|((alpha, cl), (_, cd))| AeroTableRow { alpha, cl, cd }).collect())
    }

    pub fn range(&self) -> (f64, f64) {
        (self.rows[0].alpha, self.rows[self.rows.len() - 1].alpha)
    }

    fn eval(&self, alpha: f64) -> Result<(f64, f64), AeroError> {
        let (lo, hi) = self.range();
        if !(alpha >= lo && alpha <= hi) {
            return Err(AeroError::OutOfEnvelope { alpha, lo, hi });
        }
        let i = self.rows.partition_point(|r| r.alpha <= alpha).clamp(1, self.rows.len() - 1);
        let (a, b) = (&self.rows[i - 1], &self.rows[i]);
        let w = (alpha - a.alpha) / (b.alpha - a.alpha);
        Ok((a.cl + w * (b.cl - a.cl), a.cd + w * (b.cd - a.cd)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AeroFit {
    Linear(AeroPolynomial),
    Quadratic(AeroPolynomial),
    Table(AeroTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroModel {
    pub fit: AeroFit,
    /// Multiplicative lift dispersion.
    pub k_cl: f64,
    /// Multiplicative drag dispersion.
    pub k_cd: f64,
}

impl AeroModel {
    pub fn new(fit: AeroFit) -> Self {
        Self { fit, k_cl: 1.0, k_cd: 1.0 }
    }

    pub fn linear() -> Self {
        Self::new(AeroFit::Linear(AeroPolynomial { cd_a2: 0.0, cl_a2: 0.0, ..AeroPolynomial::LINEAR_FIT }))
    }

    pub fn quadratic() -> Self {
        Self::new(AeroFit::Quadratic(AeroPolynomial::QUADRATIC_FIT))
    }

    pub fn with_dispersion(mut self, k_cl: f64, k_cd: f64) -> Self {
        self.k_cl = k_cl;
        self.k_cd = k_cd;
        self
    }

    /// The same fit without dispersion factors.
    pub fn nominal(&self) -> Self {
        Self::new(self.fit.clone())
    }

    /// Checks dispersion factors and that `C_D > 0` over `[alpha_lo, alpha_hi]`.
    pub fn validate(&self, alpha_lo: f64, alpha_hi: f64) -> Result<(), AeroError> {
        if !(self.k_cl > 0.0 && self.k_cd > 0.0) {
            return Err(AeroError::InvalidDispersion { k_cl: self.k_cl, k_cd: self.k_cd });
        }
        for i in 0..=100 {
            let alpha = alpha_lo + (alpha_hi - alpha_lo) * i as f64 / 100.0;
            let (_, cd) = self.coefficients(alpha)?;
            if !(cd > 0.0) {
                return Err(AeroError::NonPositiveDrag { alpha, cd });
            }
        }
        Ok(())
    }

    /// `(C_L, C_D)` at angle of attack `alpha` [deg], dispersion applied.
    pub fn coefficients(&self, alpha: f64) -> Result<(f64, f64), AeroError> {
        let (cl, cd) = match &self.fit {
            AeroFit::Linear(p) => (p.cl_a * alpha + p.cl0, p.cd_a * alpha + p.cd0),
            AeroFit::Quadratic(p) => p.eval(alpha),
            AeroFit::Table(t) => t.eval(alpha)?,
        };
        Ok((self.k_cl * cl, self.k_cd * cd))
    }

    /// Polynomial slopes used by the switching functions; linear fits report
    /// zero second-order terms.
    pub fn slopes(&self) -> Result<AeroPolynomial, AeroError> {
        match &self.fit {
            AeroFit::Linear(p) => Ok(AeroPolynomial { cd_a2: 0.0, cl_a2: 0.0, ..*p }),
            AeroFit::Quadratic(p) => Ok(*p),
            AeroFit::Table(_) => Err(AeroError::NoSlopes),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleModel {
    /// [kg]
    pub mass: f64,
    /// Reference area [m²].
    pub area: f64,
    /// `(α_min, α_max)` [deg].
    pub alpha_limits: (f64, f64),
    /// `(σ_min, σ_max)` bank magnitude limits [deg].
    pub sigma_limits: (f64, f64),
    /// [deg/s]
    pub alpha_rate_limit: f64,
    /// [deg/s]
    pub sigma_rate_limit: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum VehicleError {
    #[error("mass and reference area must be positive")]
    NonPositiveMassOrArea,
    #[error("angle of attack limits must satisfy alpha_min < alpha_max <= 0, got {0:?}")]
    AlphaLimits((f64, f64)),
    #[error("bank limits must satisfy 0 < sigma_min < sigma_max <= 180, got {0:?}")]
    SigmaLimits((f64, f64)),
    #[error("actuator rate limits must be positive")]
    RateLimits,
}

impl VehicleModel {
    /// 4063 kg vehicle with a 4.5 m diameter reference area.
    pub fn uop() -> Self {
        Self {
            mass: 4063.0,
            area: std::f64::consts::PI * 2.25 * 2.25,
            alpha_limits: (-25.0, -10.0),
            sigma_limits: (15.0, 165.0),
            alpha_rate_limit: 5.0,
            sigma_rate_limit: 15.0,
        }
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        if !(self.mass > 0.0 && self.area > 0.0) {
            return Err(VehicleError::NonPositiveMassOrArea);
        }
        let (a0, a1) = self.alpha_limits;
        if !(a0 < a1 && a1 <= 0.0) {
            return Err(VehicleError::AlphaLimits(self.alpha_limits));
        }
        let (s0, s1) = self.sigma_limits;
        if !(s0 > 0.0 && s0 < s1 && s1 <= 180.0) {
            return Err(VehicleError::SigmaLimits(self.sigma_limits));
        }
        if !(self.alpha_rate_limit > 0.0 && self.sigma_rate_limit > 0.0) {
            return Err(VehicleError::RateLimits);
        }
        Ok(())
    }

    #[inline]
    pub fn alpha_min(&self) -> f64 {
        self.alpha_limits.0
    }
    #[inline]
    pub fn alpha_max(&self) -> f64 {
        self.alpha_limits.1
    }
    #[inline]
    pub fn sigma_min(&self) -> f64 {
        self.sigma_limits.0
    }
    #[inline]
    pub fn sigma_max(&self) -> f64 {
        self.sigma_limits.1
    }
}

/// Lift and drag accelerations [m/s²] for density `rho`, speed `v`, angle of attack `alpha` [deg].
pub fn lift_drag(
    model: &AeroModel,
    vehicle: &VehicleModel,
    rho: f64,
    v: f64,
    alpha: f64,
) -> Result<(f64, f64), AeroError> {
    if rho == 0.0 {
        return Ok((0.0, 0.0));
    }
    let (cl, cd) = model.coefficients(alpha)?;
    let q_over_m = 0.5 * rho * v * v * vehicle.area / vehicle.mass;
    Ok((q_over_m * cl, q_over_m * cd))
}
