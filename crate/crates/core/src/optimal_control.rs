//! Switching functions of the propellant-optimal two-channel problem and the
//! piecewise-constant control profile flown by the guidance predictor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aero::{AeroPolynomial, VehicleModel};

/// Default guard on `|H_α²|` before it is used as a divisor.
pub const EPS_SINGULAR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum OptimalControlError {
    #[error("second-order switching function {0:e} is below the singularity guard")]
    Singular(f64),
    #[error("switching times out of order: {0:?}")]
    Unordered([f64; 3]),
}

/// Adjoints of `(r, V, γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Costate {
    pub lambda_r: f64,
    pub lambda_v: f64,
    pub lambda_gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Lift up, `σ = σ_min`.
    Up,
    /// Lift down, `σ = σ_max`.
    Down,
}

impl Branch {
    fn lift_sign(self) -> f64 {
        match self {
            Branch::Up => 1.0,
            Branch::Down => -1.0,
        }
    }
}

/// Coefficient of α in the Hamiltonian for lift-up flight.
pub fn h_alpha_up(cs: &Costate, v: f64, aero: &AeroPolynomial) -> f64 {
    -cs.lambda_v * aero.cd_a + cs.lambda_gamma * aero.cl_a / v
}

/// Coefficient of α in the Hamiltonian for lift-down flight.
pub fn h_alpha_down(cs: &Costate, v: f64, aero: &AeroPolynomial) -> f64 {
    -cs.lambda_v * aero.cd_a - cs.lambda_gamma * aero.cl_a / v
}

pub fn h_alpha(cs: &Costate, v: f64, aero: &AeroPolynomial, branch: Branch) -> f64 {
    -cs.lambda_v * aero.cd_a + branch.lift_sign() * cs.lambda_gamma * aero.cl_a / v
}

/// Coefficient of α² in the Hamiltonian.
pub fn h_alpha2(cs: &Costate, v: f64, aero: &AeroPolynomial, branch: Branch) -> f64 {
    -cs.lambda_v * aero.cd_a2 + branch.lift_sign() * cs.lambda_gamma * aero.cl_a2 / v
}

/// Stationary point of the Hamiltonian in α [deg] for the quadratic model.
pub fn calligraphic_a(cs: &Costate, v: f64, aero: &AeroPolynomial, branch: Branch) -> Result<f64, OptimalControlError> {
    calligraphic_a_eps(cs, v, aero, branch, EPS_SINGULAR)
}

pub fn calligraphic_a_eps(
    cs: &Costate,
    v: f64,
    aero: &AeroPolynomial,
    branch: Branch,
    eps: f64,
) -> Result<f64, OptimalControlError> {
    let den = h_alpha2(cs, v, aero, branch);
    if den.abs() <= eps {
        return Err(OptimalControlError::Singular(den));
    }
    Ok(-h_alpha(cs, v, aero, branch) / (2.0 * den))
}

/// Bang-bang angle of attack: `α_min` for a positive switching value,
/// `α_max` for a negative one, `previous` on an exact tie.
pub fn optimal_alpha_linear(h: f64, alpha_limits: (f64, f64), previous: f64) -> f64 {
    if h > 0.0 {
        alpha_limits.0
    } else if h < 0.0 {
        alpha_limits.1
    } else {
        previous
    }
}

/// Unsaturated angle of attack clamped to the admissible interval.
pub fn optimal_alpha_quadratic(a: f64, alpha_limits: (f64, f64)) -> f64 {
    a.clamp(alpha_limits.0, alpha_limits.1)
}

/// Bank switching indicator. Its zero crossing is the lift-up/lift-down switch;
/// a negative value favours lift up.
pub fn sigma_switch_indicator(cs: &Costate) -> f64 {
    cs.lambda_gamma
}

/// Bank branch that minimizes the Hamiltonian, holding `previous` on a tie.
pub fn optimal_branch(cs: &Costate, previous: Branch) -> Branch {
    let s = sigma_switch_indicator(cs);
    if s < 0.0 {
        Branch::Up
    } else if s > 0.0 {
        Branch::Down
    } else {
        previous
    }
}

/// What the profile does after the third switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase4Policy {
    /// Keep flying the fixed phase-4 level.
    HoldSaturated,
    /// Phase 4 is solved online; the profile level is only the predictor's assumption.
    Casm,
}

/// Three-switch piecewise-constant `(α, |σ|)` profile, degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BangBangProfile {
    pub ts: [f64; 3],
    pub levels: [(f64, f64); 4],
    pub phase4: Phase4Policy,
}

/// Which angle of attack phase 3 flies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase3Alpha {
    /// `α_max` in phase 3.
    #[default]
    Max,
    /// `α_min` in phase 3.
    Min,
}

/// Phase levels for a vehicle: lift-up at `α_min`, lift-up at `α_max`,
/// lift-down at the phase-3 angle of attack, then lift-down at `α_min`.
pub fn default_levels(vehicle: &VehicleModel, phase3: Phase3Alpha) -> [(f64, f64); 4] {
    let (amin, amax) = vehicle.alpha_limits;
    let (smin, smax) = vehicle.sigma_limits;
    let a3 = match phase3 {
        Phase3Alpha::Max => amax,
        Phase3Alpha::Min => amin,
    };
    [(amin, smin), (amax, smin), (a3, smax), (amin, smax)]
}

impl BangBangProfile {
    pub fn new(ts: [f64; 3], levels: [(f64, f64); 4], phase4: Phase4Policy) -> Result<Self, OptimalControlError> {
        if !(ts[0] <= ts[1] && ts[1] <= ts[2]) {
            return Err(OptimalControlError::Unordered(ts));
        }
        Ok(Self { ts, levels, phase4 })
    }

    /// Phase index 0..=3 at time `t`.
    pub fn phase_at(&self, t: f64) -> usize {
        self.ts.iter().take_while(|&&ts| t >= ts).count()
    }

    /// `(α, |σ|)` at time `t`.
    pub fn control_at(&self, t: f64) -> (f64, f64) {
        self.levels[self.phase_at(t)]
    }
}

/// One row of an externally produced state/costate history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostateRow {
    pub t: f64,
    pub r: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub gamma: f64,
    pub lambda_r: f64,
    #[serde(rename = "lambda_V")]
    pub lambda_v: f64,
    pub lambda_gamma: f64,
    /// Supplied controls, echoed for comparison; NaN when absent.
    #[serde(default = "nan")]
    pub alpha: f64,
    #[serde(default = "nan")]
    pub u1: f64,
}

fn nan() -> f64 {
    f64::NAN
}

impl CostateRow {
    pub fn costate(&self) -> Costate {
        Costate { lambda_r: self.lambda_r, lambda_v: self.lambda_v, lambda_gamma: self.lambda_gamma }
    }
}

/// Switching functions and reconstructed controls at one row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchingEval {
    pub t: f64,
    pub h_up: f64,
    pub h_down: f64,
    pub lambda_gamma: f64,
    /// NaN where the second-order term is singular.
    pub a_up: f64,
    pub a_down: f64,
    pub branch: Branch,
    pub sigma_star: f64,
    pub alpha_star_linear: f64,
    pub alpha_star_quadratic: f64,
    pub alpha_supplied: f64,
    pub u1_supplied: f64,
}

/// Stationary points of both branches where the bank indicator crosses zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchCrossing {
    pub t: f64,
    pub a_up: f64,
    pub a_down: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchingReport {
    pub rows: Vec<SwitchingEval>,
    pub sigma_switch_times: Vec<f64>,
    pub alpha_switch_times: Vec<f64>,
    pub crossings: Vec<BranchCrossing>,
}

/// Evaluate the bang-bang and unsaturated control laws along a supplied trajectory.
///
/// `linear` drives the bang-bang angle of attack; `quadratic` drives the
/// unsaturated one. Switch times are linearly interpolated between rows.
pub fn analyze_switching(
    rows: &[CostateRow],
    linear: &AeroPolynomial,
    quadratic: &AeroPolynomial,
    vehicle: &VehicleModel,
) -> SwitchingReport {
    let mut evals = Vec::with_capacity(rows.len());
    let mut branch = Branch::Up;
    let mut alpha_lin = vehicle.alpha_min();
    for row in rows {
        let cs = row.costate();
        branch = optimal_branch(&cs, branch);
        let h_up = h_alpha_up(&cs, row.v, linear);
        let h_down = h_alpha_down(&cs, row.v, linear);
        let h_active = match branch {
            Branch::Up => h_up,
            Branch::Down => h_down,
        };
        alpha_lin = optimal_alpha_linear(h_active, vehicle.alpha_limits, alpha_lin);
        let a_up = calligraphic_a(&cs, row.v, quadratic, Branch::Up).unwrap_or(f64::NAN);
        let a_down = calligraphic_a(&cs, row.v, quadratic, Branch::Down).unwrap_or(f64::NAN);
        let a_active = match branch {
            Branch::Up => a_up,
            Branch::Down => a_down,
        };
        evals.push(SwitchingEval {
            t: row.t,
            h_up,
            h_down,
            lambda_gamma: cs.lambda_gamma,
            a_up,
            a_down,
            branch,
            sigma_star: match branch {
                Branch::Up => vehicle.sigma_min(),
                Branch::Down => vehicle.sigma_max(),
            },
            alpha_star_linear: alpha_lin,
            alpha_star_quadratic: optimal_alpha_quadratic(a_active, vehicle.alpha_limits),
            alpha_supplied: row.alpha,
            u1_supplied: row.u1,
        });
    }

    let zero_time = |t0: f64, f0: f64, t1: f64, f1: f64| -> f64 {
        if f1 == f0 {
            t1
        } else {
            t0 + (t1 - t0) * (f0 / (f0 - f1))
        }
    };

    let mut sigma_switch_times = Vec::new();
    let mut crossings = Vec::new();
    let mut alpha_switch_times = Vec::new();
    for i in 1..evals.len() {
        let (p, c) = (&evals[i - 1], &evals[i]);
        let bank_switch = if p.branch != c.branch {
            let tc = zero_time(p.t, p.lambda_gamma, c.t, c.lambda_gamma);
            let w = if c.t == p.t { 1.0 } else { (tc - p.t) / (c.t - p.t) };
            let lerp = |a: f64, b: f64| a + w * (b - a);
            let (r0, r1) = (&rows[i - 1], &rows[i]);
            let cs = Costate {
                lambda_r: lerp(r0.lambda_r, r1.lambda_r),
                lambda_v: lerp(r0.lambda_v, r1.lambda_v),
                lambda_gamma: 0.0,
            };
            let v = lerp(r0.v, r1.v);
            crossings.push(BranchCrossing {
                t: tc,
                a_up: calligraphic_a(&cs, v, quadratic, Branch::Up).unwrap_or(f64::NAN),
                a_down: calligraphic_a(&cs, v, quadratic, Branch::Down).unwrap_or(f64::NAN),
            });
            sigma_switch_times.push(tc);
            Some(tc)
        } else {
            None
        };
        if p.alpha_star_linear != c.alpha_star_linear {
            let t = match bank_switch {
                Some(tc) => tc,
                None => {
                    let (hp, hc) = match c.branch {
                        Branch::Up => (p.h_up, c.h_up),
                        Branch::Down => (p.h_down, c.h_down),
                    };
                    zero_time(p.t, hp, c.t, hc)
                }
            };
            alpha_switch_times.push(t);
        }
    }
    SwitchingReport { rows: evals, sigma_switch_times, alpha_switch_times, crossings }
}
