//! Constant-attitude search: pick the constant `(α, |σ|)` held until exit
//! whose predicted exit-speed residual is zero.
//!
//! The previous command and the corners of the attitude box are evaluated.
//! The previous command is one bracket endpoint; the partner is the evaluated
//! point of opposite sign with the smallest residual. Brent's method then
//! searches the segment between them, parameterised by `κ ∈ [0, 1]`. With no
//! sign change anywhere the point of smallest residual is flown.

use crate::rootfind::{self, BrentConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CasmPoint {
    pub alpha: f64,
    pub sigma: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CasmResult {
    pub alpha: f64,
    pub sigma: f64,
    pub f: f64,
    /// Position along the bracketing segment, when one was found.
    pub kappa: Option<f64>,
    pub fallback: bool,
    pub evaluations: usize,
    /// Every candidate evaluated before the line search, previous command first.
    pub points: Vec<CasmPoint>,
}

/// `f(α, |σ|)` is the exit-speed residual of holding that attitude.
/// `extra_point` adds `(σ_max or σ_min, α_prev)` chosen by the sign of the
/// previous residual.
pub fn casm(
    mut f: impl FnMut(f64, f64) -> f64,
    prev: (f64, f64),
    alpha_limits: (f64, f64),
    sigma_limits: (f64, f64),
    extra_point: bool,
    brent: &BrentConfig,
) -> CasmResult {
    let (a0, s0) = prev;
    let f0 = f(a0, s0);
    let mut evaluations = 1;
    let p0 = CasmPoint { alpha: a0, sigma: s0, f: f0 };
    if f0 == 0.0 {
        return CasmResult { alpha: a0, sigma: s0, f: f0, kappa: None, fallback: false, evaluations, points: vec![p0] };
    }

    let (amin, amax) = alpha_limits;
    let (smin, smax) = sigma_limits;
    let mut candidates = vec![(amin, smin), (amax, smin), (amin, smax), (amax, smax)];
    if extra_point {
        // A fast exit wants more lift-down, a slow one more lift-up.
        candidates.push((a0, if f0 > 0.0 { smax } else { smin }));
    }
    let mut points = vec![p0];
    for (a, s) in candidates {
        points.push(CasmPoint { alpha: a, sigma: s, f: f(a, s) });
        evaluations += 1;
    }

    let partner = points[1..]
        .iter()
        .filter(|p| p.f.is_finite() && (p.f == 0.0 || p.f.signum() != f0.signum()))
        .min_by(|a, b| a.f.abs().total_cmp(&b.f.abs()))
        .copied();

    match partner {
        Some(p1) if f0.is_finite() => {
            let at = |k: f64| (a0 + k * (p1.alpha - a0), s0 + k * (p1.sigma - s0));
            let res = rootfind::brent_with_values(
                |k| {
                    let (a, s) = at(k);
                    f(a, s)
                },
                0.0,
                f0,
                1.0,
                p1.f,
                brent,
            );
            match res {
                Ok(r) => {
                    evaluations += r.iterations;
                    let k = r.x.clamp(0.0, 1.0);
                    let (a, s) = at(k);
                    CasmResult { alpha: a, sigma: s, f: r.fx, kappa: Some(k), fallback: false, evaluations, points }
                }
                Err(_) => fallback(points, evaluations),
            }
        }
        _ => fallback(points, evaluations),
    }
}

fn fallback(points: Vec<CasmPoint>, evaluations: usize) -> CasmResult {
    let best = points
        .iter()
        .filter(|p| p.f.is_finite())
        .min_by(|a, b| a.f.abs().total_cmp(&b.f.abs()))
        .copied()
        .unwrap_or(points[0]);
    CasmResult { alpha: best.alpha, sigma: best.sigma, f: best.f, kappa: None, fallback: true, evaluations, points }
}
