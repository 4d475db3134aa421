//! Derivative-free kernels: Nelder-Mead with an ordering penalty, the secant
//! form of Newton-Raphson, and Brent's bracketing root finder.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RootError {
    #[error("no sign change on [{a}, {b}]: f(a) = {fa:e}, f(b) = {fb:e}")]
    NoBracket { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("secant step stalled at x = {x}: residual did not change")]
    Stall { x: f64 },
    #[error("non-finite residual at x = {x}")]
    NonFinite { x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmConfig {
    /// Offset added to each coordinate to build the initial simplex.
    pub step: f64,
    /// Stop when the standard deviation of the simplex values drops below this.
    pub eps: f64,
    pub max_iters: usize,
    /// Value assigned to points whose coordinates are out of order.
    pub penalty: f64,
    /// Penalize any `x[i] > x[i + 1]`.
    pub ordering: bool,
}

impl Default for NmConfig {
    fn default() -> Self {
        Self { step: 10.0, eps: 1.0, max_iters: 100, penalty: 1e12, ordering: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Sum of ordering violations `Σ max(0, x[i] - x[i+1])`.
pub fn ordering_violation(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[0] - w[1]).max(0.0)).sum()
}

/// Nelder-Mead simplex minimization (reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5).
///
/// Out-of-order points score `penalty · (1 + violation)` so the simplex is
/// still pushed back toward the feasible ordering. A run only counts as
/// converged when its best point is feasible.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], cfg: &NmConfig) -> NmResult {
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| -> f64 {
        evaluations += 1;
        if cfg.ordering {
            let v = ordering_violation(x);
            if v > 0.0 {
                return cfg.penalty * (1.0 + v);
            }
        }
        let y = f(x);
        if y.is_nan() {
            cfg.penalty
        } else {
            y
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let fx0 = eval(x0);
    simplex.push((x0.to_vec(), fx0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += cfg.step;
        let fx = eval(&x);
        simplex.push((x, fx));
    }

    let sort = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    let spread = |s: &[(Vec<f64>, f64)]| -> f64 {
        let m = s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64;
        (s.iter().map(|p| (p.1 - m).powi(2)).sum::<f64>() / s.len() as f64).sqrt()
    };
    let feasible = |x: &[f64]| !cfg.ordering || ordering_violation(x) == 0.0;

    let mut iterations = 0;
    let mut converged = false;
    sort(&mut simplex);
    while iterations < cfg.max_iters {
        if spread(&simplex) < cfg.eps && feasible(&simplex[0].0) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(&p.0) {
                *c += xi / n as f64;
            }
        }
        let toward = |from: &[f64], coef: f64| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, w)| c + coef * (c - w)).collect()
        };
        let worst = simplex[n].clone();
        let xr = toward(&worst.0, 1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = toward(&worst.0, 2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = toward(&worst.0, 0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = toward(&worst.0, -0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let xs: Vec<f64> = best.iter().zip(&p.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let fs = eval(&xs);
                    *p = (xs, fs);
                }
            }
        }
        sort(&mut simplex);
    }
    if !converged && spread(&simplex) < cfg.eps && feasible(&simplex[0].0) {
        converged = true;
    }
    let (x, f) = simplex.swap_remove(0);
    NmResult { x, f, iterations, evaluations, converged }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SecantConfig {
    /// Stop when `|z · dz/dx| <= eps`.
    pub eps: f64,
    pub max_iters: usize,
    /// Largest change of `x` in one iteration.
    pub max_step: f64,
}

impl Default for SecantConfig {
    fn default() -> Self {
        Self { eps: 1e-2, max_iters: 20, max_step: 50.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecantResult {
    pub x: f64,
    pub z: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Secant iteration `x ← x - z (x - x_prev) / (z - z_prev)`.
///
/// Steps are limited to `cfg.max_step`. `bounds` clamps each new iterate;
/// an iterate pinned to a bound that does not move ends the search
/// unconverged.
pub fn newton_secant(
    mut z: impl FnMut(f64) -> f64,
    x0: f64,
    x1: f64,
    cfg: &SecantConfig,
    bounds: Option<(f64, f64)>,
) -> Result<SecantResult, RootError> {
    let check = |x: f64, v: f64| if v.is_finite() { Ok(v) } else { Err(RootError::NonFinite { x }) };
    let (mut xp, mut zp) = (x0, check(x0, z(x0))?);
    let (mut x, mut zx) = (x1, check(x1, z(x1))?);
    if zx == 0.0 {
        return Ok(SecantResult { x, z: zx, iterations: 0, converged: true });
    }
    for k in 1..=cfg.max_iters {
        if zx == zp {
            return Err(RootError::Stall { x });
        }
        let step = (zx * (x - xp) / (zx - zp)).clamp(-cfg.max_step, cfg.max_step);
        let mut xn = x - step;
        if let Some((lo, hi)) = bounds {
            xn = xn.clamp(lo, hi);
        }
        if xn == x {
            return Ok(SecantResult { x, z: zx, iterations: k, converged: false });
        }
        let zn = check(xn, z(xn))?;
        let slope = (zn - zx) / (xn - x);
        xp = x;
        zp = zx;
        x = xn;
        zx = zn;
        if zn == 0.0 || (zn * slope).abs() <= cfg.eps {
            return Ok(SecantResult { x, z: zx, iterations: k, converged: true });
        }
    }
    Ok(SecantResult { x, z: zx, iterations: cfg.max_iters, converged: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrentConfig {
    /// Accept once `|f(x)| <= f_tol`.
    pub f_tol: f64,
    /// Absolute bracket-width tolerance; the machine-scaled term is always added.
    pub x_tol: f64,
    pub max_iters: usize,
}

impl Default for BrentConfig {
    fn default() -> Self {
        Self { f_tol: 1e-3, x_tol: 0.0, max_iters: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrentResult {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Brent's zero finder on `[a, b]`, which must bracket a sign change.
pub fn brent(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, cfg: &BrentConfig) -> Result<BrentResult, RootError> {
    let fa0 = f(a);
    let fb0 = f(b);
    brent_with_values(f, a, fa0, b, fb0, cfg)
}

/// [`brent`] with the endpoint values already known.
pub fn brent_with_values(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    cfg: &BrentConfig,
) -> Result<BrentResult, RootError> {
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(RootError::NonFinite { x: if fa.is_finite() { b } else { a } });
    }
    if fa == 0.0 {
        return Ok(BrentResult { x: a, fx: fa, iterations: 0, converged: true });
    }
    if fb == 0.0 {
        return Ok(BrentResult { x: b, fx: fb, iterations: 0, converged: true });
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoBracket { a, b, fa, fb });
    }
    let (mut a, mut fa, mut b, mut fb) = (a, fa, b, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=cfg.max_iters {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * cfg.x_tol;
        let m = 0.5 * (c - b);
        if fb.abs() <= cfg.f_tol || fb == 0.0 {
            return Ok(BrentResult { x: b, fx: fb, iterations: iter - 1, converged: true });
        }
        if m.abs() <= tol {
            return Ok(BrentResult { x: b, fx: fb, iterations: iter - 1, converged: true });
        }
        if e.abs() < tol || fa.abs() <= fb.abs() {
            d = m;
            e = m;
        } else {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(RootError::NonFinite { x: b });
        }
    }
    Ok(BrentResult { x: b, fx: fb, iterations: cfg.max_iters, converged: false })
}
