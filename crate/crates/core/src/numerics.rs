//! Scalar root finding, quadrature and the special values tied to the
//! equation `w e^{1/w} = R`.
//!
//! For `R ≥ e` that equation has two positive roots, `w_lo ≤ 1 ≤ w_hi`,
//! which coincide with `-1/W_{-1}(-1/R)` and `-1/W_0(-1/R)` respectively.
//! They are solved directly by bisection in `u = ln w`, where the equation
//! reads `u + e^{-u} = ln R`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and iteration cap shared by the bracketed solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_iter: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.max_iter >= 1) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerances must be positive and max_iter >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// The two roots of `w e^{1/w} = r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkBounds {
    pub r: f64,
    /// Small root, in `(0, 1]`.
    pub w_lo: f64,
    /// Large root, `≥ 1`.
    pub w_hi: f64,
}

impl WorkBounds {
    pub fn new(r: f64) -> Result<Self> {
        solve_work_bounds(r, &SolverConfig::default())
    }
}

/// `w e^{1/w}`, the constant normalized mass of `t ↦ e^{t/w}`.
pub fn exp_mass(w: f64) -> f64 {
    w * (1.0 / w).exp()
}

/// Bisection on a sign-changing bracket.
///
/// Stops once the bracket is narrower than `abs_tol + rel_tol·|x|`, when
/// `f` vanishes exactly, or when the midpoint no longer separates the
/// endpoints in floating point.
pub fn find_root_bracketed<F>(mut f: F, lo: f64, hi: f64, cfg: &SolverConfig) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    cfg.validate()?;
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo * f_hi < 0.0) {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= cfg.abs_tol + cfg.rel_tol * mid.abs() {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Both roots of `w e^{1/w} = r`.
///
/// Inputs within `abs_tol` below `e` are treated as `e`, where both roots
/// equal one.
pub fn solve_work_bounds(r: f64, cfg: &SolverConfig) -> Result<WorkBounds> {
    if !r.is_finite() || r < E - cfg.abs_tol {
        return Err(Error::RobustnessBelowE { r });
    }
    if r <= E {
        return Ok(WorkBounds {
            r: E,
            w_lo: 1.0,
            w_hi: 1.0,
        });
    }
    let log_r = r.ln();
    let g = |u: f64| u + (-u).exp() - log_r;
    // g(-ln r) = r - 2 ln r > 0, g(0) = 1 - ln r < 0, g(ln r) = 1/r > 0.
    let u_lo = find_root_bracketed(g, -log_r, 0.0, cfg)?;
    let u_hi = find_root_bracketed(g, 0.0, log_r, cfg)?;
    Ok(WorkBounds {
        r,
        w_lo: u_lo.exp(),
        w_hi: u_hi.exp(),
    })
}

/// The robustness `R0 ≈ 3.0253` at which `w_hi(R0) = w_lo(R0) + 1`.
pub fn solve_r0(cfg: &SolverConfig) -> Result<f64> {
    let gap = |r: f64| match solve_work_bounds(r, cfg) {
        Ok(b) => b.w_hi - b.w_lo - 1.0,
        Err(_) => f64::NAN,
    };
    find_root_bracketed(gap, E, 4.0, cfg)
}

/// `(e^x − 1)/x`, continuously extended by 1 at zero.
pub fn expm1_over(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.abs() < 1e-5 {
        1.0 + x / 2.0 * (1.0 + x / 3.0 * (1.0 + x / 4.0))
    } else {
        x.exp_m1() / x
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(&f, a, b, fa, fm, fb, whole, tol, 48)
}
