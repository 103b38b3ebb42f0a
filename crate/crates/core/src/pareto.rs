//! The Pareto-optimal bidding function `A` for a robustness budget `R`.
//!
//! For `t ≥ 0` the function is `1` on `[0, L)` followed by
//! `e^{(t − L)/w_hi}`, with `L = 1` when `R ≥ 2/ln 2` and `L < 1` below.
//! For `t < 0` it solves the delay equation `R·A′(t) = A(t + 1)`, which
//! keeps the normalized mass equal to `R` on the whole negative axis. On
//! `[−k, −k + 1)` it equals `p_k(s)` with `s = t + k`, where
//! `p_k′ = x·p_{k−1}` (`x = 1/R`) and `p_{k+1}(1) = p_k(0) = q_k`.
//!
//! Integrating that recurrence forward in floating point is unstable: the
//! error grows like `e^{k(1/w_lo − 1/w_hi)}` and turns `q_k` negative after
//! a few dozen steps. Instead the values `q_k` are read off the power
//! series `Σ e^{αk} q_k z^k` (with `α = 1/w_hi`), whose coefficients obey
//! recurrences made only of positive terms, and each `p_k` is rebuilt as
//! its Taylor expansion, whose coefficients are products of earlier `q`s and
//! are positive as well. Nothing cancels, so every value carries
//! near-machine relative accuracy however small it gets.

use std::f64::consts::{E, LN_2};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt12;
use crate::function::{consistency_robustness, BiddingFunction, GridSpec, Segment};
use crate::numerics::{find_root_bracketed, solve_work_bounds, SolverConfig, WorkBounds};

/// Default bound on the mass left of the materialized polynomials.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Fewest polynomial pieces materialized, so the default ±30 evaluation
/// window never reaches the approximate left tail.
pub const MIN_PIECES: usize = 32;

/// Hard cap on the number of pieces.
const MAX_PIECES: usize = 4000;

/// Coefficients beyond this magnitude indicate a construction bug.
const OVERFLOW_GUARD: f64 = 1e15;

/// Relative size below which trailing Taylor terms are dropped.
const TRUNCATION: f64 = 1e-20;

/// `2/ln 2`, where the two constructions meet.
pub fn regime_boundary() -> f64 {
    2.0 / LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `R ≥ 2/ln 2`.
    Large,
    /// `e ≤ R < 2/ln 2`.
    Small,
}

/// Scalars that fix the shape of `A` for a given `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub r: f64,
    pub regime: Regime,
    pub w_hi: f64,
    /// `1/w_hi`; satisfies `R = e^α/α`.
    pub alpha: f64,
    /// `F(1) = R·A(0⁻)`, the mass up to 1.
    pub mu: f64,
    /// Small regime: root of `α = y + ln(2 − y)` in `[0, 1]`; 0 otherwise.
    pub y: f64,
    /// Length `L` of the flat piece `[0, L)`; 1 in the large regime.
    pub ell_cap: f64,
}

impl RegimeParams {
    pub fn new(r: f64) -> Result<Self> {
        // The construction relies on R = e^α/α holding to rounding, so the
        // roots are solved to floating-point exhaustion.
        let exhaustive = SolverConfig {
            abs_tol: 1e-300,
            rel_tol: 1e-300,
            max_iter: 2000,
        };
        let mut wb = WorkBounds::new(r)?;
        if wb.r > E {
            wb = solve_work_bounds(wb.r, &exhaustive)?;
        }
        let r = wb.r;
        let alpha = 1.0 / wb.w_hi;
        if r >= regime_boundary() {
            return Ok(RegimeParams {
                r,
                regime: Regime::Large,
                w_hi: wb.w_hi,
                alpha,
                mu: r - wb.w_hi,
                y: 0.0,
                ell_cap: 1.0,
            });
        }
        // y + ln(2 − y) is increasing on [0, 1], from ln 2 to 1, and
        // ln 2 < α ≤ 1 here.
        let y = if alpha >= 1.0 {
            1.0
        } else {
            find_root_bracketed(|y| y + (2.0 - y).ln() - alpha, 0.0, 1.0, &exhaustive)?
        };
        Ok(RegimeParams {
            r,
            regime: Regime::Small,
            w_hi: wb.w_hi,
            alpha,
            mu: y.exp() / alpha,
            y,
            ell_cap: 1.0 - y / alpha,
        })
    }

    /// Consistency of `A`: `R − w_hi` (large) or `R/(2 − y)` (small).
    pub fn predicted_consistency(&self) -> f64 {
        match self.regime {
            Regime::Large => self.r - self.w_hi,
            Regime::Small => self.r / (2.0 - self.y),
        }
    }
}

/// One polynomial piece of `p_k`, in the variable `s − s_start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyPiece {
    pub s_start: f64,
    pub s_end: f64,
    pub coefficients: Vec<f64>,
}

impl PolyPiece {
    pub fn value(&self, s: f64) -> f64 {
        let u = s - self.s_start;
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }
}

/// The polynomials `p_1 … p_K` defining `A` on `[−K, 0)`.
///
/// `polys[k]` lists the pieces of `p_k` on `[0, 1]`: one piece in the
/// large regime, two (split at `L`) in the small regime, empty pieces
/// omitted. `polys[0]` is left empty because `p_0` (the function on
/// `[0, 1)`) is the constant/exponential pair described by `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFamily {
    pub x: f64,
    pub params: RegimeParams,
    pub polys: Vec<Vec<PolyPiece>>,
    /// `q_k = p_k(0)` for `k = 0 ..= K + 1`.
    pub q: Vec<f64>,
    pub k_max: usize,
}

impl PolynomialFamily {
    /// `p_k(s)` for `s ∈ [0, 1]`, including `p_0`.
    pub fn eval(&self, k: usize, s: f64) -> f64 {
        if k == 0 {
            let l = self.params.ell_cap;
            return if s < l {
                1.0
            } else {
                (self.params.alpha * (s - l)).exp()
            };
        }
        let pieces = &self.polys[k];
        let piece = pieces.iter().rev().find(|p| s >= p.s_start).unwrap_or(&pieces[0]);
        piece.value(s)
    }

    /// Assembles the bidding function, with an exponential left tail of
    /// the exact remaining mass `R·q_{K+1}` below `−K`.
    pub fn to_function(&self) -> Result<BiddingFunction> {
        let k_max = self.k_max;
        let (q_k, q_next) = (self.q[k_max], self.q[k_max + 1]);
        let tail_mass = self.params.r * q_next;
        let mut segments = vec![Segment::exponential(
            f64::NEG_INFINITY,
            -(k_max as f64),
            q_k,
            q_k / tail_mass,
        )];
        for k in (1..=k_max).rev() {
            let base = -(k as f64);
            let pieces = &self.polys[k];
            for (i, p) in pieces.iter().enumerate() {
                let end = if i + 1 == pieces.len() {
                    base + 1.0
                } else {
                    base + p.s_end
                };
                segments.push(Segment::polynomial(base + p.s_start, end, p.coefficients.clone()));
            }
        }
        let l = self.params.ell_cap;
        if l > 0.0 {
            segments.push(Segment::constant(0.0, l, 1.0));
        }
        segments.push(Segment::exponential(l, f64::INFINITY, 1.0, self.params.alpha));
        BiddingFunction::new(segments, tail_mass)
    }
}

/// `Σ_{j > n} z^j / j!` for `z ≥ 0`, summed without cancellation.
fn exp_tail(z: f64, n: usize) -> f64 {
    let mut term = 1.0;
    for j in 1..=n + 1 {
        term *= z / j as f64;
    }
    let mut sum = 0.0;
    let mut j = n + 1;
    while term > 0.0 && term > 1e-18 * sum {
        sum += term;
        j += 1;
        term *= z / j as f64;
    }
    sum
}

/// Incremental evaluation of `q_k` from the positive-coefficient series.
struct QSeries {
    params: RegimeParams,
    /// `τ_n = Σ_{j > n} α^j/j!`, index 0 unused.
    tau: Vec<f64>,
    /// Coefficients of `1/(1 − Σ τ_n z^n)`.
    c: Vec<f64>,
    q: Vec<f64>,
}

impl QSeries {
    fn new(params: RegimeParams) -> Self {
        QSeries {
            params,
            tau: vec![0.0],
            c: vec![1.0],
            q: vec![1.0],
        }
    }

    fn push_c(&mut self) {
        let m = self.c.len();
        self.tau.push(exp_tail(self.params.alpha, m));
        let cm = (1..=m).map(|n| self.tau[n] * self.c[m - n]).sum();
        self.c.push(cm);
    }

    /// `σ_n = Σ_{m > n} y^m/m! + α^n/n!`.
    fn sigma(&self, n: usize) -> f64 {
        let mut pow = 1.0;
        for j in 1..=n {
            pow *= self.params.alpha / j as f64;
        }
        exp_tail(self.params.y, n) + pow
    }

    /// `Σ_{n > k} σ_n`.
    fn sigma_tail(&self, k: usize) -> f64 {
        let y = self.params.y;
        // Σ_{n>k} Σ_{m>n} y^m/m! = Σ_{m ≥ k+2} (m − k − 1) y^m/m!.
        let mut term = 1.0;
        for j in 1..=k + 2 {
            term *= y / j as f64;
        }
        let mut sum = 0.0;
        let mut m = k + 2;
        while term > 0.0 && (m - k - 1) as f64 * term > 1e-18 * sum {
            sum += (m - k - 1) as f64 * term;
            m += 1;
            term *= y / m as f64;
        }
        sum + exp_tail(self.params.alpha, k)
    }

    fn next(&mut self) -> f64 {
        let k = self.q.len();
        while self.c.len() <= k {
            self.push_c();
        }
        let scale = (-self.params.alpha * k as f64).exp();
        let h = match self.params.regime {
            Regime::Large => self.c[k],
            Regime::Small => {
                // h_k = Σ_{n=2}^k σ_n D_n + (Σ_{m<k} c_m) S_k with
                // D_n = Σ_{m=k−n+1}^{k−1} c_m.
                let mut acc = 0.0;
                let mut d = 0.0;
                for n in 2..=k {
                    d += self.c[k - n + 1];
                    acc += self.sigma(n) * d;
                }
                let prefix: f64 = self.c[..k].iter().sum();
                acc + prefix * self.sigma_tail(k)
            }
        };
        let q = scale * h;
        self.q.push(q);
        q
    }
}

fn check_coefficients(k: usize, coefficients: &[f64]) -> Result<()> {
    match coefficients.iter().find(|c| !c.is_finite() || c.abs() > OVERFLOW_GUARD) {
        Some(&value) => Err(Error::NumericOverflow { k, value }),
        None => Ok(()),
    }
}

fn trim(mut coefficients: Vec<f64>, scale: f64) -> Vec<f64> {
    while coefficients.len() > 1 && *coefficients.last().unwrap() < TRUNCATION * scale {
        coefficients.pop();
    }
    coefficients
}

/// Computes `q_k` and the polynomial pieces, with `K` the first index
/// `≥ MIN_PIECES` where `R·q_K ≤ tail_tol`.
pub fn build_polynomial_family(r: f64, tail_tol: f64) -> Result<PolynomialFamily> {
    if !(tail_tol > 1e-250 && tail_tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail tolerance must lie in (1e-250, 1), got {tail_tol}"
        )));
    }
    let params = RegimeParams::new(r)?;
    let r = params.r;
    let x = 1.0 / r;
    let mut series = QSeries::new(params);
    let mut k_max = 0;
    loop {
        let q = series.next();
        k_max += 1;
        if k_max >= MIN_PIECES && r * q <= tail_tol {
            break;
        }
        if k_max >= MAX_PIECES {
            return Err(Error::NonConvergence {
                iterations: k_max,
                change: r * q,
            });
        }
    }
    series.next();
    let q = series.q;

    let l = params.ell_cap;
    let mut polys = vec![Vec::new()];
    // Values p_m(L), with p_0(L) = 1.
    let mut at_l = vec![1.0];
    for k in 1..=k_max {
        // p_k^{(j)}(0) = x^j q_{k−j}; p_0 is flat on [0, L).
        let mut low = Vec::with_capacity(k + 1);
        let mut factor = 1.0;
        for j in 0..=k {
            if j > 0 {
                factor *= x / j as f64;
            }
            low.push(factor * q[k - j]);
        }
        let low_piece = PolyPiece {
            s_start: 0.0,
            s_end: l,
            coefficients: low,
        };
        at_l.push(low_piece.value(l));

        let mut pieces = Vec::new();
        if l > 0.0 {
            check_coefficients(k, &low_piece.coefficients)?;
            pieces.push(PolyPiece {
                coefficients: trim(low_piece.coefficients, q[k]),
                ..low_piece
            });
        }
        if l < 1.0 {
            // p_k^{(j)}(L) = x^j p_{k−j}(L) for j ≤ k, and
            // x^k α^{j−k} beyond, from the exponential part of p_0.
            let mut high = Vec::with_capacity(k + 32);
            let mut factor = 1.0;
            for j in 0..=k {
                if j > 0 {
                    factor *= x / j as f64;
                }
                high.push(factor * at_l[k - j]);
            }
            let mut j = k;
            loop {
                j += 1;
                factor *= params.alpha / j as f64;
                if factor < TRUNCATION * at_l[k] || j > k + 400 {
                    break;
                }
                high.push(factor);
            }
            check_coefficients(k, &high)?;
            pieces.push(PolyPiece {
                s_start: l,
                s_end: 1.0,
                coefficients: trim(high, at_l[k]),
            });
        }
        polys.push(pieces);
    }

    Ok(PolynomialFamily {
        x,
        params,
        polys,
        q,
        k_max,
    })
}

/// The function `A` for robustness `r`.
pub fn build_algorithm_a(r: f64, tail_tol: f64) -> Result<BiddingFunction> {
    build_polynomial_family(r, tail_tol)?.to_function()
}

/// `max |R·B′(t) − B(t + 1)| / B(t + 1)` over the non-integer grid points
/// with `t < 0`.
pub fn verify_delay_ode(b: &BiddingFunction, r: f64, grid: &GridSpec) -> f64 {
    grid.points()
        .filter(|&t| t < 0.0 && t.fract() != 0.0)
        .map(|t| {
            let next = b.value(t + 1.0);
            (r * b.derivative(t) - next).abs() / next
        })
        .fold(0.0, f64::max)
}

/// Measured against predicted behavior of `A` at one robustness value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremCheck {
    pub r: f64,
    pub regime: Regime,
    pub cons_measured: f64,
    pub cons_predicted: f64,
    pub rob_measured: f64,
}

pub fn evaluate_theorem_guarantees(r: f64) -> Result<TheoremCheck> {
    let params = RegimeParams::new(r)?;
    let b = build_algorithm_a(r, DEFAULT_TAIL_TOL)?;
    let cr = consistency_robustness(&b, &GridSpec::around(0.0));
    Ok(TheoremCheck {
        r: params.r,
        regime: params.regime,
        cons_measured: cr.cons,
        cons_predicted: params.predicted_consistency(),
        rob_measured: cr.rob,
    })
}

/// Consistency just above `R = e` against its leading-order expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPoint {
    pub eps: f64,
    pub cons: f64,
    /// `e − 2^{3/4} e^{3/4} eps^{1/4}`.
    pub predicted: f64,
}

/// `2^{3/4} e^{3/4}`, the leading coefficient of `e − cons` in `eps^{1/4}`.
pub fn asymptotic_coefficient() -> f64 {
    (2.0 * E).powf(0.75)
}

pub fn asymptotic_consistency_curve(eps_list: &[f64]) -> Result<Vec<AsymptoticPoint>> {
    let max_eps = regime_boundary() - E;
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps >= 0.0 && eps <= max_eps) {
                return Err(Error::InvalidArgument(format!(
                    "eps must lie in [0, {max_eps}], got {eps}"
                )));
            }
            let b = build_algorithm_a(E + eps, DEFAULT_TAIL_TOL)?;
            let cons = consistency_robustness(&b, &GridSpec::around(0.0)).cons;
            Ok(AsymptoticPoint {
                eps,
                cons,
                predicted: E - asymptotic_coefficient() * eps.powf(0.25),
            })
        })
        .collect()
}

/// Writes `k,q_k` rows for `k = 0 ..= K`.
pub fn write_qk_csv<W: Write>(family: &PolynomialFamily, mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,q_k")?;
    for (k, q) in family.q.iter().take(family.k_max + 1).enumerate() {
        writeln!(out, "{k},{}", fmt12(*q))?;
    }
    Ok(())
}
