//! Consistency lower bounds from a discretized linear program.
//!
//! Variables `x_k` (`−N ≤ k ≤ M`) are the averages `a∫_{k/a}^{(k+1)/a} B`
//! of a bidding function over a mesh of width `1/a`. The primal minimizes
//! the normalized mass at 0 subject to normalized mass at most `R` at
//! every mesh point; any dual-feasible point certifies a lower bound on the
//! consistency of every `R`-robust strategy. The dual point built here is
//! analytic: it needs only the root `ρ_a` of `X^a − aR(X − 1)` and the
//! positive fixed point `b` of a monotone linear map.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{Source, TradeoffPoint};
use crate::error::{Error, Result};
use crate::format::{fmt12, fmt_sig};
use crate::function::BiddingFunction;
use crate::numerics::{find_root_bracketed, SolverConfig};

/// Fixed-point sweeps before giving up.
pub const MAX_SWEEPS: usize = 1_000_000;

/// Absolute dual-row tolerance, scaled by the magnitude of the row's terms.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// A primal variable: `x_k` or the objective `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Var {
    X(i64),
    C,
}

impl Var {
    /// LP-format name; a negative index `k` is written `n|k|`.
    pub fn name(self) -> String {
        match self {
            Var::X(k) => format!("x_{}", index_name(k)),
            Var::C => "C".to_string(),
        }
    }

    fn parse(s: &str) -> Option<Var> {
        if s == "C" {
            return Some(Var::C);
        }
        s.strip_prefix("x_").and_then(parse_index).map(Var::X)
    }
}

fn index_name(k: i64) -> String {
    if k < 0 {
        format!("n{}", -k)
    } else {
        k.to_string()
    }
}

fn parse_index(s: &str) -> Option<i64> {
    match s.strip_prefix('n') {
        Some(rest) => rest.parse::<i64>().ok().filter(|&v| v > 0).map(|v| -v),
        None => s.parse().ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
        }
    }
}

/// One named linear constraint `Σ coef·var (≤|≥) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(Var, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// The primal program for mesh `a`, `N` points left of 0 and `M` right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalLP {
    pub a: usize,
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub rows: Vec<Row>,
}

fn check_r(r: f64) -> Result<()> {
    if !r.is_finite() || r < std::f64::consts::E {
        return Err(Error::RobustnessBelowE { r });
    }
    Ok(())
}

/// Builds the rows labeled `lam`, `gam_k`, `bet_k` and `theta`.
pub fn build_primal(r: f64, a: usize, n: usize, m: usize) -> Result<PrimalLP> {
    check_r(r)?;
    if a < 1 || n < 1 {
        return Err(Error::InvalidArgument(format!(
            "need a >= 1 and n >= 1, got a = {a}, n = {n}"
        )));
    }
    let (lo, hi, ai) = (-(n as i64), m as i64, a as i64);
    let inv_a = 1.0 / a as f64;
    let mut rows = vec![Row {
        name: "lam".into(),
        terms: vec![(Var::X(0), 1.0)],
        sense: Sense::Ge,
        rhs: 1.0,
    }];
    for k in lo..hi {
        rows.push(Row {
            name: format!("gam_{}", index_name(k)),
            terms: vec![(Var::X(k), 1.0), (Var::X(k + 1), -1.0)],
            sense: Sense::Le,
            rhs: 0.0,
        });
    }
    for k in lo..=hi {
        // k ≤ min(M, k + a − 1), so x_k always appears in its own sum.
        let terms = (lo..=hi.min(k + ai - 1))
            .map(|j| {
                let c = if j == k { inv_a - r } else { inv_a };
                (Var::X(j), c)
            })
            .collect();
        rows.push(Row {
            name: format!("bet_{}", index_name(k)),
            terms,
            sense: Sense::Le,
            rhs: 0.0,
        });
    }
    let mut terms: Vec<(Var, f64)> = (lo..=hi.min(ai - 1)).map(|j| (Var::X(j), inv_a)).collect();
    terms.push((Var::C, -1.0));
    rows.push(Row {
        name: "theta".into(),
        terms,
        sense: Sense::Le,
        rhs: 0.0,
    });
    Ok(PrimalLP { a, n, m, r, rows })
}

/// Values for the primal variables: `x[k + N]` holds `x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalPoint {
    pub x: Vec<f64>,
    pub c: f64,
}

impl PrimalLP {
    pub fn variables(&self) -> Vec<Var> {
        let mut v: Vec<Var> = (-(self.n as i64)..=self.m as i64).map(Var::X).collect();
        v.push(Var::C);
        v
    }

    fn value(&self, p: &PrimalPoint, v: Var) -> f64 {
        match v {
            Var::X(k) => p.x[(k + self.n as i64) as usize],
            Var::C => p.c,
        }
    }

    /// Largest amount by which `p` violates a row or a sign bound.
    pub fn max_violation(&self, p: &PrimalPoint) -> f64 {
        let mut worst: f64 = (-p.c).max(0.0);
        for &x in &p.x {
            worst = worst.max(-x);
        }
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(v, c)| c * self.value(p, v)).sum();
            let gap = match row.sense {
                Sense::Le => lhs - row.rhs,
                Sense::Ge => row.rhs - lhs,
            };
            worst = worst.max(gap);
        }
        worst
    }

    /// CPLEX LP text with a header comment carrying `a`, `n`, `m`, `r`.
    pub fn to_lp_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "\\ online bidding lower bound: a={} n={} m={} r={}",
            self.a,
            self.n,
            self.m,
            fmt_sig(self.r, 17)
        );
        s.push_str("Minimize\n obj: + 1 C\nSubject To\n");
        for row in &self.rows {
            let _ = write!(s, " {}:", row.name);
            for &(v, c) in &row.terms {
                let sign = if c < 0.0 { '-' } else { '+' };
                let _ = write!(s, " {sign} {} {}", fmt_sig(c.abs(), 17), v.name());
            }
            let _ = writeln!(s, " {} {}", row.sense.symbol(), fmt_sig(row.rhs, 17));
        }
        s.push_str("Bounds\n");
        for v in self.variables() {
            let _ = writeln!(s, " {} >= 0", v.name());
        }
        s.push_str("End\n");
        s
    }

    /// Parses text produced by [`PrimalLP::to_lp_text`].
    pub fn from_lp_text(text: &str) -> Result<Self> {
        let ctx = "LP text";
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix('\\'))
            .ok_or_else(|| Error::parse(ctx, "missing parameter header comment"))?;
        let mut params = std::collections::HashMap::new();
        for tok in header.split_whitespace() {
            if let Some((k, v)) = tok.split_once('=') {
                params.insert(k, v);
            }
        }
        let get = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| Error::parse(ctx, format!("header lacks `{k}=`")))
        };
        let parse_usize =
            |k: &str| -> Result<usize> { get(k)?.parse().map_err(|e| Error::parse(ctx, format!("{k}: {e}"))) };
        let a = parse_usize("a")?;
        let n = parse_usize("n")?;
        let m = parse_usize("m")?;
        let r: f64 = get("r")?.parse().map_err(|e| Error::parse(ctx, format!("r: {e}")))?;

        let mut section = "";
        let mut rows = Vec::new();
        for line in lines {
            match line {
                "Minimize" | "Subject To" | "Bounds" => {
                    section = line;
                    continue;
                }
                "End" => break,
                _ => {}
            }
            if section == "Subject To" {
                rows.push(parse_row(line)?);
            }
        }
        Ok(PrimalLP { a, n, m, r, rows })
    }
}

fn parse_row(line: &str) -> Result<Row> {
    let ctx = "LP constraint";
    let (name, body) = line
        .split_once(':')
        .ok_or_else(|| Error::parse(ctx, format!("no row name in `{line}`")))?;
    let tokens: Vec<&str> = body.split_whitespace().collect();
    let mut terms = Vec::new();
    let mut i = 0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    while i < tokens.len() {
        let tok = tokens[i];
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            "<=" | ">=" => {
                let sense = if tok == "<=" { Sense::Le } else { Sense::Ge };
                let rhs = tokens
                    .get(i + 1)
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| Error::parse(ctx, format!("bad right-hand side in `{line}`")))?;
                return Ok(Row {
                    name: name.trim().to_string(),
                    terms,
                    sense,
                    rhs,
                });
            }
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    coef = Some(v);
                } else {
                    let var = Var::parse(tok).ok_or_else(|| Error::parse(ctx, format!("unknown variable `{tok}`")))?;
                    terms.push((var, sign * coef.take().unwrap_or(1.0)));
                    sign = 1.0;
                }
            }
        }
        i += 1;
    }
    Err(Error::parse(ctx, format!("no comparison in `{line}`")))
}

pub fn export_lp_text(p: &PrimalLP, path: &Path) -> Result<()> {
    std::fs::write(path, p.to_lp_text()).map_err(|e| Error::io(path, e))
}

/// Discretizes `t ↦ B(t + t0)` into primal values, scaled so `x_0 = 1`,
/// with `C` set to the smallest value satisfying the `theta` row.
///
/// The point is primal feasible whenever `B` is `R`-robust (up to
/// quadrature rounding); its objective then upper-bounds every certificate.
pub fn discretize(b: &BiddingFunction, lp: &PrimalLP, t0: f64) -> PrimalPoint {
    let a = lp.a as f64;
    let cell = |k: i64| {
        let lo = t0 + k as f64 / a;
        let hi = t0 + (k + 1) as f64 / a;
        a * (b.cumulative_mass(hi) - b.cumulative_mass(lo))
    };
    let scale = cell(0);
    let x: Vec<f64> = (-(lp.n as i64)..=lp.m as i64).map(|k| cell(k) / scale).collect();
    let top = (lp.m as i64).min(lp.a as i64 - 1);
    let c = x[..=(top + lp.n as i64) as usize].iter().sum::<f64>() / a;
    PrimalPoint { x, c }
}

/// The real root of `X^a − aR(X − 1)` in `(1, 1 + 1/a)`.
pub fn rho_root(a: usize, r: f64) -> Result<f64> {
    check_r(r)?;
    if a < 1 {
        return Err(Error::InvalidArgument("a must be at least 1".into()));
    }
    let af = a as f64;
    let cfg = SolverConfig {
        abs_tol: 1e-300,
        rel_tol: 1e-300,
        max_iter: 2000,
    };
    find_root_bracketed(|x| x.powi(a as i32) - af * r * (x - 1.0), 1.0, 1.0 + 1.0 / af, &cfg)
}

/// `lim_N λ_{a,N} = R − 1/(a(ρ_a − 1))`.
pub fn lambda_limit(a: usize, r: f64) -> Result<f64> {
    let rho = rho_root(a, r)?;
    Ok(r - 1.0 / (a as f64 * (rho - 1.0)))
}

/// Positive fixed point of `aR·b_n = 1 + Σ_{m=1}^{min(N, n+a−1)} b_m`,
/// `1 ≤ n ≤ N`, by iterating the map from 0.
///
/// Iterates increase monotonically. Iteration stops once no component moves
/// by more than `max(tol, 4ε)·max(1, b_n)`; the `4ε` floor catches the
/// floating-point plateau. Returns `b[n − 1] = b_n` and the sweep count.
pub fn fixed_point_b_with_sweeps(a: usize, n_cap: usize, r: f64, tol: f64) -> Result<(Vec<f64>, usize)> {
    check_r(r)?;
    if a < 1 || n_cap < 1 {
        return Err(Error::InvalidArgument(format!(
            "need a >= 1 and n_cap >= 1, got a = {a}, n_cap = {n_cap}"
        )));
    }
    let scale = 1.0 / (a as f64 * r);
    let tol = tol.max(4.0 * f64::EPSILON);
    let mut b = vec![0.0; n_cap];
    let mut prefix = vec![0.0; n_cap + 1];
    let mut change = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        for i in 0..n_cap {
            prefix[i + 1] = prefix[i] + b[i];
        }
        change = 0.0;
        for (i, bn) in b.iter_mut().enumerate() {
            let top = n_cap.min(i + a);
            let next = scale * (1.0 + prefix[top]);
            change = f64::max(change, (next - *bn).abs() / bn.abs().max(1.0));
            *bn = next;
        }
        if change <= tol {
            return Ok((b, sweep));
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_SWEEPS,
        change,
    })
}

pub fn fixed_point_b(a: usize, n_cap: usize, r: f64, tol: f64) -> Result<Vec<f64>> {
    Ok(fixed_point_b_with_sweeps(a, n_cap, r, tol)?.0)
}

/// A dual point `(λ, β, γ)`.
///
/// `beta[k + N]` holds `β_k` for `−N ≤ k ≤ M`; `gamma[k + N + 1]` holds
/// `γ_k` for `−N − 1 ≤ k ≤ M`, whose end entries are 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub a: usize,
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Largest scaled shortfall over all dual rows and sign constraints;
    /// zero for a feasible point.
    pub max_violation: f64,
}

/// Row-by-row residuals of a dual point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCheck {
    /// `LHS − RHS` for the row of `x_k`, indexed by `k + N`.
    pub residuals: Vec<f64>,
    /// Largest magnitude among each row's terms, for scaled tolerances.
    pub row_scales: Vec<f64>,
    pub min_residual: f64,
    /// Largest shortfall divided by `max(1, row scale)`, or a negative
    /// multiplier; 0 when feasible.
    pub max_violation: f64,
    pub worst_row: i64,
}

impl DualCertificate {
    fn beta_at(&self, k: i64) -> f64 {
        self.beta[(k + self.n as i64) as usize]
    }

    fn gamma_at(&self, k: i64) -> f64 {
        self.gamma[(k + self.n as i64 + 1) as usize]
    }

    /// Evaluates every dual row independently of how the point was built.
    pub fn check(&self) -> DualCheck {
        let (lo, hi, a) = (-(self.n as i64), self.m as i64, self.a as i64);
        let inv_a = 1.0 / self.a as f64;
        // suffix[i] = Σ_{j ≥ lo + i} β_j.
        let len = self.beta.len();
        let mut suffix = vec![0.0; len + 1];
        for i in (0..len).rev() {
            suffix[i] = suffix[i + 1] + self.beta[i];
        }
        let mut residuals = Vec::with_capacity(len);
        let mut row_scales = Vec::with_capacity(len);
        let mut max_violation: f64 = 0.0;
        let mut min_residual = f64::INFINITY;
        let mut worst_row = lo;
        for k in lo..=hi {
            let indicator = if k < a { inv_a } else { 0.0 };
            let from = (k + 1 - a).max(lo);
            let beta_sum = inv_a * suffix[(from - lo) as usize];
            let lam = if k == 0 { self.lambda } else { 0.0 };
            let rb = self.r * self.beta_at(k);
            let (g, g_prev) = (self.gamma_at(k), self.gamma_at(k - 1));
            let res = indicator + beta_sum + g - g_prev - lam - rb;
            let scale = [indicator, beta_sum, g, g_prev, lam, rb]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            let shortfall = (-res).max(0.0) / scale.max(1.0);
            if shortfall > max_violation {
                max_violation = shortfall;
                worst_row = k;
            }
            if res < min_residual {
                min_residual = res;
                if max_violation == 0.0 {
                    worst_row = k;
                }
            }
            residuals.push(res);
            row_scales.push(scale);
        }
        let negative = std::iter::once(self.lambda)
            .chain(self.beta.iter().copied())
            .chain(self.gamma.iter().copied())
            .fold(0.0f64, |m, v| m.max(-v));
        DualCheck {
            residuals,
            row_scales,
            min_residual,
            max_violation: max_violation.max(negative),
            worst_row,
        }
    }

    /// Fails with `FEASIBILITY_VIOLATION` if any row falls short by more
    /// than [`FEASIBILITY_TOL`] (scaled by the row magnitude).
    pub fn verify(&self) -> Result<DualCheck> {
        let check = self.check();
        if check.max_violation > FEASIBILITY_TOL {
            return Err(Error::FeasibilityViolation {
                row: format!("x_{}", check.worst_row),
                violation: check.max_violation,
            });
        }
        Ok(check)
    }
}

/// The analytic dual point for mesh `a`, `N = n`, `M = a − 1`.
pub fn build_dual_certificate(a: usize, n: usize, r: f64) -> Result<DualCertificate> {
    let b = fixed_point_b(a, n, r, 0.0)?;
    let m = a - 1;
    let b_at = |j: usize| if j >= 1 && j <= n { b[j - 1] } else { 0.0 };
    let inv_a = 1.0 / a as f64;

    let mut beta = vec![0.0; n + m + 1];
    for nn in 1..=n {
        beta[n - nn] = b_at(nn);
    }

    // γ_i = (1/a) Σ_{m'=i+1}^{a−1} (1 + Σ_{j=1}^{a−1−m'} b_j) for 0 ≤ i ≤ a − 2.
    let mut gamma = vec![0.0; n + m + 2];
    let mut partial = vec![0.0; a];
    for j in 1..a {
        partial[j] = partial[j - 1] + b_at(j);
    }
    let mut acc = 0.0;
    for i in (0..a.saturating_sub(1)).rev() {
        let mp = i + 1;
        acc += inv_a * (1.0 + partial[a - 1 - mp]);
        gamma[i + n + 1] = acc;
    }
    let lambda = 1.0 + inv_a * (1..a).map(|mm| (a - mm) as f64 * b_at(mm)).sum::<f64>();

    let mut cert = DualCertificate {
        a,
        n,
        m,
        r,
        lambda,
        beta,
        gamma,
        max_violation: 0.0,
    };
    let check = cert.verify()?;
    cert.max_violation = check.max_violation;
    Ok(cert)
}

/// Certified `(r, λ)` points, one certificate per `r`, in parallel.
pub fn lower_bound_curve(r_list: &[f64], a: usize, n: usize) -> Result<Vec<TradeoffPoint>> {
    r_list
        .par_iter()
        .map(|&r| {
            let cert = build_dual_certificate(a, n, r)?;
            Ok(TradeoffPoint {
                r,
                c: cert.lambda,
                source: Source::LowerBound,
            })
        })
        .collect()
}

/// Writes `r,lambda,a,n` rows.
pub fn write_curve_csv<W: Write>(points: &[TradeoffPoint], a: usize, n: usize, mut out: W) -> std::io::Result<()> {
    writeln!(out, "r,lambda,a,n")?;
    for p in points {
        writeln!(out, "{},{},{a},{n}", fmt12(p.r), fmt12(p.c))?;
    }
    Ok(())
}
