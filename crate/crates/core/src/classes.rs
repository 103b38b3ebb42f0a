//! The strategy classes E, D and I and their consistency/robustness.
//!
//! * Class E: `B(t) = e^{t/w}`, constant normalized mass `w e^{1/w}`.
//! * Class D: `B(t) = exp(⌊t⌋(ℓ + h) + (t − ⌊t⌋)ℓ)`, slope `ℓ` inside each
//!   unit interval and a jump by `e^h` at every integer.
//! * Class I: continuous, piecewise exponential with slope `ℓ_i` on
//!   `[i, i + 1)`, eventually constant slopes on both sides.

use std::f64::consts::E;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt12;
use crate::function::{BiddingFunction, Segment};
use crate::numerics::{expm1_over, find_root_bracketed, solve_r0, SolverConfig, WorkBounds};

/// Which construction a tradeoff point comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    ClassE,
    ClassD,
    ClassI,
    AlgorithmA,
    LowerBound,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::ClassE => "ClassE",
            Source::ClassD => "ClassD",
            Source::ClassI => "ClassI",
            Source::AlgorithmA => "AlgorithmA",
            Source::LowerBound => "LowerBound",
        }
    }
}

/// A `(robustness, consistency)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub r: f64,
    pub c: f64,
    pub source: Source,
}

/// Writes points as CSV with header `r,c,source`.
pub fn write_tradeoff_csv<W: Write>(points: &[TradeoffPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "r,c,source")?;
    for p in points {
        writeln!(out, "{},{},{}", fmt12(p.r), fmt12(p.c), p.source.as_str())?;
    }
    Ok(())
}

// ---------------------------------------------------------------- class E

pub fn class_e(w: f64) -> Result<BiddingFunction> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidArgument(format!("class E needs w > 0, got {w}")));
    }
    BiddingFunction::new(
        vec![Segment::exponential(f64::NEG_INFINITY, f64::INFINITY, 1.0, 1.0 / w)],
        0.0,
    )
}

// ---------------------------------------------------------------- class D

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDParams {
    pub ell: f64,
    pub h: f64,
}

impl ClassDParams {
    pub fn new(ell: f64, h: f64) -> Result<Self> {
        if !(ell >= 0.0 && h >= 0.0 && ell + h > 0.0 && (ell + h).is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "class D needs l, h >= 0 with l + h > 0, got l = {ell}, h = {h}"
            )));
        }
        Ok(ClassDParams { ell, h })
    }

    /// `B_{ℓ,h}(t)` evaluated directly.
    pub fn value(&self, t: f64) -> f64 {
        let k = t.floor();
        (k * (self.ell + self.h) + (t - k) * self.ell).exp()
    }

    /// `cons = E(ℓ)·e^{ℓ+h}/(e^{ℓ+h} − 1)` with `E(x) = (e^x − 1)/x`.
    pub fn consistency(&self) -> f64 {
        expm1_over(self.ell) / -(-(self.ell + self.h)).exp_m1()
    }

    /// `rob = cons · e^h`.
    pub fn robustness(&self) -> f64 {
        self.consistency() * self.h.exp()
    }
}

/// Unit periods represented explicitly: `[CLASS_D_PERIODS.0, CLASS_D_PERIODS.1)`.
pub const CLASS_D_PERIODS: (i32, i32) = (-64, 64);

/// Class-D bidding function, explicit on `[−64, 64)`.
///
/// Below `−64` an exponential tail carries exactly the mass of the
/// omitted periods and starts at the left limit of `B` at `−64`; above
/// `64` the function continues with the period-average slope `ℓ + h`.
pub fn class_d(p: ClassDParams) -> Result<BiddingFunction> {
    let p = ClassDParams::new(p.ell, p.h)?;
    let a = p.ell + p.h;
    let (i_min, i_max) = CLASS_D_PERIODS;
    let mut segs = Vec::with_capacity((i_max - i_min) as usize + 2);
    let left_value = ((i_min - 1) as f64 * a + p.ell).exp();
    let tail_mass = (i_min as f64 * a).exp() * expm1_over(p.ell) / a.exp_m1();
    segs.push(Segment::exponential(
        f64::NEG_INFINITY,
        i_min as f64,
        left_value,
        left_value / tail_mass,
    ));
    for i in i_min..i_max {
        let (t0, t1) = (i as f64, (i + 1) as f64);
        let v = (i as f64 * a).exp();
        segs.push(if p.ell > 0.0 {
            Segment::exponential(t0, t1, v, p.ell)
        } else {
            Segment::constant(t0, t1, v)
        });
    }
    segs.push(Segment::exponential(
        i_max as f64,
        f64::INFINITY,
        (i_max as f64 * a).exp(),
        a,
    ));
    BiddingFunction::new(segs, tail_mass)
}

/// `Φ(ℓ) = (1 − ℓ + e^ℓ(2ℓ − 1))/ℓ²`, increasing from `Φ(0) = 3/2` to
/// `Φ(1) = e`. The class-D optimal slope for consistency `C` solves
/// `Φ(ℓ) = C`.
fn class_d_phi(ell: f64) -> f64 {
    if ell.abs() < 0.1 {
        // Σ_i (2i + 3)/(i + 2)! ℓ^i
        let mut sum = 0.0;
        let mut fact = 2.0;
        let mut pow = 1.0;
        for i in 0..20 {
            sum += (2 * i + 3) as f64 / fact * pow;
            pow *= ell;
            fact *= (i + 3) as f64;
        }
        sum
    } else {
        (1.0 - ell + ell.exp() * (2.0 * ell - 1.0)) / (ell * ell)
    }
}

/// Best class-D robustness for consistency `c ∈ (1, e]`.
pub fn class_d_pareto(c: f64) -> Result<(ClassDParams, f64)> {
    if !(c > 1.0 && c <= E * (1.0 + 1e-15)) {
        return Err(Error::ConsistencyOutOfRange { c });
    }
    let c = c.min(E);
    if c <= 1.5 {
        let h = (c / (c - 1.0)).ln();
        return Ok((ClassDParams::new(0.0, h)?, c * c / (c - 1.0)));
    }
    let cfg = SolverConfig::default();
    let ell = if c >= E {
        1.0
    } else {
        find_root_bracketed(|l| class_d_phi(l) - c, 0.0, 1.0, &cfg)?
    };
    // e^h = ℓCe^{−ℓ}/(ℓC + 1 − e^ℓ) = Ce^{−ℓ}/(C − E(ℓ)).
    let eh = c * (-ell).exp() / (c - expm1_over(ell));
    let h = eh.ln().max(0.0);
    Ok((ClassDParams::new(ell, h)?, c * eh))
}

/// Pareto-best class-D strategy with robustness `r ≥ e`: the smallest
/// consistency whose optimal robustness is `r`.
pub fn class_d_for_robustness(r: f64) -> Result<(ClassDParams, f64)> {
    if !(r >= E - 1e-12) {
        return Err(Error::RobustnessBelowE { r });
    }
    if r >= 4.5 {
        let c = (r - (r * r - 4.0 * r).sqrt()) / 2.0;
        return Ok((ClassDParams::new(0.0, (c / (c - 1.0)).ln())?, c));
    }
    if r <= E {
        return Ok((ClassDParams::new(1.0, 0.0)?, E));
    }
    let cfg = SolverConfig::default();
    let c = find_root_bracketed(
        |c| class_d_pareto(c).map(|(_, rr)| rr - r).unwrap_or(f64::NAN),
        1.5,
        E,
        &cfg,
    )?;
    Ok((class_d_pareto(c)?.0, c))
}

// ---------------------------------------------------------------- class I

/// Slopes `ℓ_i` of a class-I function: `left` for `i < i_min`,
/// `explicit[i − i_min]` for `i_min ≤ i < i_min + len`, `right` beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeSequence {
    pub i_min: i64,
    pub explicit: Vec<f64>,
    pub left: f64,
    pub right: f64,
}

impl SlopeSequence {
    pub fn i_max(&self) -> i64 {
        self.i_min + self.explicit.len() as i64
    }

    pub fn slope(&self, i: i64) -> f64 {
        if i < self.i_min {
            self.left
        } else if i >= self.i_max() {
            self.right
        } else {
            self.explicit[(i - self.i_min) as usize]
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.left > 0.0) {
            return Err(Error::DivergentTail);
        }
        if !(self.right > 0.0) || self.explicit.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(
                "class I slopes must be finite, >= 0, and > 0 asymptotically".into(),
            ));
        }
        Ok(())
    }

    /// Work `w_B(i)` at integer `i`, from `w = 1/ℓ_left` far left and
    /// `w_{i+1} = e^{−ℓ_i}(w_i + E(ℓ_i))`.
    pub fn work_at_integer(&self, i: i64) -> Result<f64> {
        self.validate()?;
        let mut w = 1.0 / self.left;
        for j in self.i_min..i {
            let l = self.slope(j);
            w = (-l).exp() * (w + expm1_over(l));
        }
        Ok(w)
    }

    /// The function with `B(0) = 1`. Exact: no truncation.
    pub fn to_function(&self) -> Result<BiddingFunction> {
        self.validate()?;
        // log B at integer points, anchored at log B(0) = 0.
        let log_b = |i: i64| -> f64 {
            if i >= 0 {
                (0..i).map(|j| self.slope(j)).sum()
            } else {
                -(i..0).map(|j| self.slope(j)).sum::<f64>()
            }
        };
        let (lo, hi) = (self.i_min.min(0), self.i_max().max(1));
        let mut segs = vec![Segment::exponential(
            f64::NEG_INFINITY,
            lo as f64,
            log_b(lo).exp(),
            self.left,
        )];
        for i in lo..hi {
            let (t0, t1, v) = (i as f64, (i + 1) as f64, log_b(i).exp());
            let l = self.slope(i);
            segs.push(if l > 0.0 {
                Segment::exponential(t0, t1, v, l)
            } else {
                Segment::constant(t0, t1, v)
            });
        }
        segs.push(Segment::exponential(
            hi as f64,
            f64::INFINITY,
            log_b(hi).exp(),
            self.right,
        ));
        BiddingFunction::new(segs, 0.0)
    }
}

/// `CR_B(t) = e^{(1−f)ℓ_k}(w_{k+1} + f·E(fℓ_{k+1}))` with `k = ⌊t⌋`,
/// `f = t − k`.
pub fn class_i_mass(s: &SlopeSequence, t: f64) -> Result<f64> {
    let k = t.floor() as i64;
    let f = t - k as f64;
    let w_next = s.work_at_integer(k + 1)?;
    let l_next = s.slope(k + 1);
    Ok(((1.0 - f) * s.slope(k)).exp() * (w_next + f * expm1_over(f * l_next)))
}

/// Class-I slopes achieving the best consistency at robustness `r`,
/// together with that consistency.
///
/// For `r ≥ R0` the slopes are `1/w_lo` left of 0, 0 on `[0, 1)` and
/// `1/w_hi` from 1 on, with consistency `w_lo + 1`. Below `R0`, the slope
/// `ℓ*` on `[0, 1)` solves `e^{−ℓ}(w_lo + E(ℓ)) = w_hi`, making the work at
/// 1 equal to `w_hi`; the consistency is `w_lo + E(ℓ*)`.
pub fn class_i_pareto_slopes(r: f64) -> Result<(SlopeSequence, f64)> {
    let cfg = SolverConfig::default();
    let wb = WorkBounds::new(r)?;
    let r0 = solve_r0(&cfg)?;
    let ell = if wb.w_hi - wb.w_lo >= 1.0 || r >= r0 {
        0.0
    } else if wb.w_hi == wb.w_lo {
        1.0
    } else {
        let g = |l: f64| (-l).exp() * (wb.w_lo + expm1_over(l)) - wb.w_hi;
        find_root_bracketed(g, 0.0, 1.0 / wb.w_hi, &cfg)?
    };
    let seq = SlopeSequence {
        i_min: 0,
        explicit: vec![ell],
        left: 1.0 / wb.w_lo,
        right: 1.0 / wb.w_hi,
    };
    Ok((seq, wb.w_lo + expm1_over(ell)))
}

pub fn class_i_pareto(r: f64) -> Result<(BiddingFunction, f64)> {
    let (seq, c) = class_i_pareto_slopes(r)?;
    Ok((seq.to_function()?, c))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::LN_2;

    use super::*;
    use crate::function::{consistency_robustness, GridSpec};
    use crate::numerics::exp_mass;

    #[test]
    fn class_e_constant_mass() {
        for w in [1.0, 0.464405120580622, 2.797962307543088] {
            let b = class_e(w).unwrap();
            for t in [-3.0, 0.0, 0.4, 7.0] {
                assert!((b.normalized_mass(t) - exp_mass(w)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn doubling_closed_forms() {
        let p = ClassDParams::new(0.0, LN_2).unwrap();
        assert!((p.consistency() - 2.0).abs() < 1e-15);
        assert!((p.robustness() - 4.0).abs() < 1e-15);
        let b = class_d(p).unwrap();
        assert!((b.cumulative_mass(0.0) - 1.0).abs() < 1e-14);
        assert_eq!(b.value(2.5), 4.0);
    }

    #[test]
    fn class_d_function_matches_direct_formula() {
        let p = ClassDParams::new(0.4, 0.3).unwrap();
        let b = class_d(p).unwrap();
        for i in 0..200 {
            let t = -10.0 + 0.1 * i as f64 + 0.013;
            assert!((b.value(t) / p.value(t) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn class_d_periodic_mass() {
        let b = class_d(ClassDParams::new(0.7, 0.2).unwrap()).unwrap();
        for i in 0..40 {
            let t = -5.0 + 0.173 * i as f64;
            let d = b.normalized_mass(t) - b.normalized_mass(t + 1.0);
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn class_d_grid_agrees_with_formulas() {
        for &(l, h) in &[(0.0, 0.5), (0.3, 0.6), (1.0, 0.0), (0.5, 1e-3), (2.0, 1.0)] {
            let p = ClassDParams::new(l, h).unwrap();
            let cr = consistency_robustness(&class_d(p).unwrap(), &GridSpec::around(0.0));
            assert!((cr.cons - p.consistency()).abs() <= 1e-8, "{l} {h}");
            assert!((cr.rob - p.robustness()).abs() <= 1e-8, "{l} {h}");
        }
    }

    #[test]
    fn class_d_pareto_examples() {
        let (p, r) = class_d_pareto(1.5).unwrap();
        assert_eq!(p.ell, 0.0);
        assert!((r - 4.5).abs() < 1e-12);
        let (_, r) = class_d_pareto(1.2).unwrap();
        assert!((r - 7.2).abs() < 1e-12);
        let (p, r) = class_d_pareto(2.0).unwrap();
        assert!(r < 4.0);
        assert!((p.consistency() - 2.0).abs() < 1e-10);
        assert!((p.robustness() - r).abs() < 1e-10);
        let (p, r) = class_d_pareto(E).unwrap();
        assert!((r - E).abs() < 1e-12 && p.h == 0.0);
        assert_eq!(class_d_pareto(1.0).unwrap_err().code(), "CONSISTENCY_OUT_OF_RANGE");
        assert!(class_d_pareto(2.8).is_err());
    }

    #[test]
    fn phi_series_and_direct_agree() {
        for l in [0.09, 0.1, 0.11] {
            let direct = (1.0 - l + f64::exp(l) * (2.0 * l - 1.0)) / (l * l);
            assert!((class_d_phi(l) - direct).abs() < 1e-12);
        }
        assert!((class_d_phi(0.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn class_d_for_robustness_inverts_pareto() {
        for r in [2.8, 3.0, 3.5, 4.0, 4.4, 4.5, 6.0] {
            let (p, c) = class_d_for_robustness(r).unwrap();
            assert!((p.robustness() - r).abs() < 1e-8, "r={r}");
            assert!((p.consistency() - c).abs() < 1e-8);
        }
        let (_, c4) = class_d_for_robustness(4.0).unwrap();
        assert!((c4 - 1.6948).abs() < 1e-3);
    }

    #[test]
    fn class_i_at_four() {
        let (seq, c) = class_i_pareto_slopes(4.0).unwrap();
        assert!((c - 1.464405120580622).abs() < 1e-9);
        assert!((class_i_mass(&seq, 0.0).unwrap() - c).abs() < 1e-12);
        let b = seq.to_function().unwrap();
        for i in 0..60 {
            let t = -4.0 + 0.137 * i as f64;
            let direct = b.normalized_mass(t);
            assert!((class_i_mass(&seq, t).unwrap() - direct).abs() < 1e-11, "t={t}");
        }
        let wb = WorkBounds::new(4.0).unwrap();
        for i in -5..6 {
            let w = seq.work_at_integer(i).unwrap();
            assert!(w >= wb.w_lo - 1e-12 && w <= wb.w_hi + 1e-12);
        }
    }

    #[test]
    fn class_i_regimes_meet_at_r0() {
        let r0 = solve_r0(&SolverConfig::default()).unwrap();
        let wb = WorkBounds::new(r0).unwrap();
        assert!((wb.w_lo + 1.0 - wb.w_hi).abs() < 1e-8);
        let (_, c) = class_i_pareto_slopes(r0 - 1e-9).unwrap();
        assert!((c - (wb.w_lo + 1.0)).abs() < 1e-7);
    }

    #[test]
    fn class_i_at_e_is_exponential() {
        let (seq, c) = class_i_pareto_slopes(E).unwrap();
        assert!((c - E).abs() < 1e-12);
        assert_eq!(seq.explicit, vec![1.0]);
    }

    #[test]
    fn constant_slopes_reduce_to_class_e() {
        let w = 0.8;
        let seq = SlopeSequence {
            i_min: -2,
            explicit: vec![1.0 / w; 4],
            left: 1.0 / w,
            right: 1.0 / w,
        };
        for t in [-5.5, -0.2, 3.7] {
            assert!((class_i_mass(&seq, t).unwrap() - exp_mass(w)).abs() < 1e-12);
        }
        let bad = SlopeSequence { left: 0.0, ..seq };
        assert_eq!(class_i_mass(&bad, 0.0).unwrap_err().code(), "DIVERGENT_TAIL");
    }

    #[test]
    fn tradeoff_csv() {
        let pts = [TradeoffPoint {
            r: 4.0,
            c: 1.2020376925,
            source: Source::AlgorithmA,
        }];
        let mut out = Vec::new();
        write_tradeoff_csv(&pts, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "r,c,source\n4,1.2020376925,AlgorithmA\n"
        );
    }
}
