//! Piecewise-analytic bidding functions.
//!
//! A bidding function `B` is nondecreasing and positive with `B → 0` at
//! `−∞` and `B → ∞` at `+∞`. It induces the randomized bid sequence
//! `(B(i + λ))_{i∈Z}` with `λ ~ U[0, 1]`, whose expected normalized cost
//! at threshold `u` equals the normalized mass `F(t + 1)/B(t)` at
//! `t = B⁻(u)`, with `F(t) = ∫_{−∞}^t B`.

mod estimate;
mod grid;
mod sample;
mod segment;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use estimate::{estimate_function_from_samples, MIN_ESTIMATION_SAMPLES};
pub use grid::{consistency_robustness, ConsRob, GridSpec};
pub(crate) use sample::lattice_cost;
pub use sample::{sample_sequence, sample_with_lambda, BidSequenceSample};
pub use segment::{Segment, SegmentKind};

/// Which one-sided value to use at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `B(t)` as owned by the segment starting at `t` (the default).
    Right,
    /// `lim_{x→t⁻} B(x)`.
    Left,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawFunction {
    segments: Vec<Segment>,
    tail_mass_bound: f64,
}

/// A validated piecewise-analytic bidding function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawFunction", into = "RawFunction")]
pub struct BiddingFunction {
    segments: Vec<Segment>,
    tail_mass_bound: f64,
    starts: Vec<f64>,
    /// `F(t_start)` for every segment.
    prefix: Vec<f64>,
    /// `B(t_start)` (0 for the left tail segment).
    start_values: Vec<f64>,
    /// `B(t_end⁻)` (`∞` for the right tail segment).
    end_values: Vec<f64>,
}

impl PartialEq for BiddingFunction {
    fn eq(&self, other: &Self) -> bool {
        self.segments == other.segments && self.tail_mass_bound == other.tail_mass_bound
    }
}

impl TryFrom<RawFunction> for BiddingFunction {
    type Error = Error;

    fn try_from(raw: RawFunction) -> Result<Self> {
        BiddingFunction::new(raw.segments, raw.tail_mass_bound)
    }
}

impl From<BiddingFunction> for RawFunction {
    fn from(f: BiddingFunction) -> Self {
        RawFunction {
            segments: f.segments,
            tail_mass_bound: f.tail_mass_bound,
        }
    }
}

/// Points checked inside each finite segment for monotonicity.
const MONOTONE_PROBES: usize = 32;
const MONOTONE_SLACK: f64 = 1e-12;

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidFunction(msg.into())
}

fn is_rising_exponential(seg: &Segment) -> bool {
    matches!(seg.kind, SegmentKind::Exponential { value_at_start, exponent_slope }
        if value_at_start > 0.0 && exponent_slope > 0.0)
}

impl BiddingFunction {
    pub fn new(segments: Vec<Segment>, tail_mass_bound: f64) -> Result<Self> {
        if !(tail_mass_bound >= 0.0 && tail_mass_bound.is_finite()) {
            return Err(invalid(format!(
                "tail_mass_bound {tail_mass_bound} must be finite and >= 0"
            )));
        }
        let (first, last) = match (segments.first(), segments.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(invalid("no segments")),
        };
        if first.t_start != f64::NEG_INFINITY || last.t_end != f64::INFINITY {
            return Err(invalid("segments must cover the whole real line"));
        }
        if !is_rising_exponential(first) || !is_rising_exponential(last) {
            return Err(invalid(
                "first and last segments must be exponentials with positive slope",
            ));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !seg.is_finite() {
                return Err(invalid(format!("segment {i} has non-finite parameters")));
            }
            if !(seg.t_start < seg.t_end) {
                return Err(invalid(format!("segment {i} is empty or reversed")));
            }
            if i > 0 && (seg.t_start != segments[i - 1].t_end || !seg.t_start.is_finite()) {
                return Err(invalid(format!("segment {i} does not abut its predecessor")));
            }
        }

        let n = segments.len();
        let mut starts = Vec::with_capacity(n);
        let mut prefix = Vec::with_capacity(n);
        let mut start_values = Vec::with_capacity(n);
        let mut end_values = Vec::with_capacity(n);
        let mut mass = 0.0;
        for (i, seg) in segments.iter().enumerate() {
            starts.push(seg.t_start);
            prefix.push(mass);
            mass += if i + 1 < n { seg.total_integral() } else { 0.0 };
            start_values.push(if i == 0 { 0.0 } else { seg.value(seg.t_start) });
            end_values.push(if i + 1 == n {
                f64::INFINITY
            } else {
                seg.value(seg.t_end)
            });
        }

        // Positivity and monotonicity: inside every finite segment and
        // across every breakpoint.
        for i in 0..n {
            let seg = &segments[i];
            if i > 0 && i + 1 < n {
                let mut prev = start_values[i];
                if !(prev > 0.0) {
                    return Err(invalid(format!("segment {i} is not positive at its start")));
                }
                for j in 1..=MONOTONE_PROBES {
                    let t = seg.t_start + (seg.t_end - seg.t_start) * j as f64 / MONOTONE_PROBES as f64;
                    let v = seg.value(t);
                    if v < prev * (1.0 - MONOTONE_SLACK) {
                        return Err(invalid(format!("segment {i} decreases near t = {t}")));
                    }
                    prev = v;
                }
            }
            if i + 1 < n && start_values[i + 1] < end_values[i] * (1.0 - MONOTONE_SLACK) {
                return Err(invalid(format!(
                    "function decreases across the breakpoint t = {}",
                    seg.t_end
                )));
            }
        }

        Ok(BiddingFunction {
            segments,
            tail_mass_bound,
            starts,
            prefix,
            start_values,
            end_values,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    /// Finite breakpoints, in increasing order.
    pub fn breakpoints(&self) -> &[f64] {
        &self.starts[1..]
    }

    /// Index of the segment used for `t` from the given side.
    pub fn locate(&self, t: f64, side: Side) -> usize {
        let k = match side {
            Side::Right => self.starts.partition_point(|&s| s <= t),
            Side::Left => self.starts.partition_point(|&s| s < t),
        };
        k.max(1) - 1
    }

    /// Like [`locate`](Self::locate) (right side), starting the search at
    /// `hint`; fast when successive queries move by about one segment.
    pub(crate) fn locate_near(&self, t: f64, mut hint: usize) -> usize {
        let n = self.segments.len();
        hint = hint.min(n - 1);
        while hint > 0 && t < self.starts[hint] {
            hint -= 1;
        }
        while hint + 1 < n && t >= self.starts[hint + 1] {
            hint += 1;
        }
        hint
    }

    pub fn value(&self, t: f64) -> f64 {
        self.value_at(t, Side::Right)
    }

    pub fn value_left(&self, t: f64) -> f64 {
        self.value_at(t, Side::Left)
    }

    pub fn value_at(&self, t: f64, side: Side) -> f64 {
        self.segments[self.locate(t, side)].value(t)
    }

    /// `B'(t)` from the segment owning `t`.
    pub fn derivative(&self, t: f64) -> f64 {
        self.segments[self.locate(t, Side::Right)].derivative(t)
    }

    /// `F(t) = ∫_{−∞}^t B`, exact up to rounding for the represented
    /// function; its distance to the untruncated function's mass is at
    /// most [`tail_mass_bound`](Self::tail_mass_bound).
    pub fn cumulative_mass(&self, t: f64) -> f64 {
        let i = self.locate(t, Side::Right);
        self.mass_in(i, t)
    }

    pub(crate) fn mass_in(&self, i: usize, t: f64) -> f64 {
        self.prefix[i] + self.segments[i].integral_from_start(t)
    }

    /// `CR_B(t) = F(t + 1)/B(t)` with right-continuous `B`.
    pub fn normalized_mass(&self, t: f64) -> f64 {
        self.normalized_mass_at(t, Side::Right)
    }

    pub fn normalized_mass_left(&self, t: f64) -> f64 {
        self.normalized_mass_at(t, Side::Left)
    }

    pub fn normalized_mass_at(&self, t: f64, side: Side) -> f64 {
        self.cumulative_mass(t + 1.0) / self.value_at(t, side)
    }

    /// `w_B(t) = F(t)/B(t)`.
    pub fn work(&self, t: f64) -> f64 {
        self.work_at(t, Side::Right)
    }

    pub fn work_at(&self, t: f64, side: Side) -> f64 {
        self.cumulative_mass(t) / self.value_at(t, side)
    }

    /// Values the induced sequences can be sampled at:
    /// from `B` at the first breakpoint up to `+∞`.
    pub fn represented_range(&self) -> (f64, f64) {
        let min = if self.segments.len() > 1 {
            self.start_values[1]
        } else {
            0.0
        };
        (min, f64::INFINITY)
    }

    /// Generalized inverse `B⁻(u) = inf{t : B(t) ≥ u}` for `u > 0`.
    pub fn inverse(&self, u: f64) -> f64 {
        if !(u > 0.0) {
            return f64::NEG_INFINITY;
        }
        // First segment whose start value reaches u; the answer lies in the
        // segment before it or at its start.
        let j = self.start_values.partition_point(|&v| v < u);
        let i = j - 1;
        if self.end_values[i] <= u {
            return self.segments[i].t_end;
        }
        let seg = &self.segments[i];
        match &seg.kind {
            SegmentKind::Exponential {
                value_at_start,
                exponent_slope,
            } => seg.origin() + (u / value_at_start).ln() / exponent_slope,
            SegmentKind::Constant { .. } => seg.t_end,
            SegmentKind::Polynomial { .. } => solve_in_segment(seg, u),
        }
    }

    /// The function `t ↦ δ·B(t)`.
    pub fn scaled(&self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {delta} must be positive")));
        }
        BiddingFunction::new(
            self.segments.iter().map(|s| s.scaled(delta)).collect(),
            self.tail_mass_bound * delta,
        )
    }

    /// The function `t ↦ B(t + c)`.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        BiddingFunction::new(
            self.segments.iter().map(|s| s.shifted(c)).collect(),
            self.tail_mass_bound,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("bidding function JSON", e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bidding functions always serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// Solve `seg.value(t) = u` on a segment where the value crosses `u`,
/// by Newton steps safeguarded with bisection.
fn solve_in_segment(seg: &Segment, u: f64) -> f64 {
    let (mut lo, mut hi) = (seg.t_start, seg.t_end);
    let (v_lo, v_hi) = (seg.value(lo), seg.value(hi));
    let mut t = if v_hi > v_lo {
        lo + (hi - lo) * ((u - v_lo) / (v_hi - v_lo)).clamp(0.0, 1.0)
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..100 {
        let f = seg.value(t) - u;
        if f == 0.0 {
            return t;
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let d = seg.derivative(t);
        let newton = t - f / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0) || hi - lo <= f64::EPSILON * t.abs().max(1.0) {
            return next;
        }
        t = next;
    }
    t
}
