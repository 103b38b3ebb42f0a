use serde::{Deserialize, Serialize};

use crate::numerics::expm1_over;

/// Analytic form of one piece of a bidding function.
///
/// Every form is written in the local variable `s = t − origin`, where the
/// origin is `t_start` when finite, otherwise `t_end` when finite,
/// otherwise 0 (see [`Segment::origin`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentKind {
    /// `value_at_start · e^{exponent_slope · s}`.
    Exponential {
        value_at_start: f64,
        exponent_slope: f64,
    },
    Constant {
        value: f64,
    },
    /// `Σ_j coefficients[j] · s^j`.
    Polynomial {
        coefficients: Vec<f64>,
    },
}

/// One piece `[t_start, t_end)` of a bidding function.
///
/// Infinite endpoints serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(with = "lower_bound")]
    pub t_start: f64,
    #[serde(with = "upper_bound")]
    pub t_end: f64,
    #[serde(flatten)]
    pub kind: SegmentKind,
}

fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * s + a)
}

impl Segment {
    pub fn exponential(t_start: f64, t_end: f64, value_at_start: f64, exponent_slope: f64) -> Self {
        Segment {
            t_start,
            t_end,
            kind: SegmentKind::Exponential {
                value_at_start,
                exponent_slope,
            },
        }
    }

    pub fn constant(t_start: f64, t_end: f64, value: f64) -> Self {
        Segment {
            t_start,
            t_end,
            kind: SegmentKind::Constant { value },
        }
    }

    pub fn polynomial(t_start: f64, t_end: f64, coefficients: Vec<f64>) -> Self {
        Segment {
            t_start,
            t_end,
            kind: SegmentKind::Polynomial { coefficients },
        }
    }

    /// Reference point of the local variable `s`.
    pub fn origin(&self) -> f64 {
        if self.t_start.is_finite() {
            self.t_start
        } else if self.t_end.is_finite() {
            self.t_end
        } else {
            0.0
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_start <= t && t < self.t_end
    }

    /// Value of the analytic form at `t` (the form is continuous on the
    /// closed segment, so this also gives one-sided limits at the ends).
    pub fn value(&self, t: f64) -> f64 {
        let s = t - self.origin();
        match &self.kind {
            SegmentKind::Exponential {
                value_at_start,
                exponent_slope,
            } => value_at_start * (exponent_slope * s).exp(),
            SegmentKind::Constant { value } => *value,
            SegmentKind::Polynomial { coefficients } => horner(coefficients, s),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let s = t - self.origin();
        match &self.kind {
            SegmentKind::Exponential {
                value_at_start,
                exponent_slope,
            } => value_at_start * exponent_slope * (exponent_slope * s).exp(),
            SegmentKind::Constant { .. } => 0.0,
            SegmentKind::Polynomial { coefficients } => {
                let mut d = 0.0;
                for (j, &c) in coefficients.iter().enumerate().skip(1).rev() {
                    d = d * s + j as f64 * c;
                }
                d
            }
        }
    }

    /// `∫_origin^t` of the form; negative for `t` left of the origin.
    ///
    /// Only used for segments whose origin is finite-left or where the
    /// form is integrable toward `−∞` (see [`Segment::integral_from_start`]).
    fn integral_from_origin(&self, t: f64) -> f64 {
        let s = t - self.origin();
        match &self.kind {
            SegmentKind::Exponential {
                value_at_start,
                exponent_slope,
            } => value_at_start * s * expm1_over(exponent_slope * s),
            SegmentKind::Constant { value } => value * s,
            SegmentKind::Polynomial { coefficients } => {
                let mut acc = 0.0;
                for (j, &c) in coefficients.iter().enumerate().rev() {
                    acc = acc * s + c / (j + 1) as f64;
                }
                acc * s
            }
        }
    }

    /// `∫_{t_start}^t` of the form, for `t` in the closed segment.
    ///
    /// For a segment reaching `−∞` this is the full left integral, which is
    /// finite only for an exponential with positive slope; other forms give
    /// `+∞`.
    pub fn integral_from_start(&self, t: f64) -> f64 {
        if self.t_start.is_finite() {
            return self.integral_from_origin(t);
        }
        match &self.kind {
            SegmentKind::Exponential {
                value_at_start,
                exponent_slope,
            } if *exponent_slope > 0.0 => {
                value_at_start * (exponent_slope * (t - self.origin())).exp() / exponent_slope
            }
            _ => f64::INFINITY,
        }
    }

    /// Full integral over the segment (finite segments or the left tail).
    pub fn total_integral(&self) -> f64 {
        self.integral_from_start(self.t_end)
    }

    /// Pointwise scaled copy `δ·B`.
    pub fn scaled(&self, delta: f64) -> Self {
        let kind = match &self.kind {
            SegmentKind::Exponential {
                value_at_start,
                exponent_slope,
            } => SegmentKind::Exponential {
                value_at_start: value_at_start * delta,
                exponent_slope: *exponent_slope,
            },
            SegmentKind::Constant { value } => SegmentKind::Constant { value: value * delta },
            SegmentKind::Polynomial { coefficients } => SegmentKind::Polynomial {
                coefficients: coefficients.iter().map(|c| c * delta).collect(),
            },
        };
        Segment {
            t_start: self.t_start,
            t_end: self.t_end,
            kind,
        }
    }

    /// Copy representing `t ↦ B(t + c)`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = Segment {
            t_start: self.t_start - c,
            t_end: self.t_end - c,
            kind: self.kind.clone(),
        };
        // Segments with a finite endpoint move their origin along with the
        // breakpoints; a doubly infinite one keeps origin 0.
        if !self.t_start.is_finite() && !self.t_end.is_finite() {
            if let SegmentKind::Exponential {
                value_at_start,
                exponent_slope,
            } = &mut out.kind
            {
                *value_at_start *= (*exponent_slope * c).exp();
            }
        }
        out
    }

    /// Whether every parameter of the form is a finite number.
    pub(crate) fn is_finite(&self) -> bool {
        match &self.kind {
            SegmentKind::Exponential {
                value_at_start,
                exponent_slope,
            } => value_at_start.is_finite() && exponent_slope.is_finite(),
            SegmentKind::Constant { value } => value.is_finite(),
            SegmentKind::Polynomial { coefficients } => coefficients.iter().all(|c| c.is_finite()),
        }
    }
}

mod lower_bound {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_finite() {
            s.serialize_f64(*t)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

mod upper_bound {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::lower_bound::serialize(t, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
