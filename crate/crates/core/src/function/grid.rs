use serde::{Deserialize, Serialize};

use super::{BiddingFunction, Side};

/// Evaluation grid for the infimum/supremum of the normalized mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub points_per_unit: usize,
    /// Run a golden-section search around the best grid points.
    pub refine: bool,
}

impl GridSpec {
    pub const DEFAULT_HALF_WIDTH: f64 = 30.0;
    pub const DEFAULT_POINTS_PER_UNIT: usize = 4096;

    pub fn new(t_min: f64, t_max: f64, points_per_unit: usize) -> Self {
        GridSpec {
            t_min,
            t_max,
            points_per_unit,
            refine: true,
        }
    }

    /// The default window of ±30 around the consistency point `t_star`.
    pub fn around(t_star: f64) -> Self {
        Self::new(
            t_star - Self::DEFAULT_HALF_WIDTH,
            t_star + Self::DEFAULT_HALF_WIDTH,
            Self::DEFAULT_POINTS_PER_UNIT,
        )
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let step = 1.0 / self.points_per_unit.max(1) as f64;
        let n = ((self.t_max - self.t_min) / step).floor() as usize;
        (0..=n).map(move |i| self.t_min + i as f64 * step)
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::around(0.0)
    }
}

/// Infimum and supremum of the normalized mass over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsRob {
    pub cons: f64,
    pub rob: f64,
    pub argmin_t: f64,
    pub argmax_t: f64,
    /// How much local refinement moved either extremum past the best grid
    /// value; a proxy for the remaining discretization error.
    pub disc_error: f64,
}

struct Extremum {
    value: f64,
    t: f64,
}

impl Extremum {
    fn offer(&mut self, t: f64, v: f64, better: impl Fn(f64, f64) -> bool) {
        if better(v, self.value) {
            self.value = v;
            self.t = t;
        }
    }
}

/// `inf_t CR_B(t)` and `sup_t CR_B(t)` over the grid.
///
/// Besides the regular grid points, every breakpoint `b` in the window is
/// evaluated from both sides, and so is `b − 1` where `F(t + 1)` has a
/// kink. With `refine`, a golden-section search sharpens both extrema.
pub fn consistency_robustness(b: &BiddingFunction, grid: &GridSpec) -> ConsRob {
    let less = |a: f64, b: f64| a < b;
    let more = |a: f64, b: f64| a > b;
    let mut lo = Extremum {
        value: f64::INFINITY,
        t: f64::NAN,
    };
    let mut hi = Extremum {
        value: f64::NEG_INFINITY,
        t: f64::NAN,
    };
    for t in grid.points() {
        let v = b.normalized_mass(t);
        lo.offer(t, v, less);
        hi.offer(t, v, more);
    }
    let in_window = |t: f64| t >= grid.t_min && t <= grid.t_max;
    for &bp in b.breakpoints() {
        for t in [bp, bp - 1.0] {
            if !in_window(t) {
                continue;
            }
            for side in [Side::Right, Side::Left] {
                let v = b.normalized_mass_at(t, side);
                lo.offer(t, v, less);
                hi.offer(t, v, more);
            }
            for t in [next_down(t), next_up(t)] {
                if in_window(t) {
                    let v = b.normalized_mass(t);
                    lo.offer(t, v, less);
                    hi.offer(t, v, more);
                }
            }
        }
    }

    let mut disc_error: f64 = 0.0;
    if grid.refine && grid.points_per_unit > 0 {
        let h = 1.0 / grid.points_per_unit as f64;
        let clamp = |t: f64| t.clamp(grid.t_min, grid.t_max);
        let (t, v) = golden(|t| b.normalized_mass(t), clamp(lo.t - h), clamp(lo.t + h), false);
        if v < lo.value {
            disc_error = disc_error.max(lo.value - v);
            lo = Extremum { value: v, t };
        }
        let (t, v) = golden(|t| b.normalized_mass(t), clamp(hi.t - h), clamp(hi.t + h), true);
        if v > hi.value {
            disc_error = disc_error.max(v - hi.value);
            hi = Extremum { value: v, t };
        }
    }
    ConsRob {
        cons: lo.value,
        rob: hi.value,
        argmin_t: lo.t,
        argmax_t: hi.t,
        disc_error,
    }
}

fn next_up(t: f64) -> f64 {
    t + f64::EPSILON * t.abs().max(1.0)
}

fn next_down(t: f64) -> f64 {
    t - f64::EPSILON * t.abs().max(1.0)
}

/// Golden-section search for a minimum (or maximum) on `[a, b]`.
fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, maximize: bool) -> (f64, f64) {
    let g = |t: f64| if maximize { -f(t) } else { f(t) };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..80 {
        if b - a <= 1e-15 * a.abs().max(1.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = g(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}
