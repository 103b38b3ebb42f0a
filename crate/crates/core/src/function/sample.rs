use serde::{Deserialize, Serialize};

use super::{BiddingFunction, SegmentKind};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// A finite window of the sequence `(B(i + λ))_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidSequenceSample {
    pub lambda: f64,
    /// `bids[j] = B(i_min + j + λ)`.
    pub bids: Vec<f64>,
    /// `(i_min, i_max)`, inclusive.
    pub window: (i64, i64),
}

/// Relative size below which the mass of the unvisited bids is dropped.
const NEGLIGIBLE_MASS: f64 = 1e-16;

/// Draws `λ` from the seeded stream and plays the induced sequence against
/// `threshold`. Returns the emitted bids (every bid up to and including the
/// first one `≥ threshold`, down to where the rest is negligible) and the
/// total cost, which also counts the bids below the window.
pub fn sample_sequence(b: &BiddingFunction, rng_seed: u64, threshold: f64) -> Result<(BidSequenceSample, f64)> {
    let lambda = Stream::new(rng_seed, 0).uniform();
    sample_with_lambda(b, lambda, threshold)
}

/// [`sample_sequence`] with an explicit `λ ∈ [0, 1]`.
pub fn sample_with_lambda(b: &BiddingFunction, lambda: f64, threshold: f64) -> Result<(BidSequenceSample, f64)> {
    check_threshold(b, threshold)?;
    let top = top_index(b, lambda, threshold);
    let mut bids = Vec::new();
    let (sum, i_min) = walk_down(b, lambda, top, true, |bid| bids.push(bid));
    bids.reverse();
    let sample = BidSequenceSample {
        lambda,
        bids,
        window: (i_min, top),
    };
    Ok((sample, sum))
}

pub(crate) fn check_threshold(b: &BiddingFunction, threshold: f64) -> Result<()> {
    let (min, max) = b.represented_range();
    if !(threshold.is_finite() && threshold > 0.0 && threshold >= min) {
        return Err(Error::ThresholdOutOfRange { threshold, min, max });
    }
    Ok(())
}

/// Index of the first bid `≥ threshold`: the least `i` with
/// `i + λ ≥ B⁻(threshold)`.
fn top_index(b: &BiddingFunction, lambda: f64, threshold: f64) -> i64 {
    (b.inverse(threshold) - lambda).ceil() as i64
}

/// Cost `Σ_{i ≤ i*} B(i + λ)` of the sequence at `threshold`; no range
/// check and no allocation.
pub(crate) fn lattice_cost(b: &BiddingFunction, lambda: f64, threshold: f64) -> f64 {
    let top = top_index(b, lambda, threshold);
    walk_down(b, lambda, top, false, |_| {}).0
}

/// Sums `B(i + λ)` for `i = top, top − 1, …`. Bids inside the left tail
/// segment are summed in closed form as a geometric series; with
/// `explicit` they are first emitted one by one until the mass left below
/// is negligible. Returns the total and the lowest emitted index.
fn walk_down(b: &BiddingFunction, lambda: f64, top: i64, explicit: bool, mut emit: impl FnMut(f64)) -> (f64, i64) {
    let segs = b.segments();
    let mut i = top;
    let mut hint = b.locate(top as f64 + lambda, super::Side::Right);
    let mut sum = 0.0;
    loop {
        let tau = i as f64 + lambda;
        hint = b.locate_near(tau, hint);
        let seg = &segs[hint];
        if hint == 0 {
            if let SegmentKind::Exponential {
                value_at_start,
                exponent_slope,
            } = seg.kind
            {
                let bid = value_at_start * (exponent_slope * (tau - seg.origin())).exp();
                let geometric = bid / -(-exponent_slope).exp_m1();
                if !explicit || geometric <= NEGLIGIBLE_MASS * sum {
                    return (sum + geometric, i + 1);
                }
            }
        }
        let bid = seg.value(tau);
        emit(bid);
        sum += bid;
        // Each earlier bid B(j + λ) is at most ∫_{j+λ}^{j+1+λ} B, so the
        // unvisited bids add up to at most F(τ).
        if b.mass_in(hint, tau) <= NEGLIGIBLE_MASS * sum {
            return (sum, i);
        }
        i -= 1;
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::E;

    use super::super::tests::{doubling, exp_fn};
    use super::*;

    #[test]
    fn doubling_at_three() {
        let b = doubling();
        let (sample, cost) = sample_with_lambda(&b, 0.37, 3.0).unwrap();
        assert!((cost / 3.0 - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(*sample.bids.last().unwrap(), 4.0);
        assert_eq!(sample.bids[sample.bids.len() - 2], 2.0);
        assert_eq!(sample.window.1, 2);
    }

    #[test]
    fn exponential_stops_at_first_crossing() {
        let b = exp_fn(1.0);
        for k in 0..20 {
            let lambda = k as f64 / 20.0;
            let (s, cost) = sample_with_lambda(&b, lambda, 0.5f64.exp()).unwrap();
            let top = *s.bids.last().unwrap();
            let expect_i = (0.5 - lambda).ceil();
            assert!((top.ln() - (expect_i + lambda)).abs() < 1e-12);
            // Closed form: e^{i*+λ}/(1 − e^{−1}).
            let exact = top / (1.0 - (-1.0f64).exp());
            assert!((cost - exact).abs() < 1e-12 * exact);
            assert!((lattice_cost(&b, lambda, 0.5f64.exp()) - exact).abs() < 1e-12 * exact);
            for w in s.bids.windows(2) {
                assert!(w[0] <= w[1]);
            }
            let (i_min, i_max) = s.window;
            assert_eq!(s.bids.len() as i64, i_max - i_min + 1);
        }
    }

    #[test]
    fn seeded_monte_carlo_matches_e() {
        let b = exp_fn(1.0);
        let n = 200_000u64;
        let u = 1.7;
        let vals: Vec<f64> = (0..n)
            .map(|seed| lattice_cost(&b, Stream::new(seed, 0).uniform(), u) / u)
            .collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - E).abs() < 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn out_of_range_thresholds() {
        let b = doubling();
        for u in [0.0, -1.0, f64::NAN, f64::INFINITY, 1e-20] {
            let err = sample_sequence(&b, 1, u).unwrap_err();
            assert_eq!(err.code(), "THRESHOLD_OUT_OF_RANGE");
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let b = doubling();
        let a = sample_sequence(&b, 99, 10.0).unwrap();
        let c = sample_sequence(&b, 99, 10.0).unwrap();
        assert_eq!(a, c);
    }
}
