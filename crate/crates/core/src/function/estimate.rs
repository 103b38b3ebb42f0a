use super::{BidSequenceSample, BiddingFunction, Segment};
use crate::error::{Error, Result};

pub const MIN_ESTIMATION_SAMPLES: usize = 1000;

/// Recovers a bidding function from sampled windows of induced sequences.
///
/// For a value `v` covered by every window, `F(v)` is the mean number of
/// bids in `[1, v)` (negative of the count in `[v, 1)` for `v < 1`); in
/// expectation this is `B⁻(v) − B⁻(1)`. Its generalized inverse is a step
/// function with one step per distinct bid value. Exponential tails with the
/// average log-slope extend it beyond the covered range; the mass of the
/// left tail is reported as `tail_mass_bound` since it is extrapolated.
pub fn estimate_function_from_samples(samples: &[BidSequenceSample]) -> Result<BiddingFunction> {
    if samples.len() < MIN_ESTIMATION_SAMPLES {
        return Err(Error::InsufficientSamples {
            required: MIN_ESTIMATION_SAMPLES,
            got: samples.len(),
        });
    }
    let mut v_lo = 0.0f64;
    let mut v_hi = f64::INFINITY;
    for s in samples {
        let (Some(&first), Some(&last)) = (s.bids.first(), s.bids.last()) else {
            return Err(Error::InvalidArgument("sample with an empty window".into()));
        };
        v_lo = v_lo.max(first);
        v_hi = v_hi.min(last);
    }
    if !(v_lo < v_hi) {
        return Err(Error::InvalidArgument(
            "sample windows share no common value range".into(),
        ));
    }

    let mut bids: Vec<f64> = samples
        .iter()
        .flat_map(|s| s.bids.iter().copied())
        .filter(|&v| v >= v_lo && v <= v_hi)
        .collect();
    bids.sort_by(f64::total_cmp);
    let reference = 1.0f64.clamp(v_lo, v_hi);
    let below_ref = bids.partition_point(|&v| v < reference);
    let n = samples.len() as f64;

    let mut segments = Vec::new();
    let mut cum = 0usize;
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for &v in &bids {
        match groups.last_mut() {
            Some((g, c)) if *g == v => *c += 1,
            _ => groups.push((v, 1)),
        }
    }
    let t_of = |count: usize| (count as f64 - below_ref as f64) / n;
    let t_first = t_of(0);
    let t_last = t_of(bids.len());
    let (v_first, v_last) = (groups[0].0, groups[groups.len() - 1].0);
    let slope = if v_last > v_first && t_last > t_first {
        (v_last / v_first).ln() / (t_last - t_first)
    } else {
        1.0
    };
    let left = Segment::exponential(f64::NEG_INFINITY, t_first, v_first, slope);
    let tail_mass = left.total_integral();
    segments.push(left);
    for (v, c) in groups {
        segments.push(Segment::constant(t_of(cum), t_of(cum + c), v));
        cum += c;
    }
    segments.push(Segment::exponential(t_last, f64::INFINITY, v_last, slope));
    BiddingFunction::new(segments, tail_mass)
}

#[cfg(test)]
mod tests {
    use super::super::sample::sample_sequence;
    use super::super::tests::{doubling, exp_fn};
    use super::*;

    #[test]
    fn too_few_samples() {
        let b = exp_fn(1.0);
        let samples: Vec<_> = (0..999).map(|s| sample_sequence(&b, s, 5.0).unwrap().0).collect();
        let err = estimate_function_from_samples(&samples).unwrap_err();
        assert_eq!(err.code(), "INSUFFICIENT_SAMPLES");
    }

    #[test]
    fn doubling_steps_at_powers_of_two() {
        let b = doubling();
        let samples: Vec<_> = (0..1000).map(|s| sample_sequence(&b, s, 100.0).unwrap().0).collect();
        let est = estimate_function_from_samples(&samples).unwrap();
        for k in -5..6 {
            let t = k as f64 + 0.5;
            assert_eq!(est.value(t), 2f64.powi(k));
        }
    }

    #[test]
    fn recovers_exponential_in_log_scale() {
        let b = exp_fn(1.0);
        let samples: Vec<_> = (0..10_000)
            .map(|s| sample_sequence(&b, s, 3f64.exp()).unwrap().0)
            .collect();
        let est = estimate_function_from_samples(&samples).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=400 {
            let t = -2.0 + i as f64 / 100.0;
            worst = worst.max((est.value(t).ln() - t).abs());
        }
        assert!(worst <= 0.05, "sup-norm {worst}");
        // Mean count of bids below 1 is subtracted: F(1) = 0.
        assert!(est.cumulative_mass(0.0) > 0.0);
    }
}
