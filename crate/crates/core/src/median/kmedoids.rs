use serde::{Deserialize, Serialize};

use super::graph::Metric;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// A set of at most `k` facilities and its connection cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedoidSolution {
    pub k: usize,
    /// Sorted vertex ids.
    pub facilities: Vec<usize>,
    pub cost: f64,
}

impl MedoidSolution {
    fn new(k: usize, mut facilities: Vec<usize>, metric: &Metric) -> Self {
        facilities.sort_unstable();
        let cost = metric.cost(&facilities);
        MedoidSolution { k, facilities, cost }
    }
}

/// Swaps must gain at least this fraction of the current cost, which keeps
/// rounding noise from cycling the local search.
const MIN_RELATIVE_GAIN: f64 = 1e-12;

/// Nearest and second-nearest medoid (slot index and distance) per vertex.
struct Assignment {
    near: Vec<(usize, f64)>,
    second: Vec<(usize, f64)>,
}

impl Assignment {
    fn new(metric: &Metric, medoids: &[usize]) -> Self {
        let n = metric.len();
        let mut a = Assignment {
            near: vec![(0, f64::INFINITY); n],
            second: vec![(0, f64::INFINITY); n],
        };
        for o in 0..n {
            a.recompute(metric, medoids, o);
        }
        a
    }

    fn recompute(&mut self, metric: &Metric, medoids: &[usize], o: usize) {
        let mut near = (0, f64::INFINITY);
        let mut second = (0, f64::INFINITY);
        for (i, &m) in medoids.iter().enumerate() {
            let d = metric.d(m, o);
            if d < near.1 {
                second = near;
                near = (i, d);
            } else if d < second.1 {
                second = (i, d);
            }
        }
        self.near[o] = near;
        self.second[o] = second;
    }

    /// Cost increase from deleting each medoid with no replacement.
    fn removal_loss(&self, k: usize) -> Vec<f64> {
        let mut loss = vec![0.0; k];
        for (&(i, dn), &(_, ds)) in self.near.iter().zip(&self.second) {
            loss[i] += ds - dn;
        }
        loss
    }

    fn cost(&self) -> f64 {
        self.near.iter().map(|&(_, d)| d).sum()
    }
}

/// Greedy distance-weighted seeding: the first medoid is uniform, each
/// further one is the best (by resulting cost) of `2 + ⌊ln k⌋` candidates
/// drawn with probability proportional to the distance to the current set.
fn seed_medoids(metric: &Metric, k: usize, rng: &mut Stream) -> Vec<usize> {
    let n = metric.len();
    let first = rng.below(n as u64) as usize;
    let mut medoids = vec![first];
    let mut nearest = metric.row(first).to_vec();
    let trials = 2 + (k as f64).ln().floor() as usize;
    while medoids.len() < k {
        let total: f64 = nearest.iter().sum();
        let mut best: Option<(f64, usize)> = None;
        for _ in 0..trials {
            let cand = if total > 0.0 {
                let mut target = rng.uniform() * total;
                let mut pick = n - 1;
                for (v, &w) in nearest.iter().enumerate() {
                    if target < w {
                        pick = v;
                        break;
                    }
                    target -= w;
                }
                // Rounding can land on a zero-weight vertex at the end.
                if nearest[pick] == 0.0 {
                    pick = nearest.iter().rposition(|&w| w > 0.0).expect("positive total");
                }
                pick
            } else {
                (0..n).find(|v| !medoids.contains(v)).expect("k <= n")
            };
            let cost: f64 = nearest.iter().zip(metric.row(cand)).map(|(&a, &b)| a.min(b)).sum();
            if best.is_none_or(|(c, _)| cost < c) {
                best = Some((cost, cand));
            }
        }
        let (_, cand) = best.expect("at least two trials");
        medoids.push(cand);
        for (a, &b) in nearest.iter_mut().zip(metric.row(cand)) {
            *a = a.min(b);
        }
    }
    medoids
}

/// Exact 1-median by enumeration.
fn one_median(metric: &Metric) -> usize {
    (0..metric.len())
        .map(|v| (metric.row(v).iter().sum::<f64>(), v))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("nonempty metric")
        .1
}

/// Eager swap local search: candidates are scanned cyclically, and a swap
/// is applied as soon as it lowers the cost; stops after a full pass with no
/// improving swap. Returns the cost after seeding and after every swap.
fn swap_search(metric: &Metric, medoids: &mut [usize]) -> Vec<f64> {
    let n = metric.len();
    let k = medoids.len();
    let mut is_medoid = vec![false; n];
    for &m in medoids.iter() {
        is_medoid[m] = true;
    }
    let mut asg = Assignment::new(metric, medoids);
    let mut loss = asg.removal_loss(k);
    let mut cost = asg.cost();
    let mut trace = vec![cost];
    let mut since_swap = 0;
    let mut x = 0;
    let mut delta = vec![0.0; k];
    while since_swap < n {
        since_swap += 1;
        let cand = x;
        x = (x + 1) % n;
        if is_medoid[cand] {
            continue;
        }
        delta.copy_from_slice(&loss);
        let mut shared = 0.0;
        for (o, &dox) in metric.row(cand).iter().enumerate() {
            let (ni, dn) = asg.near[o];
            let ds = asg.second[o].1;
            if dox < dn {
                shared += dox - dn;
                delta[ni] += dn - ds;
            } else if dox < ds {
                delta[ni] += dox - ds;
            }
        }
        let (slot, best) = delta
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &d)| (i, d))
            .expect("k >= 1");
        if best + shared >= -MIN_RELATIVE_GAIN * cost {
            continue;
        }
        is_medoid[medoids[slot]] = false;
        is_medoid[cand] = true;
        medoids[slot] = cand;
        let row = metric.row(cand);
        for (o, &dox) in row.iter().enumerate() {
            if asg.near[o].0 == slot || asg.second[o].0 == slot {
                asg.recompute(metric, medoids, o);
            } else if dox < asg.near[o].1 {
                asg.second[o] = asg.near[o];
                asg.near[o] = (slot, dox);
            } else if dox < asg.second[o].1 {
                asg.second[o] = (slot, dox);
            }
        }
        loss = asg.removal_loss(k);
        cost = asg.cost();
        trace.push(cost);
        since_swap = 0;
    }
    trace
}

/// k-medoids by greedy distance-weighted seeding followed by swap local
/// search, together with the cost after seeding and after each swap.
pub fn kmedoids_with_trace(metric: &Metric, k: usize, seed: u64) -> Result<(MedoidSolution, Vec<f64>)> {
    let n = metric.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={n}")));
    }
    if k == n {
        return Ok((MedoidSolution::new(k, (0..n).collect(), metric), vec![0.0]));
    }
    if k == 1 {
        let sol = MedoidSolution::new(1, vec![one_median(metric)], metric);
        let trace = vec![sol.cost];
        return Ok((sol, trace));
    }
    let mut rng = Stream::new(seed, k as u64);
    let mut medoids = seed_medoids(metric, k, &mut rng);
    let trace = swap_search(metric, &mut medoids);
    Ok((MedoidSolution::new(k, medoids, metric), trace))
}

pub fn kmedoids(metric: &Metric, k: usize, seed: u64) -> Result<MedoidSolution> {
    kmedoids_with_trace(metric, k, seed).map(|(s, _)| s)
}
