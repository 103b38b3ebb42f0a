use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{Metric, WeightedGraph};
use super::kmedoids::{kmedoids, MedoidSolution};
use crate::error::{Error, Result};
use crate::evaluation::{Algorithm, Strategy};
use crate::format::fmt12;
use crate::function::BiddingFunction;
use crate::rng::Stream;

/// Baseline clusterings `F̃_k` for every `k = 1..=n`, made monotone: when a
/// local search returns a worse set for `k` than for `k − 1`, the smaller
/// set is reused, so `cost(F̃_k)` is nonincreasing in `k`.
#[derive(Debug, Clone)]
pub struct Universe {
    sets: Vec<Vec<usize>>,
    costs: Vec<f64>,
}

impl Universe {
    pub fn new(baselines: &BTreeMap<usize, MedoidSolution>, n: usize) -> Result<Self> {
        let mut sets: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut costs: Vec<f64> = Vec::with_capacity(n);
        for k in 1..=n {
            let sol = baselines.get(&k).ok_or(Error::MissingBaseline { k })?;
            if sol.facilities.len() > k {
                return Err(Error::InvalidArgument(format!(
                    "baseline for k = {k} has {} facilities",
                    sol.facilities.len()
                )));
            }
            match costs.last() {
                Some(&prev) if prev <= sol.cost => {
                    sets.push(sets[k - 2].clone());
                    costs.push(prev);
                }
                _ => {
                    sets.push(sol.facilities.clone());
                    costs.push(sol.cost);
                }
            }
        }
        Ok(Universe { sets, costs })
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    /// `cost(F̃_k)`.
    pub fn cost(&self, k: usize) -> f64 {
        self.costs[k - 1]
    }

    /// `F̃_k`.
    pub fn set(&self, k: usize) -> &[usize] {
        &self.sets[k - 1]
    }

    /// The `k` whose cost gap `[cost(F̃_k), cost(F̃_{k−1}))` contains `x`,
    /// with `cost(F̃_0) = ∞`.
    pub fn index_of(&self, x: f64) -> usize {
        (self.costs.partition_point(|&c| c > x) + 1).min(self.n())
    }
}

/// Index set `K` induced by the bids `B(j + λ)`: every `k` whose cost gap
/// holds at least one bid. Always contains `n` (all small bids) and `1`
/// (all large bids). Ascending.
pub fn project_indices(b: &BiddingFunction, lambda: f64, universe: &Universe) -> Vec<usize> {
    let n = universe.n();
    let mut ks = vec![n];
    if n > 1 {
        let lo = universe.cost(n - 1);
        let hi = universe.cost(1);
        let mut j = (b.inverse(lo) - lambda).ceil() as i64 - 1;
        loop {
            let bid = b.value(j as f64 + lambda);
            ks.push(universe.index_of(bid));
            if bid >= hi {
                break;
            }
            j += 1;
        }
    }
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// Nested facility sets `F_1 ⊆ … ⊆ F_n` with `|F_i| ≤ i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementalSolution {
    /// The projected index set, ascending.
    pub indices: Vec<usize>,
    /// Distinct sets; `sets[slot[i − 1]]` is `F_i`.
    pub sets: Vec<Vec<usize>>,
    pub slot: Vec<usize>,
    /// `cost(F_i)/cost(F̃_i)`, with `0/0 = 1`.
    pub ratios: Vec<f64>,
}

impl IncrementalSolution {
    pub fn n(&self) -> usize {
        self.slot.len()
    }

    /// `F_i` as a sorted list.
    pub fn set(&self, i: usize) -> &[usize] {
        &self.sets[self.slot[i - 1]]
    }

    /// Checks `|F_i| ≤ i` and `F_i ⊆ F_{i+1}` for every `i`.
    pub fn is_nested(&self) -> bool {
        (1..=self.n()).all(|i| self.set(i).len() <= i)
            && (1..self.n()).all(|i| {
                let big = self.set(i + 1);
                self.set(i).iter().all(|v| big.binary_search(v).is_ok())
            })
    }
}

/// Closest point of `target` to `p`, ties to the smallest id.
fn nearest_in(metric: &Metric, p: usize, target: &[usize]) -> usize {
    let row = metric.row(p);
    let mut best = (f64::INFINITY, usize::MAX);
    for &q in target {
        let cand = (row[q], q);
        if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
            best = cand;
        }
    }
    best.1
}

/// Adds points of `pool` to `base` one at a time, each time the one that
/// lowers the cost most (ties to the smallest id), producing one set per
/// added point.
fn greedy_fill(metric: &Metric, base: &[usize], pool: &[usize], steps: usize) -> Vec<Vec<usize>> {
    let n = metric.len();
    let mut nearest = vec![f64::INFINITY; n];
    for &f in base {
        for (a, &d) in nearest.iter_mut().zip(metric.row(f)) {
            *a = a.min(d);
        }
    }
    let mut current = base.to_vec();
    let mut left: Vec<usize> = pool
        .iter()
        .copied()
        .filter(|q| base.binary_search(q).is_err())
        .collect();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps.min(left.len()) {
        let (pos, _) = left
            .iter()
            .enumerate()
            .map(|(pos, &q)| {
                let gain: f64 = nearest.iter().zip(metric.row(q)).map(|(&a, &d)| (a - d).max(0.0)).sum();
                (pos, gain)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .expect("pool not exhausted");
        let q = left.remove(pos);
        for (a, &d) in nearest.iter_mut().zip(metric.row(q)) {
            *a = a.min(d);
        }
        let at = current.binary_search(&q).unwrap_err();
        current.insert(at, q);
        out.push(current.clone());
    }
    out
}

fn ratio(cost: f64, baseline: f64) -> f64 {
    if baseline == 0.0 && cost == 0.0 {
        1.0
    } else {
        cost / baseline
    }
}

/// Builds `F_k` for `k ∈ K` from the top down: `F_n = F̃_n`, then each
/// `F_k` is `F̃_k` with every point moved to its nearest point of the
/// previously built `F_ℓ`. Indices strictly between `k` and `ℓ` reuse
/// `F_k`, or with `fill` grow greedily from `F_k` inside `F_ℓ`.
pub fn build_incremental(
    metric: &Metric,
    universe: &Universe,
    indices: &[usize],
    fill: bool,
) -> Result<IncrementalSolution> {
    let n = universe.n();
    if metric.len() != n {
        return Err(Error::InvalidArgument(format!(
            "metric has {} vertices, universe {n}",
            metric.len()
        )));
    }
    let mut ks: Vec<usize> = indices.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.first() != Some(&1) || ks.last() != Some(&n) {
        return Err(Error::InvalidArgument("index set must contain 1 and n".into()));
    }
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    sets.push(universe.set(n).to_vec());
    slot[n - 1] = 0;
    let mut upper = n;
    for &k in ks.iter().rev().skip(1) {
        let above = &sets[slot[upper - 1]];
        let mut fk: Vec<usize> = universe.set(k).iter().map(|&p| nearest_in(metric, p, above)).collect();
        fk.sort_unstable();
        fk.dedup();
        let filled = if fill {
            greedy_fill(metric, &fk, above, upper - k - 1)
        } else {
            Vec::new()
        };
        sets.push(fk);
        let base = sets.len() - 1;
        for i in k..upper {
            slot[i - 1] = base;
        }
        for (step, set) in filled.into_iter().enumerate() {
            sets.push(set);
            slot[k + step] = sets.len() - 1;
        }
        upper = k;
    }
    let set_costs: Vec<f64> = sets.par_iter().map(|s| metric.cost(s)).collect();
    let ratios = (1..=n)
        .map(|i| ratio(set_costs[slot[i - 1]], universe.cost(i)))
        .collect();
    Ok(IncrementalSolution {
        indices: ks,
        sets,
        slot,
        ratios,
    })
}

/// One trial: project the strategy, scaled so its consistency point sits
/// at `cost(F̃_{k_hat})`, and build the incremental solution.
pub fn incremental_for_bids(
    metric: &Metric,
    universe: &Universe,
    b: &BiddingFunction,
    lambda: f64,
    fill: bool,
) -> Result<IncrementalSolution> {
    build_incremental(metric, universe, &project_indices(b, lambda, universe), fill)
}

/// Baseline clusterings for the given `k`, each seeded independently.
pub fn compute_baselines(metric: &Metric, ks: &[usize], seed: u64) -> Result<BTreeMap<usize, MedoidSolution>> {
    ks.par_iter()
        .map(|&k| kmedoids(metric, k, seed).map(|s| (k, s)))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct BaselineFile {
    graph_hash: String,
    seed: u64,
    solutions: Vec<MedoidSolution>,
}

/// Baselines for `k = 1..=n`, read from and written back to a JSON cache
/// when `cache` is given. Entries are keyed by graph hash, seed and `k`; a
/// file for another graph or seed is ignored and overwritten.
pub fn load_or_compute_baselines(
    graph: &WeightedGraph,
    metric: &Metric,
    seed: u64,
    cache: Option<&Path>,
) -> Result<BTreeMap<usize, MedoidSolution>> {
    let hash = graph.content_hash();
    let mut have: BTreeMap<usize, MedoidSolution> = BTreeMap::new();
    if let Some(path) = cache.filter(|p| p.exists()) {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: BaselineFile =
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
        if file.graph_hash == hash && file.seed == seed {
            have.extend(file.solutions.into_iter().map(|s| (s.k, s)));
        }
    }
    let n = graph.vertex_count();
    let missing: Vec<usize> = (1..=n).filter(|k| !have.contains_key(k)).collect();
    if missing.is_empty() {
        return Ok(have);
    }
    have.extend(compute_baselines(metric, &missing, seed)?);
    if let Some(path) = cache {
        let file = BaselineFile {
            graph_hash: hash,
            seed,
            solutions: have.values().cloned().collect(),
        };
        let text = serde_json::to_string(&file).map_err(|e| Error::parse("baseline cache", e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(have)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub algorithm: Algorithm,
    pub k: usize,
    pub mean_ratio: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone)]
pub struct MedianExperiment {
    pub rows: Vec<MedianRow>,
    /// Smallest ratio over all algorithms, trials and `k`.
    pub min_ratio: f64,
    /// Whether every trial produced nested sets with `|F_i| ≤ i`.
    pub all_nested: bool,
}

impl MedianExperiment {
    /// Mean-ratio curve of one algorithm, indexed by `k − 1`.
    pub fn curve(&self, algorithm: Algorithm) -> Vec<&MedianRow> {
        self.rows.iter().filter(|r| r.algorithm == algorithm).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExperimentConfig {
    pub r: f64,
    pub k_hat: usize,
    pub trials: usize,
    pub seed: u64,
    pub fill: bool,
}

/// Averages `ratio(k)` over `trials` draws of `λ` (shared by all
/// algorithms; draw `t` comes from substream `t` of the seed).
pub fn run_experiment(
    metric: &Metric,
    universe: &Universe,
    algorithms: &[Algorithm],
    cfg: &ExperimentConfig,
) -> Result<MedianExperiment> {
    let n = universe.n();
    if cfg.k_hat == 0 || cfg.k_hat > n {
        return Err(Error::InvalidArgument(format!("k_hat = {} outside 1..={n}", cfg.k_hat)));
    }
    if cfg.trials < 2 {
        return Err(Error::InsufficientSamples {
            required: 2,
            got: cfg.trials,
        });
    }
    let lambdas: Vec<f64> = (0..cfg.trials)
        .map(|t| Stream::new(cfg.seed, t as u64).uniform())
        .collect();
    let mut rows = Vec::with_capacity(algorithms.len() * n);
    let mut min_ratio = f64::INFINITY;
    let mut all_nested = true;
    for &alg in algorithms {
        let b = Strategy::new(alg, cfg.r)?.aligned(universe.cost(cfg.k_hat).max(f64::MIN_POSITIVE))?;
        let runs = lambdas
            .par_iter()
            .map(|&lambda| incremental_for_bids(metric, universe, &b, lambda, cfg.fill))
            .collect::<Result<Vec<_>>>()?;
        for run in &runs {
            all_nested &= run.is_nested();
            min_ratio = run.ratios.iter().copied().fold(min_ratio, f64::min);
        }
        let t = runs.len() as f64;
        for k in 1..=n {
            let mean = runs.iter().map(|s| s.ratios[k - 1]).sum::<f64>() / t;
            let var = runs.iter().map(|s| (s.ratios[k - 1] - mean).powi(2)).sum::<f64>() / (t - 1.0);
            rows.push(MedianRow {
                algorithm: alg,
                k,
                mean_ratio: mean,
                stderr: (var / t).sqrt(),
            });
        }
    }
    Ok(MedianExperiment {
        rows,
        min_ratio,
        all_nested,
    })
}

/// Writes `algorithm,k,mean_ratio,stderr` rows.
pub fn write_median_csv<W: Write>(rows: &[MedianRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "algorithm,k,mean_ratio,stderr")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{}",
            row.algorithm.as_str(),
            row.k,
            fmt12(row.mean_ratio),
            fmt12(row.stderr)
        )?;
    }
    Ok(())
}

/// Indices `i` with `v[i − 1] ≤ v[i] > v[i + 1]`: the last point of each
/// rise, so a flat-topped tooth counts once.
pub fn local_maxima(v: &[f64]) -> Vec<usize> {
    (1..v.len().saturating_sub(1))
        .filter(|&i| v[i - 1] <= v[i] && v[i] > v[i + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::median::graph::synthetic_road_graph;

    fn line(n: usize) -> (WeightedGraph, Metric) {
        let g = WeightedGraph::new(n, (1..n).map(|v| (v - 1, v, 1.0))).unwrap();
        let m = Metric::new(&g).unwrap();
        (g, m)
    }

    fn exact_baselines(m: &Metric) -> BTreeMap<usize, MedoidSolution> {
        // Brute force over all subsets; only for tiny graphs.
        let n = m.len();
        let mut best: BTreeMap<usize, MedoidSolution> = BTreeMap::new();
        for mask in 1u32..(1 << n) {
            let f: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            let k = f.len();
            let cost = m.cost(&f);
            if best.get(&k).is_none_or(|s| cost < s.cost) {
                best.insert(k, MedoidSolution { k, facilities: f, cost });
            }
        }
        best
    }

    #[test]
    fn trivial_index_set() {
        let (_, m) = line(4);
        let u = Universe::new(&exact_baselines(&m), 4).unwrap();
        let sol = build_incremental(&m, &u, &[1, 4], false).unwrap();
        assert_eq!(sol.ratios[3], 1.0);
        // F_1 is the 1-median projected into V, i.e. itself.
        assert_eq!(sol.set(1), u.set(1));
        assert_eq!(sol.ratios[0], 1.0);
        assert_eq!(sol.set(2), sol.set(1));
        assert!(sol.is_nested());
        let single = IncrementalSolution {
            indices: vec![1],
            sets: vec![vec![0]],
            slot: vec![0],
            ratios: vec![1.0],
        };
        assert!(single.is_nested());
    }

    #[test]
    fn missing_baseline_is_reported() {
        let (_, m) = line(4);
        let mut b = exact_baselines(&m);
        b.remove(&3);
        assert_eq!(Universe::new(&b, 4).unwrap_err().code(), "MISSING_BASELINE");
    }

    #[test]
    fn monotone_repair_and_gap_lookup() {
        let mk = |k, cost| MedoidSolution {
            k,
            facilities: (0..k).collect(),
            cost,
        };
        let b: BTreeMap<_, _> = [mk(1, 10.0), mk(2, 6.0), mk(3, 7.0), mk(4, 0.0)]
            .into_iter()
            .map(|s| (s.k, s))
            .collect();
        let u = Universe::new(&b, 4).unwrap();
        assert_eq!(u.cost(3), 6.0);
        assert_eq!(u.set(3), &[0, 1]);
        assert_eq!(u.index_of(100.0), 1);
        assert_eq!(u.index_of(10.0), 1);
        assert_eq!(u.index_of(9.9), 2);
        assert_eq!(u.index_of(6.0), 2);
        assert_eq!(u.index_of(0.5), 4);
    }

    #[test]
    fn ratios_against_exact_optima_are_at_least_one() {
        let g = synthetic_road_graph(12, 2, 3).unwrap();
        let m = Metric::new(&g).unwrap();
        let u = Universe::new(&exact_baselines(&m), 12).unwrap();
        let b = Strategy::new(Algorithm::A, 4.0).unwrap().aligned(u.cost(6)).unwrap();
        for t in 0..20 {
            let lambda = t as f64 / 20.0;
            for fill in [false, true] {
                let sol = incremental_for_bids(&m, &u, &b, lambda, fill).unwrap();
                assert!(sol.is_nested());
                assert!(sol.ratios.iter().all(|&r| r >= 1.0 - 1e-12), "{:?}", sol.ratios);
            }
        }
    }

    #[test]
    fn projection_stays_within_twice_the_chain_bound() {
        // Each projection step at most doubles the baseline cost of the set
        // projected plus the cost of the set it is projected into.
        let g = synthetic_road_graph(12, 2, 5).unwrap();
        let m = Metric::new(&g).unwrap();
        let u = Universe::new(&exact_baselines(&m), 12).unwrap();
        let sol = build_incremental(&m, &u, &[1, 3, 7, 12], false).unwrap();
        let ks = &sol.indices;
        for w in ks.windows(2) {
            let (k, l) = (w[0], w[1]);
            let c_k = m.cost(sol.set(k));
            let c_l = m.cost(sol.set(l));
            assert!(c_k <= 2.0 * u.cost(k) + c_l + 1e-9, "k={k} l={l}");
        }
    }

    #[test]
    fn cache_round_trip() {
        let g = synthetic_road_graph(30, 3, 1).unwrap();
        let m = Metric::new(&g).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("baselines.json");
        let a = load_or_compute_baselines(&g, &m, 4, Some(&path)).unwrap();
        assert!(path.exists());
        let b = load_or_compute_baselines(&g, &m, 4, Some(&path)).unwrap();
        assert_eq!(a, b);
        let c = load_or_compute_baselines(&g, &m, 5, Some(&path)).unwrap();
        assert_eq!(c.len(), 30);
    }

    #[test]
    fn maxima_count_plateaus_once() {
        assert_eq!(local_maxima(&[1.0, 2.0, 2.0, 1.0, 3.0, 0.0]), vec![2, 4]);
        assert!(local_maxima(&[1.0, 2.0]).is_empty());
    }
}
