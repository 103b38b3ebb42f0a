use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Undirected weighted graph; every edge is stored once with `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Deserialize)]
struct EdgeRecord {
    u: usize,
    v: usize,
    weight: f64,
}

impl WeightedGraph {
    /// Builds a graph on vertices `0..vertex_count`. Arcs given in both
    /// orientations (or repeated) are merged into one edge carrying the
    /// minimum weight; self-loops are dropped.
    pub fn new(vertex_count: usize, arcs: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, weight) in arcs {
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::NonPositiveWeight { u, v, weight });
            }
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{vertex_count}"
                )));
            }
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            merged.entry(key).and_modify(|w| *w = w.min(weight)).or_insert(weight);
        }
        let edges: Vec<_> = merged.into_iter().map(|((u, v), w)| (u, v, w)).collect();
        let mut g = WeightedGraph {
            vertex_count,
            edges,
            adjacency: Vec::new(),
        };
        g.build_adjacency();
        g.check_connected()?;
        Ok(g)
    }

    fn build_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for &(u, v, w) in &self.edges {
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
        self.adjacency = adj;
    }

    fn check_connected(&self) -> Result<()> {
        if self.vertex_count == 0 {
            return Err(Error::InvalidArgument("graph has no vertices".into()));
        }
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        match seen.iter().position(|&s| !s) {
            Some(unreachable) => Err(Error::Disconnected { unreachable }),
            None => Ok(()),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adjacency[u]
    }

    /// SHA-256 of the canonical edge list, as lowercase hex.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{}\n", self.vertex_count).as_bytes());
        for &(u, v, w) in &self.edges {
            h.update(format!("{u},{v},{:016x}\n", w.to_bits()).as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes the edge list as `u,v,weight` CSV.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["u", "v", "weight"]).map_err(|e| csv_error(path, e))?;
        for &(u, v, weight) in &self.edges {
            w.write_record([u.to_string(), v.to_string(), format!("{weight:?}")])
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path.display().to_string(), format!("{other:?}")),
    }
}

/// Reads an edge-list CSV with header `u,v,weight`. The vertex count is one
/// more than the largest id mentioned.
pub fn load_graph(path: &Path) -> Result<WeightedGraph> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["u", "v", "weight"] {
        return Err(Error::parse(
            path.display().to_string(),
            format!(
                "expected header `u,v,weight`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut arcs = Vec::new();
    for (line, rec) in reader.deserialize::<EdgeRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::parse(format!("{} record {}", path.display(), line + 1), e))?;
        arcs.push((rec.u, rec.v, rec.weight));
    }
    let n = arcs.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
    WeightedGraph::new(n, arcs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Label {
    dist: f64,
    vertex: usize,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest-path lengths (binary-heap label setting).
pub fn dijkstra(g: &WeightedGraph, source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.vertex_count()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Label {
        dist: 0.0,
        vertex: source,
    });
    while let Some(Label { dist: d, vertex: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in g.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Label { dist: nd, vertex: v });
            }
        }
    }
    dist
}

/// Row-major table of distances from each source to every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTable {
    sources: Vec<usize>,
    n: usize,
    data: Vec<f64>,
}

impl DistanceTable {
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Distances from the `i`-th source.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Shortest paths from every vertex in `sources`, computed in parallel.
pub fn shortest_path_matrix(g: &WeightedGraph, sources: &[usize]) -> Result<DistanceTable> {
    if sources.is_empty() {
        return Err(Error::InvalidArgument("no source vertices".into()));
    }
    if let Some(&s) = sources.iter().find(|&&s| s >= g.vertex_count()) {
        return Err(Error::InvalidArgument(format!("source {s} is not a vertex")));
    }
    let rows: Vec<Vec<f64>> = sources.par_iter().map(|&s| dijkstra(g, s)).collect();
    Ok(DistanceTable {
        sources: sources.to_vec(),
        n: g.vertex_count(),
        data: rows.concat(),
    })
}

/// All-pairs metric, `d(u, v)` for every vertex pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    table: DistanceTable,
}

impl Metric {
    pub fn new(g: &WeightedGraph) -> Result<Self> {
        let all: Vec<usize> = (0..g.vertex_count()).collect();
        Ok(Metric {
            table: shortest_path_matrix(g, &all)?,
        })
    }

    pub fn len(&self) -> usize {
        self.table.n
    }

    pub fn is_empty(&self) -> bool {
        self.table.n == 0
    }

    pub fn d(&self, u: usize, v: usize) -> f64 {
        self.table.data[u * self.table.n + v]
    }

    pub fn row(&self, u: usize) -> &[f64] {
        self.table.row(u)
    }

    /// `Σ_v min_{f ∈ facilities} d(v, f)`; infinite for an empty set.
    pub fn cost(&self, facilities: &[usize]) -> f64 {
        if facilities.is_empty() {
            return f64::INFINITY;
        }
        let mut best = self.row(facilities[0]).to_vec();
        for &f in &facilities[1..] {
            for (b, &d) in best.iter_mut().zip(self.row(f)) {
                if d < *b {
                    *b = d;
                }
            }
        }
        best.iter().sum()
    }
}

/// Seeded planar road-like network: `n` uniform points in the unit square,
/// each joined to its `degree` nearest neighbours, plus a Euclidean
/// spanning tree so the graph is connected. Weights are Euclidean lengths
/// times a detour factor uniform in `[1, 1.3)`.
pub fn synthetic_road_graph(n: usize, degree: usize, seed: u64) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two vertices".into()));
    }
    let mut rng = Stream::new(seed, 0);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.uniform(), rng.uniform())).collect();
    let dist = |a: usize, b: usize| {
        let (dx, dy) = (pts[a].0 - pts[b].0, pts[a].1 - pts[b].1);
        (dx * dx + dy * dy).sqrt()
    };
    let mut pairs = Vec::new();
    for u in 0..n {
        let mut near: Vec<usize> = (0..n).filter(|&v| v != u).collect();
        near.sort_by(|&a, &b| dist(u, a).total_cmp(&dist(u, b)).then(a.cmp(&b)));
        pairs.extend(near.into_iter().take(degree).map(|v| (u.min(v), u.max(v))));
    }
    // Prim's algorithm on the complete Euclidean graph.
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    best[0].0 = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0))
            .expect("vertices remain");
        in_tree[u] = true;
        if u != 0 {
            let p = best[u].1;
            pairs.push((u.min(p), u.max(p)));
        }
        for v in 0..n {
            if !in_tree[v] && dist(u, v) < best[v].0 {
                best[v] = (dist(u, v), u);
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let mut detour = Stream::new(seed, 1);
    let arcs: Vec<_> = pairs
        .into_iter()
        .map(|(u, v)| (u, v, dist(u, v).max(1e-9) * (1.0 + 0.3 * detour.uniform())))
        .collect();
    WeightedGraph::new(n, arcs)
}
