//! Incremental k-median from bidding sequences on graph metrics.

mod graph;
mod incremental;
mod kmedoids;

pub use graph::{
    dijkstra, load_graph, shortest_path_matrix, synthetic_road_graph, DistanceTable, Metric, WeightedGraph,
};
pub use incremental::{
    build_incremental, compute_baselines, incremental_for_bids, load_or_compute_baselines, local_maxima,
    project_indices, run_experiment, write_median_csv, ExperimentConfig, IncrementalSolution, MedianExperiment,
    MedianRow, Universe,
};
pub use kmedoids::{kmedoids, kmedoids_with_trace, MedoidSolution};
