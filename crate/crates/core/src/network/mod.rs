//! Directed TE networks: construction from pairwise tests, topology
//! statistics, centralities, bellwether rankings and rolling density.

mod estimate;
mod graph;

pub use estimate::{
    count_significant, estimate_te_network, raw_density, raw_te_matrix, rolling_density, DensityPoint, NetworkSpec,
    SignalMatrix, TeNetwork,
};
pub use graph::{
    bellwether_ranking, build_network, centralities, edge_weight_comparison, network_stats,
    Bellwether, CentralityTable, DirectedWeightedGraph, Edge, NetworkStats, SquareMatrix,
    PAGERANK_DAMPING, PAGERANK_TOL,
};
