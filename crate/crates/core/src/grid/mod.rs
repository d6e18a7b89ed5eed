//! Transmission network model: validation, incidence and susceptance
//! matrices, PTDF, linear power flow and k-means coarsening.

mod coarsen;
mod lattice;
mod network;
mod ptdf;

pub use coarsen::{
    aggregate_network, coarsen, weighted_kmeans, CoarseningResult, KMeansOutcome,
    CONNECTIVITY_RETRIES, MAX_ITERATIONS, RESTARTS,
};
pub use lattice::{lattice, LatticeSpec};
pub use network::{bounding_box_area, mean_neighbor_distance, Line, Network, Node};
pub use ptdf::{
    build_incidence, build_ptdf, build_susceptance, compute_flows, max_relative_imbalance,
    PtdfMatrix, BALANCE_TOLERANCE,
};
