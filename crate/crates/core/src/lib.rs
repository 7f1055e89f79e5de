//! ClusterGraphs: graphs over the clusters of a dataset, scored by how well
//! their shortest paths reproduce intrinsic distances, and pruned towards
//! low distortion or high connectivity.

pub mod clustering;
pub mod distortion;
pub mod error;
pub mod geodesics;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod pruning;
pub mod stability;
pub mod synth;
pub mod transport;
pub mod types;

pub use error::{Error, Result};
pub use geodesics::GeodesicIndex;
pub use graph::{build_cluster_graph, ClusterGraph};
pub use metrics::ClusterMetric;
pub use types::{Clustering, ClusteringKind, PointCloud};
