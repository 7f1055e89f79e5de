use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row} has {found} features, expected {expected}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("point cloud must have at least one feature column")]
    ZeroDimension,
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("distance matrix is not square: row {row} has {found} entries, expected {expected}")]
    NotSquare {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("distance matrix is asymmetric at ({i}, {j}): {a} vs {b}")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("distance matrix has negative entry at ({i}, {j})")]
    NegativeDistance { i: usize, j: usize },
    #[error("distance matrix has nonzero diagonal at {0}")]
    NonZeroDiagonal(usize),
    #[error("label vector has {found} entries for {expected} points")]
    LabelCount { expected: usize, found: usize },
    #[error("empty point cloud")]
    EmptyCloud,

    #[error("cluster `{0}` is empty")]
    EmptyCluster(String),
    #[error("point id {id} out of range for {n} points")]
    IdOutOfRange { id: usize, n: usize },
    #[error("overlap under partition kind: point {point} is in clusters `{first}` and `{second}`")]
    PartitionOverlap {
        point: usize,
        first: String,
        second: String,
    },
    #[error("clustering does not cover point {0}")]
    Uncovered(usize),
    #[error("clustering has no clusters")]
    NoClusters,

    #[error("invalid Wasserstein exponent p = {0}; need finite p >= 1")]
    InvalidExponent(f64),
    #[error("invalid Minkowski exponent {0}; need finite q >= 1")]
    InvalidMinkowski(f64),
    #[error("k = {k} out of range for {n} points (need 1 <= k < n)")]
    NeighborCountOutOfRange { k: usize, n: usize },
    #[error("cluster `{cluster}` straddles geodesic components {first} and {second}")]
    ClusterStraddlesComponents {
        cluster: String,
        first: usize,
        second: usize,
    },
    #[error("geodesic index covers {index} points but the cloud has {cloud}")]
    IndexMismatch { index: usize, cloud: usize },
    #[error("self-loop on vertex `{0}`")]
    SelfLoop(String),
    #[error("edge ({0}, {1}) has invalid weight {2}")]
    InvalidWeight(String, String, f64),
    #[error("original edge ({0}, {1}) joins different components")]
    CrossComponentEdge(String, String),
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("point {0} belongs to no cluster")]
    Unclustered(usize),
    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("distortion undefined for distances ({d_cg}, {d_k}); both must be positive and finite")]
    UndefinedDistortion { d_cg: f64, d_k: f64 },
    #[error("no valid point pairs between clusters `{0}` and `{1}`")]
    NoValidPairs(String, String),
    #[error("vertices `{0}` and `{1}` are in different components")]
    DifferentComponents(String, String),
    #[error("vertices `{0}` and `{1}` share a component but have no finite cluster-graph distance")]
    DisconnectedWithinComponent(String, String),
    #[error("distortion requires at least two vertices")]
    TooFewVertices,

    #[error("edge ({0}, {1}) carries no distortion value")]
    MissingDistortion(String, String),
    #[error("edge ({0}, {1}) not in graph")]
    MissingEdge(String, String),
    #[error("path is empty")]
    EmptyPath,
    #[error("path edges are not consecutive at position {0}")]
    BrokenPath(usize),
    #[error("zero-weight edge ({0}, {1}); path quality undefined")]
    ZeroWeight(String, String),
    #[error("vertex set is disconnected")]
    Disconnected,
    #[error("no removable edges")]
    EmptyRemovable,

    #[error("kmeans needs coordinates, got a distance matrix")]
    NeedsCoordinates,
    #[error("cannot form {k} clusters from {n} points")]
    TooFewPoints { k: usize, n: usize },
    #[error("class `{class}` has {n} points, fewer than {k}")]
    ClassTooSmall { class: String, n: usize, k: usize },
    #[error("point {0} has no class label")]
    MissingLabel(usize),

    #[error("cluster `{cluster}` has diameter {diameter} > delta {delta}")]
    DiameterPrecondition {
        cluster: String,
        diameter: f64,
        delta: f64,
    },
    #[error("image of vertex `{0}` is not a clique; supply an unpruned graph")]
    NotAClique(String),
    #[error("point {0} of the cluster is not covered by the target clustering")]
    NotInImageCover(usize),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Errors that signal a broken internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::DisconnectedWithinComponent(..) | Error::UndefinedDistortion { .. }
        )
    }

    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidExponent(_)
                | Error::InvalidMinkowski(_)
                | Error::NeighborCountOutOfRange { .. }
                | Error::TooFewPoints { .. }
        )
    }
}
