//! Point clouds, clusterings and their validation.
//!
//! Every distance in the crate is read through [`PointCloud::distance`], so
//! coordinate clouds and precomputed distance matrices behave identically
//! downstream.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Label given to points without a class label in vertex compositions.
pub const UNLABELED: &str = "unlabeled";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudMode {
    Coordinates,
    DistanceMatrix,
}

#[derive(Debug, Clone, PartialEq)]
enum Geometry {
    /// Row-major `len × dim` features.
    Coordinates { values: Vec<f64>, dim: usize },
    /// Row-major `len × len` distances.
    Matrix { values: Vec<f64> },
}

/// A finite metric space: points with coordinates, or an explicit distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    geometry: Geometry,
    len: usize,
    labels: Option<Vec<Option<String>>>,
    minkowski: f64,
}

impl PointCloud {
    /// Coordinates mode. All rows must share one dimension `d >= 1` and hold
    /// finite values.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let dim = rows[0].as_ref().len();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    row: r,
                    expected: dim,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        let cloud = PointCloud {
            geometry: Geometry::Coordinates { values, dim },
            len: rows.len(),
            labels: None,
            minkowski: 2.0,
        };
        cloud.check()?;
        Ok(cloud)
    }

    /// Distance-matrix mode. The matrix must be square, exactly symmetric,
    /// nonnegative and finite with a zero diagonal.
    pub fn from_matrix<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::NotSquare {
                    row: r,
                    expected: n,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        let cloud = PointCloud {
            geometry: Geometry::Matrix { values },
            len: n,
            labels: None,
            minkowski: 2.0,
        };
        cloud.check()?;
        Ok(cloud)
    }

    pub fn with_labels(mut self, labels: Vec<Option<String>>) -> Result<Self> {
        if labels.len() != self.len {
            return Err(Error::LabelCount {
                expected: self.len,
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Sets the Minkowski exponent used in coordinates mode (default 2).
    pub fn with_minkowski(mut self, q: f64) -> Result<Self> {
        if !q.is_finite() || q < 1.0 {
            return Err(Error::InvalidMinkowski(q));
        }
        self.minkowski = q;
        Ok(self)
    }

    /// Re-checks every invariant of the cloud.
    pub fn check(&self) -> Result<()> {
        if self.len == 0 {
            return Err(Error::EmptyCloud);
        }
        if !self.minkowski.is_finite() || self.minkowski < 1.0 {
            return Err(Error::InvalidMinkowski(self.minkowski));
        }
        match &self.geometry {
            Geometry::Coordinates { values, dim } => {
                if *dim == 0 {
                    return Err(Error::ZeroDimension);
                }
                if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        row: pos / dim,
                        col: pos % dim,
                    });
                }
            }
            Geometry::Matrix { values } => {
                let n = self.len;
                for i in 0..n {
                    if values[i * n + i] != 0.0 {
                        return Err(Error::NonZeroDiagonal(i));
                    }
                    for j in 0..n {
                        let a = values[i * n + j];
                        if !a.is_finite() {
                            return Err(Error::NonFinite { row: i, col: j });
                        }
                        if a < 0.0 {
                            return Err(Error::NegativeDistance { i, j });
                        }
                        let b = values[j * n + i];
                        if j > i && a != b {
                            return Err(Error::Asymmetric { i, j, a, b });
                        }
                    }
                }
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.len {
                return Err(Error::LabelCount {
                    expected: self.len,
                    found: labels.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mode(&self) -> CloudMode {
        match self.geometry {
            Geometry::Coordinates { .. } => CloudMode::Coordinates,
            Geometry::Matrix { .. } => CloudMode::DistanceMatrix,
        }
    }

    /// Feature dimension, `None` in distance-matrix mode.
    pub fn dim(&self) -> Option<usize> {
        match self.geometry {
            Geometry::Coordinates { dim, .. } => Some(dim),
            Geometry::Matrix { .. } => None,
        }
    }

    pub fn minkowski(&self) -> f64 {
        self.minkowski
    }

    /// Coordinates of point `i`, `None` in matrix mode.
    pub fn point(&self, i: usize) -> Option<&[f64]> {
        match &self.geometry {
            Geometry::Coordinates { values, dim } => values.get(i * dim..(i + 1) * dim),
            Geometry::Matrix { .. } => None,
        }
    }

    pub fn labels(&self) -> Option<&[Option<String>]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<&str> {
        self.labels.as_ref()?.get(i)?.as_deref()
    }

    /// Distance between two points. Panics when an id is out of range; use
    /// [`point_distance`](crate::metrics::point_distance) for a checked call.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.len && j < self.len, "point id out of range");
        match &self.geometry {
            Geometry::Matrix { values } => values[i * self.len + j],
            Geometry::Coordinates { values, dim } => {
                if i == j {
                    return 0.0;
                }
                let a = &values[i * dim..(i + 1) * dim];
                let b = &values[j * dim..(j + 1) * dim];
                minkowski_distance(a, b, self.minkowski)
            }
        }
    }

    /// The sub-cloud on `ids` (in the given order), renumbered from 0.
    pub fn subset(&self, ids: &[usize]) -> PointCloud {
        let geometry = match &self.geometry {
            Geometry::Coordinates { values, dim } => Geometry::Coordinates {
                values: ids
                    .iter()
                    .flat_map(|&i| values[i * dim..(i + 1) * dim].iter().copied())
                    .collect(),
                dim: *dim,
            },
            Geometry::Matrix { values } => Geometry::Matrix {
                values: ids
                    .iter()
                    .flat_map(|&i| ids.iter().map(move |&j| values[i * self.len + j]))
                    .collect(),
            },
        };
        PointCloud {
            geometry,
            len: ids.len(),
            labels: self
                .labels
                .as_ref()
                .map(|l| ids.iter().map(|&i| l[i].clone()).collect()),
            minkowski: self.minkowski,
        }
    }
}

pub(crate) fn minkowski_distance(a: &[f64], b: &[f64], q: f64) -> f64 {
    if q == 2.0 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    } else if q == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs().powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusteringKind {
    /// Pairwise disjoint clusters.
    Partition,
    /// Clusters may overlap.
    Division,
}

/// A cover of point ids by named clusters.
///
/// Cluster ids are opaque strings; iteration is in lexicographic id order and
/// that order defines vertex indices in every graph built from the clustering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    clusters: BTreeMap<String, BTreeSet<usize>>,
    kind: ClusteringKind,
}

impl Clustering {
    pub fn new(clusters: BTreeMap<String, BTreeSet<usize>>, kind: ClusteringKind) -> Result<Self> {
        let c = Clustering { clusters, kind };
        c.check()?;
        Ok(c)
    }

    /// Builds a clustering from `(point, cluster)` rows. A point listed under
    /// two clusters makes the result a division.
    pub fn from_assignments<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, S)>,
        S: Into<String>,
    {
        let mut clusters: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        let mut overlapping = false;
        for (point, cluster) in rows {
            let cluster = cluster.into();
            let inserted = clusters.entry(cluster).or_default().insert(point);
            if inserted && !seen.insert(point) {
                overlapping = true;
            }
        }
        let kind = if overlapping {
            ClusteringKind::Division
        } else {
            ClusteringKind::Partition
        };
        Clustering::new(clusters, kind)
    }

    /// A partition from one label per point.
    pub fn from_labels<S: ToString>(labels: &[S]) -> Result<Self> {
        Clustering::from_assignments(labels.iter().enumerate().map(|(i, l)| (i, l.to_string())))
    }

    /// Checks the invariants that do not depend on a point cloud.
    pub fn check(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::NoClusters);
        }
        let mut owner: BTreeMap<usize, &str> = BTreeMap::new();
        for (id, members) in &self.clusters {
            if members.is_empty() {
                return Err(Error::EmptyCluster(id.clone()));
            }
            if self.kind == ClusteringKind::Partition {
                for &p in members {
                    if let Some(first) = owner.insert(p, id) {
                        return Err(Error::PartitionOverlap {
                            point: p,
                            first: first.to_string(),
                            second: id.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ClusteringKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&BTreeSet<usize>> {
        self.clusters.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.clusters.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<usize>)> {
        self.clusters.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn clusters(&self) -> &BTreeMap<String, BTreeSet<usize>> {
        &self.clusters
    }

    /// For each of `n` points, the indices (in id order) of clusters holding it.
    pub fn memberships(&self, n: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); n];
        for (c, members) in self.clusters.values().enumerate() {
            for &p in members {
                if p < n {
                    out[p].push(c);
                }
            }
        }
        out
    }
}

/// Validates a cloud and a clustering of it together.
pub fn validate(cloud: &PointCloud, clustering: &Clustering) -> Result<()> {
    cloud.check()?;
    clustering.check()?;
    let n = cloud.len();
    let mut covered = vec![false; n];
    for (_, members) in clustering.iter() {
        for &p in members {
            if p >= n {
                return Err(Error::IdOutOfRange { id: p, n });
            }
            covered[p] = true;
        }
    }
    if let Some(p) = covered.iter().position(|c| !c) {
        return Err(Error::Uncovered(p));
    }
    Ok(())
}
