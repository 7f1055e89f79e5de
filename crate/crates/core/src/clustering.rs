//! Built-in k-means (k-means++ seeding, Lloyd iterations) and per-label
//! clustering.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`, so results are
//! identical across platforms. Distances are squared Euclidean.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{CloudMode, Clustering, ClusteringKind, PointCloud};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each centroid update.
    pub wcss: Vec<f64>,
}

impl KMeans {
    pub fn clustering(&self) -> Clustering {
        let k = self.centroids.len();
        let mut clusters: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
        for (p, &c) in self.assignments.iter().enumerate() {
            clusters.entry(cluster_id(c, k)).or_default().insert(p);
        }
        Clustering::new(clusters, ClusteringKind::Partition).expect("k-means output is a partition")
    }
}

fn cluster_id(c: usize, k: usize) -> String {
    let width = (k.max(1) - 1).to_string().len();
    format!("c{c:0width$}")
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = points.iter().map(|p| sq(p, points[first])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let r = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > r {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave r just above the final sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq(p, points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].to_vec()).collect()
}

/// Full k-means run with its iteration history.
pub fn kmeans_detailed(cloud: &PointCloud, k: usize, seed: u64) -> Result<KMeans> {
    if cloud.mode() != CloudMode::Coordinates {
        return Err(Error::NeedsCoordinates);
    }
    let n = cloud.len();
    if k == 0 || k > n {
        return Err(Error::TooFewPoints { k, n });
    }
    let points: Vec<&[f64]> = (0..n).map(|i| cloud.point(i).expect("coordinates")).collect();
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(&points, k, &mut rng);
    let mut assignments: Vec<usize> = Vec::new();
    let mut wcss = Vec::new();
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        let mut next: Vec<usize> = points.par_iter().map(|p| nearest(p, &centroids).0).collect();
        if next == assignments {
            break;
        }
        iterations += 1;

        let mut sizes = vec![0usize; k];
        for &c in &next {
            sizes[c] += 1;
        }
        // Reseed each empty cluster with the point farthest from its centroid
        // among clusters that can spare one.
        while let Some(empty) = sizes.iter().position(|&s| s == 0) {
            let far = (0..n)
                .filter(|&i| sizes[next[i]] > 1)
                .max_by(|&a, &b| {
                    sq(points[a], &centroids[next[a]])
                        .total_cmp(&sq(points[b], &centroids[next[b]]))
                        .then(b.cmp(&a))
                })
                .expect("some cluster has two points when k <= n");
            sizes[next[far]] -= 1;
            next[far] = empty;
            sizes[empty] = 1;
            centroids[empty] = points[far].to_vec();
        }

        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &c) in points.iter().zip(&next) {
            for (s, x) in sums[c].iter_mut().zip(*p) {
                *s += x;
            }
        }
        for (c, sum) in sums.into_iter().enumerate() {
            centroids[c] = sum.into_iter().map(|s| s / sizes[c] as f64).collect();
        }
        wcss.push(points.iter().zip(&next).map(|(p, &c)| sq(p, &centroids[c])).sum());
        assignments = next;
    }
    Ok(KMeans {
        assignments,
        centroids,
        iterations,
        wcss,
    })
}

/// Partition into exactly `k` nonempty clusters with ids `c0`, `c1`, ...
/// (zero-padded to equal width).
pub fn kmeans(cloud: &PointCloud, k: usize, seed: u64) -> Result<Clustering> {
    Ok(kmeans_detailed(cloud, k, seed)?.clustering())
}

/// k-means inside each class of the cloud's labels. Cluster ids are
/// `<class>/<index>`. The class at sorted position `i` uses seed `seed + i`.
pub fn per_label_clustering(cloud: &PointCloud, k_per_class: usize, seed: u64) -> Result<Clustering> {
    if cloud.mode() != CloudMode::Coordinates {
        return Err(Error::NeedsCoordinates);
    }
    if k_per_class == 0 {
        return Err(Error::Config("k_per_class must be positive".into()));
    }
    let mut classes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for i in 0..cloud.len() {
        let label = cloud.label(i).ok_or(Error::MissingLabel(i))?;
        classes.entry(label.to_string()).or_default().push(i);
    }
    for (class, members) in &classes {
        if members.len() < k_per_class {
            return Err(Error::ClassTooSmall {
                class: class.clone(),
                n: members.len(),
                k: k_per_class,
            });
        }
    }
    let runs = classes
        .iter()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(i, (class, members))| {
            let sub = cloud.subset(members);
            let run = kmeans_detailed(&sub, k_per_class, seed.wrapping_add(i as u64))?;
            Ok((class, members, run))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut clusters: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for (class, members, run) in runs {
        for (local, &c) in run.assignments.iter().enumerate() {
            let index = cluster_id(c, k_per_class);
            clusters
                .entry(format!("{class}/{}", &index[1..]))
                .or_default()
                .insert(members[local]);
        }
    }
    Clustering::new(clusters, ClusteringKind::Partition)
}
