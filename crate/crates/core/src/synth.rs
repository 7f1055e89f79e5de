//! Synthetic datasets used by the tests, the acceptance suite and the sample data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::{Clustering, PointCloud};

/// `count` points on a circle of `radius` around the origin. Point `i` sits
/// at angle `2π(i + jitter·u)/count` with `u` uniform in `[0, 1)`.
pub fn circle(count: usize, radius: f64, jitter: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let t = std::f64::consts::TAU * (i as f64 + jitter * rng.random::<f64>()) / count as f64;
            vec![radius * t.cos(), radius * t.sin()]
        })
        .collect()
}

/// Two concentric circles of radius 1 (`inner`) and 2 (`outer`), with
/// `per_circle` points each and full angular jitter.
pub fn concentric_circles(per_circle: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = circle(per_circle, 1.0, 1.0, &mut rng);
    rows.extend(circle(per_circle, 2.0, 1.0, &mut rng));
    let labels = (0..2 * per_circle)
        .map(|i| Some(if i < per_circle { "inner" } else { "outer" }.to_string()))
        .collect();
    PointCloud::from_rows(&rows)
        .and_then(|c| c.with_labels(labels))
        .expect("valid circles")
}

/// Four clusters of `per_cluster` coincident points, as a distance matrix:
/// cluster 0 is at distance 1 from every other cluster, the rest are at
/// distance 2 from each other. Cluster ids are `0`..`3`.
pub fn four_clusters(per_cluster: usize) -> (PointCloud, Clustering) {
    let n = 4 * per_cluster;
    let cluster = |p: usize| p / per_cluster;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (cluster(i), cluster(j)) {
                    (a, b) if a == b => 0.0,
                    (0, _) | (_, 0) => 1.0,
                    _ => 2.0,
                })
                .collect()
        })
        .collect();
    let cloud = PointCloud::from_matrix(&rows).expect("valid matrix");
    let clustering = Clustering::from_labels(&(0..n).map(cluster).collect::<Vec<_>>()).expect("valid labels");
    (cloud, clustering)
}
