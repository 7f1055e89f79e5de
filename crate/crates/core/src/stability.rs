//! Images of clusters and vertices under a second clustering, and checks of
//! the diameter bounds they satisfy.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{complete_cluster_graph, ClusterGraph};
use crate::metrics::ClusterMetric;
use crate::types::{Clustering, PointCloud};

/// Relative slack allowed on every bound.
const TOLERANCE: f64 = 1e-12;

/// Union of every cluster of `d` that meets `cluster`.
pub fn image_of_cluster(cluster: &BTreeSet<usize>, d: &Clustering) -> Result<BTreeSet<usize>> {
    if cluster.is_empty() {
        return Err(Error::EmptyCluster(String::new()));
    }
    let mut covered = BTreeSet::new();
    let mut image = BTreeSet::new();
    for (_, members) in d.iter() {
        if !members.is_disjoint(cluster) {
            covered.extend(members.intersection(cluster).copied());
            image.extend(members.iter().copied());
        }
    }
    if let Some(&p) = cluster.difference(&covered).next() {
        return Err(Error::NotInImageCover(p));
    }
    Ok(image)
}

/// Largest pairwise distance in `set`; zero for a singleton.
pub fn set_diameter(cloud: &PointCloud, set: &[usize]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyCluster(String::new()));
    }
    let n = cloud.len();
    if let Some(&id) = set.iter().find(|&&id| id >= n) {
        return Err(Error::IdOutOfRange { id, n });
    }
    let mut diameter = 0.0f64;
    for (a, &i) in set.iter().enumerate() {
        for &j in &set[a + 1..] {
            diameter = diameter.max(cloud.distance(i, j));
        }
    }
    Ok(diameter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexImage {
    /// Vertices of the target graph whose clusters meet the source vertex.
    pub vertices: Vec<usize>,
    /// Largest edge weight among them.
    pub diameter: f64,
}

/// Image of vertex `u` of `source` in `target`, which must contain every edge
/// between the image vertices.
pub fn image_of_vertex(source: &ClusterGraph, u: usize, target: &ClusterGraph) -> Result<VertexImage> {
    if u >= source.vertex_count() {
        return Err(Error::VertexOutOfRange(u));
    }
    let members: BTreeSet<usize> = source.vertex(u).members.iter().copied().collect();
    let vertices: Vec<usize> = (0..target.vertex_count())
        .filter(|&w| target.vertex(w).members.iter().any(|p| members.contains(p)))
        .collect();
    let mut diameter = 0.0f64;
    for (a, &v) in vertices.iter().enumerate() {
        for &w in &vertices[a + 1..] {
            let e = target
                .edge(v, w)
                .ok_or_else(|| Error::NotAClique(source.id(u).to_string()))?;
            diameter = diameter.max(e.weight);
        }
    }
    Ok(VertexImage { vertices, diameter })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub cluster: String,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    /// Bound as a multiple of delta.
    pub factor: f64,
    /// Largest value / bound observed.
    pub worst_ratio: f64,
    pub checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub delta: f64,
    pub delta_auto: bool,
    /// Keyed by check name: `image_diameter` and `clique_diameter:<metric>`.
    pub checks: BTreeMap<String, BoundCheck>,
    pub violations: Vec<Violation>,
}

impl StabilityReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn ratio(value: f64, bound: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else {
        value / bound
    }
}

fn within(value: f64, bound: f64) -> bool {
    value <= bound * (1.0 + TOLERANCE)
}

/// Checks, for every cluster of `c`, that its image under `d` has diameter at
/// most `3 delta`, and that its vertex image in the complete graph over `d`
/// is a clique of diameter at most `3 delta` (max, avg) or `delta` (min).
///
/// Every cluster of both clusterings must have diameter at most `delta`. When
/// `delta` is `None` it is set to the largest such diameter.
pub fn check_stability(
    cloud: &PointCloud,
    c: &Clustering,
    d: &Clustering,
    delta: Option<f64>,
) -> Result<StabilityReport> {
    let diameters = |clustering: &Clustering| -> Result<Vec<(String, f64)>> {
        clustering
            .iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|(id, members)| {
                let ids: Vec<usize> = members.iter().copied().collect();
                Ok((id.to_string(), set_diameter(cloud, &ids)?))
            })
            .collect()
    };
    let mut all = diameters(c)?;
    all.extend(diameters(d)?);
    let largest = all.iter().map(|x| x.1).fold(0.0, f64::max);
    let delta_auto = delta.is_none();
    let delta = match delta {
        Some(x) if x.is_nan() || x < 0.0 => {
            return Err(Error::Config(format!("delta must be nonnegative, got {x}")))
        }
        Some(x) => {
            if let Some((cluster, diameter)) = all.into_iter().find(|&(_, dm)| !within(dm, x)) {
                return Err(Error::DiameterPrecondition {
                    cluster,
                    diameter,
                    delta: x,
                });
            }
            x
        }
        None => largest,
    };

    let mut checks = BTreeMap::new();
    let mut violations = Vec::new();

    let bound = 3.0 * delta;
    let images = c
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(id, members)| {
            let image: Vec<usize> = image_of_cluster(members, d)?.into_iter().collect();
            Ok((id.to_string(), set_diameter(cloud, &image)?))
        })
        .collect::<Result<Vec<_>>>()?;
    record("image_diameter", 3.0, bound, images, &mut checks, &mut violations);

    for (metric, factor) in [(ClusterMetric::Min, 1.0), (ClusterMetric::Max, 3.0), (ClusterMetric::Avg, 3.0)] {
        let source = complete_cluster_graph(cloud, c, metric)?;
        let target = complete_cluster_graph(cloud, d, metric)?;
        let values = (0..source.vertex_count())
            .into_par_iter()
            .map(|u| Ok((source.id(u).to_string(), image_of_vertex(&source, u, &target)?.diameter)))
            .collect::<Result<Vec<_>>>()?;
        let name = format!("clique_diameter:{metric}");
        record(&name, factor, factor * delta, values, &mut checks, &mut violations);
    }

    Ok(StabilityReport {
        delta,
        delta_auto,
        checks,
        violations,
    })
}

fn record(
    name: &str,
    factor: f64,
    bound: f64,
    values: Vec<(String, f64)>,
    checks: &mut BTreeMap<String, BoundCheck>,
    violations: &mut Vec<Violation>,
) {
    let mut worst = 0.0f64;
    let checked = values.len();
    for (cluster, value) in values {
        worst = worst.max(ratio(value, bound));
        if !within(value, bound) {
            violations.push(Violation {
                check: name.to_string(),
                cluster,
                value,
                bound,
            });
        }
    }
    checks.insert(
        name.to_string(),
        BoundCheck {
            factor,
            worst_ratio: worst,
            checked,
        },
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ClusteringKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    fn clustering(groups: &[(&str, &[usize])]) -> Clustering {
        let map = groups.iter().map(|(k, v)| (k.to_string(), set(v))).collect();
        let kind = if groups.iter().map(|g| g.1.len()).sum::<usize>()
            == groups.iter().flat_map(|g| g.1.iter()).collect::<BTreeSet<_>>().len()
        {
            ClusteringKind::Partition
        } else {
            ClusteringKind::Division
        };
        Clustering::new(map, kind).unwrap()
    }

    fn line(xs: &[f64]) -> PointCloud {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn cluster_images() {
        let d = clustering(&[("a", &[0]), ("bc", &[1, 2])]);
        assert_eq!(image_of_cluster(&set(&[0, 1]), &d).unwrap(), set(&[0, 1, 2]));
        assert_eq!(image_of_cluster(&set(&[1]), &d).unwrap(), set(&[1, 2]));
        let partial = clustering(&[("a", &[0])]);
        assert!(matches!(image_of_cluster(&set(&[0, 1]), &partial), Err(Error::NotInImageCover(1))));
        let c = clustering(&[("x", &[0, 2]), ("y", &[1])]);
        for (_, members) in c.iter() {
            assert_eq!(&image_of_cluster(members, &c).unwrap(), members);
        }
    }

    #[test]
    fn diameters() {
        let cloud = line(&[0.0, 1.0, 2.0, 3.0, 3.0]);
        assert_eq!(set_diameter(&cloud, &[2]).unwrap(), 0.0);
        assert_eq!(set_diameter(&cloud, &[0, 1, 3]).unwrap(), 3.0);
        assert_eq!(set_diameter(&cloud, &[3, 4]).unwrap(), 0.0);
        assert!(set_diameter(&cloud, &[]).is_err());
    }

    #[test]
    fn vertex_image_needs_clique() {
        let cloud = line(&[0.0, 1.0, 2.0]);
        let c = clustering(&[("all", &[0, 1, 2])]);
        let d = clustering(&[("a", &[0]), ("b", &[1]), ("c", &[2])]);
        let gc = complete_cluster_graph(&cloud, &c, ClusterMetric::Max).unwrap();
        let mut gd = complete_cluster_graph(&cloud, &d, ClusterMetric::Max).unwrap();
        let img = image_of_vertex(&gc, 0, &gd).unwrap();
        assert_eq!(img.vertices, vec![0, 1, 2]);
        assert_eq!(img.diameter, 2.0);
        let back = image_of_vertex(&gd, 1, &gc).unwrap();
        assert_eq!((back.vertices.len(), back.diameter), (1, 0.0));
        gd.remove_edge(0, 2);
        assert!(matches!(image_of_vertex(&gc, 0, &gd), Err(Error::NotAClique(_))));
    }

    #[test]
    fn vertex_image_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..24).map(|_| vec![rng.random(), rng.random()]).collect();
        let cloud = PointCloud::from_rows(&rows).unwrap();
        let c = Clustering::from_labels(&(0..24).map(|i| i % 5).collect::<Vec<_>>()).unwrap();
        let d = Clustering::from_labels(&(0..24).map(|i| i / 7).collect::<Vec<_>>()).unwrap();
        let gc = complete_cluster_graph(&cloud, &c, ClusterMetric::Avg).unwrap();
        let gd = complete_cluster_graph(&cloud, &d, ClusterMetric::Avg).unwrap();
        for u in 0..gc.vertex_count() {
            let img = image_of_vertex(&gc, u, &gd).unwrap();
            let mut brute = 0.0f64;
            for (_, a) in d.iter() {
                for (_, b) in d.iter() {
                    let meets = |s: &BTreeSet<usize>| s.iter().any(|p| gc.vertex(u).members.contains(p));
                    if meets(a) && meets(b) {
                        let a: Vec<usize> = a.iter().copied().collect();
                        let b: Vec<usize> = b.iter().copied().collect();
                        brute = brute.max(ClusterMetric::Avg.distance(&cloud, &a, &b).unwrap());
                    }
                }
            }
            assert!((img.diameter - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn same_clustering_is_trivially_stable() {
        let cloud = line(&[0.0, 0.5, 1.0, 4.0, 4.2]);
        let c = clustering(&[("a", &[0, 1, 2]), ("b", &[3, 4])]);
        let report = check_stability(&cloud, &c, &c, None).unwrap();
        assert_eq!(report.delta, 1.0);
        assert!(report.holds());
        assert!(report.checks["image_diameter"].worst_ratio <= 1.0 / 3.0 + 1e-15);
    }

    #[test]
    fn chain_approaches_three_delta() {
        // d1 - c1 - c2 - d2 on a line: image of {c1, c2} spans nearly 3 delta.
        let eps = 1e-3;
        let cloud = line(&[0.0, 1.0 - eps, 1.0, 2.0 - eps, 2.0, 3.0 - 2.0 * eps]);
        let c = clustering(&[("c", &[2, 3]), ("l", &[0, 1]), ("r", &[4, 5])]);
        let d = clustering(&[("d1", &[0, 1, 2]), ("d2", &[3, 4, 5])]);
        let report = check_stability(&cloud, &c, &d, Some(1.0)).unwrap();
        assert!(report.holds());
        let worst = report.checks["image_diameter"].worst_ratio;
        assert!(worst > 0.99 && worst <= 1.0, "{worst}");
    }

    #[test]
    fn precondition_enforced() {
        let cloud = line(&[0.0, 2.0]);
        let c = clustering(&[("a", &[0, 1])]);
        assert!(matches!(
            check_stability(&cloud, &c, &c, Some(1.0)),
            Err(Error::DiameterPrecondition { .. })
        ));
    }
}
