//! The ClusterGraph: one vertex per cluster, edges weighted by an
//! inter-cluster distance, complete inside every geodesic component.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::GeodesicIndex;
use crate::metrics::ClusterMetric;
use crate::types::{validate, Clustering, PointCloud, UNLABELED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Original,
    Merge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    /// Sorted point ids.
    pub members: Vec<usize>,
    /// Fraction of members per class label; empty when the cloud is unlabeled.
    pub composition: BTreeMap<String, f64>,
    /// Geodesic component of the members.
    pub component: usize,
}

impl Vertex {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeData {
    pub weight: f64,
    pub distortion: Option<f64>,
    pub provenance: Provenance,
}

/// Weighted graph over clusters. Vertex indices follow the lexicographic order
/// of cluster ids; edges are keyed by `(u, v)` with `u < v`.
#[derive(Debug, Clone)]
pub struct ClusterGraph {
    vertices: Vec<Vertex>,
    edges: BTreeMap<(usize, usize), EdgeData>,
    metric: ClusterMetric,
    knn_k: Option<usize>,
    paths: OnceLock<Arc<Vec<f64>>>,
}

impl PartialEq for ClusterGraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
            && self.edges == other.edges
            && self.metric == other.metric
            && self.knn_k == other.knn_k
    }
}

fn key(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl ClusterGraph {
    /// Assembles a graph from parts, checking every model invariant.
    pub fn from_parts(
        vertices: Vec<Vertex>,
        edges: BTreeMap<(usize, usize), EdgeData>,
        metric: ClusterMetric,
        knn_k: Option<usize>,
    ) -> Result<Self> {
        metric.check()?;
        for w in vertices.windows(2) {
            if w[0].id >= w[1].id {
                return Err(Error::DuplicateVertex(w[1].id.clone()));
            }
        }
        let g = ClusterGraph {
            vertices,
            edges,
            metric,
            knn_k,
            paths: OnceLock::new(),
        };
        for (&(u, v), e) in &g.edges {
            if u == v {
                return Err(Error::SelfLoop(g.id(u).to_string()));
            }
            if u > v || v >= g.vertices.len() {
                return Err(Error::VertexOutOfRange(u.max(v)));
            }
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(Error::InvalidWeight(
                    g.id(u).into(),
                    g.id(v).into(),
                    e.weight,
                ));
            }
            if e.provenance == Provenance::Original
                && g.vertices[u].component != g.vertices[v].component
            {
                return Err(Error::CrossComponentEdge(g.id(u).into(), g.id(v).into()));
            }
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, u: usize) -> &Vertex {
        &self.vertices[u]
    }

    pub fn id(&self, u: usize) -> &str {
        &self.vertices[u].id
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.vertices
            .binary_search_by(|v| v.id.as_str().cmp(id))
            .ok()
    }

    pub fn metric(&self) -> ClusterMetric {
        self.metric
    }

    pub fn knn_k(&self) -> Option<usize> {
        self.knn_k
    }

    /// The clustering the vertices were built from.
    pub fn clustering(&self) -> Result<Clustering> {
        Clustering::from_assignments(
            self.vertices
                .iter()
                .flat_map(|v| v.members.iter().map(move |&p| (p, v.id.clone()))),
        )
    }

    /// Total number of distinct points covered by the vertices.
    pub fn point_count(&self) -> usize {
        let mut all = BTreeSet::new();
        for v in &self.vertices {
            all.extend(v.members.iter().copied());
        }
        all.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = ((usize, usize), &EdgeData)> + '_ {
        self.edges.iter().map(|(&k, e)| (k, e))
    }

    pub fn edge(&self, u: usize, v: usize) -> Option<&EdgeData> {
        self.edges.get(&key(u, v))
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains_key(&key(u, v))
    }

    pub fn degree(&self, u: usize) -> usize {
        self.edges
            .keys()
            .filter(|&&(a, b)| a == u || b == u)
            .count()
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (&(u, v), e) in &self.edges {
            adj[u].push((v, e.weight));
            adj[v].push((u, e.weight));
        }
        adj
    }

    pub(crate) fn insert_edge(&mut self, u: usize, v: usize, data: EdgeData) {
        debug_assert!(u != v);
        self.edges.insert(key(u, v), data);
        self.paths = OnceLock::new();
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> Option<EdgeData> {
        let removed = self.edges.remove(&key(u, v));
        if removed.is_some() {
            self.paths = OnceLock::new();
        }
        removed
    }

    pub fn set_distortion(&mut self, u: usize, v: usize, delta: Option<f64>) {
        if let Some(e) = self.edges.get_mut(&key(u, v)) {
            e.distortion = delta;
        }
    }

    pub fn clear_distortions(&mut self) {
        for e in self.edges.values_mut() {
            e.distortion = None;
        }
    }

    /// All-pairs shortest-path lengths (row-major `n × n`), memoized until the
    /// edge set changes.
    pub fn shortest_paths(&self) -> Arc<Vec<f64>> {
        self.paths
            .get_or_init(|| {
                let n = self.vertices.len();
                let all: Vec<usize> = (0..n).collect();
                Arc::new(subgraph_shortest_paths(self, &all, None))
            })
            .clone()
    }

    /// Shortest-path length between two vertices.
    pub fn vertex_distance(&self, u: usize, v: usize) -> f64 {
        self.shortest_paths()[u * self.vertices.len() + v]
    }

    /// Connected components of the current edge set, numbered by smallest
    /// vertex index. Returns the label of each vertex and the count.
    pub fn connected_components(&self) -> (Vec<usize>, usize) {
        let n = self.vertices.len();
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &(v, _) in &adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Vertex indices grouped by geodesic component id.
    pub fn geodesic_components(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (u, v) in self.vertices.iter().enumerate() {
            out.entry(v.component).or_default().push(u);
        }
        out
    }

    /// Edges whose removal disconnects their connected component.
    pub fn bridges(&self) -> BTreeSet<(usize, usize)> {
        let n = self.vertices.len();
        let adj = self.adjacency();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut timer = 0;
        let mut out = BTreeSet::new();
        // Iterative DFS: (vertex, parent, next adjacency position).
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(top) = stack.last_mut() {
                let (u, parent) = (top.0, top.1);
                if top.2 < adj[u].len() {
                    let v = adj[u][top.2].0;
                    top.2 += 1;
                    if v == parent {
                        continue;
                    }
                    if disc[v] == usize::MAX {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        stack.push((v, u, 0));
                    } else {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if parent != usize::MAX {
                        low[parent] = low[parent].min(low[u]);
                        if low[u] > disc[parent] {
                            out.insert(key(u, parent));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Floyd–Warshall on the subgraph induced by `verts`, optionally ignoring one
/// edge. The result is indexed by position in `verts` (row-major).
pub(crate) fn subgraph_shortest_paths(
    graph: &ClusterGraph,
    verts: &[usize],
    skip: Option<(usize, usize)>,
) -> Vec<f64> {
    let m = verts.len();
    let mut local = vec![usize::MAX; graph.vertex_count()];
    for (i, &v) in verts.iter().enumerate() {
        local[v] = i;
    }
    let mut d = vec![f64::INFINITY; m * m];
    for i in 0..m {
        d[i * m + i] = 0.0;
    }
    for (&(u, v), e) in &graph.edges {
        if Some((u, v)) == skip {
            continue;
        }
        let (a, b) = (local[u], local[v]);
        if a == usize::MAX || b == usize::MAX {
            continue;
        }
        if e.weight < d[a * m + b] {
            d[a * m + b] = e.weight;
            d[b * m + a] = e.weight;
        }
    }
    for k in 0..m {
        for i in 0..m {
            let dik = d[i * m + k];
            if dik == f64::INFINITY {
                continue;
            }
            for j in 0..m {
                let cand = dik + d[k * m + j];
                if cand < d[i * m + j] {
                    d[i * m + j] = cand;
                }
            }
        }
    }
    d
}

fn composition(cloud: &PointCloud, members: &[usize]) -> BTreeMap<String, f64> {
    let Some(labels) = cloud.labels() else {
        return BTreeMap::new();
    };
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for &p in members {
        let label = labels[p].as_deref().unwrap_or(UNLABELED);
        *counts.entry(label.to_string()).or_default() += 1;
    }
    let total = members.len() as f64;
    counts
        .into_iter()
        .map(|(l, c)| (l, c as f64 / total))
        .collect()
}

fn make_vertices(
    cloud: &PointCloud,
    clustering: &Clustering,
    component_of: impl Fn(&str, &[usize]) -> Result<usize>,
) -> Result<Vec<Vertex>> {
    clustering
        .iter()
        .map(|(id, members)| {
            let members: Vec<usize> = members.iter().copied().collect();
            Ok(Vertex {
                id: id.to_string(),
                component: component_of(id, &members)?,
                composition: composition(cloud, &members),
                members,
            })
        })
        .collect()
}

fn weigh_pairs(
    cloud: &PointCloud,
    vertices: &[Vertex],
    metric: ClusterMetric,
) -> Result<BTreeMap<(usize, usize), EdgeData>> {
    let pairs: Vec<(usize, usize)> = (0..vertices.len())
        .flat_map(|u| (u + 1..vertices.len()).map(move |v| (u, v)))
        .filter(|&(u, v)| vertices[u].component == vertices[v].component)
        .collect();
    let weights: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(u, v)| metric.distance(cloud, &vertices[u].members, &vertices[v].members))
        .collect();
    pairs
        .into_iter()
        .zip(weights)
        .map(|(k, w)| {
            Ok((
                k,
                EdgeData {
                    weight: w?,
                    distortion: None,
                    provenance: Provenance::Original,
                },
            ))
        })
        .collect()
}

/// Builds the ClusterGraph: one vertex per cluster and, inside every geodesic
/// component, an edge between every pair of clusters weighted by `metric`.
pub fn build_cluster_graph(
    cloud: &PointCloud,
    clustering: &Clustering,
    index: &GeodesicIndex,
    metric: ClusterMetric,
) -> Result<ClusterGraph> {
    validate(cloud, clustering)?;
    metric.check()?;
    if index.len() != cloud.len() {
        return Err(Error::IndexMismatch {
            index: index.len(),
            cloud: cloud.len(),
        });
    }
    let vertices = make_vertices(cloud, clustering, |id, members| {
        let first = index.component_of(members[0]);
        match members.iter().find(|&&p| index.component_of(p) != first) {
            Some(&p) => Err(Error::ClusterStraddlesComponents {
                cluster: id.to_string(),
                first,
                second: index.component_of(p),
            }),
            None => Ok(first),
        }
    })?;
    let edges = weigh_pairs(cloud, &vertices, metric)?;
    ClusterGraph::from_parts(vertices, edges, metric, Some(index.k()))
}

/// The complete graph on all clusters, ignoring geodesic components (every
/// vertex gets component 0).
pub fn complete_cluster_graph(
    cloud: &PointCloud,
    clustering: &Clustering,
    metric: ClusterMetric,
) -> Result<ClusterGraph> {
    validate(cloud, clustering)?;
    metric.check()?;
    let vertices = make_vertices(cloud, clustering, |_, _| Ok(0))?;
    let edges = weigh_pairs(cloud, &vertices, metric)?;
    ClusterGraph::from_parts(vertices, edges, metric, None)
}

/// Graph-induced distance between two points: the shortest path between any
/// cluster holding `x` and any cluster holding `y`.
pub fn cluster_graph_distance(
    graph: &ClusterGraph,
    clustering: &Clustering,
    x: usize,
    y: usize,
) -> Result<f64> {
    let vx = vertices_of(graph, clustering, x)?;
    let vy = vertices_of(graph, clustering, y)?;
    let paths = graph.shortest_paths();
    let n = graph.vertex_count();
    Ok(vx
        .iter()
        .flat_map(|&a| vy.iter().map(move |&b| (a, b)))
        .map(|(a, b)| paths[a * n + b])
        .fold(f64::INFINITY, f64::min))
}

fn vertices_of(graph: &ClusterGraph, clustering: &Clustering, x: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (id, members) in clustering.iter() {
        if members.contains(&x) {
            out.push(
                graph
                    .index_of(id)
                    .ok_or_else(|| Error::UnknownVertex(id.to_string()))?,
            );
        }
    }
    if out.is_empty() {
        return Err(Error::Unclustered(x));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ClusteringKind;

    #[test]
    fn four_clusters_give_k4() {
        let (cloud, clustering) = crate::synth::four_clusters(5);
        let index = GeodesicIndex::build(&cloud, 5).unwrap();
        assert_eq!(index.component_count(), 1);
        for metric in [ClusterMetric::Avg, ClusterMetric::Min] {
            let g = build_cluster_graph(&cloud, &clustering, &index, metric).unwrap();
            assert_eq!(g.vertex_count(), 4);
            let weights: Vec<f64> = g.edges().map(|(_, e)| e.weight).collect();
            assert_eq!(weights, vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        }
    }

    #[test]
    fn graph_distance_on_k4() {
        let (cloud, clustering) = crate::synth::four_clusters(5);
        let index = GeodesicIndex::build(&cloud, 5).unwrap();
        let mut g = build_cluster_graph(&cloud, &clustering, &index, ClusterMetric::Avg).unwrap();
        // Points 0 (cluster 0), 5 (cluster 1), 10 (cluster 2).
        assert_eq!(cluster_graph_distance(&g, &clustering, 5, 6).unwrap(), 0.0);
        assert_eq!(cluster_graph_distance(&g, &clustering, 5, 10).unwrap(), 2.0);
        g.remove_edge(1, 2);
        assert_eq!(cluster_graph_distance(&g, &clustering, 5, 10).unwrap(), 2.0);
        assert_eq!(cluster_graph_distance(&g, &clustering, 0, 10).unwrap(), 1.0);
    }

    #[test]
    fn single_cluster_has_no_edges() {
        let cloud = PointCloud::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let clustering = Clustering::from_labels(&["a", "a"]).unwrap();
        let index = GeodesicIndex::build(&cloud, 1).unwrap();
        let g = build_cluster_graph(&cloud, &clustering, &index, ClusterMetric::Avg).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count()), (1, 0));
    }

    #[test]
    fn straddling_cluster_is_an_error() {
        let cloud =
            PointCloud::from_rows(&[vec![0.0], vec![0.1], vec![10.0], vec![10.1]]).unwrap();
        let index = GeodesicIndex::build(&cloud, 1).unwrap();
        assert_eq!(index.component_count(), 2);
        let clustering = Clustering::from_labels(&["a", "b", "b", "c"]).unwrap();
        let err =
            build_cluster_graph(&cloud, &clustering, &index, ClusterMetric::Avg).unwrap_err();
        assert!(matches!(err, Error::ClusterStraddlesComponents { ref cluster, .. } if cluster == "b"));
    }

    #[test]
    fn components_get_no_cross_edges() {
        let cloud =
            PointCloud::from_rows(&[vec![0.0], vec![0.1], vec![10.0], vec![10.1]]).unwrap();
        let index = GeodesicIndex::build(&cloud, 1).unwrap();
        let clustering = Clustering::from_labels(&["a", "b", "c", "d"]).unwrap();
        let g = build_cluster_graph(&cloud, &clustering, &index, ClusterMetric::Avg).unwrap();
        let keys: Vec<_> = g.edges().map(|(k, _)| k).collect();
        assert_eq!(keys, vec![(0, 1), (2, 3)]);
        assert_eq!(g.connected_components().1, 2);
        assert_eq!(g.vertex_distance(0, 2), f64::INFINITY);
    }

    #[test]
    fn compositions_sum_to_one() {
        let cloud = PointCloud::from_rows(&[vec![0.0], vec![1.0], vec![2.0]])
            .unwrap()
            .with_labels(vec![Some("x".into()), None, Some("y".into())])
            .unwrap();
        let clustering = Clustering::new(
            [("A".to_string(), BTreeSet::from([0, 1, 2]))].into(),
            ClusteringKind::Partition,
        )
        .unwrap();
        let g = complete_cluster_graph(&cloud, &clustering, ClusterMetric::Avg).unwrap();
        let comp = &g.vertex(0).composition;
        assert_eq!(comp.keys().collect::<Vec<_>>(), vec!["unlabeled", "x", "y"]);
        assert!((comp.values().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bridges_of_a_triangle_with_tail() {
        let cloud = PointCloud::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let clustering = Clustering::from_labels(&["a", "b", "c", "d"]).unwrap();
        let mut g = complete_cluster_graph(&cloud, &clustering, ClusterMetric::Avg).unwrap();
        g.remove_edge(0, 3);
        g.remove_edge(1, 3);
        assert_eq!(g.bridges(), BTreeSet::from([(2, 3)]));
        g.remove_edge(0, 2);
        assert_eq!(g.bridges().len(), 3);
    }

    #[test]
    fn removing_edges_never_shortens_paths() {
        let cloud = PointCloud::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.2],
            vec![2.0, -0.3],
            vec![0.5, 2.0],
            vec![3.0, 1.0],
        ])
        .unwrap();
        let clustering = Clustering::from_labels(&["a", "b", "c", "d", "e"]).unwrap();
        let mut g = complete_cluster_graph(&cloud, &clustering, ClusterMetric::Avg).unwrap();
        let n = g.vertex_count();
        let keys: Vec<_> = g.edges().map(|(k, _)| k).collect();
        for (u, v) in keys {
            let before = g.shortest_paths();
            g.remove_edge(u, v);
            let after = g.shortest_paths();
            for i in 0..n * n {
                assert!(after[i] >= before[i]);
            }
        }
    }
}
