//! Edge pruning (distortion threshold, greedy distortion descent,
//! connectivity-preserving removal) and merging of disconnected components.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distortion::{DistortionScorer, ScoringOptions};
use crate::error::{Error, Result};
use crate::geodesics::GeodesicIndex;
use crate::graph::{subgraph_shortest_paths, ClusterGraph, EdgeData, Provenance};
use crate::types::{Clustering, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ThresholdReached,
    NoImprovingEdge,
    StepBudget,
    ConnectivityFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneStep {
    pub source: String,
    pub target: String,
    /// Edge distortion (threshold), global distortion after the removal
    /// (greedy), or connectivity kept relative to the original edge set
    /// (connectivity).
    pub criterion: f64,
    /// Connectivity kept relative to the edge set just before this step
    /// (connectivity pruning only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_rk: Option<f64>,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneTrace {
    pub strategy: String,
    /// Criterion value before any removal, when meaningful.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<f64>,
    pub steps: Vec<PruneStep>,
    pub stop: StopReason,
}

impl PruneTrace {
    fn new(strategy: &str, initial: Option<f64>) -> Self {
        PruneTrace {
            strategy: strategy.to_string(),
            initial,
            steps: Vec::new(),
            stop: StopReason::ThresholdReached,
        }
    }

    pub fn removed(&self) -> impl Iterator<Item = (&str, &str)> {
        self.steps
            .iter()
            .map(|s| (s.source.as_str(), s.target.as_str()))
    }
}

fn step(graph: &ClusterGraph, (u, v): (usize, usize), criterion: f64) -> PruneStep {
    PruneStep {
        source: graph.id(u).to_string(),
        target: graph.id(v).to_string(),
        criterion,
        step_rk: None,
        components: graph.connected_components().1,
    }
}

/// Keeps exactly the edges with distortion `<= alpha`. May disconnect the graph.
pub fn threshold_prune(graph: &ClusterGraph, alpha: f64) -> Result<(ClusterGraph, PruneTrace)> {
    if alpha.is_nan() {
        return Err(Error::Config("threshold must be a number".into()));
    }
    let mut doomed = Vec::new();
    for ((u, v), e) in graph.edges() {
        let delta = e
            .distortion
            .ok_or_else(|| Error::MissingDistortion(graph.id(u).into(), graph.id(v).into()))?;
        if delta > alpha {
            doomed.push(((u, v), delta));
        }
    }
    let mut pruned = graph.clone();
    let mut trace = PruneTrace::new("threshold", Some(alpha));
    for (e, delta) in doomed {
        pruned.remove_edge(e.0, e.1);
        trace.steps.push(step(&pruned, e, delta));
    }
    trace.stop = StopReason::ThresholdReached;
    Ok((pruned, trace))
}

/// Greedy distortion pruning with default scoring options.
pub fn greedy_prune(
    graph: &ClusterGraph,
    clustering: &Clustering,
    index: &GeodesicIndex,
    max_steps: Option<usize>,
) -> Result<(ClusterGraph, PruneTrace)> {
    let scorer = DistortionScorer::new(graph, clustering, index, ScoringOptions::default())?;
    greedy_prune_with(graph, &scorer, max_steps)
}

/// Repeatedly removes the edge whose removal gives the lowest global
/// distortion, as long as that value does not exceed the current one.
///
/// Bridges are never candidates: removing one leaves a pair without a finite
/// graph distance, i.e. infinite distortion. Ties go to the smallest edge.
pub fn greedy_prune_with(
    graph: &ClusterGraph,
    scorer: &DistortionScorer,
    max_steps: Option<usize>,
) -> Result<(ClusterGraph, PruneTrace)> {
    let mut g = graph.clone();
    let mut per_comp = (0..scorer.component_count())
        .map(|c| scorer.component_distortion(&g, c, None))
        .collect::<Result<Vec<f64>>>()?;
    let mut current = scorer.aggregate(&per_comp);
    let mut trace = PruneTrace::new("greedy", Some(current));

    loop {
        if max_steps.is_some_and(|m| trace.steps.len() >= m) {
            trace.stop = StopReason::StepBudget;
            break;
        }
        let bridges = g.bridges();
        let paths = g.shortest_paths();
        let n = g.vertex_count();
        let candidates: Vec<((usize, usize), f64)> = g
            .edges()
            .filter(|(k, _)| !bridges.contains(k))
            .map(|(k, e)| (k, e.weight))
            .collect();

        let evaluated: Vec<Result<(usize, f64, f64)>> = candidates
            .par_iter()
            .map(|&((u, v), w)| {
                let c = scorer
                    .component_of_vertex(u)
                    .ok_or(Error::VertexOutOfRange(u))?;
                // An edge on no shortest path can go without changing any distance.
                if w > paths[u * n + v] {
                    return Ok((c, per_comp[c], current));
                }
                let comp_value = scorer.component_distortion(&g, c, Some((u, v)))?;
                let mut trial = per_comp.clone();
                trial[c] = comp_value;
                Ok((c, comp_value, scorer.aggregate(&trial)))
            })
            .collect();

        let mut best: Option<((usize, usize), usize, f64, f64)> = None;
        for (&(e, _), result) in candidates.iter().zip(evaluated) {
            let (c, comp_value, global) = result?;
            if best.is_none_or(|b| global < b.3) {
                best = Some((e, c, comp_value, global));
            }
        }
        match best {
            Some((e, c, comp_value, global)) if global <= current => {
                g.remove_edge(e.0, e.1);
                per_comp[c] = comp_value;
                current = global;
                trace.steps.push(step(&g, e, global));
            }
            _ => {
                trace.stop = StopReason::NoImprovingEdge;
                break;
            }
        }
    }
    Ok((g, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityMode {
    /// `1 / Σ w(e)`: the reciprocal of the total path length.
    #[default]
    Reciprocal,
    /// `Σ 1 / w(e)` over the path's edges.
    Literal,
}

/// Quality of a path given as consecutive edges.
pub fn path_quality(graph: &ClusterGraph, path: &[(usize, usize)], mode: QualityMode) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    // Orient the first edge so that its far end touches the second edge.
    let (a, b) = path[0];
    let mut at = match path.get(1) {
        Some(&(c, d)) if b != c && b != d && (a == c || a == d) => a,
        _ => b,
    };
    for (pos, &(u, v)) in path.iter().enumerate().skip(1) {
        at = if u == at {
            v
        } else if v == at {
            u
        } else {
            return Err(Error::BrokenPath(pos));
        };
    }
    let mut total = 0.0;
    let mut inverse = 0.0;
    for &(u, v) in path {
        let e = graph
            .edge(u, v)
            .ok_or_else(|| Error::MissingEdge(id_or(graph, u), id_or(graph, v)))?;
        if e.weight == 0.0 {
            return Err(Error::ZeroWeight(graph.id(u).into(), graph.id(v).into()));
        }
        total += e.weight;
        inverse += 1.0 / e.weight;
    }
    Ok(match mode {
        QualityMode::Reciprocal => 1.0 / total,
        QualityMode::Literal => inverse,
    })
}

fn id_or(graph: &ClusterGraph, u: usize) -> String {
    if u < graph.vertex_count() {
        graph.id(u).to_string()
    } else {
        u.to_string()
    }
}

/// Quality of the best path between two vertices: `1 / shortest path`, or
/// `-∞` when they are disconnected.
pub fn connectivity(graph: &ClusterGraph, i: usize, j: usize) -> Result<f64> {
    let n = graph.vertex_count();
    for u in [i, j] {
        if u >= n {
            return Err(Error::VertexOutOfRange(u));
        }
    }
    if i == j {
        return Err(Error::SelfLoop(graph.id(i).to_string()));
    }
    let d = graph.vertex_distance(i, j);
    if d == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if d == 0.0 {
        return Err(Error::ZeroWeight(graph.id(i).into(), graph.id(j).into()));
    }
    Ok(1.0 / d)
}

/// Sum of `1 / d(i, j)` over vertex pairs of `verts` in the induced subgraph.
fn connectivity_sum(graph: &ClusterGraph, verts: &[usize], skip: Option<(usize, usize)>) -> Result<f64> {
    let m = verts.len();
    let d = subgraph_shortest_paths(graph, verts, skip);
    let mut sum = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            let len = d[a * m + b];
            if len == f64::INFINITY {
                return Err(Error::Disconnected);
            }
            if len == 0.0 {
                return Err(Error::ZeroWeight(
                    graph.id(verts[a]).into(),
                    graph.id(verts[b]).into(),
                ));
            }
            sum += 1.0 / len;
        }
    }
    Ok(sum)
}

/// Average connectivity over all vertex pairs of `verts`, which must induce a
/// connected subgraph with at least two vertices.
pub fn graph_connectivity(graph: &ClusterGraph, verts: &[usize]) -> Result<f64> {
    let m = verts.len();
    if m < 2 {
        return Err(Error::TooFewVertices);
    }
    if let Some(&u) = verts.iter().find(|&&u| u >= graph.vertex_count()) {
        return Err(Error::VertexOutOfRange(u));
    }
    let pairs = (m * (m - 1) / 2) as f64;
    Ok(connectivity_sum(graph, verts, None)? / pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConnectivityStop {
    /// Maximum number of removals.
    pub budget: Option<usize>,
    /// Stop before connectivity kept (relative to the original edges) would
    /// drop below this value.
    pub floor: Option<f64>,
}

/// Greedy connectivity-preserving pruning restricted to `removable` edges
/// (all edges when `None`).
///
/// Each round removes the non-bridge candidate whose removal keeps the most
/// connectivity of its connected component. The trace reports, per step, the
/// connectivity kept relative to the original edge set (pooled over all
/// vertex pairs inside connected components) and relative to the previous
/// step.
pub fn connectivity_prune(
    graph: &ClusterGraph,
    removable: Option<&BTreeSet<(usize, usize)>>,
    stop: ConnectivityStop,
) -> Result<(ClusterGraph, PruneTrace)> {
    let mut pool: BTreeSet<(usize, usize)> = match removable {
        Some(set) => {
            for &(u, v) in set {
                if !graph.has_edge(u, v) {
                    return Err(Error::MissingEdge(id_or(graph, u), id_or(graph, v)));
                }
            }
            set.clone()
        }
        None => graph.edges().map(|(k, _)| k).collect(),
    };
    if pool.is_empty() {
        return Err(Error::EmptyRemovable);
    }

    let (labels, count) = graph.connected_components();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (u, &c) in labels.iter().enumerate() {
        groups[c].push(u);
    }
    let mut sums = groups
        .iter()
        .map(|verts| {
            if verts.len() < 2 {
                Ok(0.0)
            } else {
                connectivity_sum(graph, verts, None)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let original_total: f64 = sums.iter().sum();

    let mut g = graph.clone();
    let mut trace = PruneTrace::new("connectivity", Some(1.0));
    trace.stop = StopReason::ConnectivityFloor;
    loop {
        if stop.budget.is_some_and(|b| trace.steps.len() >= b) {
            trace.stop = StopReason::StepBudget;
            break;
        }
        let bridges = g.bridges();
        let candidates: Vec<(usize, usize)> = pool
            .iter()
            .copied()
            .filter(|e| !bridges.contains(e))
            .collect();
        if candidates.is_empty() {
            trace.stop = StopReason::ConnectivityFloor;
            break;
        }
        let paths = g.shortest_paths();
        let n = g.vertex_count();
        let evaluated: Vec<Result<f64>> = candidates
            .par_iter()
            .map(|&(u, v)| {
                let c = labels[u];
                if g.edge(u, v).is_some_and(|e| e.weight > paths[u * n + v]) {
                    return Ok(sums[c]);
                }
                connectivity_sum(&g, &groups[c], Some((u, v)))
            })
            .collect();
        let mut best: Option<((usize, usize), f64, f64)> = None;
        for (&e, result) in candidates.iter().zip(evaluated) {
            let new_sum = result?;
            let rk = new_sum / sums[labels[e.0]];
            if best.is_none_or(|b| rk > b.2) {
                best = Some((e, new_sum, rk));
            }
        }
        let (e, new_sum, rk) = best.expect("nonempty candidates");
        let c = labels[e.0];
        let total: f64 = sums.iter().sum::<f64>() - sums[c] + new_sum;
        let cumulative = total / original_total;
        if stop.floor.is_some_and(|f| cumulative < f) {
            trace.stop = StopReason::ThresholdReached;
            break;
        }
        g.remove_edge(e.0, e.1);
        pool.remove(&e);
        sums[c] = new_sum;
        let mut s = step(&g, e, cumulative);
        s.step_rk = Some(rk);
        trace.steps.push(s);
    }
    Ok((g, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

/// Adds merge edges from every vertex to its `k_merge` nearest vertices (by
/// the graph's cluster metric) in other connected components. Returns the new
/// graph and the added edges in key order. A connected graph is returned
/// unchanged with a warning.
pub fn merge_components(
    graph: &ClusterGraph,
    cloud: &PointCloud,
    k_merge: usize,
) -> Result<(ClusterGraph, Vec<MergeEdge>)> {
    if k_merge == 0 {
        return Err(Error::Config("k_merge must be positive".into()));
    }
    for v in graph.vertices() {
        if let Some(&p) = v.members.iter().find(|&&p| p >= cloud.len()) {
            return Err(Error::IdOutOfRange { id: p, n: cloud.len() });
        }
    }
    let (labels, count) = graph.connected_components();
    if count < 2 {
        log::warn!("graph is already connected; nothing to merge");
        return Ok((graph.clone(), Vec::new()));
    }
    let n = graph.vertex_count();
    let metric = graph.metric();
    let cross: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|&(u, v)| labels[u] != labels[v])
        .collect();
    let weights = cross
        .par_iter()
        .map(|&(u, v)| metric.distance(cloud, &graph.vertex(u).members, &graph.vertex(v).members))
        .collect::<Result<Vec<f64>>>()?;
    let mut dist = vec![f64::INFINITY; n * n];
    for (&(u, v), &w) in cross.iter().zip(&weights) {
        dist[u * n + v] = w;
        dist[v * n + u] = w;
    }

    let mut chosen = BTreeSet::new();
    for u in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&v| labels[v] != labels[u])
            .map(|v| (dist[u * n + v], v))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, v) in others.iter().take(k_merge) {
            chosen.insert((u.min(v), u.max(v)));
        }
    }
    let mut merged = graph.clone();
    let mut added = Vec::with_capacity(chosen.len());
    for (u, v) in chosen {
        let weight = dist[u * n + v];
        merged.insert_edge(
            u,
            v,
            EdgeData {
                weight,
                distortion: None,
                provenance: Provenance::Merge,
            },
        );
        added.push(MergeEdge {
            source: graph.id(u).to_string(),
            target: graph.id(v).to_string(),
            weight,
        });
    }
    Ok((merged, added))
}

/// Edge keys with merge provenance.
pub fn merge_edges(graph: &ClusterGraph) -> BTreeSet<(usize, usize)> {
    graph
        .edges()
        .filter(|(_, e)| e.provenance == Provenance::Merge)
        .map(|(k, _)| k)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_cluster_graph, complete_cluster_graph};
    use crate::metrics::ClusterMetric;
    use std::collections::BTreeMap;

    fn line(xs: &[f64]) -> PointCloud {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    fn singletons(n: usize) -> Clustering {
        Clustering::from_labels(&(0..n).map(|i| format!("v{i}")).collect::<Vec<_>>()).unwrap()
    }

    /// Graph with given vertex count and `(u, v, w)` edges, all in one component.
    fn weighted(n: usize, edges: &[(usize, usize, f64)]) -> ClusterGraph {
        let cloud = line(&(0..n).map(|i| i as f64).collect::<Vec<_>>());
        let base = complete_cluster_graph(&cloud, &singletons(n), ClusterMetric::Avg).unwrap();
        let edges: BTreeMap<_, _> = edges
            .iter()
            .map(|&(u, v, w)| {
                (
                    (u, v),
                    EdgeData {
                        weight: w,
                        distortion: None,
                        provenance: Provenance::Original,
                    },
                )
            })
            .collect();
        ClusterGraph::from_parts(base.vertices().to_vec(), edges, ClusterMetric::Avg, None).unwrap()
    }

    fn with_distortions(deltas: &[f64]) -> ClusterGraph {
        let mut g = weighted(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]);
        for (&((u, v), _), &d) in g.clone().edges().collect::<Vec<_>>().iter().zip(deltas) {
            g.set_distortion(u, v, Some(d));
        }
        g
    }

    #[test]
    fn threshold_keeps_boundary() {
        let g = with_distortions(&[0.1, 0.5, 0.9]);
        let (p, trace) = threshold_prune(&g, 0.5).unwrap();
        assert_eq!(p.edges().map(|(k, _)| k).collect::<Vec<_>>(), vec![(0, 1), (0, 2)]);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].criterion, 0.9);

        let (same, _) = threshold_prune(&g, 0.9).unwrap();
        assert_eq!(same, g);
        let (empty, trace) = threshold_prune(&g, 0.05).unwrap();
        assert_eq!(empty.edge_count(), 0);
        assert_eq!(trace.steps.last().unwrap().components, 3);
    }

    #[test]
    fn threshold_needs_distortions() {
        let g = weighted(2, &[(0, 1, 1.0)]);
        assert!(matches!(threshold_prune(&g, 1.0), Err(Error::MissingDistortion(..))));
    }

    #[test]
    fn greedy_on_three_collinear_singletons() {
        let cloud = line(&[0.0, 1.0, 2.0]);
        let clustering = singletons(3);
        let index = GeodesicIndex::build(&cloud, 1).unwrap();
        let g = build_cluster_graph(&cloud, &clustering, &index, ClusterMetric::Avg).unwrap();
        assert_eq!(g.edge_count(), 3);
        let (p, trace) = greedy_prune(&g, &clustering, &index, None).unwrap();
        assert_eq!(p.edges().map(|(k, _)| k).collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(trace.steps.len(), 1);
        assert_eq!((trace.steps[0].source.as_str(), trace.steps[0].target.as_str()), ("v0", "v2"));
        assert_eq!(trace.steps[0].criterion, 0.0);
        assert_eq!(trace.stop, StopReason::NoImprovingEdge);
    }

    #[test]
    fn greedy_leaves_trees_alone() {
        let cloud = line(&[0.0, 1.0, 2.0]);
        let clustering = singletons(3);
        let index = GeodesicIndex::build(&cloud, 1).unwrap();
        let mut g = build_cluster_graph(&cloud, &clustering, &index, ClusterMetric::Avg).unwrap();
        g.remove_edge(0, 2);
        let (p, trace) = greedy_prune(&g, &clustering, &index, None).unwrap();
        assert_eq!(p, g);
        assert!(trace.steps.is_empty());
        assert_eq!(trace.stop, StopReason::NoImprovingEdge);
    }

    #[test]
    fn greedy_respects_step_budget() {
        let xs: Vec<f64> = (0..8).map(|i| (i as f64).powf(1.3)).collect();
        let cloud = line(&xs);
        let clustering = singletons(8);
        let index = GeodesicIndex::build(&cloud, 1).unwrap();
        let g = build_cluster_graph(&cloud, &clustering, &index, ClusterMetric::Avg).unwrap();
        let (_, trace) = greedy_prune(&g, &clustering, &index, Some(2)).unwrap();
        assert_eq!(trace.steps.len(), 2);
        assert_eq!(trace.stop, StopReason::StepBudget);
    }

    #[test]
    fn path_quality_modes() {
        let g = weighted(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 2.0)]);
        for mode in [QualityMode::Reciprocal, QualityMode::Literal] {
            assert_eq!(path_quality(&g, &[(0, 2)], mode).unwrap(), 0.5);
        }
        assert_eq!(path_quality(&g, &[(0, 1), (1, 2)], QualityMode::Reciprocal).unwrap(), 0.5);
        assert_eq!(path_quality(&g, &[(0, 1), (1, 2)], QualityMode::Literal).unwrap(), 2.0);
        let h = weighted(3, &[(0, 1, 1.0), (1, 2, 3.0)]);
        assert_eq!(path_quality(&h, &[(1, 0), (2, 1)], QualityMode::Reciprocal).unwrap(), 0.25);
        let lit = path_quality(&h, &[(0, 1), (1, 2)], QualityMode::Literal).unwrap();
        assert!((lit - 4.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            path_quality(&g, &[(0, 1), (0, 2), (0, 1)], QualityMode::Literal),
            Err(Error::BrokenPath(2))
        ));
        assert!(matches!(path_quality(&g, &[], QualityMode::Literal), Err(Error::EmptyPath)));
        let z = weighted(2, &[(0, 1, 0.0)]);
        assert!(matches!(path_quality(&z, &[(0, 1)], QualityMode::Reciprocal), Err(Error::ZeroWeight(..))));
    }

    #[test]
    fn connectivity_values() {
        let path = weighted(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        assert_eq!(connectivity(&path, 0, 1).unwrap(), 1.0);
        assert_eq!(connectivity(&path, 0, 2).unwrap(), 0.5);
        let split = weighted(3, &[(0, 1, 1.0)]);
        assert_eq!(connectivity(&split, 0, 2).unwrap(), f64::NEG_INFINITY);
        let c = graph_connectivity(&path, &[0, 1, 2]).unwrap();
        assert!((c - 2.5 / 3.0).abs() < 1e-12);
        let tri = weighted(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        assert_eq!(graph_connectivity(&tri, &[0, 1, 2]).unwrap(), 1.0);
        let pair = weighted(2, &[(0, 1, 4.0)]);
        assert_eq!(graph_connectivity(&pair, &[0, 1]).unwrap(), 0.25);
        assert!(matches!(graph_connectivity(&split, &[0, 1, 2]), Err(Error::Disconnected)));
    }

    #[test]
    fn connectivity_prune_on_triangle() {
        let tri = weighted(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let (p, trace) = connectivity_prune(
            &tri,
            None,
            ConnectivityStop {
                budget: Some(1),
                floor: None,
            },
        )
        .unwrap();
        assert_eq!(p.edge_count(), 2);
        assert!(!p.has_edge(0, 1));
        assert!((trace.steps[0].criterion - 2.5 / 3.0).abs() < 1e-12);
        assert_eq!(trace.stop, StopReason::StepBudget);

        let (p, trace) = connectivity_prune(
            &tri,
            None,
            ConnectivityStop {
                budget: Some(10),
                floor: None,
            },
        )
        .unwrap();
        assert_eq!(p.edge_count(), 2);
        assert_eq!(trace.stop, StopReason::ConnectivityFloor);

        let (_, trace) = connectivity_prune(
            &tri,
            None,
            ConnectivityStop {
                budget: None,
                floor: Some(0.9),
            },
        )
        .unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(trace.stop, StopReason::ThresholdReached);

        assert!(matches!(
            connectivity_prune(&tri, Some(&BTreeSet::new()), ConnectivityStop::default()),
            Err(Error::EmptyRemovable)
        ));
    }

    #[test]
    fn removing_an_edge_never_raises_connectivity() {
        let g = weighted(
            5,
            &[
                (0, 1, 1.0),
                (0, 2, 2.5),
                (1, 2, 1.0),
                (1, 3, 2.0),
                (2, 3, 0.7),
                (2, 4, 3.0),
                (3, 4, 1.1),
                (0, 4, 5.0),
            ],
        );
        let all = [0, 1, 2, 3, 4];
        let base = graph_connectivity(&g, &all).unwrap();
        let bridges = g.bridges();
        for ((u, v), _) in g.edges() {
            if bridges.contains(&(u, v)) {
                continue;
            }
            let mut h = g.clone();
            h.remove_edge(u, v);
            let after = graph_connectivity(&h, &all).unwrap();
            assert!(after <= base);
            // Equality exactly when the edge is on no shortest path.
            let on_best = g.edge(u, v).unwrap().weight <= g.vertex_distance(u, v);
            assert_eq!(after == base, !on_best, "edge ({u}, {v})");
        }
    }

    #[test]
    fn merge_two_singletons() {
        let cloud = line(&[0.0, 10.0]);
        let clustering = singletons(2);
        let g = complete_cluster_graph(&cloud, &clustering, ClusterMetric::Avg).unwrap();
        let mut split = g.clone();
        split.remove_edge(0, 1);
        let (m, added) = merge_components(&split, &cloud, 1).unwrap();
        assert_eq!(added.len(), 1);
        assert_eq!(m.edge(0, 1).unwrap().provenance, Provenance::Merge);
        assert_eq!(m.edge(0, 1).unwrap().weight, 10.0);

        let (same, none) = merge_components(&g, &cloud, 1).unwrap();
        assert!(none.is_empty());
        assert_eq!(same, g);
    }

    #[test]
    fn merge_connects_three_blobs() {
        let xs = [0.0, 0.1, 0.2, 5.0, 5.1, 5.2, 11.0, 11.1, 11.2];
        let cloud = line(&xs);
        let index = GeodesicIndex::build(&cloud, 2).unwrap();
        assert_eq!(index.component_count(), 3);
        let clustering = singletons(9);
        let g = build_cluster_graph(&cloud, &clustering, &index, ClusterMetric::Avg).unwrap();
        let (m, added) = merge_components(&g, &cloud, 1).unwrap();
        assert!(!added.is_empty());
        assert_eq!(m.connected_components().1, 1);
        // Pruning only merge edges never touches original ones.
        let merge = merge_edges(&m);
        let (p, _) = connectivity_prune(&m, Some(&merge), ConnectivityStop::default()).unwrap();
        for ((u, v), e) in g.edges() {
            assert_eq!(p.edge(u, v), Some(e));
        }
        assert_eq!(p.connected_components().1, 1);
    }
}
