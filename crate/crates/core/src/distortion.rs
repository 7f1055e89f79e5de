//! Metric distortion of a ClusterGraph against the k-nn geodesic estimate.
//!
//! For points `x ≠ y` the pair distortion is `|ln(d_CG(x,y) / d_X^k(x,y))|`.
//! It is averaged over the cross pairs of two clusters, and the cluster-pair
//! values are combined per geodesic component with weights
//! `|C_i ∪ C_j| / ((n − 1)|X|)` and normalization `2 / (n(n − 1))`, where `n`
//! and `|X|` are the vertex and point counts of that component.
//!
//! A point pair contributes only when both distances are positive: identical
//! points, coincident distinct points and (for divisions) pairs sharing a
//! cluster have an undefined ratio and are left out of the average and of
//! `pair_count`.
//!
//! For partitions `d_CG` is constant over the cross pairs of a cluster pair,
//! so each cluster pair keeps its sorted `ln d_X^k` values with prefix sums
//! and any candidate path length `L` is scored in `O(log m)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::GeodesicIndex;
use crate::graph::{subgraph_shortest_paths, ClusterGraph};
use crate::types::{Clustering, ClusteringKind};

/// Label of the rule combining per-component scores into `global`.
pub const AGGREGATION: &str = "point_weighted_mean";

/// `|ln(d_cg / d_k)|` for two positive finite distances.
pub fn pair_distortion(d_cg: f64, d_k: f64) -> Result<f64> {
    let ok = |d: f64| d.is_finite() && d > 0.0;
    if !ok(d_cg) || !ok(d_k) {
        return Err(Error::UndefinedDistortion { d_cg, d_k });
    }
    Ok((d_cg / d_k).ln().abs())
}

/// Weight of a cluster pair: `|C_i ∪ C_j| / ((n − 1)·N)`.
pub fn pair_weight(union_size: usize, n: usize, total_points: usize) -> f64 {
    debug_assert!(n >= 2);
    union_size as f64 / ((n - 1) as f64 * total_points as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub source: String,
    pub target: String,
    pub delta: f64,
    pub weight: f64,
    pub pair_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentScore {
    pub distortion: f64,
    pub vertices: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub pair_scores: Vec<PairScore>,
    pub per_component: BTreeMap<usize, ComponentScore>,
    pub global: f64,
    pub aggregation: String,
    pub k_used: usize,
    /// True when cross pairs were subsampled.
    pub sampled: bool,
}

impl DistortionReport {
    pub fn pair(&self, source: &str, target: &str) -> Option<&PairScore> {
        let (a, b) = if source <= target {
            (source, target)
        } else {
            (target, source)
        };
        self.pair_scores
            .iter()
            .find(|p| p.source == a && p.target == b)
    }

    /// Copies each adjacent pair's `delta` onto the matching graph edge.
    pub fn annotate(&self, graph: &mut ClusterGraph) {
        graph.clear_distortions();
        for p in &self.pair_scores {
            if let (Some(u), Some(v)) = (graph.index_of(&p.source), graph.index_of(&p.target)) {
                graph.set_distortion(u, v, Some(p.delta));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoringMode {
    /// Prefix-sum factorization for partitions; per-pair evaluation for divisions.
    #[default]
    Factorized,
    /// Per point pair evaluation everywhere.
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScoringOptions {
    pub mode: ScoringMode,
    /// Cap on point pairs per cluster pair; `None` uses every pair.
    pub max_pairs: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
enum Profile {
    /// Sorted `ln d_X^k` over valid cross pairs, with prefix sums
    /// (`prefix[i]` = sum of the first `i` values).
    Sorted { logs: Vec<f64>, prefix: Vec<f64> },
    /// Cross pairs `(x, y, d_X^k)` with `x ≠ y`, `d_X^k > 0`.
    Points { pairs: Vec<(usize, usize, f64)> },
}

#[derive(Debug, Clone)]
struct PairData {
    a: usize,
    b: usize,
    weight: f64,
    profile: Profile,
}

#[derive(Debug, Clone)]
struct ComponentData {
    id: usize,
    /// Global vertex indices, ascending.
    verts: Vec<usize>,
    points: usize,
    pairs: Vec<PairData>,
}

/// Precomputed point-level data for scoring any edge subset of one graph's
/// vertex set.
#[derive(Debug, Clone)]
pub struct DistortionScorer {
    components: Vec<ComponentData>,
    /// Local vertex memberships per point (for per-pair evaluation).
    memberships: Vec<Vec<usize>>,
    ids: Vec<String>,
    knn_k: usize,
    total_points: usize,
    sampled: bool,
}

fn check_matches(graph: &ClusterGraph, clustering: &Clustering) -> Result<()> {
    if graph.vertex_count() != clustering.len() {
        return Err(Error::Config(format!(
            "graph has {} vertices but the clustering has {} clusters",
            graph.vertex_count(),
            clustering.len()
        )));
    }
    for (v, (id, members)) in graph.vertices().iter().zip(clustering.iter()) {
        if v.id != id || !v.members.iter().eq(members.iter()) {
            return Err(Error::UnknownVertex(id.to_string()));
        }
    }
    Ok(())
}

impl DistortionScorer {
    pub fn new(
        graph: &ClusterGraph,
        clustering: &Clustering,
        index: &GeodesicIndex,
        options: ScoringOptions,
    ) -> Result<Self> {
        check_matches(graph, clustering)?;
        let factorize =
            options.mode == ScoringMode::Factorized && clustering.kind() == ClusteringKind::Partition;

        let mut memberships = vec![Vec::new(); index.len()];
        let mut components = Vec::new();
        let mut sampled = false;
        for (id, verts) in graph.geodesic_components() {
            for (local, &u) in verts.iter().enumerate() {
                for &p in &graph.vertex(u).members {
                    if p >= index.len() {
                        return Err(Error::IndexMismatch {
                            index: index.len(),
                            cloud: p + 1,
                        });
                    }
                    memberships[p].push(local);
                }
            }
            let point_set: BTreeSet<usize> = verts
                .iter()
                .flat_map(|&u| graph.vertex(u).members.iter().copied())
                .collect();
            let n = verts.len();
            let points = point_set.len();

            let pair_keys: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .collect();
            let pairs: Vec<(PairData, bool)> = pair_keys
                .par_iter()
                .map(|&(a, b)| {
                    let (u, v) = (verts[a], verts[b]);
                    let (cu, cv) = (&graph.vertex(u).members, &graph.vertex(v).members);
                    let union = cu.iter().chain(cv).collect::<BTreeSet<_>>().len();
                    let mut cross: Vec<(usize, usize, f64)> = Vec::with_capacity(cu.len() * cv.len());
                    for &x in cu {
                        let row = index.distances_from(x);
                        for &y in cv {
                            if x != y && row[y] > 0.0 {
                                cross.push((x, y, row[y]));
                            }
                        }
                    }
                    let mut was_sampled = false;
                    if let Some(cap) = options.max_pairs {
                        if cross.len() > cap {
                            let mut rng = ChaCha8Rng::seed_from_u64(
                                options.seed ^ ((u as u64) << 32 | v as u64),
                            );
                            let mut keep = sample(&mut rng, cross.len(), cap).into_vec();
                            keep.sort_unstable();
                            cross = keep.into_iter().map(|i| cross[i]).collect();
                            was_sampled = true;
                        }
                    }
                    let profile = if factorize {
                        let mut logs: Vec<f64> = cross.iter().map(|&(_, _, d)| d.ln()).collect();
                        logs.sort_by(f64::total_cmp);
                        let mut prefix = Vec::with_capacity(logs.len() + 1);
                        let mut acc = 0.0;
                        prefix.push(acc);
                        for &l in &logs {
                            acc += l;
                            prefix.push(acc);
                        }
                        Profile::Sorted { logs, prefix }
                    } else {
                        Profile::Points { pairs: cross }
                    };
                    let weight = pair_weight(union, n, points);
                    (PairData { a, b, weight, profile }, was_sampled)
                })
                .collect();
            sampled |= pairs.iter().any(|(_, s)| *s);
            components.push(ComponentData {
                id,
                verts,
                points,
                pairs: pairs.into_iter().map(|(p, _)| p).collect(),
            });
        }

        Ok(DistortionScorer {
            components,
            memberships,
            ids: graph.vertices().iter().map(|v| v.id.clone()).collect(),
            knn_k: index.k(),
            total_points: index.len(),
            sampled,
        })
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// Position (in `component_ids` order) of the component holding vertex `u`.
    pub fn component_of_vertex(&self, u: usize) -> Option<usize> {
        self.components
            .iter()
            .position(|c| c.verts.binary_search(&u).is_ok())
    }

    pub fn component_ids(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.id).collect()
    }

    pub fn component_points(&self, c: usize) -> usize {
        self.components[c].points
    }

    pub fn total_points(&self) -> usize {
        self.total_points
    }

    /// δ and pair count of one cluster pair, given the component's local
    /// shortest-path matrix.
    fn pair_delta(&self, comp: &ComponentData, pair: &PairData, paths: &[f64]) -> Result<(f64, usize)> {
        let n = comp.verts.len();
        let (u, v) = (comp.verts[pair.a], comp.verts[pair.b]);
        match &pair.profile {
            Profile::Sorted { logs, prefix } => {
                let len = paths[pair.a * n + pair.b];
                if !len.is_finite() {
                    return Err(Error::DisconnectedWithinComponent(
                        self.ids[u].clone(),
                        self.ids[v].clone(),
                    ));
                }
                if len <= 0.0 || logs.is_empty() {
                    return Err(Error::NoValidPairs(self.ids[u].clone(), self.ids[v].clone()));
                }
                let s = len.ln();
                let m = logs.len();
                let below = logs.partition_point(|&l| l < s);
                let total = prefix[m];
                // Each half is a sum of nonnegative terms; clamp away rounding.
                let lower = (s * below as f64 - prefix[below]).max(0.0);
                let upper = ((total - prefix[below]) - s * (m - below) as f64).max(0.0);
                let sum = lower + upper;
                Ok((sum / m as f64, m))
            }
            Profile::Points { pairs } => {
                let mut sum = 0.0;
                let mut count = 0;
                for &(x, y, d_k) in pairs {
                    let mut d_cg = f64::INFINITY;
                    for &a in &self.memberships[x] {
                        for &b in &self.memberships[y] {
                            d_cg = d_cg.min(paths[a * n + b]);
                        }
                    }
                    if !d_cg.is_finite() {
                        return Err(Error::DisconnectedWithinComponent(
                            self.ids[u].clone(),
                            self.ids[v].clone(),
                        ));
                    }
                    if d_cg <= 0.0 {
                        continue;
                    }
                    sum += pair_distortion(d_cg, d_k)?;
                    count += 1;
                }
                if count == 0 {
                    return Err(Error::NoValidPairs(self.ids[u].clone(), self.ids[v].clone()));
                }
                Ok((sum / count as f64, count))
            }
        }
    }

    fn component_scores(
        &self,
        comp: &ComponentData,
        graph: &ClusterGraph,
        skip: Option<(usize, usize)>,
    ) -> Result<(f64, Vec<(f64, usize)>)> {
        let n = comp.verts.len();
        if n < 2 {
            return Ok((0.0, Vec::new()));
        }
        let paths = subgraph_shortest_paths(graph, &comp.verts, skip);
        let mut weighted = 0.0;
        let mut deltas = Vec::with_capacity(comp.pairs.len());
        for pair in &comp.pairs {
            let (delta, count) = self.pair_delta(comp, pair, &paths)?;
            weighted += pair.weight * delta;
            deltas.push((delta, count));
        }
        Ok((2.0 / (n as f64 * (n - 1) as f64) * weighted, deltas))
    }

    /// Δ_k of component `c` (position in `component_ids`) for `graph`, with
    /// `skip` treated as absent.
    pub fn component_distortion(
        &self,
        graph: &ClusterGraph,
        c: usize,
        skip: Option<(usize, usize)>,
    ) -> Result<f64> {
        Ok(self.component_scores(&self.components[c], graph, skip)?.0)
    }

    /// Combines per-component values (in `component_ids` order) into the
    /// global score.
    pub fn aggregate(&self, per_component: &[f64]) -> f64 {
        let weighted: f64 = self
            .components
            .iter()
            .zip(per_component)
            .map(|(c, d)| c.points as f64 * d)
            .sum();
        weighted / self.total_points as f64
    }

    pub fn score(&self, graph: &ClusterGraph) -> Result<DistortionReport> {
        let results: Vec<Result<(f64, Vec<(f64, usize)>)>> = self
            .components
            .par_iter()
            .map(|c| self.component_scores(c, graph, None))
            .collect();
        let mut pair_scores = Vec::new();
        let mut per_component = BTreeMap::new();
        let mut values = Vec::with_capacity(self.components.len());
        for (comp, result) in self.components.iter().zip(results) {
            let (value, deltas) = result?;
            for (pair, (delta, count)) in comp.pairs.iter().zip(deltas) {
                pair_scores.push(PairScore {
                    source: self.ids[comp.verts[pair.a]].clone(),
                    target: self.ids[comp.verts[pair.b]].clone(),
                    delta,
                    weight: pair.weight,
                    pair_count: count,
                });
            }
            per_component.insert(
                comp.id,
                ComponentScore {
                    distortion: value,
                    vertices: comp.verts.len(),
                    points: comp.points,
                },
            );
            values.push(value);
        }
        pair_scores.sort_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));
        Ok(DistortionReport {
            pair_scores,
            per_component,
            global: self.aggregate(&values),
            aggregation: AGGREGATION.to_string(),
            k_used: self.knn_k,
            sampled: self.sampled,
        })
    }
}

/// Global distortion report with default options.
pub fn global_distortion(
    graph: &ClusterGraph,
    clustering: &Clustering,
    index: &GeodesicIndex,
) -> Result<DistortionReport> {
    DistortionScorer::new(graph, clustering, index, ScoringOptions::default())?.score(graph)
}

/// δ of one cluster pair by direct evaluation over its cross pairs.
pub fn edge_distortion(
    graph: &ClusterGraph,
    clustering: &Clustering,
    index: &GeodesicIndex,
    i: usize,
    j: usize,
) -> Result<PairScore> {
    check_matches(graph, clustering)?;
    let n = graph.vertex_count();
    for u in [i, j] {
        if u >= n {
            return Err(Error::VertexOutOfRange(u));
        }
    }
    if i == j {
        return Err(Error::SelfLoop(graph.id(i).to_string()));
    }
    let (vi, vj) = (graph.vertex(i), graph.vertex(j));
    if vi.component != vj.component {
        return Err(Error::DifferentComponents(vi.id.clone(), vj.id.clone()));
    }
    let all_paths = graph.shortest_paths();
    let paths: &[f64] = &all_paths;
    let memberships = clustering.memberships(index.len());
    let mut sum = 0.0;
    let mut count = 0;
    for &x in &vi.members {
        for &y in &vj.members {
            let d_k = index.geodesic_distance(x, y)?;
            if x == y || d_k == 0.0 {
                continue;
            }
            let d_cg = memberships[x]
                .iter()
                .flat_map(|&a| memberships[y].iter().map(move |&b| paths[a * n + b]))
                .fold(f64::INFINITY, f64::min);
            if !d_cg.is_finite() {
                return Err(Error::DisconnectedWithinComponent(vi.id.clone(), vj.id.clone()));
            }
            if d_cg == 0.0 {
                continue;
            }
            sum += pair_distortion(d_cg, d_k)?;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoValidPairs(vi.id.clone(), vj.id.clone()));
    }
    let union = vi
        .members
        .iter()
        .chain(&vj.members)
        .collect::<BTreeSet<_>>()
        .len();
    let comp = graph.geodesic_components()[&vi.component].clone();
    let points = comp
        .iter()
        .flat_map(|&u| graph.vertex(u).members.iter())
        .collect::<BTreeSet<_>>()
        .len();
    let (a, b) = if i < j { (vi, vj) } else { (vj, vi) };
    Ok(PairScore {
        source: a.id.clone(),
        target: b.id.clone(),
        delta: sum / count as f64,
        weight: pair_weight(union, comp.len(), points),
        pair_count: count,
    })
}
