//! k-nearest-neighbor graph over the points and the geodesic distance
//! estimate given by shortest paths in it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::types::PointCloud;

/// Symmetrized k-nn graph with component labels and a per-source cache of
/// shortest-path distances.
#[derive(Debug, Clone)]
pub struct GeodesicIndex {
    k: usize,
    /// The k neighbors each point chose, nearest first.
    chosen: Vec<Vec<usize>>,
    /// Union-symmetrized adjacency sorted by neighbor id.
    adjacency: Vec<Vec<(usize, f64)>>,
    point_component: Vec<usize>,
    component_members: Vec<Vec<usize>>,
    cache: Vec<OnceLock<Vec<f64>>>,
}

/// Point-to-component map with the member lists of every component.
#[derive(Debug, Clone, Copy)]
pub struct Components<'a> {
    pub point_component: &'a [usize],
    pub members: &'a [Vec<usize>],
}

impl GeodesicIndex {
    /// Each point links to its `k` nearest others (ties by ascending id); the
    /// graph is the undirected union of those links.
    pub fn build(cloud: &PointCloud, k: usize) -> Result<Self> {
        let n = cloud.len();
        if k == 0 || k >= n {
            return Err(Error::NeighborCountOutOfRange { k, n });
        }
        let mut chosen = Vec::with_capacity(n);
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut row: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
        for i in 0..n {
            row.clear();
            row.extend((0..n).filter(|&j| j != i).map(|j| (cloud.distance(i, j), j)));
            let by_dist_then_id =
                |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < row.len() {
                row.select_nth_unstable_by(k - 1, by_dist_then_id);
                row.truncate(k);
            }
            row.sort_by(by_dist_then_id);
            for &(d, j) in &row {
                adjacency[i].push((j, d));
                adjacency[j].push((i, d));
            }
            chosen.push(row.iter().map(|&(_, j)| j).collect());
        }
        for adj in &mut adjacency {
            adj.sort_by_key(|&(j, _)| j);
            adj.dedup_by_key(|&mut (j, _)| j);
        }

        let mut point_component = vec![usize::MAX; n];
        let mut component_members = Vec::new();
        let mut stack = Vec::new();
        for start in 0..n {
            if point_component[start] != usize::MAX {
                continue;
            }
            let c = component_members.len();
            let mut members = vec![start];
            point_component[start] = c;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &adjacency[u] {
                    if point_component[v] == usize::MAX {
                        point_component[v] = c;
                        members.push(v);
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            component_members.push(members);
        }

        Ok(GeodesicIndex {
            k,
            chosen,
            adjacency,
            point_component,
            component_members,
            cache: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn chosen_neighbors(&self, x: usize) -> &[usize] {
        &self.chosen[x]
    }

    pub fn adjacency(&self, x: usize) -> &[(usize, f64)] {
        &self.adjacency[x]
    }

    pub fn components(&self) -> Components<'_> {
        Components {
            point_component: &self.point_component,
            members: &self.component_members,
        }
    }

    pub fn component_of(&self, x: usize) -> usize {
        self.point_component[x]
    }

    pub fn component_count(&self) -> usize {
        self.component_members.len()
    }

    /// Shortest-path distances from `source` to every point (infinite across
    /// components). Computed once per source; safe to call from many threads.
    pub fn distances_from(&self, source: usize) -> &[f64] {
        self.cache[source].get_or_init(|| dijkstra(&self.adjacency, source))
    }

    /// Estimated geodesic distance `d_X^k(x, y)`.
    pub fn geodesic_distance(&self, x: usize, y: usize) -> Result<f64> {
        let n = self.len();
        for id in [x, y] {
            if id >= n {
                return Err(Error::IdOutOfRange { id, n });
            }
        }
        if x == y {
            return Ok(0.0);
        }
        if self.point_component[x] != self.point_component[y] {
            return Ok(f64::INFINITY);
        }
        Ok(self.distances_from(x)[y])
    }
}

#[derive(PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(crate) fn dijkstra(adjacency: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adjacency.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(State {
        dist: 0.0,
        node: source,
    });
    while let Some(State { dist: d, node: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adjacency[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(State { dist: nd, node: v });
            }
        }
    }
    dist
}
