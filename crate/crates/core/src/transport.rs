//! Exact balanced transportation problem on integer masses.
//!
//! Successive shortest augmenting paths with node potentials; each round
//! runs a dense Dijkstra over the complete bipartite residual graph. Ties are
//! broken by lowest node index so plans are reproducible.

/// Optimal plan for moving `supply` onto `demand` at unit costs `cost`
/// (row-major, `supply.len() × demand.len()`).
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub flow: Vec<u64>,
    /// Σ flow·cost.
    pub cost: f64,
}

/// Solves `min Σ f_ij c_ij` subject to row sums `supply` and column sums
/// `demand`. Both must sum to the same total.
pub fn solve(supply: &[u64], demand: &[u64], cost: &[f64]) -> TransportPlan {
    let m = supply.len();
    let n = demand.len();
    assert_eq!(cost.len(), m * n, "cost matrix shape");
    assert_eq!(
        supply.iter().sum::<u64>(),
        demand.iter().sum::<u64>(),
        "unbalanced transportation problem"
    );

    let mut rs = supply.to_vec();
    let mut rd = demand.to_vec();
    let mut flow = vec![0u64; m * n];
    // Potentials: sources 0..m, sinks m..m+n. The super source has potential 0.
    let mut pi = vec![0.0f64; m + n];
    let mut dist = vec![f64::INFINITY; m + n];
    let mut prev = vec![usize::MAX; m + n];
    let mut done = vec![false; m + n];
    const FROM_SOURCE: usize = usize::MAX - 1;

    while rs.iter().any(|&s| s > 0) {
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        done.fill(false);
        for i in 0..m {
            if rs[i] > 0 {
                dist[i] = (-pi[i]).max(0.0);
                prev[i] = FROM_SOURCE;
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..m + n {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < m {
                let i = u;
                for j in 0..n {
                    let v = m + j;
                    if done[v] {
                        continue;
                    }
                    let reduced = (cost[i * n + j] + pi[i] - pi[v]).max(0.0);
                    let cand = best + reduced;
                    if cand < dist[v] {
                        dist[v] = cand;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - m;
                for i in 0..m {
                    if done[i] || flow[i * n + j] == 0 {
                        continue;
                    }
                    let reduced = (-cost[i * n + j] + pi[u] - pi[i]).max(0.0);
                    let cand = best + reduced;
                    if cand < dist[i] {
                        dist[i] = cand;
                        prev[i] = u;
                    }
                }
            }
        }

        // Target: the open sink with the smallest true distance.
        let mut target = usize::MAX;
        let mut best = f64::INFINITY;
        for j in 0..n {
            let v = m + j;
            if rd[j] > 0 && dist[v].is_finite() {
                let true_dist = dist[v] + pi[v];
                if true_dist < best {
                    best = true_dist;
                    target = v;
                }
            }
        }
        assert!(target != usize::MAX, "no augmenting path in a complete bipartite graph");

        let cap = dist[target];
        for v in 0..m + n {
            pi[v] += dist[v].min(cap);
        }

        let mut bottleneck = rd[target - m];
        let mut v = target;
        while prev[v] != FROM_SOURCE {
            let u = prev[v];
            if u >= m {
                // Reverse arc sink u -> source v cancels flow on (v, u).
                bottleneck = bottleneck.min(flow[v * n + (u - m)]);
            }
            v = u;
        }
        bottleneck = bottleneck.min(rs[v]);
        let origin = v;

        let mut v = target;
        while prev[v] != FROM_SOURCE {
            let u = prev[v];
            if u < m {
                flow[u * n + (v - m)] += bottleneck;
            } else {
                flow[v * n + (u - m)] -= bottleneck;
            }
            v = u;
        }
        rs[origin] -= bottleneck;
        rd[target - m] -= bottleneck;
    }

    let cost = flow
        .iter()
        .zip(cost)
        .filter(|(f, _)| **f > 0)
        .map(|(&f, &c)| f as f64 * c)
        .sum();
    TransportPlan { flow, cost }
}
