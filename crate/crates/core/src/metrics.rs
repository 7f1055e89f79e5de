//! Point distances and the inter-cluster distances used as edge weights.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::transport;
use crate::types::PointCloud;

/// Checked point-to-point distance.
pub fn point_distance(cloud: &PointCloud, i: usize, j: usize) -> Result<f64> {
    let n = cloud.len();
    for id in [i, j] {
        if id >= n {
            return Err(Error::IdOutOfRange { id, n });
        }
    }
    Ok(cloud.distance(i, j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremal {
    Min,
    Max,
    Avg,
}

/// How two clusters are compared.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ClusterMetric {
    Min,
    Max,
    #[default]
    Avg,
    Hausdorff,
    /// p-Wasserstein between the uniform distributions on the two clusters.
    Wasserstein { p: f64 },
}

impl ClusterMetric {
    pub fn check(&self) -> Result<()> {
        if let ClusterMetric::Wasserstein { p } = *self {
            if !p.is_finite() || p < 1.0 {
                return Err(Error::InvalidExponent(p));
            }
        }
        Ok(())
    }

    /// Builds a metric from a kind name and the Wasserstein exponent (ignored
    /// for the other kinds).
    pub fn from_kind(kind: &str, p: f64) -> Result<Self> {
        let m = match kind {
            "min" => ClusterMetric::Min,
            "max" => ClusterMetric::Max,
            "avg" => ClusterMetric::Avg,
            "hausdorff" => ClusterMetric::Hausdorff,
            "wasserstein" => ClusterMetric::Wasserstein { p },
            other => return Err(Error::Config(format!("unknown cluster metric `{other}`"))),
        };
        m.check()?;
        Ok(m)
    }

    /// Distance between two nonempty clusters given as point ids. Members
    /// should be sorted ascending for bit-reproducible averages.
    pub fn distance(&self, cloud: &PointCloud, a: &[usize], b: &[usize]) -> Result<f64> {
        match *self {
            ClusterMetric::Min => extremal(cloud, a, b, Extremal::Min),
            ClusterMetric::Max => extremal(cloud, a, b, Extremal::Max),
            ClusterMetric::Avg => extremal(cloud, a, b, Extremal::Avg),
            ClusterMetric::Hausdorff => hausdorff(cloud, a, b),
            ClusterMetric::Wasserstein { p } => wasserstein(cloud, a, b, p),
        }
    }
}

impl fmt::Display for ClusterMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterMetric::Min => f.write_str("min"),
            ClusterMetric::Max => f.write_str("max"),
            ClusterMetric::Avg => f.write_str("avg"),
            ClusterMetric::Hausdorff => f.write_str("hausdorff"),
            ClusterMetric::Wasserstein { p } => write!(f, "wasserstein:p={p}"),
        }
    }
}

impl FromStr for ClusterMetric {
    type Err = Error;

    /// Parses the tags produced by `Display`; bare `wasserstein` means p = 1.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(p) = s.strip_prefix("wasserstein:p=") {
            let p: f64 = p
                .parse()
                .map_err(|_| Error::Config(format!("bad Wasserstein exponent in `{s}`")))?;
            return ClusterMetric::from_kind("wasserstein", p);
        }
        ClusterMetric::from_kind(s, 1.0)
    }
}

fn nonempty(a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCluster(String::new()));
    }
    Ok(())
}

/// Minimum, maximum or mean over all `|a|·|b|` ordered cross pairs.
pub fn extremal(cloud: &PointCloud, a: &[usize], b: &[usize], kind: Extremal) -> Result<f64> {
    nonempty(a, b)?;
    let pairs = a.iter().flat_map(|&x| b.iter().map(move |&y| cloud.distance(x, y)));
    Ok(match kind {
        Extremal::Min => pairs.fold(f64::INFINITY, f64::min),
        Extremal::Max => pairs.fold(0.0, f64::max),
        Extremal::Avg => pairs.sum::<f64>() / (a.len() as f64 * b.len() as f64),
    })
}

fn directed_hausdorff(cloud: &PointCloud, from: &[usize], to: &[usize]) -> f64 {
    from.iter()
        .map(|&x| {
            to.iter()
                .map(|&y| cloud.distance(x, y))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

pub fn hausdorff(cloud: &PointCloud, a: &[usize], b: &[usize]) -> Result<f64> {
    nonempty(a, b)?;
    Ok(directed_hausdorff(cloud, a, b).max(directed_hausdorff(cloud, b, a)))
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact p-Wasserstein distance between uniform measures on `a` and `b`.
///
/// Masses are scaled to the integer grid `lcm(|a|, |b|)` so the problem is a
/// balanced integer transportation problem solved exactly.
pub fn wasserstein(cloud: &PointCloud, a: &[usize], b: &[usize], p: f64) -> Result<f64> {
    nonempty(a, b)?;
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    let (m, n) = (a.len() as u64, b.len() as u64);
    let total = m / gcd(m, n) * n;
    let cost: Vec<f64> = a
        .iter()
        .flat_map(|&x| {
            b.iter().map(move |&y| {
                let d = cloud.distance(x, y);
                if p == 1.0 {
                    d
                } else {
                    d.powf(p)
                }
            })
        })
        .collect();
    let plan = transport::solve(&vec![total / m; a.len()], &vec![total / n; b.len()], &cost);
    let mean = (plan.cost / total as f64).max(0.0);
    Ok(if p == 1.0 { mean } else { mean.powf(1.0 / p) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> PointCloud {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn point_distance_examples() {
        let c = PointCloud::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(point_distance(&c, 0, 1).unwrap(), 5.0);
        assert_eq!(point_distance(&c, 1, 1).unwrap(), 0.0);
        assert!(matches!(
            point_distance(&c, 0, 2),
            Err(Error::IdOutOfRange { id: 2, n: 2 })
        ));
        let m = PointCloud::from_matrix(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(point_distance(&m, 0, 1).unwrap(), 2.0);
    }

    #[test]
    fn extremal_on_the_line() {
        let c = line(&[0.0, 1.0, 3.0]);
        assert_eq!(extremal(&c, &[0], &[1, 2], Extremal::Min).unwrap(), 1.0);
        assert_eq!(extremal(&c, &[0], &[1, 2], Extremal::Max).unwrap(), 3.0);
        assert_eq!(extremal(&c, &[0], &[1, 2], Extremal::Avg).unwrap(), 2.0);
        for kind in [Extremal::Min, Extremal::Max, Extremal::Avg] {
            assert_eq!(extremal(&c, &[1], &[1], kind).unwrap(), 0.0);
        }
        let s = line(&[0.0, 7.0]);
        for kind in [Extremal::Min, Extremal::Max, Extremal::Avg] {
            assert_eq!(extremal(&s, &[0], &[1], kind).unwrap(), 7.0);
        }
        assert!(extremal(&c, &[], &[1], Extremal::Min).is_err());
    }

    #[test]
    fn hausdorff_on_the_line() {
        let c = line(&[0.0, 1.0, 3.0]);
        assert_eq!(hausdorff(&c, &[0], &[1, 2]).unwrap(), 3.0);
        assert_eq!(hausdorff(&c, &[0, 1, 2], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(hausdorff(&line(&[0.0, 7.0]), &[0], &[1]).unwrap(), 7.0);
    }

    #[test]
    fn wasserstein_on_the_line() {
        let c = line(&[0.0, 1.0, 3.0]);
        assert!((wasserstein(&c, &[0], &[1, 2], 1.0).unwrap() - 2.0).abs() < 1e-12);
        for p in [1.0, 2.0, 3.5] {
            assert_eq!(wasserstein(&c, &[0, 1, 2], &[0, 1, 2], p).unwrap(), 0.0);
        }
        let d = line(&[0.0, 1.0, 10.0, 11.0]);
        assert!((wasserstein(&d, &[0, 1], &[2, 3], 1.0).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(
            wasserstein(&c, &[0], &[1], 0.5),
            Err(Error::InvalidExponent(_))
        ));
    }

    #[test]
    fn metric_tags_round_trip() {
        for m in [
            ClusterMetric::Min,
            ClusterMetric::Max,
            ClusterMetric::Avg,
            ClusterMetric::Hausdorff,
            ClusterMetric::Wasserstein { p: 1.0 },
            ClusterMetric::Wasserstein { p: 2.5 },
        ] {
            assert_eq!(m.to_string().parse::<ClusterMetric>().unwrap(), m);
        }
        assert!("cosine".parse::<ClusterMetric>().is_err());
    }

    /// W_p between empirical measures on the line via the quantile functions:
    /// W_p^p = ∫_0^1 |F⁻¹(t) − G⁻¹(t)|^p dt, integrated exactly over the
    /// common refinement of the two step functions.
    fn quantile_wasserstein(a: &[f64], b: &[f64], p: f64) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (m, n) = (a.len(), b.len());
        let mut breaks: Vec<(usize, usize)> = Vec::new();
        // Break points k/m and l/n compared as exact fractions k·n vs l·m.
        for k in 0..=m {
            breaks.push((k * n, m * n));
        }
        for l in 0..=n {
            breaks.push((l * m, m * n));
        }
        breaks.sort();
        breaks.dedup();
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (lo, hi) = (w[0].0, w[1].0);
            if hi == lo {
                continue;
            }
            let mid2 = lo + hi; // twice the midpoint, in units of 1/(m·n)
            let ia = (mid2 / (2 * n)).min(m - 1);
            let ib = (mid2 / (2 * m)).min(n - 1);
            let len = (hi - lo) as f64 / (m * n) as f64;
            total += len * (a[ia] - b[ib]).abs().powf(p);
        }
        total.powf(1.0 / p)
    }

    proptest! {
        #[test]
        fn ordering_of_cluster_distances(
            xs in prop::collection::vec(-10.0f64..10.0, 2..12),
            split in 1usize..11,
        ) {
            let split = split.min(xs.len() - 1);
            let c = line(&xs);
            let a: Vec<usize> = (0..split).collect();
            let b: Vec<usize> = (split..xs.len()).collect();
            let mn = extremal(&c, &a, &b, Extremal::Min).unwrap();
            let mx = extremal(&c, &a, &b, Extremal::Max).unwrap();
            let av = extremal(&c, &a, &b, Extremal::Avg).unwrap();
            let h = hausdorff(&c, &a, &b).unwrap();
            let w = wasserstein(&c, &a, &b, 1.0).unwrap();
            prop_assert!(mn <= av + 1e-12 && av <= mx + 1e-12);
            prop_assert!(mn <= h && h <= mx);
            prop_assert!(w <= mx + 1e-9);
            let w_rev = wasserstein(&c, &b, &a, 1.0).unwrap();
            prop_assert!((w - w_rev).abs() < 1e-12);
            prop_assert!((hausdorff(&c, &b, &a).unwrap() - h).abs() == 0.0);
        }

        #[test]
        fn wasserstein_matches_quantile_formula(
            a in prop::collection::vec(-5.0f64..5.0, 1..7),
            b in prop::collection::vec(-5.0f64..5.0, 1..7),
            p in prop::sample::select(vec![1.0, 2.0, 3.0]),
        ) {
            let xs: Vec<f64> = a.iter().chain(&b).copied().collect();
            let c = line(&xs);
            let ia: Vec<usize> = (0..a.len()).collect();
            let ib: Vec<usize> = (a.len()..xs.len()).collect();
            let got = wasserstein(&c, &ia, &ib, p).unwrap();
            let want = quantile_wasserstein(&a, &b, p);
            prop_assert!((got - want).abs() < 1e-9, "got {got}, want {want}");
        }

        #[test]
        fn singletons_agree_across_metrics(x in -10.0f64..10.0, y in -10.0f64..10.0) {
            let c = line(&[x, y]);
            let d = (x - y).abs();
            for m in [
                ClusterMetric::Min,
                ClusterMetric::Max,
                ClusterMetric::Avg,
                ClusterMetric::Hausdorff,
                ClusterMetric::Wasserstein { p: 1.0 },
                ClusterMetric::Wasserstein { p: 2.0 },
            ] {
                let v = m.distance(&c, &[0], &[1]).unwrap();
                prop_assert!((v - d).abs() < 1e-12);
            }
        }
    }
}
