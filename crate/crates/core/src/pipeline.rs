//! End-to-end run: points → clustering → k-nn geodesics → ClusterGraph →
//! distortion → pruning → merging → exported artifacts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans, per_label_clustering};
use crate::distortion::{DistortionReport, DistortionScorer, ScoringOptions};
use crate::error::{Error, Result};
use crate::geodesics::GeodesicIndex;
use crate::graph::{build_cluster_graph, ClusterGraph};
use crate::io::{self, ExportFormat, PointsOptions};
use crate::metrics::ClusterMetric;
use crate::pruning::{
    connectivity_prune, greedy_prune_with, merge_components, merge_edges, threshold_prune,
    ConnectivityStop, MergeEdge, PruneTrace,
};
use crate::types::{Clustering, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneStrategy {
    None,
    Threshold,
    #[default]
    Greedy,
    Connectivity,
}

impl FromStr for PruneStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PruneStrategy::None),
            "threshold" => Ok(PruneStrategy::Threshold),
            "greedy" => Ok(PruneStrategy::Greedy),
            "connectivity" => Ok(PruneStrategy::Connectivity),
            other => Err(Error::Config(format!("unknown prune strategy `{other}`"))),
        }
    }
}

impl fmt::Display for PruneStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PruneStrategy::None => "none",
            PruneStrategy::Threshold => "threshold",
            PruneStrategy::Greedy => "greedy",
            PruneStrategy::Connectivity => "connectivity",
        })
    }
}

/// Pipeline configuration. In TOML files the keys are the kebab-case field
/// names, which are also the CLI flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Config {
    pub points: Option<PathBuf>,
    pub distance_matrix: bool,
    pub minkowski: f64,
    /// Clustering CSV; k-means runs when absent.
    pub clustering: Option<PathBuf>,
    pub kmeans_k: usize,
    /// Run k-means inside each label class with this many clusters per class.
    pub per_label_k: Option<usize>,
    pub seed: u64,
    pub knn_k: usize,
    pub metric: String,
    pub wasserstein_p: f64,
    /// Cap on point pairs per cluster pair when scoring.
    pub max_pairs: Option<usize>,
    pub prune: PruneStrategy,
    pub threshold: Option<f64>,
    /// Removal budget of the prune stage.
    pub max_steps: Option<usize>,
    pub connectivity_floor: Option<f64>,
    pub merge: bool,
    pub merge_k: usize,
    /// Number of merge edges the connectivity pruning may remove.
    pub merge_budget: usize,
    pub output_dir: PathBuf,
    pub formats: Vec<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            points: None,
            distance_matrix: false,
            minkowski: 2.0,
            clustering: None,
            kmeans_k: 20,
            per_label_k: None,
            seed: 0,
            knn_k: 10,
            metric: "avg".into(),
            wasserstein_p: 1.0,
            max_pairs: None,
            prune: PruneStrategy::Greedy,
            threshold: None,
            max_steps: None,
            connectivity_floor: None,
            merge: true,
            merge_k: 3,
            merge_budget: 20,
            output_dir: PathBuf::from("out"),
            formats: vec!["json".into()],
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML file. Relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Config::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.points, &mut config.clustering].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        Ok(config)
    }

    pub fn cluster_metric(&self) -> Result<ClusterMetric> {
        match self.metric.as_str() {
            "wasserstein" => ClusterMetric::from_kind("wasserstein", self.wasserstein_p),
            tag => tag.parse(),
        }
    }

    pub fn export_formats(&self) -> Result<Vec<ExportFormat>> {
        self.formats.iter().map(|f| f.parse()).collect()
    }

    pub fn check(&self) -> Result<()> {
        if self.points.is_none() {
            return Err(Error::Config("`points` is required".into()));
        }
        self.cluster_metric()?;
        self.export_formats()?;
        if self.prune == PruneStrategy::Threshold && self.threshold.is_none() {
            return Err(Error::Config("threshold pruning needs `threshold`".into()));
        }
        if self.merge && self.merge_k == 0 {
            return Err(Error::Config("`merge-k` must be positive".into()));
        }
        Ok(())
    }
}

/// A stage failure, tagged with the stage name.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

fn tag<T>(stage: &'static str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|source| StageError { stage, source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub points: usize,
    pub clusters: usize,
    pub knn_k: usize,
    pub metric: String,
    pub geodesic_components: usize,
    pub initial_edges: usize,
    pub initial_distortion: f64,
    pub prune: PruneStrategy,
    pub pruned_edges: usize,
    pub pruned_components: usize,
    pub pruned_distortion: f64,
    pub merge_edges_added: usize,
    pub merge_edges_removed: usize,
    pub final_edges: usize,
    pub final_components: usize,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    pub timings: Vec<StageTiming>,
    pub graph: ClusterGraph,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTrace {
    pub added: Vec<MergeEdge>,
    pub pruning: Option<PruneTrace>,
}

struct Artifacts<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl Artifacts<'_> {
    fn write(&mut self, name: &str, text: String) -> std::result::Result<(), StageError> {
        tag("export", io::write_text(self.dir.join(name), &text))?;
        self.names.push(name.to_string());
        Ok(())
    }
}

struct Clock {
    last: Instant,
    timings: Vec<StageTiming>,
}

impl Clock {
    fn lap(&mut self, stage: &'static str) {
        let elapsed: Duration = self.last.elapsed();
        log::info!("{stage}: {:.3}s", elapsed.as_secs_f64());
        self.timings.push(StageTiming {
            stage,
            seconds: elapsed.as_secs_f64(),
        });
        self.last = Instant::now();
    }
}

/// Loads the points (and clustering, when configured) named by `config`.
pub fn load_inputs(config: &Config) -> Result<(PointCloud, Option<Clustering>)> {
    let path = config
        .points
        .as_ref()
        .ok_or_else(|| Error::Config("`points` is required".into()))?;
    let cloud = io::load_points(
        path,
        PointsOptions {
            distance_matrix: config.distance_matrix,
        },
    )?
    .with_minkowski(config.minkowski)?;
    let clustering = match &config.clustering {
        Some(p) => Some(io::load_clustering(p, cloud.len())?),
        None => None,
    };
    Ok((cloud, clustering))
}

/// Clustering from `config`: per-label k-means, plain k-means, or none.
pub fn compute_clustering(config: &Config, cloud: &PointCloud) -> Result<Clustering> {
    match config.per_label_k {
        Some(k) => per_label_clustering(cloud, k, config.seed),
        None => kmeans(cloud, config.kmeans_k, config.seed),
    }
}

/// Runs the configured prune strategy. Threshold pruning reads the edge
/// distortions; greedy pruning needs `scorer`.
pub fn prune(
    config: &Config,
    graph: &ClusterGraph,
    scorer: Option<&DistortionScorer>,
) -> Result<(ClusterGraph, Option<PruneTrace>)> {
    Ok(match config.prune {
        PruneStrategy::None => (graph.clone(), None),
        PruneStrategy::Threshold => {
            let alpha = config
                .threshold
                .ok_or_else(|| Error::Config("threshold pruning needs `threshold`".into()))?;
            let (g, t) = threshold_prune(graph, alpha)?;
            (g, Some(t))
        }
        PruneStrategy::Greedy => {
            let scorer =
                scorer.ok_or_else(|| Error::Config("greedy pruning needs a distortion scorer".into()))?;
            let (g, t) = greedy_prune_with(graph, scorer, config.max_steps)?;
            (g, Some(t))
        }
        PruneStrategy::Connectivity => {
            let stop = ConnectivityStop {
                budget: config.max_steps,
                floor: config.connectivity_floor,
            };
            if graph.edge_count() == 0 {
                (graph.clone(), None)
            } else {
                let (g, t) = connectivity_prune(graph, None, stop)?;
                (g, Some(t))
            }
        }
    })
}

/// Merges components of `graph` and prunes up to `merge-budget` merge edges.
pub fn merge(
    config: &Config,
    graph: &ClusterGraph,
    cloud: &PointCloud,
) -> Result<(ClusterGraph, MergeTrace)> {
    let (merged, added) = merge_components(graph, cloud, config.merge_k)?;
    let candidates = merge_edges(&merged);
    if added.is_empty() || config.merge_budget == 0 || candidates.is_empty() {
        return Ok((merged, MergeTrace { added, pruning: None }));
    }
    let stop = ConnectivityStop {
        budget: Some(config.merge_budget),
        floor: None,
    };
    let (pruned, trace) = connectivity_prune(&merged, Some(&candidates), stop)?;
    Ok((
        pruned,
        MergeTrace {
            added,
            pruning: Some(trace),
        },
    ))
}

/// Runs every stage and writes the artifacts into `config.output_dir`.
pub fn run_pipeline(config: &Config) -> std::result::Result<Outcome, StageError> {
    tag("config", config.check())?;
    let metric = tag("config", config.cluster_metric())?;
    let formats = tag("config", config.export_formats())?;
    let out = &config.output_dir;
    let mut clock = Clock {
        last: Instant::now(),
        timings: Vec::new(),
    };
    let mut artifacts = Artifacts {
        dir: out,
        names: Vec::new(),
    };
    tag(
        "export",
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e)),
    )?;

    let (cloud, loaded) = tag("load", load_inputs(config))?;
    clock.lap("load");

    let clustering = match loaded {
        Some(c) => c,
        None => {
            let c = tag("cluster", compute_clustering(config, &cloud))?;
            artifacts.write("clustering.csv", io::clustering_to_csv(&c))?;
            c
        }
    };
    clock.lap("cluster");

    let index = tag("geodesics", GeodesicIndex::build(&cloud, config.knn_k))?;
    log::info!(
        "{} points, {} geodesic components",
        cloud.len(),
        index.component_count()
    );
    clock.lap("geodesics");

    let mut graph = tag("build", build_cluster_graph(&cloud, &clustering, &index, metric))?;
    log::info!("{} vertices, {} edges", graph.vertex_count(), graph.edge_count());
    clock.lap("build");

    let options = ScoringOptions {
        max_pairs: config.max_pairs,
        seed: config.seed,
        ..ScoringOptions::default()
    };
    let scorer = tag(
        "score",
        DistortionScorer::new(&graph, &clustering, &index, options),
    )?;
    let report = tag("score", scorer.score(&graph))?;
    report.annotate(&mut graph);
    artifacts.write("distortion.json", io::to_json(&report))?;
    artifacts.write("graph_initial.json", io::graph_to_json(&graph, Some(report.global)))?;
    clock.lap("score");

    let (mut pruned, trace) = tag("prune", prune(config, &graph, Some(&scorer)))?;
    let pruned_report: DistortionReport = tag("prune", scorer.score(&pruned))?;
    pruned_report.annotate(&mut pruned);
    if let Some(t) = &trace {
        artifacts.write("prune_trace.json", io::to_json(t))?;
    }
    let pruned_components = pruned.connected_components().1;
    log::info!(
        "pruned to {} edges, {} components",
        pruned.edge_count(),
        pruned_components
    );
    artifacts.write(
        "graph_pruned.json",
        io::graph_to_json(&pruned, Some(pruned_report.global)),
    )?;
    clock.lap("prune");

    let mut final_graph = pruned.clone();
    let mut merge_added = 0;
    let mut merge_removed = 0;
    if config.merge && pruned_components > 1 {
        let (merged, merge_trace) = tag("merge", merge(config, &pruned, &cloud))?;
        merge_added = merge_trace.added.len();
        merge_removed = merge_trace.pruning.as_ref().map_or(0, |t| t.steps.len());
        artifacts.write("merge_trace.json", io::to_json(&merge_trace))?;
        log::info!("merge: +{merge_added} -{merge_removed} edges");
        final_graph = merged;
    }
    clock.lap("merge");

    for format in formats {
        let (name, text) = match format {
            ExportFormat::Json => ("graph.json", io::graph_to_json(&final_graph, Some(pruned_report.global))),
            ExportFormat::GraphMl => (
                "graph.graphml",
                io::graph_to_graphml(&final_graph, Some(pruned_report.global)),
            ),
            ExportFormat::Dot => ("graph.dot", io::graph_to_dot(&final_graph)),
        };
        artifacts.write(name, text)?;
    }

    let summary = Summary {
        points: cloud.len(),
        clusters: clustering.len(),
        knn_k: config.knn_k,
        metric: metric.to_string(),
        geodesic_components: index.component_count(),
        initial_edges: graph.edge_count(),
        initial_distortion: report.global,
        prune: config.prune,
        pruned_edges: pruned.edge_count(),
        pruned_components,
        pruned_distortion: pruned_report.global,
        merge_edges_added: merge_added,
        merge_edges_removed: merge_removed,
        final_edges: final_graph.edge_count(),
        final_components: final_graph.connected_components().1,
        artifacts: Vec::new(),
    };
    let mut summary = summary;
    summary.artifacts = artifacts.names.clone();
    summary.artifacts.push("summary.json".into());
    artifacts.write("summary.json", io::to_json(&summary))?;
    clock.lap("export");

    Ok(Outcome {
        summary,
        timings: clock.timings,
        graph: final_graph,
    })
}
