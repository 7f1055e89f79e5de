use std::path::{Path, PathBuf};
use std::process;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use clustergraph::distortion::{DistortionScorer, ScoringOptions};
use clustergraph::geodesics::GeodesicIndex;
use clustergraph::graph::{build_cluster_graph, ClusterGraph};
use clustergraph::io::{self, ExportFormat};
use clustergraph::pipeline::{self, run_pipeline, Config, PruneStrategy};
use clustergraph::stability::check_stability;
use clustergraph::types::{Clustering, PointCloud};
use clustergraph::Error;

#[derive(Debug, Parser)]
#[command(name = "clustergraph", version, about = "Build, score and prune ClusterGraphs")]
struct Cli {
    /// Print a machine-readable summary to standard output.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only report warnings and errors on standard error.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every stage. Each flag overrides the key of the same
/// name in the `--config` file.
#[derive(Debug, Clone, Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    points: Option<PathBuf>,
    /// Read the points file as an N x N distance matrix.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    distance_matrix: Option<bool>,
    #[arg(long)]
    minkowski: Option<f64>,
    /// Clustering CSV (`point_id,cluster_id`); k-means runs when absent.
    #[arg(long)]
    clustering: Option<PathBuf>,
    #[arg(long)]
    kmeans_k: Option<usize>,
    #[arg(long)]
    per_label_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    knn_k: Option<usize>,
    /// min, max, avg, hausdorff or wasserstein.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    wasserstein_p: Option<f64>,
    #[arg(long)]
    max_pairs: Option<usize>,
    /// none, threshold, greedy or connectivity.
    #[arg(long)]
    prune: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    connectivity_floor: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    merge: Option<bool>,
    #[arg(long)]
    merge_k: Option<usize>,
    #[arg(long)]
    merge_budget: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Comma-separated graph formats for the pipeline: json, graphml, dot.
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<String>>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<Config, Error> {
        let mut c = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    c.$field = v.clone();
                })*
            };
        }
        macro_rules! set_some {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    c.$field = Some(v.clone());
                })*
            };
        }
        set!(distance_matrix, minkowski, kmeans_k, seed, knn_k, metric, wasserstein_p);
        set!(merge, merge_k, merge_budget, output_dir, formats);
        set_some!(points, clustering, per_label_k, max_pairs, threshold, max_steps, connectivity_floor);
        if let Some(p) = &self.prune {
            c.prune = p.parse()?;
        }
        Ok(c)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run k-means (or per-label k-means) and write a clustering CSV.
    Cluster {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Build the ClusterGraph (complete inside each k-nn component).
    Build {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Score a graph's distortion and annotate its edges.
    Score {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        graph: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        /// Also write the full distortion report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Prune a graph's edges with the configured strategy.
    Prune {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        graph: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Connect components with merge edges, then prune merge edges.
    Merge {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, short)]
        graph: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Convert a graph JSON file to JSON, GraphML or DOT.
    Export {
        #[arg(long, short)]
        graph: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        /// Defaults to the output file's extension.
        #[arg(long)]
        format: Option<String>,
    },
    /// Run every stage and write all artifacts to the output directory.
    Pipeline {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Check cluster and vertex image diameters between two clusterings.
    Stability {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// The second clustering.
        #[arg(long)]
        other: PathBuf,
        /// Cluster diameter bound; defaults to the largest cluster diameter.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Plain(Error),
    Staged(pipeline::StageError),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Plain(e)
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_internal() {
        3
    } else if e.is_config_error() {
        2
    } else {
        1
    }
}

fn main() {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Warn
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("clustergraph: cannot set up {n} threads: {e}");
            process::exit(2);
        }
    }
    let start = Instant::now();
    match run(&cli.command) {
        Ok(summary) => {
            log::info!("done in {:.3}s", start.elapsed().as_secs_f64());
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
            } else {
                println!("{}", human(&summary));
            }
        }
        Err(Failure::Plain(e)) => {
            eprintln!("clustergraph: {e}");
            process::exit(exit_code(&e));
        }
        Err(Failure::Staged(e)) => {
            eprintln!("clustergraph: {e}");
            process::exit(exit_code(&e.source));
        }
    }
}

/// `key=value` pairs of a flat summary object.
fn human(summary: &Value) -> String {
    match summary.as_object() {
        Some(map) => map
            .iter()
            .filter(|(_, v)| !v.is_object() && !v.is_array())
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}={s}"),
                other => format!("{k}={other}"),
            })
            .collect::<Vec<_>>()
            .join(" "),
        None => summary.to_string(),
    }
}

fn load(cfg: &Config) -> Result<(PointCloud, Clustering), Error> {
    let (cloud, loaded) = pipeline::load_inputs(cfg)?;
    let clustering = match loaded {
        Some(c) => c,
        None => pipeline::compute_clustering(cfg, &cloud)?,
    };
    Ok((cloud, clustering))
}

fn load_cloud(cfg: &Config) -> Result<PointCloud, Error> {
    Ok(pipeline::load_inputs(&Config {
        clustering: None,
        ..cfg.clone()
    })?
    .0)
}

fn graph_summary(command: &str, graph: &ClusterGraph, output: &Path) -> Value {
    json!({
        "command": command,
        "vertices": graph.vertex_count(),
        "edges": graph.edge_count(),
        "components": graph.connected_components().1,
        "output": output.display().to_string(),
    })
}

/// Scorer for a graph loaded from JSON: the clustering comes from its
/// vertices and the k-nn size from its metadata unless overridden.
fn scorer_for(
    args: &ConfigArgs,
    cfg: &Config,
    graph: &ClusterGraph,
) -> Result<(DistortionScorer, GeodesicIndex), Error> {
    let cloud = load_cloud(cfg)?;
    let clustering = graph.clustering()?;
    let k = match (args.knn_k, graph.knn_k()) {
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => cfg.knn_k,
    };
    let index = GeodesicIndex::build(&cloud, k)?;
    let options = ScoringOptions {
        max_pairs: cfg.max_pairs,
        seed: cfg.seed,
        ..ScoringOptions::default()
    };
    let scorer = DistortionScorer::new(graph, &clustering, &index, options)?;
    Ok((scorer, index))
}

fn run(command: &Command) -> Result<Value, Failure> {
    match command {
        Command::Cluster { cfg, output } => {
            let cfg = cfg.resolve()?;
            let cloud = load_cloud(&cfg)?;
            let clustering = pipeline::compute_clustering(&cfg, &cloud)?;
            io::write_clustering(output, &clustering)?;
            Ok(json!({
                "command": "cluster",
                "points": cloud.len(),
                "clusters": clustering.len(),
                "output": output.display().to_string(),
            }))
        }
        Command::Build { cfg, output } => {
            let cfg = cfg.resolve()?;
            let (cloud, clustering) = load(&cfg)?;
            let index = GeodesicIndex::build(&cloud, cfg.knn_k)?;
            let graph = build_cluster_graph(&cloud, &clustering, &index, cfg.cluster_metric()?)?;
            io::write_text(output, &io::graph_to_json(&graph, None))?;
            Ok(graph_summary("build", &graph, output))
        }
        Command::Score {
            cfg: args,
            graph,
            output,
            report,
        } => {
            let cfg = args.resolve()?;
            let (mut graph, _) = io::read_graph(graph)?;
            let (scorer, _) = scorer_for(args, &cfg, &graph)?;
            let scored = scorer.score(&graph)?;
            scored.annotate(&mut graph);
            io::write_text(output, &io::graph_to_json(&graph, Some(scored.global)))?;
            if let Some(path) = report {
                io::write_json(path, &scored)?;
            }
            let mut summary = graph_summary("score", &graph, output);
            summary["global_distortion"] = json!(scored.global);
            Ok(summary)
        }
        Command::Prune {
            cfg: args,
            graph,
            output,
            trace,
        } => {
            let cfg = args.resolve()?;
            let (graph, global) = io::read_graph(graph)?;
            let (pruned, pruned_trace, global) = if cfg.prune == PruneStrategy::Greedy {
                let (scorer, _) = scorer_for(args, &cfg, &graph)?;
                let (mut pruned, t) = pipeline::prune(&cfg, &graph, Some(&scorer))?;
                let report = scorer.score(&pruned)?;
                report.annotate(&mut pruned);
                (pruned, t, Some(report.global))
            } else {
                let (pruned, t) = pipeline::prune(&cfg, &graph, None)?;
                // The recorded global distortion is stale once edges are gone.
                let kept = global.filter(|_| pruned.edge_count() == graph.edge_count());
                (pruned, t, kept)
            };
            io::write_text(output, &io::graph_to_json(&pruned, global))?;
            if let (Some(path), Some(t)) = (trace, &pruned_trace) {
                io::write_json(path, t)?;
            }
            let mut summary = graph_summary("prune", &pruned, output);
            summary["removed"] = json!(pruned_trace.as_ref().map_or(0, |t| t.steps.len()));
            if let Some(t) = &pruned_trace {
                summary["stop"] = serde_json::to_value(t.stop).expect("serializable");
            }
            Ok(summary)
        }
        Command::Merge {
            cfg,
            graph,
            output,
            trace,
        } => {
            let cfg = cfg.resolve()?;
            let (graph, global) = io::read_graph(graph)?;
            let cloud = load_cloud(&cfg)?;
            let (merged, merge_trace) = pipeline::merge(&cfg, &graph, &cloud)?;
            io::write_text(output, &io::graph_to_json(&merged, global))?;
            if let Some(path) = trace {
                io::write_json(path, &merge_trace)?;
            }
            let mut summary = graph_summary("merge", &merged, output);
            summary["added"] = json!(merge_trace.added.len());
            summary["removed"] = json!(merge_trace.pruning.as_ref().map_or(0, |t| t.steps.len()));
            Ok(summary)
        }
        Command::Export {
            graph,
            output,
            format,
        } => {
            let format = match format {
                Some(f) => f.parse()?,
                None => ExportFormat::from_path(output).ok_or_else(|| {
                    Error::Config(format!(
                        "cannot infer a format from `{}`; pass --format",
                        output.display()
                    ))
                })?,
            };
            let (g, global) = io::read_graph(graph)?;
            io::export_graph(&g, global, format, output)?;
            Ok(graph_summary("export", &g, output))
        }
        Command::Pipeline { cfg } => {
            let cfg = cfg.resolve()?;
            let outcome = run_pipeline(&cfg).map_err(Failure::Staged)?;
            let mut summary = serde_json::to_value(&outcome.summary).expect("serializable");
            summary["command"] = json!("pipeline");
            summary["output_dir"] = json!(cfg.output_dir.display().to_string());
            summary["timings"] = serde_json::to_value(&outcome.timings).expect("serializable");
            Ok(summary)
        }
        Command::Stability {
            cfg,
            other,
            delta,
            output,
        } => {
            let cfg = cfg.resolve()?;
            let (cloud, first) = load(&cfg)?;
            let second = io::load_clustering(other, cloud.len())?;
            let report = check_stability(&cloud, &first, &second, *delta)?;
            if let Some(path) = output {
                io::write_json(path, &report)?;
            }
            let mut summary = serde_json::to_value(&report).expect("serializable");
            summary["command"] = json!("stability");
            summary["holds"] = json!(report.holds());
            Ok(summary)
        }
    }
}
