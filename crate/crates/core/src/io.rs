//! Reading points and clusterings from CSV, and graph, report and trace
//! artifacts in JSON, GraphML and DOT.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ClusterGraph, EdgeData, Provenance, Vertex};
use crate::metrics::ClusterMetric;
use crate::types::{Clustering, PointCloud};

/// Largest asymmetry tolerated in a distance-matrix file before it is averaged away.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Name of the optional class-label column in point files.
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointsOptions {
    /// Read an `N × N` distance matrix instead of feature rows.
    pub distance_matrix: bool,
}

fn read_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::io(path, source),
            _ => unreachable!(),
        }
    } else {
        Error::parse(path, e.to_string())
    }
}

fn is_numeric(cell: &str) -> bool {
    cell.parse::<f64>().is_ok()
}

/// Loads a point cloud. Coordinates files have one point per row, an
/// optional header (detected when the first row has a non-numeric cell) and,
/// with a header, an optional `label` column. Matrix files are `N × N`
/// distances, also with an optional header row.
pub fn load_points(path: impl AsRef<Path>, options: PointsOptions) -> Result<PointCloud> {
    let path = path.as_ref();
    let mut rows = read_rows(path)?;
    if rows.is_empty() {
        return Err(Error::parse(path, "no data rows"));
    }
    let header = if rows[0].iter().any(|c| !is_numeric(c)) {
        Some(rows.remove(0))
    } else {
        None
    };
    if rows.is_empty() {
        return Err(Error::parse(path, "no data rows"));
    }
    let label_col = if options.distance_matrix {
        None
    } else {
        header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == LABEL_COLUMN))
    };
    let width = header.as_ref().map_or(rows[0].len(), Vec::len);
    let mut values = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        // 1-based line numbers as seen in an editor.
        let line = r + 1 + usize::from(header.is_some());
        if row.len() != width {
            return Err(Error::parse(
                path,
                format!("line {line}: {} fields, expected {width}", row.len()),
            ));
        }
        let mut features = Vec::with_capacity(width);
        for (c, cell) in row.iter().enumerate() {
            if Some(c) == label_col {
                labels.push((!cell.is_empty()).then(|| cell.clone()));
                continue;
            }
            let x: f64 = cell.parse().map_err(|_| {
                Error::parse(path, format!("line {line}, column {}: `{cell}` is not a number", c + 1))
            })?;
            features.push(x);
        }
        values.push(features);
    }

    if !options.distance_matrix {
        let cloud = PointCloud::from_rows(&values)?;
        return match label_col {
            Some(_) => cloud.with_labels(labels),
            None => Ok(cloud),
        };
    }
    let n = values.len();
    if width != n {
        return Err(Error::NotSquare {
            row: 0,
            expected: n,
            found: width,
        });
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (values[i][j], values[j][i]);
            if (a - b).abs() > SYMMETRY_TOLERANCE {
                return Err(Error::Asymmetric { i, j, a, b });
            }
            let mean = if a == b { a } else { 0.5 * (a + b) };
            values[i][j] = mean;
            values[j][i] = mean;
        }
    }
    PointCloud::from_matrix(&values)
}

/// Loads `point_id,cluster_id` rows (header optional). A point listed under
/// two clusters makes the result a division.
pub fn load_clustering(path: impl AsRef<Path>, n_points: usize) -> Result<Clustering> {
    let path = path.as_ref();
    let mut rows = read_rows(path)?;
    if rows.first().is_some_and(|r| r[0].parse::<usize>().is_err()) {
        rows.remove(0);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, "empty clustering file"));
    }
    let mut pairs = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        if row.len() != 2 {
            return Err(Error::parse(
                path,
                format!("row {}: expected `point_id,cluster_id`", r + 1),
            ));
        }
        let id: usize = row[0]
            .parse()
            .map_err(|_| Error::parse(path, format!("row {}: bad point id `{}`", r + 1, row[0])))?;
        if id >= n_points {
            return Err(Error::IdOutOfRange { id, n: n_points });
        }
        if row[1].is_empty() {
            return Err(Error::parse(path, format!("row {}: empty cluster id", r + 1)));
        }
        pairs.push((id, row[1].clone()));
    }
    Clustering::from_assignments(pairs)
}

/// `point_id,cluster_id` rows ordered by point, then cluster.
pub fn clustering_to_csv(clustering: &Clustering) -> String {
    let mut rows: Vec<(usize, &str)> = clustering
        .iter()
        .flat_map(|(id, members)| members.iter().map(move |&p| (p, id)))
        .collect();
    rows.sort_unstable();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["point_id", "cluster_id"]).expect("in-memory write");
    for (p, id) in rows {
        w.write_record([p.to_string().as_str(), id]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory")).expect("utf-8")
}

pub fn write_clustering(path: impl AsRef<Path>, clustering: &Clustering) -> Result<()> {
    write_text(path, &clustering_to_csv(clustering))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeJson {
    pub id: String,
    pub size: usize,
    pub component: usize,
    pub composition: BTreeMap<String, f64>,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeJson {
    pub source: String,
    pub target: String,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaJson {
    pub metric_tag: String,
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_distortion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<EdgeJson>,
    pub meta: MetaJson,
}

impl GraphJson {
    pub fn from_graph(graph: &ClusterGraph, global_distortion: Option<f64>) -> Self {
        GraphJson {
            nodes: graph
                .vertices()
                .iter()
                .map(|v| NodeJson {
                    id: v.id.clone(),
                    size: v.size(),
                    component: v.component,
                    composition: v.composition.clone(),
                    members: v.members.clone(),
                })
                .collect(),
            edges: graph
                .edges()
                .map(|((u, v), e)| EdgeJson {
                    source: graph.id(u).to_string(),
                    target: graph.id(v).to_string(),
                    weight: e.weight,
                    distortion: e.distortion,
                    provenance: e.provenance,
                })
                .collect(),
            meta: MetaJson {
                metric_tag: graph.metric().to_string(),
                k: graph.knn_k(),
                global_distortion,
            },
        }
    }

    pub fn to_graph(&self) -> Result<ClusterGraph> {
        let mut nodes: Vec<&NodeJson> = self.nodes.iter().collect();
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        let vertices: Vec<Vertex> = nodes
            .into_iter()
            .map(|n| {
                let members: BTreeSet<usize> = n.members.iter().copied().collect();
                if members.is_empty() {
                    return Err(Error::EmptyCluster(n.id.clone()));
                }
                Ok(Vertex {
                    id: n.id.clone(),
                    members: members.into_iter().collect(),
                    composition: n.composition.clone(),
                    component: n.component,
                })
            })
            .collect::<Result<_>>()?;
        let lookup = |id: &str| {
            vertices
                .binary_search_by(|v| v.id.as_str().cmp(id))
                .map_err(|_| Error::UnknownVertex(id.to_string()))
        };
        let mut edges = BTreeMap::new();
        for e in &self.edges {
            let (a, b) = (lookup(&e.source)?, lookup(&e.target)?);
            edges.insert(
                (a.min(b), a.max(b)),
                EdgeData {
                    weight: e.weight,
                    distortion: e.distortion,
                    provenance: e.provenance,
                },
            );
        }
        let metric = ClusterMetric::from_str(&self.meta.metric_tag)?;
        ClusterGraph::from_parts(vertices, edges, metric, self.meta.k)
    }
}

pub fn graph_to_json(graph: &ClusterGraph, global_distortion: Option<f64>) -> String {
    to_json(&GraphJson::from_graph(graph, global_distortion))
}

/// Reads a graph JSON file; returns the graph and its recorded global distortion.
pub fn read_graph(path: impl AsRef<Path>) -> Result<(ClusterGraph, Option<f64>)> {
    let json: GraphJson = read_json(path)?;
    Ok((json.to_graph()?, json.meta.global_distortion))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    GraphMl,
    Dot,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "graphml" => Ok(ExportFormat::GraphMl),
            "dot" | "gv" => Ok(ExportFormat::Dot),
            other => Err(Error::Config(format!("unknown export format `{other}`"))),
        }
    }
}

impl ExportFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn graph_to_graphml(graph: &ClusterGraph, global_distortion: Option<f64>) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    let keys = [
        ("metric_tag", "graph", "string"),
        ("k", "graph", "int"),
        ("global_distortion", "graph", "double"),
        ("size", "node", "int"),
        ("component", "node", "int"),
        ("composition", "node", "string"),
        ("members", "node", "string"),
        ("weight", "edge", "double"),
        ("distortion", "edge", "double"),
        ("provenance", "edge", "string"),
    ];
    for (name, domain, ty) in keys {
        let _ = writeln!(
            s,
            "  <key id=\"{name}\" for=\"{domain}\" attr.name=\"{name}\" attr.type=\"{ty}\"/>"
        );
    }
    s.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
    let data = |s: &mut String, indent: &str, key: &str, value: &str| {
        let _ = writeln!(s, "{indent}<data key=\"{key}\">{}</data>", xml_escape(value));
    };
    data(&mut s, "    ", "metric_tag", &graph.metric().to_string());
    if let Some(k) = graph.knn_k() {
        data(&mut s, "    ", "k", &k.to_string());
    }
    if let Some(g) = global_distortion {
        data(&mut s, "    ", "global_distortion", &g.to_string());
    }
    for v in graph.vertices() {
        let _ = writeln!(s, "    <node id=\"{}\">", xml_escape(&v.id));
        data(&mut s, "      ", "size", &v.size().to_string());
        data(&mut s, "      ", "component", &v.component.to_string());
        data(
            &mut s,
            "      ",
            "composition",
            &serde_json::to_string(&v.composition).expect("serializable"),
        );
        data(
            &mut s,
            "      ",
            "members",
            &serde_json::to_string(&v.members).expect("serializable"),
        );
        s.push_str("    </node>\n");
    }
    for ((u, v), e) in graph.edges() {
        let _ = writeln!(
            s,
            "    <edge source=\"{}\" target=\"{}\">",
            xml_escape(graph.id(u)),
            xml_escape(graph.id(v))
        );
        data(&mut s, "      ", "weight", &e.weight.to_string());
        if let Some(d) = e.distortion {
            data(&mut s, "      ", "distortion", &d.to_string());
        }
        data(&mut s, "      ", "provenance", provenance_tag(e.provenance));
        s.push_str("    </edge>\n");
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

fn provenance_tag(p: Provenance) -> &'static str {
    match p {
        Provenance::Original => "original",
        Provenance::Merge => "merge",
    }
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT with `len` set to the edge weight so layout engines honor distances.
pub fn graph_to_dot(graph: &ClusterGraph) -> String {
    let mut s = String::from("graph G {\n");
    let _ = writeln!(s, "  graph [metric={}];", dot_quote(&graph.metric().to_string()));
    for v in graph.vertices() {
        let _ = writeln!(
            s,
            "  {} [label={}, size={}, component={}];",
            dot_quote(&v.id),
            dot_quote(&format!("{} ({})", v.id, v.size())),
            v.size(),
            v.component
        );
    }
    for ((u, v), e) in graph.edges() {
        let mut attrs = format!(
            "len={w}, weight={w}, label={}, provenance={}",
            dot_quote(&format!("{:.3}", e.weight)),
            provenance_tag(e.provenance),
            w = e.weight
        );
        if let Some(d) = e.distortion {
            let _ = write!(attrs, ", distortion={d}");
        }
        if e.provenance == Provenance::Merge {
            attrs.push_str(", style=dashed");
        }
        let _ = writeln!(s, "  {} -- {} [{attrs}];", dot_quote(graph.id(u)), dot_quote(graph.id(v)));
    }
    s.push_str("}\n");
    s
}

pub fn export_graph(
    graph: &ClusterGraph,
    global_distortion: Option<f64>,
    format: ExportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let text = match format {
        ExportFormat::Json => graph_to_json(graph, global_distortion),
        ExportFormat::GraphMl => graph_to_graphml(graph, global_distortion),
        ExportFormat::Dot => graph_to_dot(graph),
    };
    write_text(path, &text)
}
