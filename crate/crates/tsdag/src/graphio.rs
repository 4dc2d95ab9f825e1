//! Graph serialization: a versioned JSON file format, DOT export, and the
//! parent-by-lag adjacency matrix CSV.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::metrics::GraphMode;
use crate::TemporalGraph;

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFileEdge {
    pub from: String,
    pub lag: usize,
    pub to: String,
    pub weight: f64,
}

/// Run provenance carried inside every graph file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acyclicity_reached: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges_removed: Option<usize>,
    /// Resolved configuration of the run that produced this graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

/// On-disk graph representation with a fixed schema version and
/// deterministic `(from, lag, to)` edge ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub schema_version: u32,
    pub variables: Vec<String>,
    pub l_max: usize,
    pub edges: Vec<GraphFileEdge>,
    #[serde(default)]
    pub metadata: GraphMetadata,
}

impl GraphFile {
    pub fn from_graph(graph: &TemporalGraph, metadata: GraphMetadata) -> Self {
        let edges = graph
            .edges()
            .into_iter()
            .map(|(from, lag, to, weight)| GraphFileEdge {
                from: graph.names[from].clone(),
                lag,
                to: graph.names[to].clone(),
                weight,
            })
            .collect();
        GraphFile {
            schema_version: GRAPH_SCHEMA_VERSION,
            variables: graph.names.clone(),
            l_max: graph.l_max,
            edges,
            metadata,
        }
    }

    pub fn to_graph(&self) -> Result<TemporalGraph, GraphError> {
        if self.schema_version != GRAPH_SCHEMA_VERSION {
            return Err(GraphError::SchemaVersion {
                found: self.schema_version,
                expected: GRAPH_SCHEMA_VERSION,
            });
        }
        let index_of = |name: &str| self.variables.iter().position(|v| v == name);
        let mut graph = TemporalGraph::zeros(self.variables.clone(), self.l_max);
        for (i, edge) in self.edges.iter().enumerate() {
            let from = index_of(&edge.from).ok_or_else(|| GraphError::UnknownVariable {
                name: edge.from.clone(),
                index: i,
            })?;
            let to = index_of(&edge.to).ok_or_else(|| GraphError::UnknownVariable {
                name: edge.to.clone(),
                index: i,
            })?;
            if edge.lag > self.l_max {
                return Err(GraphError::LagOutOfRange {
                    index: i,
                    lag: edge.lag,
                    l_max: self.l_max,
                });
            }
            if edge.weight < 0.0 || !edge.weight.is_finite() {
                return Err(GraphError::NegativeWeight {
                    index: i,
                    weight: edge.weight,
                });
            }
            graph.set_weight(from, edge.lag, to, edge.weight);
        }
        Ok(graph)
    }
}

pub fn write_graph(
    graph: &TemporalGraph,
    metadata: GraphMetadata,
    path: &Path,
) -> Result<(), GraphError> {
    let file = GraphFile::from_graph(graph, metadata);
    let text = serde_json::to_string_pretty(&file).expect("graph file serializes");
    fs::write(path, text).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_graph(path: &Path) -> Result<(TemporalGraph, GraphMetadata), GraphError> {
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: GraphFile =
        serde_json::from_str(&text).map_err(|e| GraphError::Parse(e.to_string()))?;
    let graph = file.to_graph()?;
    Ok((graph, file.metadata))
}

fn node_name(var: &str, lag: usize) -> String {
    if lag == 0 {
        format!("{var}[t]")
    } else {
        format!("{var}[t-{lag}]")
    }
}

/// DOT rendering. Summary mode: one node per variable, edges labeled with
/// the lags they collapse. Full mode: one node per (variable, lag), edges
/// labeled with their weight.
pub fn to_dot(graph: &TemporalGraph, mode: GraphMode) -> String {
    let mut out = String::from("digraph causal {\n  rankdir=LR;\n");
    match mode {
        GraphMode::Summary => {
            for name in &graph.names {
                out.push_str(&format!("  \"{name}\";\n"));
            }
            let n = graph.n();
            for from in 0..n {
                for to in 0..n {
                    let lags: Vec<String> = (0..=graph.l_max)
                        .filter(|&lag| graph.weight_at(from, lag, to) != 0.0)
                        .map(|lag| lag.to_string())
                        .collect();
                    if !lags.is_empty() {
                        out.push_str(&format!(
                            "  \"{}\" -> \"{}\" [label=\"lag {}\"];\n",
                            graph.names[from],
                            graph.names[to],
                            lags.join(",")
                        ));
                    }
                }
            }
        }
        GraphMode::Full => {
            for lag in (0..=graph.l_max).rev() {
                for name in &graph.names {
                    out.push_str(&format!("  \"{}\";\n", node_name(name, lag)));
                }
            }
            for (from, lag, to, weight) in graph.edges() {
                out.push_str(&format!(
                    "  \"{}\" -> \"{}\" [label=\"{:.3}\"];\n",
                    node_name(&graph.names[from], lag),
                    node_name(&graph.names[to], 0),
                    weight
                ));
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Matrix CSV: columns are (parent variable, lag) pairs ordered oldest lag
/// first within each variable; rows are target variables. Summary mode
/// collapses to an n x n matrix holding the maximum weight over lags.
pub fn to_adjacency_csv(graph: &TemporalGraph, mode: GraphMode) -> String {
    let n = graph.n();
    let mut out = String::from("target");
    match mode {
        GraphMode::Full => {
            for name in &graph.names {
                for lag in (0..=graph.l_max).rev() {
                    out.push(',');
                    out.push_str(&node_name(name, lag));
                }
            }
            out.push('\n');
            for to in 0..n {
                out.push_str(&graph.names[to]);
                for from in 0..n {
                    for lag in (0..=graph.l_max).rev() {
                        out.push_str(&format!(",{}", graph.weight_at(from, lag, to)));
                    }
                }
                out.push('\n');
            }
        }
        GraphMode::Summary => {
            for name in &graph.names {
                out.push(',');
                out.push_str(name);
            }
            out.push('\n');
            for to in 0..n {
                out.push_str(&graph.names[to]);
                for from in 0..n {
                    let w = (0..=graph.l_max)
                        .map(|lag| graph.weight_at(from, lag, to))
                        .fold(0.0f64, f64::max);
                    out.push_str(&format!(",{w}"));
                }
                out.push('\n');
            }
        }
    }
    out
}
