//! Graph evaluation: structural Hamming distance, F1, and false discovery
//! rate, on full temporal graphs (lag-exact) or lag-collapsed summaries.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::TemporalGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    Full,
    Summary,
}

impl fmt::Display for GraphMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphMode::Full => write!(f, "full"),
            GraphMode::Summary => write!(f, "summary"),
        }
    }
}

/// Directed edges keyed by `(from, lag, to)`; summary mode stores the lag
/// as `None` ("any lag").
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSet {
    pub mode: GraphMode,
    pub names: Vec<String>,
    edges: BTreeSet<(usize, Option<usize>, usize)>,
}

impl EdgeSet {
    pub fn empty(mode: GraphMode, names: Vec<String>) -> Self {
        EdgeSet {
            mode,
            names,
            edges: BTreeSet::new(),
        }
    }

    /// Lag-exact edge set of a graph; any nonzero weight counts.
    pub fn full_from_graph(graph: &TemporalGraph) -> Self {
        let mut edges = BTreeSet::new();
        for (from, lag, to, _) in graph.edges() {
            edges.insert((from, Some(lag), to));
        }
        EdgeSet {
            mode: GraphMode::Full,
            names: graph.names.clone(),
            edges,
        }
    }

    pub fn insert(&mut self, from: usize, lag: Option<usize>, to: usize) {
        debug_assert_eq!(lag.is_some(), self.mode == GraphMode::Full);
        self.edges.insert((from, lag, to));
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, from: usize, lag: Option<usize>, to: usize) -> bool {
        self.edges.contains(&(from, lag, to))
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, Option<usize>, usize)> {
        self.edges.iter()
    }
}

/// Collapses lags: edge i -> j iff any lag-l edge i -> j exists, lagged
/// self-influence becoming a self-loop.
pub fn summarize(graph: &TemporalGraph) -> EdgeSet {
    let mut edges = BTreeSet::new();
    for (from, _, to, _) in graph.edges() {
        edges.insert((from, None, to));
    }
    EdgeSet {
        mode: GraphMode::Summary,
        names: graph.names.clone(),
        edges,
    }
}

fn check_comparable(pred: &EdgeSet, truth: &EdgeSet) -> Result<(), MetricsError> {
    if pred.mode != truth.mode {
        return Err(MetricsError::ModeMismatch {
            pred: pred.mode.to_string(),
            truth: truth.mode.to_string(),
        });
    }
    if pred.names.len() != truth.names.len() {
        return Err(MetricsError::VariableMismatch {
            pred: pred.names.len(),
            truth: truth.names.len(),
        });
    }
    Ok(())
}

/// Edge corrections (additions + deletions) transforming `pred` into
/// `truth`, where flipping a contemporaneous or summary edge counts as a
/// single correction. Lagged edges never pair as reversals: their
/// direction in time is fixed.
pub fn shd(pred: &EdgeSet, truth: &EdgeSet) -> Result<usize, MetricsError> {
    check_comparable(pred, truth)?;
    let missing = truth.edges.difference(&pred.edges).count();
    let extra = pred.edges.difference(&truth.edges).count();
    let reversible_lag = match pred.mode {
        GraphMode::Full => Some(0),
        GraphMode::Summary => None,
    };
    let n = pred.names.len();
    let mut reversals = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let t_ij = truth.contains(i, reversible_lag, j);
            let t_ji = truth.contains(j, reversible_lag, i);
            let p_ij = pred.contains(i, reversible_lag, j);
            let p_ji = pred.contains(j, reversible_lag, i);
            if (t_ij && !t_ji && !p_ij && p_ji) || (t_ji && !t_ij && !p_ji && p_ij) {
                reversals += 1;
            }
        }
    }
    Ok(missing + extra - reversals)
}

fn counts(pred: &EdgeSet, truth: &EdgeSet) -> (usize, usize, usize) {
    let tp = pred.edges.intersection(&truth.edges).count();
    (tp, pred.len() - tp, truth.len() - tp)
}

/// Harmonic mean of directed precision and recall (lag-exact in full
/// mode). Zero when either denominator is zero or nothing was hit.
pub fn f1(pred: &EdgeSet, truth: &EdgeSet) -> Result<f64, MetricsError> {
    check_comparable(pred, truth)?;
    let (tp, _, _) = counts(pred, truth);
    if tp == 0 || pred.is_empty() || truth.is_empty() {
        return Ok(0.0);
    }
    let p = tp as f64 / pred.len() as f64;
    let r = tp as f64 / truth.len() as f64;
    Ok(2.0 * p * r / (p + r))
}

/// Fraction of predicted edges that are wrong; 0 for an empty prediction
/// (see the `empty_prediction` flag on [`MetricReport`]).
pub fn fdr(pred: &EdgeSet, truth: &EdgeSet) -> Result<f64, MetricsError> {
    check_comparable(pred, truth)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let (tp, fp, _) = counts(pred, truth);
    Ok(fp as f64 / (fp + tp) as f64)
}

/// One evaluation record, as emitted by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mode: GraphMode,
    pub shd: usize,
    pub f1: f64,
    pub fdr: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub empty_prediction: bool,
}

pub fn evaluate(pred: &EdgeSet, truth: &EdgeSet) -> Result<MetricReport, MetricsError> {
    let shd_val = shd(pred, truth)?;
    let f1_val = f1(pred, truth)?;
    let fdr_val = fdr(pred, truth)?;
    let (tp, fp, fn_) = counts(pred, truth);
    Ok(MetricReport {
        mode: pred.mode,
        shd: shd_val,
        f1: f1_val,
        fdr: fdr_val,
        tp,
        fp,
        fn_,
        empty_prediction: pred.is_empty(),
    })
}
