//! Firm trade graphs and centrality.
//!
//! A [`TradeGraph`] keeps the directed, weighted yearly flows together with the
//! undirected simple adjacency `g_ij = 1` iff the firms traded in either
//! direction. Removing nodes keeps the node universe: removed nodes stay
//! indexed but are marked absent, so centrality vectors of the original and
//! the reduced graph line up entry by entry.

mod centrality;
mod predicted;

pub use centrality::{
    betweenness_centrality, brandes_betweenness, degree_centrality, eigenvector_centrality, CentralityKind,
    CentralityVector, DegreeVariant, EigenvectorResult, Transform,
};
pub use predicted::{compute_centrality, predicted_centrality_change, standardize, write_centrality_csv, PredictedChange};

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ingest::FlowEdge;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("adjacency has zero dominant eigenvalue (no edges among present nodes)")]
    ZeroEigenvalue,
    #[error("power iteration did not converge after {iterations} iterations (last change {last_change:e}, residual {residual:e})")]
    NotConverged { iterations: usize, last_change: f64, residual: f64 },
    #[error("cannot standardize: {0}")]
    DegenerateStandardization(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeGraph {
    nodes: Vec<String>,
    index: BTreeMap<String, usize>,
    present: Vec<bool>,
    /// Directed weighted edges `(from, to, weight)`, self-loops excluded, sorted.
    edges: Vec<(usize, usize, f64)>,
    /// Undirected simple adjacency, sorted neighbour lists.
    adj: Vec<Vec<usize>>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl TradeGraph {
    /// Graph over `nodes` plus every endpoint appearing in `edges`, ids sorted.
    pub fn from_flows<'a>(nodes: impl IntoIterator<Item = &'a str>, edges: &[FlowEdge]) -> Self {
        let mut ids: BTreeSet<String> = nodes.into_iter().map(str::to_string).collect();
        for e in edges {
            ids.insert(e.from.clone());
            ids.insert(e.to.clone());
        }
        let nodes: Vec<String> = ids.into_iter().collect();
        let index: BTreeMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let indexed: Vec<(usize, usize, f64)> =
            edges.iter().map(|e| (index[&e.from], index[&e.to], e.weight_kg as f64)).collect();
        Self::build(nodes, index, vec![true; 0], &indexed)
    }

    /// Graph on nodes `0..n` labelled by their index.
    pub fn from_indexed(n: usize, edges: &[(usize, usize)]) -> Self {
        let nodes: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let index = nodes.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let weighted: Vec<(usize, usize, f64)> = edges.iter().map(|&(a, b)| (a, b, 1.0)).collect();
        Self::build(nodes, index, Vec::new(), &weighted)
    }

    /// Graph with explicit labels, edges given by index.
    pub fn from_labelled(nodes: Vec<String>, edges: &[(usize, usize, f64)]) -> Self {
        let index = nodes.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Self::build(nodes, index, Vec::new(), edges)
    }

    fn build(nodes: Vec<String>, index: BTreeMap<String, usize>, present: Vec<bool>, edges: &[(usize, usize, f64)]) -> Self {
        let n = nodes.len();
        let present = if present.is_empty() { vec![true; n] } else { present };
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(a, b, w) in edges {
            assert!(a < n && b < n, "edge endpoint out of range");
            if a != b && present[a] && present[b] {
                *merged.entry((a, b)).or_default() += w;
            }
        }
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for &(a, b) in merged.keys() {
            adj[a].insert(b);
            adj[b].insert(a);
            out_adj[a].push(b);
            in_adj[b].push(a);
        }
        for list in &mut in_adj {
            list.sort_unstable();
        }
        TradeGraph {
            nodes,
            index,
            present,
            edges: merged.into_iter().map(|((a, b), w)| (a, b, w)).collect(),
            adj: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
            out_adj,
            in_adj,
        }
    }

    /// Size of the node universe, including removed nodes.
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_present(&self) -> usize {
        self.present.iter().filter(|p| **p).count()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn is_present(&self, i: usize) -> bool {
        self.present[i]
    }

    pub fn present_mask(&self) -> &[bool] {
        &self.present
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_adj[i]
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_adj[i]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adj
    }

    pub fn directed_edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Number of undirected links.
    pub fn n_links(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Induced subgraph on the remaining nodes. Indices are unchanged; removed
    /// nodes are marked absent. Removing an absent or unknown index is a no-op.
    pub fn remove_nodes(&self, remove: &[usize]) -> TradeGraph {
        let mut present = self.present.clone();
        for &i in remove {
            if i < present.len() {
                present[i] = false;
            }
        }
        Self::build(self.nodes.clone(), self.index.clone(), present, &self.edges)
    }

    /// [`TradeGraph::remove_nodes`] by firm id; unknown ids are ignored.
    pub fn remove_ids<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> TradeGraph {
        let idx: Vec<usize> = ids.into_iter().filter_map(|id| self.node_index(id)).collect();
        self.remove_nodes(&idx)
    }
}
