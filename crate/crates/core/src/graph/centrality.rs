use std::collections::VecDeque;

use num_traits::Num;
use rayon::prelude::*;

use super::{GraphError, TradeGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CentralityKind {
    Degree,
    InDegree,
    OutDegree,
    Betweenness,
    Eigenvector,
}

impl CentralityKind {
    pub fn name(self) -> &'static str {
        match self {
            CentralityKind::Degree => "degree",
            CentralityKind::InDegree => "indegree",
            CentralityKind::OutDegree => "outdegree",
            CentralityKind::Betweenness => "betweenness",
            CentralityKind::Eigenvector => "eigenvector",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "degree" => CentralityKind::Degree,
            "indegree" => CentralityKind::InDegree,
            "outdegree" => CentralityKind::OutDegree,
            "betweenness" => CentralityKind::Betweenness,
            "eigenvector" => CentralityKind::Eigenvector,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    #[default]
    Identity,
    /// `log(1 + x)`.
    Log1p,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log1p => x.ln_1p(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Log1p => "log1p",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeVariant {
    Total,
    In,
    Out,
}

/// Per-node scores aligned with the graph's node universe; `None` marks a
/// removed node.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityVector {
    pub kind: CentralityKind,
    pub scores: Vec<Option<f64>>,
}

impl CentralityVector {
    pub fn get(&self, i: usize) -> Option<f64> {
        self.scores[i]
    }

    /// Scores with removed nodes replaced by NaN, convenient for dense checks.
    pub fn to_dense(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.unwrap_or(f64::NAN)).collect()
    }

    fn from_dense(kind: CentralityKind, values: Vec<f64>, present: &[bool]) -> Self {
        let scores = values.into_iter().zip(present).map(|(v, &p)| p.then_some(v)).collect();
        CentralityVector { kind, scores }
    }
}

pub fn degree_centrality(graph: &TradeGraph, variant: DegreeVariant) -> CentralityVector {
    let (kind, lists) = match variant {
        DegreeVariant::Total => (CentralityKind::Degree, graph.adjacency()),
        DegreeVariant::Out => (CentralityKind::OutDegree, &graph.out_adj[..]),
        DegreeVariant::In => (CentralityKind::InDegree, &graph.in_adj[..]),
    };
    let values = lists.iter().map(|l| l.len() as f64).collect();
    CentralityVector::from_dense(kind, values, graph.present_mask())
}

const SOURCE_BLOCK: usize = 64;

/// Brandes accumulation over unordered pairs on an undirected unweighted graph.
///
/// Generic over the number type so it can run in exact rational arithmetic.
/// Sources are processed in fixed blocks and the block sums are reduced in
/// order, so the floating-point result does not depend on the thread count.
pub fn brandes_betweenness<T>(adj: &[Vec<usize>], present: &[bool]) -> Vec<T>
where
    T: Num + Clone + Send + Sync,
{
    let n = adj.len();
    let sources: Vec<usize> = (0..n).filter(|&s| present[s]).collect();
    let partials: Vec<Vec<T>> = sources
        .par_chunks(SOURCE_BLOCK)
        .map(|block| {
            let mut acc = vec![T::zero(); n];
            let mut state = BfsState::new(n);
            for &s in block {
                state.accumulate(adj, s, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![T::zero(); n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t = t.clone() + p;
        }
    }
    let two = T::one() + T::one();
    total.into_iter().map(|v| v / two.clone()).collect()
}

struct BfsState<T> {
    sigma: Vec<T>,
    delta: Vec<T>,
    dist: Vec<usize>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
}

impl<T: Num + Clone> BfsState<T> {
    fn new(n: usize) -> Self {
        BfsState {
            sigma: vec![T::zero(); n],
            delta: vec![T::zero(); n],
            dist: vec![usize::MAX; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::new(),
        }
    }

    fn accumulate(&mut self, adj: &[Vec<usize>], s: usize, acc: &mut [T]) {
        for &v in &self.order {
            self.sigma[v] = T::zero();
            self.delta[v] = T::zero();
            self.dist[v] = usize::MAX;
        }
        self.order.clear();
        self.sigma[s] = T::one();
        self.dist[s] = 0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            let dv = self.dist[v];
            for &w in &adj[v] {
                if self.dist[w] == usize::MAX {
                    self.dist[w] = dv + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == dv + 1 {
                    self.sigma[w] = self.sigma[w].clone() + self.sigma[v].clone();
                }
            }
        }
        for &w in self.order.iter().rev() {
            let coeff = (T::one() + self.delta[w].clone()) / self.sigma[w].clone();
            for &v in &adj[w] {
                if self.dist[v] != usize::MAX && self.dist[v] + 1 == self.dist[w] {
                    self.delta[v] = self.delta[v].clone() + self.sigma[v].clone() * coeff.clone();
                }
            }
            if w != s {
                acc[w] = acc[w].clone() + self.delta[w].clone();
            }
        }
    }
}

/// Betweenness over unordered node pairs, without normalisation.
pub fn betweenness_centrality(graph: &TradeGraph) -> CentralityVector {
    let values = brandes_betweenness::<f64>(graph.adjacency(), graph.present_mask());
    CentralityVector::from_dense(CentralityKind::Betweenness, values, graph.present_mask())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenvectorResult {
    pub centrality: CentralityVector,
    pub eigenvalue: f64,
    pub iterations: usize,
}

/// `y = (A + I) x` restricted to present nodes.
fn shifted_product(adj: &[Vec<usize>], present: &[bool], x: &[f64]) -> Vec<f64> {
    (0..adj.len())
        .into_par_iter()
        .map(|i| if present[i] { x[i] + adj[i].iter().map(|&j| x[j]).sum::<f64>() } else { 0.0 })
        .collect()
}

/// Dominant eigenvector of the undirected 0/1 adjacency, unit Euclidean norm.
///
/// Iterates on `A + I`, which has the same eigenvectors as `A` but a strictly
/// dominant Perron root on bipartite graphs, from the uniform positive vector.
/// Stops once successive iterates differ by less than `tol` in max-norm and
/// `|A v - lambda v|_inf <= tol` with `lambda = v' A v`.
pub fn eigenvector_centrality(graph: &TradeGraph, tol: f64, max_iter: usize) -> Result<EigenvectorResult, GraphError> {
    let present = graph.present_mask();
    let adj = graph.adjacency();
    let n_present = graph.n_present();
    if n_present == 0 {
        return Err(GraphError::EmptyGraph);
    }
    if graph.n_links() == 0 {
        return Err(GraphError::ZeroEigenvalue);
    }
    let start = 1.0 / (n_present as f64).sqrt();
    let mut x: Vec<f64> = present.iter().map(|&p| if p { start } else { 0.0 }).collect();
    let mut last_change = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for iter in 1..=max_iter {
        let mut y = shifted_product(adj, present, &x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= norm);
        last_change = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = y;
        if last_change < tol {
            let ax: Vec<f64> = shifted_product(adj, present, &x).iter().zip(&x).map(|(s, xi)| s - xi).collect();
            let lambda: f64 = ax.iter().zip(&x).map(|(a, b)| a * b).sum();
            residual = ax.iter().zip(&x).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
            if residual <= tol {
                if lambda <= 0.0 {
                    return Err(GraphError::ZeroEigenvalue);
                }
                return Ok(EigenvectorResult {
                    centrality: CentralityVector::from_dense(CentralityKind::Eigenvector, x, present),
                    eigenvalue: lambda,
                    iterations: iter,
                });
            }
        }
    }
    Err(GraphError::NotConverged { iterations: max_iter, last_change, residual })
}
