use std::io::Write;

use super::centrality::{
    betweenness_centrality, degree_centrality, eigenvector_centrality, CentralityKind, CentralityVector,
    DegreeVariant, Transform,
};
use super::{GraphError, TradeGraph};

/// Computes one centrality measure; eigenvector uses the given tolerance and
/// iteration cap.
pub fn compute_centrality(
    graph: &TradeGraph,
    kind: CentralityKind,
    tol: f64,
    max_iter: usize,
) -> Result<CentralityVector, GraphError> {
    Ok(match kind {
        CentralityKind::Degree => degree_centrality(graph, DegreeVariant::Total),
        CentralityKind::InDegree => degree_centrality(graph, DegreeVariant::In),
        CentralityKind::OutDegree => degree_centrality(graph, DegreeVariant::Out),
        CentralityKind::Betweenness => betweenness_centrality(graph),
        CentralityKind::Eigenvector => eigenvector_centrality(graph, tol, max_iter)?.centrality,
    })
}

/// Centrality change implied by deleting the conflict firms from a fixed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedChange {
    pub kind: CentralityKind,
    pub transform: Transform,
    pub before: CentralityVector,
    pub after: CentralityVector,
    /// `after - before` on raw scores; `None` outside the sample.
    pub raw_delta: Vec<Option<f64>>,
    /// `T(after) - T(before)` for the chosen transform `T`.
    pub delta: Vec<Option<f64>>,
    /// `delta` standardized to mean 0, standard deviation 1 over the sample.
    pub standardized: Vec<Option<f64>>,
}

/// Mean 0 / sample standard deviation 1 over the `Some` entries.
pub fn standardize(values: &[Option<f64>]) -> Result<Vec<Option<f64>>, GraphError> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.len() < 2 {
        return Err(GraphError::DegenerateStandardization(format!("{} observations", present.len())));
    }
    let n = present.len() as f64;
    let mean = present.iter().sum::<f64>() / n;
    let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 1e-14 * mean.abs().max(1.0)) {
        return Err(GraphError::DegenerateStandardization("zero variance".into()));
    }
    Ok(values.iter().map(|v| v.map(|x| (x - mean) / sd)).collect())
}

/// Removes `conflict` from `graph`, recomputes `kind` for the survivors and
/// standardizes the change.
///
/// The sample is every surviving node, further restricted by `sample` when
/// given (same length as the node universe).
pub fn predicted_centrality_change(
    graph: &TradeGraph,
    conflict: &[usize],
    kind: CentralityKind,
    transform: Transform,
    sample: Option<&[bool]>,
    tol: f64,
    max_iter: usize,
) -> Result<PredictedChange, GraphError> {
    let before = compute_centrality(graph, kind, tol, max_iter)?;
    let reduced = graph.remove_nodes(conflict);
    let after = compute_centrality(&reduced, kind, tol, max_iter)?;
    let in_sample = |i: usize| reduced.is_present(i) && sample.is_none_or(|s| s[i]);
    let n = graph.n_nodes();
    let mut raw_delta = vec![None; n];
    let mut delta = vec![None; n];
    for i in 0..n {
        if !in_sample(i) {
            continue;
        }
        if let (Some(b), Some(a)) = (before.get(i), after.get(i)) {
            raw_delta[i] = Some(a - b);
            delta[i] = Some(transform.apply(a) - transform.apply(b));
        }
    }
    let standardized = standardize(&delta)?;
    Ok(PredictedChange { kind, transform, before, after, raw_delta, delta, standardized })
}

/// Writes `firm_id,kind,raw,transformed,standardized` rows for a predicted
/// change; nodes outside the sample are skipped.
pub fn write_centrality_csv<W: Write>(w: W, graph: &TradeGraph, change: &PredictedChange) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["firm_id", "kind", "raw", "transformed", "standardized"])?;
    for (i, id) in graph.nodes().iter().enumerate() {
        let (Some(raw), Some(t), Some(z)) = (change.raw_delta[i], change.delta[i], change.standardized[i]) else {
            continue;
        };
        out.write_record([id.as_str(), change.kind.name(), &fmt(raw), &fmt(t), &fmt(z)])?;
    }
    out.flush()
}

fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}
