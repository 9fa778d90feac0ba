use super::EstimationError;

/// Estimation sample: one outcome, named regressors, up to two (or more)
/// fixed-effect dimensions, a cluster id and optional positive weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanelDataset {
    pub outcome: Vec<f64>,
    pub regressors: Vec<(String, Vec<f64>)>,
    pub fixed_effects: Vec<(String, Vec<u32>)>,
    pub cluster: Vec<u32>,
    pub weights: Option<Vec<f64>>,
}

impl PanelDataset {
    pub fn new(outcome: Vec<f64>, cluster: Vec<u32>) -> Self {
        PanelDataset { outcome, cluster, ..Default::default() }
    }

    pub fn with_regressor(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.regressors.push((name.into(), values));
        self
    }

    pub fn with_fixed_effect(mut self, name: impl Into<String>, ids: Vec<u32>) -> Self {
        self.fixed_effects.push((name.into(), ids));
        self
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.weights = Some(weights);
        self
    }

    pub fn n_obs(&self) -> usize {
        self.outcome.len()
    }

    pub fn n_regressors(&self) -> usize {
        self.regressors.len()
    }

    pub fn regressor_names(&self) -> Vec<String> {
        self.regressors.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let n = self.outcome.len();
        if n == 0 {
            return Err(EstimationError::EmptySample);
        }
        if self.regressors.is_empty() {
            return Err(EstimationError::Invalid("no regressors".into()));
        }
        let bad_len = |what: &str, len: usize| {
            (len != n).then(|| EstimationError::Invalid(format!("{what} has {len} rows, outcome has {n}")))
        };
        for (name, v) in &self.regressors {
            if let Some(e) = bad_len(name, v.len()) {
                return Err(e);
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(EstimationError::NonFinite { column: name.clone(), row: i });
            }
        }
        for (name, v) in &self.fixed_effects {
            if let Some(e) = bad_len(name, v.len()) {
                return Err(e);
            }
        }
        if let Some(e) = bad_len("cluster", self.cluster.len()) {
            return Err(e);
        }
        if let Some(i) = self.outcome.iter().position(|x| !x.is_finite()) {
            return Err(EstimationError::NonFinite { column: "outcome".into(), row: i });
        }
        if let Some(w) = &self.weights {
            if let Some(e) = bad_len("weights", w.len()) {
                return Err(e);
            }
            if let Some(i) = w.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(EstimationError::NonFinite { column: "weights".into(), row: i });
            }
        }
        Ok(())
    }

    /// Rows where `keep` is true.
    pub fn subset(&self, keep: &[bool]) -> PanelDataset {
        let pick_f = |v: &[f64]| v.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect::<Vec<_>>();
        let pick_u = |v: &[u32]| v.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect::<Vec<_>>();
        PanelDataset {
            outcome: pick_f(&self.outcome),
            regressors: self.regressors.iter().map(|(n, v)| (n.clone(), pick_f(v))).collect(),
            fixed_effects: self.fixed_effects.iter().map(|(n, v)| (n.clone(), pick_u(v))).collect(),
            cluster: pick_u(&self.cluster),
            weights: self.weights.as_deref().map(pick_f),
        }
    }
}

/// Relabels arbitrary ids as `0..G` in order of first appearance.
pub fn compact_ids(ids: &[u32]) -> (Vec<u32>, usize) {
    let max = ids.iter().copied().max().unwrap_or(0) as usize;
    if max <= 4 * ids.len() + 1024 {
        let mut map = vec![u32::MAX; max + 1];
        let mut next = 0u32;
        let out = ids
            .iter()
            .map(|&id| {
                let slot = &mut map[id as usize];
                if *slot == u32::MAX {
                    *slot = next;
                    next += 1;
                }
                *slot
            })
            .collect();
        return (out, next as usize);
    }
    let mut map = std::collections::HashMap::new();
    let out = ids
        .iter()
        .map(|id| {
            let next = map.len() as u32;
            *map.entry(*id).or_insert(next)
        })
        .collect();
    (out, map.len())
}
