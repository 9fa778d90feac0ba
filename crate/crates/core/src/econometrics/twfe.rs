use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::dataset::{compact_ids, PanelDataset};
use super::EstimationError;

/// Rows per block in cross-product accumulation. Fixed so that sums do not
/// depend on the thread count.
const BLOCK: usize = 4096;

/// Columns whose demeaned sum of squares falls below this fraction of the
/// raw sum of squares, or whose Cholesky pivot falls below this fraction of
/// the diagonal, are treated as collinear.
const COLLINEARITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationOptions {
    /// Demeaning stops once every group mean is below `demean_tol * max(1, max|column|)`.
    pub demean_tol: f64,
    pub demean_max_iter: usize,
    pub drop_singletons: bool,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        EstimationOptions { demean_tol: 1e-10, demean_max_iter: 10_000, drop_singletons: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DemeanDiagnostics {
    /// Largest number of sweeps over any column.
    pub iterations: usize,
    /// Largest group mean removed in the final sweep.
    pub max_group_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Cluster-robust covariance.
    pub covariance: DMatrix<f64>,
    pub std_errors: Vec<f64>,
    pub r_squared: f64,
    pub r_squared_within: f64,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub n_singletons_dropped: usize,
    /// Distinct groups per fixed-effect dimension in the estimation sample.
    pub fe_groups: Vec<usize>,
    /// Parameter count used in the small-sample factor.
    pub dof_k: usize,
    pub demeaning: DemeanDiagnostics,
    /// Residuals of the estimation sample (after singleton removal), unweighted.
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn index(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    /// Estimate and standard error of `term`.
    pub fn get(&self, term: &str) -> Option<(f64, f64)> {
        self.index(term).map(|k| (self.coefficients[k], self.std_errors[k]))
    }

    pub fn t_stat(&self, k: usize) -> f64 {
        self.coefficients[k] / self.std_errors[k]
    }

    /// Two-sided p-value against a t distribution with `clusters - 1` degrees of freedom.
    pub fn p_value(&self, k: usize) -> f64 {
        let t = self.t_stat(k);
        if self.std_errors[k].is_nan() {
            return f64::NAN;
        }
        if !t.is_finite() {
            return if self.coefficients[k] == 0.0 { 1.0 } else { 0.0 };
        }
        let df = (self.n_clusters.max(2) - 1) as f64;
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        2.0 * (1.0 - dist.cdf(t.abs()))
    }

    pub fn stars(&self, k: usize) -> &'static str {
        stars(self.p_value(k))
    }
}

/// `*` for p < 0.05, `**` for p < 0.01, `***` for p < 0.001.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Compacted fixed-effect dimension with its group weights.
struct Groups {
    ids: Vec<u32>,
    weight: Vec<f64>,
}

impl Groups {
    fn new(raw: &[u32], weights: Option<&[f64]>) -> Self {
        let (ids, g) = compact_ids(raw);
        let mut weight = vec![0.0; g];
        match weights {
            Some(w) => ids.iter().zip(w).for_each(|(&i, &w)| weight[i as usize] += w),
            None => ids.iter().for_each(|&i| weight[i as usize] += 1.0),
        }
        Groups { ids, weight }
    }

    fn len(&self) -> usize {
        self.weight.len()
    }

    /// Subtracts the (weighted) group means from `v`, returning the largest one.
    fn sweep(&self, v: &mut [f64], weights: Option<&[f64]>, sums: &mut [f64]) -> f64 {
        sums.iter_mut().for_each(|s| *s = 0.0);
        match weights {
            Some(w) => {
                for ((&g, x), w) in self.ids.iter().zip(v.iter()).zip(w) {
                    sums[g as usize] += w * x;
                }
            }
            None => {
                for (&g, x) in self.ids.iter().zip(v.iter()) {
                    sums[g as usize] += x;
                }
            }
        }
        let mut max_mean = 0.0f64;
        for (s, w) in sums.iter_mut().zip(&self.weight) {
            *s /= w;
            max_mean = max_mean.max(s.abs());
        }
        for (&g, x) in self.ids.iter().zip(v.iter_mut()) {
            *x -= sums[g as usize];
        }
        max_mean
    }
}

/// Alternating projections on one column.
fn demean_column(
    v: &mut [f64],
    groups: &[Groups],
    weights: Option<&[f64]>,
    opts: &EstimationOptions,
) -> Result<DemeanDiagnostics, EstimationError> {
    if groups.is_empty() {
        return Ok(DemeanDiagnostics::default());
    }
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = opts.demean_tol * scale;
    let mut sums: Vec<Vec<f64>> = groups.iter().map(|g| vec![0.0; g.len()]).collect();
    let mut last = f64::INFINITY;
    for iter in 1..=opts.demean_max_iter {
        last = 0.0;
        for (g, s) in groups.iter().zip(sums.iter_mut()) {
            last = last.max(g.sweep(v, weights, s));
        }
        // A single dimension is exact after one sweep.
        if last < tol || groups.len() == 1 {
            return Ok(DemeanDiagnostics { iterations: iter, max_group_mean: last });
        }
    }
    Err(EstimationError::DemeanNotConverged { iterations: opts.demean_max_iter, max_group_mean: last })
}

/// Demeans every column in place with respect to all fixed-effect dimensions.
pub fn demean_columns(
    columns: &mut [Vec<f64>],
    fixed_effects: &[&[u32]],
    weights: Option<&[f64]>,
    opts: &EstimationOptions,
) -> Result<DemeanDiagnostics, EstimationError> {
    let groups: Vec<Groups> = fixed_effects.iter().map(|ids| Groups::new(ids, weights)).collect();
    let diags: Result<Vec<_>, _> =
        columns.par_iter_mut().map(|c| demean_column(c, &groups, weights, opts)).collect();
    Ok(diags?.into_iter().fold(DemeanDiagnostics::default(), |a, d| DemeanDiagnostics {
        iterations: a.iterations.max(d.iterations),
        max_group_mean: a.max_group_mean.max(d.max_group_mean),
    }))
}

/// Keep-mask after iteratively removing observations that are alone in
/// their group in some dimension.
pub fn singleton_mask(fixed_effects: &[&[u32]]) -> Vec<bool> {
    let n = fixed_effects.first().map_or(0, |f| f.len());
    let mut keep = vec![true; n];
    let compacted: Vec<(Vec<u32>, usize)> = fixed_effects.iter().map(|f| compact_ids(f)).collect();
    loop {
        let mut changed = false;
        for (ids, g) in &compacted {
            let mut count = vec![0u32; *g];
            for (i, &id) in ids.iter().enumerate() {
                if keep[i] {
                    count[id as usize] += 1;
                }
            }
            for (i, &id) in ids.iter().enumerate() {
                if keep[i] && count[id as usize] == 1 {
                    keep[i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return keep;
        }
    }
}

/// `X'X` and `X'y` accumulated over fixed row blocks in order.
pub fn cross_products(x: &[Vec<f64>], y: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let k = x.len();
    let n = y.len();
    let blocks: Vec<(DMatrix<f64>, DVector<f64>)> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let range = b * BLOCK..((b + 1) * BLOCK).min(n);
            let mut xtx = DMatrix::zeros(k, k);
            let mut xty = DVector::zeros(k);
            for a in 0..k {
                let xa = &x[a][range.clone()];
                xty[a] = xa.iter().zip(&y[range.clone()]).map(|(p, q)| p * q).sum();
                for c in a..k {
                    let v: f64 = xa.iter().zip(&x[c][range.clone()]).map(|(p, q)| p * q).sum();
                    xtx[(a, c)] = v;
                    xtx[(c, a)] = v;
                }
            }
            (xtx, xty)
        })
        .collect();
    blocks.into_iter().fold((DMatrix::zeros(k, k), DVector::zeros(k)), |(a, b), (c, d)| (a + c, b + d))
}

/// Indices of columns that are (numerically) linear combinations of earlier
/// columns or of the absorbed effects.
fn collinear_columns(xtx: &DMatrix<f64>, raw_ss: &[f64]) -> Vec<usize> {
    let k = xtx.nrows();
    let mut l = DMatrix::<f64>::zeros(k, k);
    let mut bad = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    for j in 0..k {
        let diag = xtx[(j, j)];
        if raw_ss[j] == 0.0 || diag <= COLLINEARITY_TOL * raw_ss[j] {
            bad.push(j);
            continue;
        }
        let pivot = diag - kept.iter().map(|&c| l[(j, c)] * l[(j, c)]).sum::<f64>();
        if pivot <= COLLINEARITY_TOL * diag {
            bad.push(j);
            continue;
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in j + 1..k {
            let s = xtx[(i, j)] - kept.iter().map(|&c| l[(i, c)] * l[(j, c)]).sum::<f64>();
            l[(i, j)] = s / d;
        }
        kept.push(j);
    }
    bad
}

/// Cluster-robust covariance of OLS coefficients on (already demeaned and
/// weighted) regressors `x` with residuals `residuals`.
///
/// Uses the factor `G/(G-1) * (N-1)/(N-K)` with `K = dof_k`; all entries
/// are NaN when `N <= K`.
pub fn cluster_robust_se(
    x: &[Vec<f64>],
    residuals: &[f64],
    clusters: &[u32],
    dof_k: usize,
) -> Result<DMatrix<f64>, EstimationError> {
    let (xtx, _) = cross_products(x, residuals);
    let bread = xtx.cholesky().ok_or_else(|| EstimationError::Collinear(vec![]))?.inverse();
    cluster_covariance(x, residuals, clusters, dof_k, &bread)
}

fn cluster_covariance(
    x: &[Vec<f64>],
    residuals: &[f64],
    clusters: &[u32],
    dof_k: usize,
    bread: &DMatrix<f64>,
) -> Result<DMatrix<f64>, EstimationError> {
    let k = x.len();
    let n = residuals.len();
    let (ids, g) = compact_ids(clusters);
    if g < 2 {
        return Err(EstimationError::SingleCluster);
    }
    if n <= dof_k {
        // Exactly identified: the coefficients stand but no variance is left to estimate.
        return Ok(DMatrix::from_element(k, k, f64::NAN));
    }
    let mut scores = vec![0.0f64; g * k];
    for (i, &c) in ids.iter().enumerate() {
        let u = residuals[i];
        let row = &mut scores[c as usize * k..(c as usize + 1) * k];
        for (a, s) in row.iter_mut().enumerate() {
            *s += x[a][i] * u;
        }
    }
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for s in scores.chunks_exact(k) {
        for a in 0..k {
            for b in 0..k {
                meat[(a, b)] += s[a] * s[b];
            }
        }
    }
    let factor = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - dof_k as f64));
    let cov = bread * meat * bread * factor;
    // Symmetrise away rounding.
    Ok((&cov + cov.transpose()) * 0.5)
}

/// Two-way (in general multi-way) fixed-effects OLS with cluster-robust errors.
///
/// Outcome and regressors are demeaned by alternating projections, then OLS
/// runs on the demeaned data. Coefficients equal those of the regression with
/// a full set of dummies.
pub fn twoway_fe_ols(data: &PanelDataset, opts: &EstimationOptions) -> Result<RegressionResult, EstimationError> {
    data.validate()?;
    let fe_all: Vec<&[u32]> = data.fixed_effects.iter().map(|(_, v)| v.as_slice()).collect();
    let (data, dropped) = if opts.drop_singletons && !fe_all.is_empty() {
        let keep = singleton_mask(&fe_all);
        let dropped = keep.iter().filter(|k| !**k).count();
        if dropped > 0 {
            (std::borrow::Cow::Owned(data.subset(&keep)), dropped)
        } else {
            (std::borrow::Cow::Borrowed(data), 0)
        }
    } else {
        (std::borrow::Cow::Borrowed(data), 0)
    };
    let data: &PanelDataset = &data;
    let n = data.n_obs();
    if n == 0 {
        return Err(EstimationError::EmptySample);
    }
    let fe: Vec<&[u32]> = data.fixed_effects.iter().map(|(_, v)| v.as_slice()).collect();
    let fe_groups: Vec<usize> = fe.iter().map(|f| compact_ids(f).1).collect();
    for ((name, _), &g) in data.fixed_effects.iter().zip(&fe_groups) {
        if g < 2 {
            return Err(EstimationError::TooFewGroups { dimension: name.clone(), groups: g });
        }
    }
    let weights = data.weights.as_deref();
    let k = data.n_regressors();

    let raw_ss: Vec<f64> = data
        .regressors
        .iter()
        .map(|(_, v)| match weights {
            Some(w) => v.iter().zip(w).map(|(x, w)| w * x * x).sum(),
            None => v.iter().map(|x| x * x).sum(),
        })
        .collect();

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    columns.push(data.outcome.clone());
    columns.extend(data.regressors.iter().map(|(_, v)| v.clone()));
    let demeaning = demean_columns(&mut columns, &fe, weights, opts)?;
    if let Some(w) = weights {
        let sw: Vec<f64> = w.iter().map(|w| w.sqrt()).collect();
        columns.par_iter_mut().for_each(|c| c.iter_mut().zip(&sw).for_each(|(x, s)| *x *= s));
    }
    let y = columns.remove(0);
    let x = columns;

    let (xtx, xty) = cross_products(&x, &y);
    let bad = collinear_columns(&xtx, &raw_ss);
    if !bad.is_empty() {
        return Err(EstimationError::Collinear(bad.iter().map(|&j| data.regressors[j].0.clone()).collect()));
    }
    let chol = xtx.clone().cholesky().ok_or_else(|| EstimationError::Collinear(data.regressor_names()))?;
    let mut beta = chol.solve(&xty);
    // One refinement step removes most of the rounding from the square roots.
    beta += chol.solve(&(&xty - &xtx * &beta));
    let bread = chol.inverse();

    let resid_w: Vec<f64> = (0..n)
        .into_par_iter()
        .with_min_len(BLOCK)
        .map(|i| y[i] - (0..k).map(|a| x[a][i] * beta[a]).sum::<f64>())
        .collect();
    let dof_k = if fe.is_empty() { k } else { k + 1 + fe_groups.iter().map(|g| g - 1).sum::<usize>() };
    let covariance = cluster_covariance(&x, &resid_w, &data.cluster, dof_k, &bread)?;

    let ssr: f64 = resid_w.iter().map(|u| u * u).sum();
    let tss_within: f64 = y.iter().map(|v| v * v).sum();
    let (wsum, wy) = match weights {
        Some(w) => (w.iter().sum::<f64>(), w.iter().zip(&data.outcome).map(|(w, y)| w * y).sum::<f64>()),
        None => (n as f64, data.outcome.iter().sum::<f64>()),
    };
    let ybar = wy / wsum;
    let tss: f64 = match weights {
        Some(w) => w.iter().zip(&data.outcome).map(|(w, y)| w * (y - ybar) * (y - ybar)).sum(),
        None => data.outcome.iter().map(|y| (y - ybar) * (y - ybar)).sum(),
    };
    let residuals = match weights {
        Some(w) => resid_w.iter().zip(w).map(|(u, w)| u / w.sqrt()).collect(),
        None => resid_w,
    };
    let std_errors = (0..k).map(|a| if covariance[(a, a)].is_nan() { f64::NAN } else { covariance[(a, a)].max(0.0).sqrt() }).collect();
    Ok(RegressionResult {
        terms: data.regressor_names(),
        coefficients: beta.iter().copied().collect(),
        covariance,
        std_errors,
        r_squared: if tss > 0.0 { 1.0 - ssr / tss } else { f64::NAN },
        r_squared_within: if tss_within > 0.0 { 1.0 - ssr / tss_within } else { f64::NAN },
        n_obs: n,
        n_clusters: compact_ids(&data.cluster).1,
        n_singletons_dropped: dropped,
        fe_groups,
        dof_k,
        demeaning,
        residuals,
    })
}
