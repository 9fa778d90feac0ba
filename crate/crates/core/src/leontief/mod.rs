//! Input-output matrices and the revenue system `[I - (1 - alpha) Omega] r = xi`.
//!
//! `Omega` is stored supplier-by-buyer: entry `(i, j)` is the share of buyer
//! `j`'s in-network inputs that comes from supplier `i`, so columns of buyers
//! with inputs sum to one.

mod io;
mod sparse;

pub use io::{read_io_triplets, read_vector, write_io_triplets, write_vector};
pub use sparse::CsrMatrix;

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::ingest::FlowEdge;

#[derive(Debug, Error, PartialEq)]
pub enum LeontiefError {
    #[error("dimension mismatch: matrix is {matrix}x{matrix}, vector has {vector} entries")]
    Dimension { matrix: usize, vector: usize },
    #[error("labor share alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error(
        "revenue iteration did not converge after {iterations} iterations: last step {last_step:e}, \
         max column sum {max_column_sum}, observed contraction {contraction:.6}"
    )]
    NotConverged { iterations: usize, last_step: f64, max_column_sum: f64, contraction: f64 },
    #[error("direct solve limited to {limit} firms, matrix has {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("system matrix is singular")]
    Singular,
    #[error("firm `{0}` is not in the matrix universe")]
    UnknownFirm(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Labor share and solver controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EconomyConfig {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EconomyConfig {
    fn default() -> Self {
        EconomyConfig { alpha: 0.18, tol: 1e-10, max_iter: 10_000 }
    }
}

impl EconomyConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        EconomyConfig { alpha, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), LeontiefError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LeontiefError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }

    /// Reads `alpha`, `tol` and `max_iter`, defaulting the rest.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, ConfigError> {
        let d = Self::default();
        let cfg = EconomyConfig {
            alpha: kv.get_or("alpha", d.alpha)?,
            tol: kv.get_or("tol", d.tol)?,
            max_iter: kv.get_or("max_iter", d.max_iter)?,
        };
        if cfg.validate().is_err() {
            return Err(ConfigError::Invalid {
                key: "alpha".into(),
                value: cfg.alpha.to_string(),
                reason: "must lie in (0, 1]".into(),
            });
        }
        Ok(cfg)
    }
}

/// Yearly firm-level input-output matrix over a fixed firm universe.
#[derive(Debug, Clone, PartialEq)]
pub struct IOMatrix {
    pub year: i32,
    firms: Arc<Vec<String>>,
    omega: CsrMatrix,
}

impl IOMatrix {
    pub fn new(year: i32, firms: Arc<Vec<String>>, omega: CsrMatrix) -> Self {
        assert_eq!(omega.nrows(), firms.len());
        assert_eq!(omega.ncols(), firms.len());
        IOMatrix { year, firms, omega }
    }

    pub fn from_dense(year: i32, rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let firms = Arc::new((0..n).map(|i| format!("F{i}")).collect());
        let omega = CsrMatrix::from_triplets(
            n,
            n,
            rows.iter().enumerate().flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v))),
        );
        IOMatrix::new(year, firms, omega)
    }

    pub fn n(&self) -> usize {
        self.firms.len()
    }

    pub fn firms(&self) -> &Arc<Vec<String>> {
        &self.firms
    }

    pub fn omega(&self) -> &CsrMatrix {
        &self.omega
    }

    pub fn weight(&self, supplier: usize, buyer: usize) -> f64 {
        self.omega.get(supplier, buyer)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.omega.column_sums()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevenueVector {
    pub year: i32,
    pub values: Vec<f64>,
}

/// Backed-out outside demand. Negative entries are kept; their count and
/// total magnitude are reported.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandVector {
    pub year: i32,
    pub values: Vec<f64>,
    pub negative_count: usize,
    pub negative_mass: f64,
}

impl DemandVector {
    pub fn new(year: i32, values: Vec<f64>) -> Self {
        let negative_count = values.iter().filter(|v| **v < 0.0).count();
        let negative_mass = values.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
        DemandVector { year, values, negative_count, negative_mass }
    }
}

/// Column-normalised shares from yearly flows.
///
/// `omega_ij = w(i -> j) / sum_m w(m -> j)`; self-flows and flows touching
/// firms outside `firms` are ignored; buyers without inputs get a zero column.
pub fn build_io_matrix(flows: &[FlowEdge], firms: Arc<Vec<String>>, year: i32) -> IOMatrix {
    let index: HashMap<&str, usize> = firms.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
    let mut triplets = Vec::with_capacity(flows.len());
    let mut inflow = vec![0.0f64; firms.len()];
    for e in flows {
        let (Some(&i), Some(&j)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) else {
            continue;
        };
        if i == j || e.weight_kg == 0 {
            continue;
        }
        inflow[j] += e.weight_kg as f64;
        triplets.push((i, j, e.weight_kg as f64));
    }
    let n = firms.len();
    let omega = CsrMatrix::from_triplets(n, n, triplets).map_entries(|_, j, v| v / inflow[j]);
    IOMatrix::new(year, firms, omega)
}

/// Zeroes every row and column of the conflict firms.
///
/// Surviving columns keep their original shares, so buyers that lost
/// suppliers have column sums below one. With `renormalize`, surviving
/// columns are rescaled to sum to one again.
pub fn truncate_network(io: &IOMatrix, conflict: &[bool], renormalize: bool) -> IOMatrix {
    assert_eq!(conflict.len(), io.n(), "conflict mask length");
    let kept = io.omega.map_entries(|i, j, v| if conflict[i] || conflict[j] { 0.0 } else { v });
    let omega = if renormalize {
        let sums = kept.column_sums();
        kept.map_entries(|_, j, v| v / sums[j])
    } else {
        kept
    };
    IOMatrix::new(io.year, io.firms.clone(), omega)
}

fn check_dims(io: &IOMatrix, len: usize) -> Result<(), LeontiefError> {
    if io.n() != len {
        return Err(LeontiefError::Dimension { matrix: io.n(), vector: len });
    }
    Ok(())
}

/// `xi = r - (1 - alpha) Omega r`.
pub fn backout_demand(io: &IOMatrix, revenues: &[f64], config: &EconomyConfig) -> Result<DemandVector, LeontiefError> {
    config.validate()?;
    check_dims(io, revenues.len())?;
    let scale = 1.0 - config.alpha;
    let or = io.omega.mul_vec(revenues);
    let xi = revenues.iter().zip(&or).map(|(r, o)| r - scale * o).collect();
    Ok(DemandVector::new(io.year, xi))
}

/// Solution of the revenue system plus iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct RevenueSolution {
    pub revenues: Vec<f64>,
    pub iterations: usize,
    /// L1 norm of each successive step `r_{k+1} - r_k`.
    pub step_norms: Vec<f64>,
}

/// Solves `[I - (1 - alpha) Omega] r = xi` by Neumann iteration
/// `r_{k+1} = (1 - alpha) Omega r_k + xi` starting from `r_0 = xi`.
///
/// Stops when `|r_{k+1} - r_k|_inf <= tol * max(1, |r_k|_inf)`. With column
/// sums at most one the iteration contracts by `1 - alpha` per step in the L1
/// norm.
pub fn solve_revenue(io: &IOMatrix, demand: &[f64], config: &EconomyConfig) -> Result<RevenueSolution, LeontiefError> {
    config.validate()?;
    check_dims(io, demand.len())?;
    let scale = 1.0 - config.alpha;
    let n = io.n();
    let mut r = demand.to_vec();
    let mut next = vec![0.0; n];
    let mut step_norms = Vec::new();
    for iter in 1..=config.max_iter {
        io.omega.mul_vec_into(&r, &mut next);
        let mut step_inf = 0.0f64;
        let mut step_l1 = 0.0f64;
        let mut r_inf = 0.0f64;
        for i in 0..n {
            let v = scale * next[i] + demand[i];
            let d = (v - r[i]).abs();
            step_inf = step_inf.max(d);
            step_l1 += d;
            r_inf = r_inf.max(r[i].abs());
            next[i] = v;
        }
        std::mem::swap(&mut r, &mut next);
        step_norms.push(step_l1);
        if step_inf <= config.tol * r_inf.max(1.0) {
            return Ok(RevenueSolution { revenues: r, iterations: iter, step_norms });
        }
        if !step_inf.is_finite() {
            break;
        }
    }
    let k = step_norms.len();
    let contraction = if k >= 2 && step_norms[k - 2] > 0.0 { step_norms[k - 1] / step_norms[k - 2] } else { f64::NAN };
    Err(LeontiefError::NotConverged {
        iterations: k,
        last_step: step_norms.last().copied().unwrap_or(f64::NAN),
        max_column_sum: io.column_sums().into_iter().fold(0.0, f64::max),
        contraction,
    })
}

/// Largest system solved densely by [`solve_revenue_direct`].
pub const DIRECT_SOLVE_LIMIT: usize = 2_000;

/// Dense LU solve of the same system, for cross-checking small economies.
pub fn solve_revenue_direct(io: &IOMatrix, demand: &[f64], alpha: f64) -> Result<Vec<f64>, LeontiefError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(LeontiefError::InvalidAlpha(alpha));
    }
    check_dims(io, demand.len())?;
    let n = io.n();
    if n > DIRECT_SOLVE_LIMIT {
        return Err(LeontiefError::TooLarge { n, limit: DIRECT_SOLVE_LIMIT });
    }
    let system = DMatrix::identity(n, n) - io.omega.to_dense() * (1.0 - alpha);
    let rhs = DVector::from_column_slice(demand);
    system.lu().solve(&rhs).map(|v| v.as_slice().to_vec()).ok_or(LeontiefError::Singular)
}
