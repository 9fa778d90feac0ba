//! Fixed-effects regression with cluster-robust inference and the
//! difference-in-differences designs built on it.

mod centrality;
mod dataset;
mod event;
mod propagation;
mod spec;
mod transforms;
mod twfe;

pub use centrality::{
    baseline_characteristics, did_centrality, event_study_centrality, residualize_centrality, BaselineCharacteristics,
    CentralityDidOptions, FirmOutcome, FirmPanel, FirmYear, Timing, CENTRALITY_TERM, CONFLICT_TRADE_TERM,
};
pub use dataset::{compact_ids, PanelDataset};
pub use event::{event_study, EventPoint, EventSeries, EventStudy};
pub use propagation::{
    did_propagation, event_study_propagation, legendre, ClusterLevel, Degrees, PropagationOptions, TreatmentLevel,
    POLYNOMIAL_ORDER,
};
pub use spec::{preset, write_event_study, write_results, CentralitySpec, EstimationSpec, ModelKind, PRESETS, SPEC_KEYS};
pub use transforms::{
    estimate_alpha, ihs, log1p, residualize, underestimation_share, AlphaEstimate, LaborCostRecord, Residualized,
};
pub use twfe::{
    cluster_robust_se, cross_products, demean_columns, singleton_mask, stars, twoway_fe_ols, DemeanDiagnostics,
    EstimationOptions, RegressionResult,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("estimation sample is empty")]
    EmptySample,
    #[error("invalid estimation input: {0}")]
    Invalid(String),
    #[error("non-finite value in `{column}` at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("regressors collinear after absorbing fixed effects: {}", .0.join(", "))]
    Collinear(Vec<String>),
    #[error("demeaning did not converge after {iterations} sweeps (largest group mean {max_group_mean:e})")]
    DemeanNotConverged { iterations: usize, max_group_mean: f64 },
    #[error("fixed effect `{dimension}` has {groups} group(s); at least 2 required")]
    TooFewGroups { dimension: String, groups: usize },
    #[error("cluster-robust covariance needs at least 2 clusters")]
    SingleCluster,
    #[error("log(1 + x) undefined for x = {0}")]
    NegativeLog(f64),
    #[error("baseline period `{0}` not present in the sample")]
    MissingBaseline(String),
    #[error("total effect is zero")]
    ZeroTotal,
    #[error("link share {0} outside [0, 1]")]
    InvalidShare(f64),
}
