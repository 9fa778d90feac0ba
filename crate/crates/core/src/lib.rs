//! Production-network shock analysis.
//!
//! The crate is organised around the stages of a typical analysis:
//!
//! - [`ingest`]: CSV loading of shipments, firms and accounting data, the
//!   balanced establishment-pair trade panel and its conflict-exposure flags.
//! - [`graph`]: yearly firm trade graphs, degree / betweenness / eigenvector
//!   centrality and the node-removal construction of predicted centrality changes.
//! - [`leontief`]: sparse input-output matrices, backing out outside demand and
//!   solving the revenue fixed point `r = (1 - alpha) * Omega * r + xi`.
//! - [`counterfactual`]: the named network scenarios, distribution statistics,
//!   dynamics and regional aggregation.
//! - [`econometrics`]: two-way fixed-effects OLS with cluster-robust inference and
//!   the difference-in-differences designs built on top of it.
//! - [`synth`]: seeded synthetic economies and transaction streams with planted effects.

pub mod config;
pub mod counterfactual;
pub mod econometrics;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod leontief;
pub mod synth;
pub mod time;

pub use error::{Error, Result};
