//! Loading shipments, firms and accounting data; the balanced trade panel.

mod flows;
mod panel;
mod records;

pub use flows::{build_yearly_flows, read_edge_list, write_edge_list, FlowEdge};
pub use panel::{
    assign_treatment_flags, build_trade_panel, Establishment, PairDirection, PanelCell, TradeOutcome,
    TradePanel, TreatmentConfig, TreatmentFlags,
};
pub use records::{
    load_accounting, load_firms, load_transactions, read_accounting, read_firms, read_transactions,
    write_accounting, write_firms, write_transactions, AccountingRecord, FirmRecord, IngestConfig,
    RegionIndex, TransactionLoad, TransactionRecord, ACCOUNTING_HEADER, FIRMS_HEADER, TRANSACTIONS_HEADER,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: malformed row: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("line {line}: field `{field}` has invalid value {value:?}: {reason}")]
    Field { line: u64, field: &'static str, value: String, reason: String },
    #[error("duplicate firm id `{0}` in firms table")]
    DuplicateFirm(String),
    #[error("unresolved firm ids: {}", .0.join(", "))]
    UnresolvedFirms(Vec<String>),
    #[error("year {year} outside the study window")]
    YearOutsideWindow { year: i32 },
    #[error("write failed: {0}")]
    Write(String),
}

impl IngestError {
    pub fn category(&self) -> &'static str {
        match self {
            IngestError::Io { .. } => "io",
            IngestError::Header { .. } => "schema",
            IngestError::Malformed { .. } | IngestError::Field { .. } => "parse",
            IngestError::DuplicateFirm(_) | IngestError::UnresolvedFirms(_) => "reference",
            IngestError::YearOutsideWindow { .. } => "window",
            IngestError::Write(_) => "io",
        }
    }
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line()).unwrap_or(0);
        match e.kind() {
            csv::ErrorKind::Io(_) => IngestError::Write(e.to_string()),
            _ => IngestError::Malformed { line, reason: e.to_string() },
        }
    }
}
