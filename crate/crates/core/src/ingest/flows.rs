use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::Datelike;

use super::{IngestError, RegionIndex, TransactionRecord};

/// Total weight shipped from one firm to another in a year.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FlowEdge {
    pub from: String,
    pub to: String,
    pub weight_kg: u64,
}

/// Firm-level directed flows for one calendar year, ordered by `(from, to)`.
///
/// Establishments of the same firm are merged. A year without shipments gives
/// an empty list.
pub fn build_yearly_flows(
    records: &[TransactionRecord],
    regions: &RegionIndex,
    year: i32,
) -> Result<Vec<FlowEdge>, IngestError> {
    let unresolved =
        regions.unresolved(records.iter().flat_map(|r| [r.sender_firm_id.as_str(), r.receiver_firm_id.as_str()]));
    if !unresolved.is_empty() {
        return Err(IngestError::UnresolvedFirms(unresolved));
    }
    let mut totals: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.date.year() == year) {
        *totals.entry((&r.sender_firm_id, &r.receiver_firm_id)).or_default() += r.weight_kg;
    }
    Ok(totals
        .into_iter()
        .map(|((from, to), weight_kg)| FlowEdge { from: from.to_string(), to: to.to_string(), weight_kg })
        .collect())
}

pub fn write_edge_list<W: Write>(w: W, edges: &[FlowEdge]) -> Result<(), IngestError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["from", "to", "weight"])?;
    for e in edges {
        out.write_record([e.from.as_str(), e.to.as_str(), &e.weight_kg.to_string()])?;
    }
    out.flush().map_err(|e| IngestError::Write(e.to_string()))
}

/// Reads a `from,to,weight` edge list. Duplicate edges are summed.
pub fn read_edge_list<R: Read>(r: R) -> Result<Vec<FlowEdge>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != ["from", "to", "weight"] {
        return Err(IngestError::Header { expected: "from,to,weight".into(), found: header.join(",") });
    }
    let mut totals: BTreeMap<(String, String), u64> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let w: u64 = row[2].parse().map_err(|_| IngestError::Field {
            line,
            field: "weight",
            value: row[2].to_string(),
            reason: "expected non-negative integer".into(),
        })?;
        *totals.entry((row[0].to_string(), row[1].to_string())).or_default() += w;
    }
    Ok(totals.into_iter().map(|((from, to), weight_kg)| FlowEdge { from, to, weight_kg }).collect())
}
