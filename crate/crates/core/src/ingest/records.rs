use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use csv::StringRecord;

use super::IngestError;
use crate::config::parse_bool;
use crate::time::{parse_date, StudyWindow};

pub const TRANSACTIONS_HEADER: [&str; 6] =
    ["date", "sender_firm_id", "receiver_firm_id", "sender_rayon_id", "receiver_rayon_id", "weight_kg"];
pub const FIRMS_HEADER: [&str; 4] = ["firm_id", "rayon_id", "province_id", "conflict_flag"];
pub const ACCOUNTING_HEADER: [&str; 5] = ["firm_id", "year", "sales", "profits", "total_costs"];

/// One railway shipment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransactionRecord {
    pub date: NaiveDate,
    pub sender_firm_id: String,
    pub receiver_firm_id: String,
    pub sender_rayon_id: String,
    pub receiver_rayon_id: String,
    pub weight_kg: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirmRecord {
    pub firm_id: String,
    pub rayon_id: String,
    pub province_id: String,
    /// Registered in a conflict-affected territory.
    pub conflict_flag: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccountingRecord {
    pub firm_id: String,
    pub year: i32,
    pub sales: f64,
    /// May be negative.
    pub profits: f64,
    pub total_costs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestConfig {
    pub window: StudyWindow,
    /// Strict mode fails on the first malformed row; lenient mode skips and counts it.
    pub strict: bool,
    /// Drop shipments whose sender or receiver rayon is not a known domestic rayon.
    pub exclude_international: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig { window: StudyWindow::default(), strict: true, exclude_international: false }
    }
}

/// Parsed shipments plus counters for everything that was dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransactionLoad {
    pub records: Vec<TransactionRecord>,
    pub skipped_malformed: usize,
    pub excluded_conflict_internal: usize,
    pub excluded_out_of_window: usize,
    pub excluded_international: usize,
    pub excluded_zero_weight: usize,
}

/// Firm lookup plus the rayon-level geography derived from it.
///
/// A rayon is conflict-flagged when any firm registered there carries the
/// conflict flag. The province of a rayon is the province of the first firm
/// (by id) registered in it.
#[derive(Debug, Clone, Default)]
pub struct RegionIndex {
    firms: BTreeMap<String, FirmRecord>,
    rayon_province: BTreeMap<String, String>,
    conflict_rayons: BTreeSet<String>,
}

impl RegionIndex {
    pub fn new(firms: impl IntoIterator<Item = FirmRecord>) -> Result<Self, IngestError> {
        let mut map = BTreeMap::new();
        for f in firms {
            if map.contains_key(&f.firm_id) {
                return Err(IngestError::DuplicateFirm(f.firm_id));
            }
            map.insert(f.firm_id.clone(), f);
        }
        let mut rayon_province = BTreeMap::new();
        let mut conflict_rayons = BTreeSet::new();
        for f in map.values() {
            rayon_province.entry(f.rayon_id.clone()).or_insert_with(|| f.province_id.clone());
            if f.conflict_flag {
                conflict_rayons.insert(f.rayon_id.clone());
            }
        }
        Ok(RegionIndex { firms: map, rayon_province, conflict_rayons })
    }

    pub fn firm(&self, id: &str) -> Option<&FirmRecord> {
        self.firms.get(id)
    }

    pub fn firms(&self) -> impl Iterator<Item = &FirmRecord> {
        self.firms.values()
    }

    pub fn len(&self) -> usize {
        self.firms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.firms.is_empty()
    }

    pub fn is_conflict_rayon(&self, rayon: &str) -> bool {
        self.conflict_rayons.contains(rayon)
    }

    pub fn is_conflict_firm(&self, id: &str) -> bool {
        self.firms.get(id).is_some_and(|f| f.conflict_flag)
    }

    pub fn is_domestic_rayon(&self, rayon: &str) -> bool {
        self.rayon_province.contains_key(rayon)
    }

    /// Province of a rayon, falling back to the owning firm's province for
    /// rayons no firm is registered in.
    pub fn province_of(&self, firm_id: &str, rayon: &str) -> Option<&str> {
        self.rayon_province
            .get(rayon)
            .map(String::as_str)
            .or_else(|| self.firms.get(firm_id).map(|f| f.province_id.as_str()))
    }

    pub fn conflict_rayons(&self) -> impl Iterator<Item = &str> {
        self.conflict_rayons.iter().map(String::as_str)
    }

    /// Ids referenced in `ids` but absent from the firm table, sorted and unique.
    pub fn unresolved<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let missing: BTreeSet<&str> = ids.into_iter().filter(|id| !self.firms.contains_key(*id)).collect();
        missing.into_iter().map(str::to_string).collect()
    }
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

/// Shared row loop: header validation, positioned errors, strict/lenient handling.
fn read_rows<R, T, F>(reader: R, header: &[&str], strict: bool, mut parse: F) -> Result<(Vec<T>, usize), IngestError>
where
    R: Read,
    F: FnMut(&StringRecord, u64) -> Result<Option<T>, IngestError>,
{
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let found = rdr.headers().map_err(IngestError::from)?.clone();
    let found_names: Vec<&str> = found.iter().map(|h| h.trim_start_matches('\u{feff}')).collect();
    if found_names != header {
        return Err(IngestError::Header { expected: header.join(","), found: found_names.join(",") });
    }
    let mut out = Vec::new();
    let mut skipped = 0;
    let mut record = StringRecord::new();
    loop {
        let line = rdr.position().line();
        let outcome = match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let line = record.position().map(|p| p.line()).unwrap_or(line);
                if record.len() != header.len() {
                    Err(IngestError::Malformed {
                        line,
                        reason: format!("expected {} fields, found {}", header.len(), record.len()),
                    })
                } else {
                    parse(&record, line)
                }
            }
            Err(e) => Err(IngestError::from(e)),
        };
        match outcome {
            Ok(Some(v)) => out.push(v),
            Ok(None) => {}
            Err(e) if strict => return Err(e),
            Err(_) => skipped += 1,
        }
    }
    Ok((out, skipped))
}

fn nonempty(record: &StringRecord, idx: usize, field: &'static str, line: u64) -> Result<String, IngestError> {
    let v = &record[idx];
    if v.is_empty() {
        return Err(IngestError::Field { line, field, value: String::new(), reason: "empty id".into() });
    }
    Ok(v.to_string())
}

fn parse_f64(record: &StringRecord, idx: usize, field: &'static str, line: u64) -> Result<f64, IngestError> {
    let v = &record[idx];
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(IngestError::Field { line, field, value: v.to_string(), reason: "not a finite number".into() }),
    }
}

fn parse_transaction(record: &StringRecord, line: u64) -> Result<TransactionRecord, IngestError> {
    let date = parse_date(&record[0]).ok_or_else(|| IngestError::Field {
        line,
        field: "date",
        value: record[0].to_string(),
        reason: "expected YYYY-MM-DD".into(),
    })?;
    let raw_weight = &record[5];
    let weight: i128 = raw_weight.parse().map_err(|_| IngestError::Field {
        line,
        field: "weight_kg",
        value: raw_weight.to_string(),
        reason: "not an integer".into(),
    })?;
    if weight < 0 {
        return Err(IngestError::Field {
            line,
            field: "weight_kg",
            value: raw_weight.to_string(),
            reason: "negative weight".into(),
        });
    }
    let weight_kg = u64::try_from(weight).map_err(|_| IngestError::Field {
        line,
        field: "weight_kg",
        value: raw_weight.to_string(),
        reason: "weight too large".into(),
    })?;
    Ok(TransactionRecord {
        date,
        sender_firm_id: nonempty(record, 1, "sender_firm_id", line)?,
        receiver_firm_id: nonempty(record, 2, "receiver_firm_id", line)?,
        sender_rayon_id: nonempty(record, 3, "sender_rayon_id", line)?,
        receiver_rayon_id: nonempty(record, 4, "receiver_rayon_id", line)?,
        weight_kg,
    })
}

/// Reads shipments from CSV.
///
/// Rows are kept in file order. Shipments with both rayons in conflict
/// territory, outside the window, or with zero weight are dropped and counted;
/// international shipments are dropped only when configured. Unknown firm ids
/// are not checked here.
pub fn read_transactions<R: Read>(
    reader: R,
    regions: &RegionIndex,
    config: &IngestConfig,
) -> Result<TransactionLoad, IngestError> {
    let mut load = TransactionLoad::default();
    let (records, skipped) = read_rows(reader, &TRANSACTIONS_HEADER, config.strict, |rec, line| {
        let t = parse_transaction(rec, line)?;
        if t.weight_kg == 0 {
            load.excluded_zero_weight += 1;
            return Ok(None);
        }
        if !config.window.contains(t.date) {
            load.excluded_out_of_window += 1;
            return Ok(None);
        }
        if config.exclude_international
            && !(regions.is_domestic_rayon(&t.sender_rayon_id) && regions.is_domestic_rayon(&t.receiver_rayon_id))
        {
            load.excluded_international += 1;
            return Ok(None);
        }
        if regions.is_conflict_rayon(&t.sender_rayon_id) && regions.is_conflict_rayon(&t.receiver_rayon_id) {
            load.excluded_conflict_internal += 1;
            return Ok(None);
        }
        Ok(Some(t))
    })?;
    load.records = records;
    load.skipped_malformed = skipped;
    Ok(load)
}

pub fn load_transactions(path: &Path, regions: &RegionIndex, config: &IngestConfig) -> Result<TransactionLoad, IngestError> {
    read_transactions(open(path)?, regions, config)
}

pub fn read_firms<R: Read>(reader: R, strict: bool) -> Result<(Vec<FirmRecord>, usize), IngestError> {
    read_rows(reader, &FIRMS_HEADER, strict, |rec, line| {
        let flag = parse_bool(&rec[3]).ok_or_else(|| IngestError::Field {
            line,
            field: "conflict_flag",
            value: rec[3].to_string(),
            reason: "expected 0/1 or true/false".into(),
        })?;
        Ok(Some(FirmRecord {
            firm_id: nonempty(rec, 0, "firm_id", line)?,
            rayon_id: nonempty(rec, 1, "rayon_id", line)?,
            province_id: nonempty(rec, 2, "province_id", line)?,
            conflict_flag: flag,
        }))
    })
}

/// Loads the firm table and indexes it. Duplicate firm ids are an error in
/// either mode.
pub fn load_firms(path: &Path, strict: bool) -> Result<RegionIndex, IngestError> {
    let (firms, _) = read_firms(open(path)?, strict)?;
    RegionIndex::new(firms)
}

pub fn read_accounting<R: Read>(reader: R, strict: bool) -> Result<(Vec<AccountingRecord>, usize), IngestError> {
    read_rows(reader, &ACCOUNTING_HEADER, strict, |rec, line| {
        let year: i32 = rec[1].parse().map_err(|_| IngestError::Field {
            line,
            field: "year",
            value: rec[1].to_string(),
            reason: "not an integer".into(),
        })?;
        let sales = parse_f64(rec, 2, "sales", line)?;
        let profits = parse_f64(rec, 3, "profits", line)?;
        let total_costs = parse_f64(rec, 4, "total_costs", line)?;
        if sales < 0.0 {
            return Err(IngestError::Field { line, field: "sales", value: rec[2].to_string(), reason: "negative".into() });
        }
        if total_costs < 0.0 {
            return Err(IngestError::Field {
                line,
                field: "total_costs",
                value: rec[4].to_string(),
                reason: "negative".into(),
            });
        }
        Ok(Some(AccountingRecord { firm_id: nonempty(rec, 0, "firm_id", line)?, year, sales, profits, total_costs }))
    })
}

pub fn load_accounting(path: &Path, strict: bool) -> Result<(Vec<AccountingRecord>, usize), IngestError> {
    read_accounting(open(path)?, strict)
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

pub fn write_transactions<W: Write>(w: W, records: &[TransactionRecord]) -> Result<(), IngestError> {
    let mut out = writer(w);
    out.write_record(TRANSACTIONS_HEADER)?;
    for t in records {
        out.write_record([
            t.date.format("%Y-%m-%d").to_string().as_str(),
            &t.sender_firm_id,
            &t.receiver_firm_id,
            &t.sender_rayon_id,
            &t.receiver_rayon_id,
            &t.weight_kg.to_string(),
        ])?;
    }
    out.flush().map_err(|e| IngestError::Write(e.to_string()))
}

pub fn write_firms<W: Write>(w: W, firms: &[FirmRecord]) -> Result<(), IngestError> {
    let mut out = writer(w);
    out.write_record(FIRMS_HEADER)?;
    for f in firms {
        out.write_record([f.firm_id.as_str(), f.rayon_id.as_str(), f.province_id.as_str(), if f.conflict_flag { "1" } else { "0" }])?;
    }
    out.flush().map_err(|e| IngestError::Write(e.to_string()))
}

pub fn write_accounting<W: Write>(w: W, rows: &[AccountingRecord]) -> Result<(), IngestError> {
    let mut out = writer(w);
    out.write_record(ACCOUNTING_HEADER)?;
    for a in rows {
        out.write_record([
            a.firm_id.clone(),
            a.year.to_string(),
            a.sales.to_string(),
            a.profits.to_string(),
            a.total_costs.to_string(),
        ])?;
    }
    out.flush().map_err(|e| IngestError::Write(e.to_string()))
}
