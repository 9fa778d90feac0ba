use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::Datelike;

use super::CounterfactualError;
use crate::ingest::{AccountingRecord, FlowEdge, RegionIndex, TransactionRecord};
use crate::leontief::{backout_demand, build_io_matrix, solve_revenue, EconomyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLevel {
    Province,
    /// Rayon level.
    District,
}

impl RegionLevel {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "province" => Some(RegionLevel::Province),
            "district" | "rayon" => Some(RegionLevel::District),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionConfig {
    pub level: RegionLevel,
    /// Year whose outside demand is held fixed.
    pub base_year: i32,
    pub years: Vec<i32>,
    pub economy: EconomyConfig,
}

/// One region-year. `counterfactual` and `relative` are `None` for regions
/// without railway shipments.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub region_id: String,
    pub year: i32,
    pub observed: f64,
    pub counterfactual: Option<f64>,
    /// `counterfactual / observed_base - 1`.
    pub relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionAggregation {
    /// Region rows ordered by region then year, followed by `TOTAL` rows
    /// summed over connected regions.
    pub rows: Vec<RegionRow>,
    /// Regions with revenue but no railway shipment in any requested year.
    pub unconnected: Vec<String>,
}

pub const TOTAL_REGION: &str = "TOTAL";

/// Region-level adjustment counterfactual.
///
/// Regional revenue is the sum of firm sales by registered region. The
/// regional network sums shipments between localities; within-region flows
/// are dropped like self-flows.
pub fn aggregate_regions(
    accounting: &[AccountingRecord],
    transactions: &[TransactionRecord],
    regions: &RegionIndex,
    config: &RegionConfig,
) -> Result<RegionAggregation, CounterfactualError> {
    let unresolved = regions.unresolved(
        accounting
            .iter()
            .map(|a| a.firm_id.as_str())
            .chain(transactions.iter().flat_map(|t| [t.sender_firm_id.as_str(), t.receiver_firm_id.as_str()])),
    );
    if !unresolved.is_empty() {
        return Err(CounterfactualError::UnresolvedFirms(unresolved));
    }
    let firm_region = |firm: &str| {
        let f = regions.firm(firm).expect("resolved above");
        match config.level {
            RegionLevel::Province => f.province_id.clone(),
            RegionLevel::District => f.rayon_id.clone(),
        }
    };
    let shipment_region = |firm: &str, rayon: &str| match config.level {
        RegionLevel::Province => regions.province_of(firm, rayon).map(str::to_string).unwrap_or_else(|| firm_region(firm)),
        RegionLevel::District => rayon.to_string(),
    };

    let years: BTreeSet<i32> = config.years.iter().copied().chain([config.base_year]).collect();
    let mut observed: BTreeMap<(String, i32), f64> = BTreeMap::new();
    for a in accounting.iter().filter(|a| years.contains(&a.year)) {
        *observed.entry((firm_region(&a.firm_id), a.year)).or_default() += a.sales;
    }
    let mut flows: BTreeMap<i32, BTreeMap<(String, String), u64>> = BTreeMap::new();
    let mut connected: BTreeSet<String> = BTreeSet::new();
    for t in transactions.iter().filter(|t| years.contains(&t.date.year())) {
        let from = shipment_region(&t.sender_firm_id, &t.sender_rayon_id);
        let to = shipment_region(&t.receiver_firm_id, &t.receiver_rayon_id);
        connected.insert(from.clone());
        connected.insert(to.clone());
        *flows.entry(t.date.year()).or_default().entry((from, to)).or_default() += t.weight_kg;
    }

    let all_regions: BTreeSet<String> = observed.keys().map(|(r, _)| r.clone()).chain(connected.iter().cloned()).collect();
    let unconnected: Vec<String> = all_regions.iter().filter(|r| !connected.contains(*r)).cloned().collect();
    let nodes: Arc<Vec<String>> = Arc::new(connected.iter().cloned().collect());
    let observed_vec = |year: i32| -> Vec<f64> {
        nodes.iter().map(|r| observed.get(&(r.clone(), year)).copied().unwrap_or(0.0)).collect()
    };
    let matrix = |year: i32| {
        let edges: Vec<FlowEdge> = flows
            .get(&year)
            .map(|m| {
                m.iter().map(|((a, b), &w)| FlowEdge { from: a.clone(), to: b.clone(), weight_kg: w }).collect()
            })
            .unwrap_or_default();
        build_io_matrix(&edges, nodes.clone(), year)
    };

    let base_obs = observed_vec(config.base_year);
    let demand = backout_demand(&matrix(config.base_year), &base_obs, &config.economy)?;
    let mut cf: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for &year in &config.years {
        cf.insert(year, solve_revenue(&matrix(year), &demand.values, &config.economy)?.revenues);
    }

    let mut rows = Vec::new();
    for region in &all_regions {
        let idx = nodes.binary_search(region).ok();
        let base = observed.get(&(region.clone(), config.base_year)).copied().unwrap_or(0.0);
        for &year in &config.years {
            let obs = observed.get(&(region.clone(), year)).copied().unwrap_or(0.0);
            let c = idx.map(|i| cf[&year][i]);
            rows.push(RegionRow {
                region_id: region.clone(),
                year,
                observed: obs,
                counterfactual: c,
                relative: c.map(|c| c / base - 1.0),
            });
        }
    }
    let base_total: f64 = base_obs.iter().sum();
    for &year in &config.years {
        let obs: f64 = observed_vec(year).iter().sum();
        let c: f64 = cf[&year].iter().sum();
        rows.push(RegionRow {
            region_id: TOTAL_REGION.to_string(),
            year,
            observed: obs,
            counterfactual: Some(c),
            relative: Some(c / base_total - 1.0),
        });
    }
    Ok(RegionAggregation { rows, unconnected })
}
