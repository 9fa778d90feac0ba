//! Counterfactual scenarios on the revenue system.

mod regions;
mod report;
mod stats;

pub use regions::{aggregate_regions, RegionAggregation, RegionConfig, RegionLevel, RegionRow};
pub use report::{write_dynamics_report, write_region_report, write_scenario_report, SCENARIO_REPORT_HEADER};
pub use stats::{
    compensation_share, compensation_share_from_declines, distribution_stats, quantile_sorted, DistributionStats,
    STAT_NAMES,
};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::{AccountingRecord, FlowEdge, RegionIndex};
use crate::leontief::{
    backout_demand, build_io_matrix, solve_revenue, truncate_network, DemandVector, EconomyConfig, IOMatrix,
    LeontiefError, RevenueVector,
};

#[derive(Debug, Error, PartialEq)]
pub enum CounterfactualError {
    #[error("no {what} data for year {year}")]
    MissingYear { what: &'static str, year: i32 },
    #[error("statistics requested over an empty sample")]
    EmptySample,
    #[error("destruction scenario shows no decline (relative decline {0})")]
    NoDestructionDecline(f64),
    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),
    #[error("firms missing from the firm table: {}", .0.join(", "))]
    UnresolvedFirms(Vec<String>),
    #[error(transparent)]
    Solver(#[from] LeontiefError),
}

/// Which firms enter the counterfactual universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleRule {
    /// Firms with accounting data in the base year; later absences count as zero revenue.
    Balanced,
    /// Firms with accounting data in any year; absences count as zero revenue.
    AllFirms,
}

impl SampleRule {
    pub fn name(self) -> &'static str {
        match self {
            SampleRule::Balanced => "balanced",
            SampleRule::AllFirms => "all_firms",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "balanced" => Some(SampleRule::Balanced),
            "all_firms" | "all-firms" => Some(SampleRule::AllFirms),
            _ => None,
        }
    }
}

/// Revenues and input-output matrices over a fixed firm universe.
#[derive(Debug, Clone)]
pub struct DataBundle {
    firms: Arc<Vec<String>>,
    conflict: Vec<bool>,
    revenues: BTreeMap<i32, Vec<f64>>,
    matrices: BTreeMap<i32, IOMatrix>,
}

impl DataBundle {
    pub fn new(
        firms: Arc<Vec<String>>,
        conflict: Vec<bool>,
        revenues: BTreeMap<i32, Vec<f64>>,
        matrices: BTreeMap<i32, IOMatrix>,
    ) -> Self {
        let n = firms.len();
        assert_eq!(conflict.len(), n);
        assert!(revenues.values().all(|r| r.len() == n));
        assert!(matrices.values().all(|m| m.n() == n));
        DataBundle { firms, conflict, revenues, matrices }
    }

    /// Builds the bundle from accounting rows and yearly firm-level flows.
    ///
    /// Flows touching firms outside the universe are dropped.
    pub fn from_records(
        accounting: &[AccountingRecord],
        regions: &RegionIndex,
        flows: &BTreeMap<i32, Vec<FlowEdge>>,
        rule: SampleRule,
        base_year: i32,
    ) -> Result<Self, CounterfactualError> {
        let universe: BTreeSet<&str> = accounting
            .iter()
            .filter(|a| rule == SampleRule::AllFirms || a.year == base_year)
            .map(|a| a.firm_id.as_str())
            .collect();
        let unresolved = regions.unresolved(universe.iter().copied());
        if !unresolved.is_empty() {
            return Err(CounterfactualError::UnresolvedFirms(unresolved));
        }
        let firms: Arc<Vec<String>> = Arc::new(universe.iter().map(|s| s.to_string()).collect());
        let index: BTreeMap<&str, usize> = firms.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
        let mut revenues: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
        for a in accounting {
            if let Some(&i) = index.get(a.firm_id.as_str()) {
                revenues.entry(a.year).or_insert_with(|| vec![0.0; firms.len()])[i] += a.sales;
            }
        }
        let conflict = firms.iter().map(|f| regions.is_conflict_firm(f)).collect();
        let matrices =
            flows.iter().map(|(&year, edges)| (year, build_io_matrix(edges, firms.clone(), year))).collect();
        Ok(DataBundle::new(firms, conflict, revenues, matrices))
    }

    pub fn firms(&self) -> &Arc<Vec<String>> {
        &self.firms
    }

    pub fn conflict(&self) -> &[bool] {
        &self.conflict
    }

    /// Mask of firms that enter reported statistics.
    pub fn reporting_sample(&self) -> Vec<bool> {
        self.conflict.iter().map(|c| !c).collect()
    }

    pub fn revenues(&self, year: i32) -> Result<&[f64], CounterfactualError> {
        self.revenues.get(&year).map(Vec::as_slice).ok_or(CounterfactualError::MissingYear { what: "revenue", year })
    }

    pub fn matrix(&self, year: i32) -> Result<&IOMatrix, CounterfactualError> {
        self.matrices.get(&year).ok_or(CounterfactualError::MissingYear { what: "network", year })
    }

    pub fn years(&self) -> Vec<i32> {
        self.matrices.keys().filter(|y| self.revenues.contains_key(y)).copied().collect()
    }

    /// Outside demand backed out from the observed revenues and network of `year`.
    pub fn demand(&self, year: i32, config: &EconomyConfig) -> Result<DemandVector, CounterfactualError> {
        Ok(backout_demand(self.matrix(year)?, self.revenues(year)?, config)?)
    }
}

/// Network used by a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkSource {
    Observed(i32),
    /// Observed network with conflict firms' rows and columns zeroed.
    Truncated(i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Baseline,
    Destruction,
    Adjustment,
    OutsideDemand,
    Total,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Baseline,
        ScenarioKind::Destruction,
        ScenarioKind::Adjustment,
        ScenarioKind::OutsideDemand,
        ScenarioKind::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Baseline => "baseline",
            ScenarioKind::Destruction => "destruction",
            ScenarioKind::Adjustment => "adjustment",
            ScenarioKind::OutsideDemand => "outside_demand",
            ScenarioKind::Total => "total",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CounterfactualError> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CounterfactualError::UnknownPreset(s.to_string()))
    }
}

/// A (network, demand) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub network: NetworkSource,
    pub demand_year: i32,
}

impl Scenario {
    /// Named preset for a pre-period `pre` and post-period `post`.
    pub fn preset(kind: ScenarioKind, pre: i32, post: i32) -> Self {
        let (network, demand_year) = match kind {
            ScenarioKind::Baseline => (NetworkSource::Observed(pre), pre),
            ScenarioKind::Destruction => (NetworkSource::Truncated(pre), pre),
            ScenarioKind::Adjustment => (NetworkSource::Observed(post), pre),
            ScenarioKind::OutsideDemand => (NetworkSource::Observed(pre), post),
            ScenarioKind::Total => (NetworkSource::Observed(post), post),
        };
        Scenario { kind, network, demand_year }
    }

    pub fn presets(pre: i32, post: i32) -> Vec<Scenario> {
        ScenarioKind::ALL.iter().map(|&k| Scenario::preset(k, pre, post)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub revenues: RevenueVector,
    pub demand: DemandVector,
    pub iterations: usize,
    pub stats: DistributionStats,
}

/// Options shared by all scenarios of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub economy: EconomyConfig,
    /// Rescale surviving columns after truncation.
    pub renormalize: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig { economy: EconomyConfig::default(), renormalize: false }
    }
}

fn network(bundle: &DataBundle, source: NetworkSource, renormalize: bool) -> Result<IOMatrix, CounterfactualError> {
    Ok(match source {
        NetworkSource::Observed(y) => bundle.matrix(y)?.clone(),
        NetworkSource::Truncated(y) => truncate_network(bundle.matrix(y)?, bundle.conflict(), renormalize),
    })
}

/// Solves the scenario and summarises revenues of non-conflict firms.
pub fn run_scenario(
    scenario: &Scenario,
    bundle: &DataBundle,
    config: &ScenarioConfig,
) -> Result<ScenarioResult, CounterfactualError> {
    let demand = bundle.demand(scenario.demand_year, &config.economy)?;
    let io = network(bundle, scenario.network, config.renormalize)?;
    let sol = solve_revenue(&io, &demand.values, &config.economy)?;
    let stats = distribution_stats(&sol.revenues, Some(&bundle.reporting_sample()))?;
    Ok(ScenarioResult {
        scenario: *scenario,
        revenues: RevenueVector { year: io.year, values: sol.revenues },
        demand,
        iterations: sol.iterations,
        stats,
    })
}

/// Results of several scenarios; the first must be the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub results: Vec<ScenarioResult>,
}

impl ScenarioReport {
    pub fn get(&self, kind: ScenarioKind) -> Option<&ScenarioResult> {
        self.results.iter().find(|r| r.scenario.kind == kind)
    }

    pub fn baseline(&self) -> Option<&ScenarioResult> {
        self.get(ScenarioKind::Baseline)
    }

    /// Compensation share of the given statistic, when baseline, destruction
    /// and adjustment are all present.
    pub fn compensation_share(&self, stat: &str) -> Option<Result<f64, CounterfactualError>> {
        let b = self.baseline()?.stats.get(stat)?;
        let d = self.get(ScenarioKind::Destruction)?.stats.get(stat)?;
        let a = self.get(ScenarioKind::Adjustment)?.stats.get(stat)?;
        Some(compensation_share(b, d, a))
    }
}

/// Runs scenarios concurrently; results keep input order.
pub fn run_all(
    scenarios: &[Scenario],
    bundle: &DataBundle,
    config: &ScenarioConfig,
) -> Result<ScenarioReport, CounterfactualError> {
    let results: Result<Vec<_>, _> = scenarios.par_iter().map(|s| run_scenario(s, bundle, config)).collect();
    Ok(ScenarioReport { results: results? })
}

/// Adjustment path: demand pinned at `base_year`, network of each year.
pub fn run_dynamics(
    bundle: &DataBundle,
    base_year: i32,
    years: &[i32],
    config: &EconomyConfig,
) -> Result<Vec<(i32, DistributionStats)>, CounterfactualError> {
    let demand = bundle.demand(base_year, config)?;
    let sample = bundle.reporting_sample();
    years
        .par_iter()
        .map(|&year| {
            let sol = solve_revenue(bundle.matrix(year)?, &demand.values, config)?;
            Ok((year, distribution_stats(&sol.revenues, Some(&sample))?))
        })
        .collect()
}
