use std::collections::{BTreeMap, BTreeSet};

use super::dataset::PanelDataset;
use super::event::{event_study, EventStudy};
use super::transforms::{ihs, log1p};
use super::twfe::{twoway_fe_ols, EstimationOptions, RegressionResult};
use super::EstimationError;
use crate::ingest::{AccountingRecord, FlowEdge, RegionIndex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmYear {
    pub firm: usize,
    pub year: i32,
    pub sales: f64,
    pub profits: f64,
    pub total_costs: f64,
}

/// Firm-by-year accounting panel with conflict markers.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmPanel {
    pub firms: Vec<String>,
    /// Registered in a conflict area.
    pub conflict: Vec<bool>,
    /// Traded with a conflict-area firm in the base year.
    pub conflict_trade: Vec<bool>,
    pub rows: Vec<FirmYear>,
}

impl FirmPanel {
    /// Firms are those with accounting rows, sorted by id; `base_flows` are
    /// the firm-level flows of the base year.
    pub fn from_records(
        accounting: &[AccountingRecord],
        regions: &RegionIndex,
        base_flows: &[FlowEdge],
    ) -> Result<Self, EstimationError> {
        let ids: BTreeSet<&str> = accounting.iter().map(|a| a.firm_id.as_str()).collect();
        let unresolved = regions.unresolved(ids.iter().copied());
        if !unresolved.is_empty() {
            return Err(EstimationError::Invalid(format!("firms missing from the firm table: {}", unresolved.join(", "))));
        }
        let firms: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
        let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, f)| (*f, i)).collect();
        let conflict: Vec<bool> = firms.iter().map(|f| regions.is_conflict_firm(f)).collect();
        let mut conflict_trade = vec![false; firms.len()];
        for e in base_flows {
            let (fc, tc) = (regions.is_conflict_firm(&e.from), regions.is_conflict_firm(&e.to));
            if tc {
                if let Some(&i) = index.get(e.from.as_str()) {
                    conflict_trade[i] = true;
                }
            }
            if fc {
                if let Some(&i) = index.get(e.to.as_str()) {
                    conflict_trade[i] = true;
                }
            }
        }
        let mut rows: Vec<FirmYear> = accounting
            .iter()
            .map(|a| FirmYear {
                firm: index[a.firm_id.as_str()],
                year: a.year,
                sales: a.sales,
                profits: a.profits,
                total_costs: a.total_costs,
            })
            .collect();
        rows.sort_by_key(|r| (r.firm, r.year));
        Ok(FirmPanel { firms, conflict, conflict_trade, rows })
    }

    pub fn years(&self) -> Vec<i32> {
        self.rows.iter().map(|r| r.year).collect::<BTreeSet<_>>().into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirmOutcome {
    /// `log(1 + sales)`.
    LogSales,
    IhsProfits,
    /// `ihs(profits) - ihs(total costs)`.
    IhsProfitsMinusCosts,
}

impl FirmOutcome {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "log_sales" => Some(FirmOutcome::LogSales),
            "ihs_profits" => Some(FirmOutcome::IhsProfits),
            "ihs_profits_minus_costs" => Some(FirmOutcome::IhsProfitsMinusCosts),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FirmOutcome::LogSales => "log_sales",
            FirmOutcome::IhsProfits => "ihs_profits",
            FirmOutcome::IhsProfitsMinusCosts => "ihs_profits_minus_costs",
        }
    }

    pub fn value(self, row: &FirmYear) -> Result<f64, EstimationError> {
        Ok(match self {
            FirmOutcome::LogSales => log1p(row.sales)?,
            FirmOutcome::IhsProfits => ihs(row.profits),
            FirmOutcome::IhsProfitsMinusCosts => ihs(row.profits) - ihs(row.total_costs),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    /// One coefficient on the change x Post.
    PrePost,
    /// One coefficient per year, base year omitted.
    Yearly,
    /// Yearly coefficients on the change and on base-year conflict trade.
    Joint,
}

impl Timing {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pre_post" => Some(Timing::PrePost),
            "yearly" => Some(Timing::Yearly),
            "joint" => Some(Timing::Joint),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralityDidOptions {
    pub outcome: FirmOutcome,
    pub base_year: i32,
    /// First post-period year.
    pub post_year: i32,
    pub estimation: EstimationOptions,
}

impl Default for CentralityDidOptions {
    fn default() -> Self {
        CentralityDidOptions {
            outcome: FirmOutcome::LogSales,
            base_year: 2013,
            post_year: 2014,
            estimation: EstimationOptions::default(),
        }
    }
}

pub const CENTRALITY_TERM: &str = "centrality_change";
pub const CONFLICT_TRADE_TERM: &str = "conflict_trade";

struct CentralitySample {
    data: PanelDataset,
    delta: Vec<f64>,
    conflict_trade: Vec<f64>,
    year: Vec<i32>,
}

/// Non-conflict firms with a centrality change; the change is standardized
/// (sample sd) across these firms.
fn build_sample(
    panel: &FirmPanel,
    delta: &[Option<f64>],
    opts: &CentralityDidOptions,
) -> Result<CentralitySample, EstimationError> {
    if delta.len() != panel.firms.len() {
        return Err(EstimationError::Invalid(format!(
            "{} centrality changes for {} firms",
            delta.len(),
            panel.firms.len()
        )));
    }
    let in_sample = |f: usize| !panel.conflict[f] && delta[f].is_some_and(f64::is_finite);
    let sample_firms: Vec<f64> =
        (0..panel.firms.len()).filter(|&f| in_sample(f) && panel.rows.iter().any(|r| r.firm == f)).map(|f| delta[f].unwrap()).collect();
    if sample_firms.len() < 2 {
        return Err(EstimationError::EmptySample);
    }
    let n = sample_firms.len() as f64;
    let mean = sample_firms.iter().sum::<f64>() / n;
    let sd = (sample_firms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) || sd <= 1e-12 * mean.abs() {
        return Err(EstimationError::Collinear(vec![CENTRALITY_TERM.to_string()]));
    }
    let mut outcome = Vec::new();
    let mut fe_firm = Vec::new();
    let mut fe_year = Vec::new();
    let mut d = Vec::new();
    let mut ct = Vec::new();
    let mut year = Vec::new();
    for r in panel.rows.iter().filter(|r| in_sample(r.firm)) {
        outcome.push(opts.outcome.value(r)?);
        fe_firm.push(r.firm as u32);
        fe_year.push(r.year as u32);
        d.push((delta[r.firm].unwrap() - mean) / sd);
        ct.push(panel.conflict_trade[r.firm] as u8 as f64);
        year.push(r.year);
    }
    let data = PanelDataset::new(outcome, fe_firm.clone()).with_fixed_effect("firm", fe_firm).with_fixed_effect("year", fe_year);
    Ok(CentralitySample { data, delta: d, conflict_trade: ct, year })
}

/// Firm and year fixed-effects regression of firm outcomes on the
/// standardized centrality change x Post, clustered by firm.
///
/// `delta` is aligned with `panel.firms`; conflict-area firms and firms
/// without a value are excluded.
pub fn did_centrality(
    panel: &FirmPanel,
    delta: &[Option<f64>],
    opts: &CentralityDidOptions,
) -> Result<RegressionResult, EstimationError> {
    let s = build_sample(panel, delta, opts)?;
    let post: Vec<f64> = s.year.iter().map(|&y| (y >= opts.post_year) as u8 as f64).collect();
    let data = s.data.with_regressor(
        format!("{CENTRALITY_TERM}_x_post"),
        s.delta.iter().zip(&post).map(|(a, b)| a * b).collect(),
    );
    twoway_fe_ols(&data, &opts.estimation)
}

/// Yearly interactions (base year omitted); `joint` adds base-year conflict
/// trade x year.
pub fn event_study_centrality(
    panel: &FirmPanel,
    delta: &[Option<f64>],
    joint: bool,
    opts: &CentralityDidOptions,
) -> Result<EventStudy, EstimationError> {
    let s = build_sample(panel, delta, opts)?;
    let years: Vec<i32> = s.year.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let base = years
        .binary_search(&opts.base_year)
        .map_err(|_| EstimationError::MissingBaseline(opts.base_year.to_string()))?;
    let period: Vec<usize> = s.year.iter().map(|y| years.binary_search(y).expect("year listed")).collect();
    let labels: Vec<String> = years.iter().map(|y| y.to_string()).collect();
    let mut treatments = vec![(CENTRALITY_TERM.to_string(), s.delta)];
    if joint {
        treatments.push((CONFLICT_TRADE_TERM.to_string(), s.conflict_trade));
    }
    event_study(s.data, &treatments, &period, &labels, base, &opts.estimation)
}

/// Base-year firm characteristics used to residualize the centrality change.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineCharacteristics {
    /// Columns aligned with the panel's firms.
    pub columns: Vec<(String, Vec<f64>)>,
    /// Firms with base-year accounting data.
    pub available: Vec<bool>,
}

/// Conflict-trade indicator, conflict share of shipped and received weight,
/// conflict share of shipped weight, log(1 + partners' weight traded with
/// conflict firms), log(1 + sales) and IHS profits.
pub fn baseline_characteristics(
    panel: &FirmPanel,
    regions: &RegionIndex,
    base_flows: &[FlowEdge],
    base_year: i32,
) -> Result<BaselineCharacteristics, EstimationError> {
    let n = panel.firms.len();
    let mut ids: BTreeMap<&str, usize> = panel.firms.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
    // Trading partners outside the accounting panel still carry exposure.
    let mut extra: Vec<&str> = Vec::new();
    for e in base_flows {
        for f in [e.from.as_str(), e.to.as_str()] {
            if !ids.contains_key(f) {
                ids.insert(f, n + extra.len());
                extra.push(f);
            }
        }
    }
    let m = n + extra.len();
    let mut total = vec![0.0f64; m];
    let mut with_conflict = vec![0.0f64; m];
    let mut shipped = vec![0.0f64; m];
    let mut shipped_conflict = vec![0.0f64; m];
    let mut partners: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    for e in base_flows.iter().filter(|e| e.from != e.to) {
        let (i, j) = (ids[e.from.as_str()], ids[e.to.as_str()]);
        let w = e.weight_kg as f64;
        let (ci, cj) = (regions.is_conflict_firm(&e.from), regions.is_conflict_firm(&e.to));
        total[i] += w;
        total[j] += w;
        shipped[i] += w;
        if cj {
            with_conflict[i] += w;
            shipped_conflict[i] += w;
        }
        if ci {
            with_conflict[j] += w;
        }
        partners[i].insert(j);
        partners[j].insert(i);
    }
    let share = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let mut base: Vec<Option<&FirmYear>> = vec![None; n];
    for r in panel.rows.iter().filter(|r| r.year == base_year) {
        base[r.firm] = Some(r);
    }
    let mut log_sales = vec![0.0; n];
    let mut profits = vec![0.0; n];
    for (f, r) in base.iter().enumerate() {
        if let Some(r) = r {
            log_sales[f] = log1p(r.sales)?;
            profits[f] = ihs(r.profits);
        }
    }
    let columns = vec![
        ("conflict_trade".to_string(), (0..n).map(|f| panel.conflict_trade[f] as u8 as f64).collect()),
        ("conflict_transaction_share".to_string(), (0..n).map(|f| share(with_conflict[f], total[f])).collect()),
        ("conflict_sales_share".to_string(), (0..n).map(|f| share(shipped_conflict[f], shipped[f])).collect()),
        (
            "partners_conflict_weight".to_string(),
            (0..n).map(|f| partners[f].iter().map(|&p| with_conflict[p]).sum::<f64>().ln_1p()).collect(),
        ),
        ("log_sales".to_string(), log_sales),
        ("ihs_profits".to_string(), profits),
    ];
    Ok(BaselineCharacteristics { columns, available: base.iter().map(Option::is_some).collect() })
}

/// Residualizes the centrality change over non-conflict firms with
/// base-year data and returns the standardized residuals aligned with the
/// panel's firms.
pub fn residualize_centrality(
    panel: &FirmPanel,
    delta: &[Option<f64>],
    characteristics: &BaselineCharacteristics,
) -> Result<Vec<Option<f64>>, EstimationError> {
    let sample: Vec<usize> = (0..panel.firms.len())
        .filter(|&f| !panel.conflict[f] && characteristics.available[f] && delta[f].is_some_and(f64::is_finite))
        .collect();
    let y: Vec<f64> = sample.iter().map(|&f| delta[f].unwrap()).collect();
    // Characteristics without variation in the sample are absorbed by the intercept.
    let cols: Vec<(String, Vec<f64>)> = characteristics
        .columns
        .iter()
        .map(|(name, c)| (name.clone(), sample.iter().map(|&f| c[f]).collect::<Vec<f64>>()))
        .filter(|(_, c)| c.iter().any(|v| *v != c[0]))
        .collect();
    let r = super::transforms::residualize(&y, &cols)?;
    let mut out = vec![None; panel.firms.len()];
    for (k, &f) in sample.iter().enumerate() {
        out[f] = Some(r.standardized[k]);
    }
    Ok(out)
}
