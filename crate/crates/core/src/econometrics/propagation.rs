use std::collections::BTreeMap;

use super::dataset::PanelDataset;
use super::event::{event_study, EventStudy};
use super::twfe::{twoway_fe_ols, EstimationOptions, RegressionResult};
use super::EstimationError;
use crate::ingest::{PairDirection, TradeOutcome, TradePanel, TreatmentFlags};
use crate::time::{YearMonth, YearQuarter};

/// Which conflict exposures enter the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degrees {
    First,
    Both,
    /// Buyer and supplier exposure separately, first and second degree.
    BuyerSupplier,
}

impl Degrees {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "first" => Some(Degrees::First),
            "both" => Some(Degrees::Both),
            "buyer_supplier" => Some(Degrees::BuyerSupplier),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Degrees::First => "first",
            Degrees::Both => "both",
            Degrees::BuyerSupplier => "buyer_supplier",
        }
    }
}

/// Where second-degree exposure is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreatmentLevel {
    Establishment,
    Firm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterLevel {
    /// Ordered (origin province, destination province).
    ProvincePair,
    PairDirection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOptions {
    pub outcome: TradeOutcome,
    pub degrees: Degrees,
    pub level: TreatmentLevel,
    /// First post-period month.
    pub post_start: YearMonth,
    /// Post x number of preconflict partners of origin and destination.
    pub partner_controls: bool,
    /// Per-rayon distance to the conflict areas; adds Post x fifth-order
    /// polynomials of sender and receiver distance.
    pub distance: Option<BTreeMap<String, f64>>,
    /// Post x origin-province dummies (first province omitted).
    pub province_post: bool,
    pub include_both_conflict: bool,
    /// Drop pair-directions whose first shipment falls in the post period.
    pub exclude_entrants: bool,
    pub cluster: ClusterLevel,
    pub estimation: EstimationOptions,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            outcome: TradeOutcome::AnyShipment,
            degrees: Degrees::Both,
            level: TreatmentLevel::Establishment,
            post_start: YearMonth::new(2014, 3),
            partner_controls: false,
            distance: None,
            province_post: false,
            include_both_conflict: false,
            exclude_entrants: false,
            cluster: ClusterLevel::ProvincePair,
            estimation: EstimationOptions::default(),
        }
    }
}

pub const POLYNOMIAL_ORDER: usize = 5;

/// Legendre polynomials `P_1..P_order` at `t` in [-1, 1]. They span the same
/// space as raw powers but stay well conditioned.
pub fn legendre(t: f64, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order);
    let (mut p0, mut p1) = (1.0, t);
    for k in 1..=order {
        out.push(p1);
        let next = ((2 * k + 1) as f64 * t * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = next;
    }
    out
}

fn flags(pair: &PairDirection, level: TreatmentLevel) -> &TreatmentFlags {
    match level {
        TreatmentLevel::Establishment => &pair.flags,
        TreatmentLevel::Firm => &pair.firm_flags,
    }
}

fn treatment_columns(degrees: Degrees) -> Vec<(&'static str, fn(&TreatmentFlags) -> bool)> {
    match degrees {
        Degrees::First => vec![("conflict", |f| f.conflict)],
        Degrees::Both => vec![("conflict", |f| f.conflict), ("partner_conflict", |f| f.partner_conflict)],
        Degrees::BuyerSupplier => vec![
            ("buyer_conflict", |f| f.buyer_conflict),
            ("supplier_conflict", |f| f.supplier_conflict),
            ("partner_buyer_conflict", |f| f.partner_buyer_conflict),
            ("partner_supplier_conflict", |f| f.partner_supplier_conflict),
        ],
    }
}

/// Pair-by-month sample with outcome, fixed effects, clusters and controls,
/// plus per-row treatment indicators and month indices.
struct PropagationSample {
    data: PanelDataset,
    treatments: Vec<(String, Vec<f64>)>,
    month: Vec<usize>,
    post: Vec<f64>,
}

fn build_sample(panel: &TradePanel, opts: &PropagationOptions) -> Result<PropagationSample, EstimationError> {
    let treatment = panel.treatment().ok_or(EstimationError::Invalid("treatment flags not assigned".into()))?;
    let months = panel.months();
    let n_provinces = panel.provinces().len() as u32;
    let pairs: Vec<usize> = panel
        .pairs()
        .iter()
        .enumerate()
        .filter(|(_, p)| opts.include_both_conflict || !p.both_conflict)
        .filter(|(_, p)| !opts.exclude_entrants || p.first_trade <= treatment.preconflict_end)
        .map(|(i, _)| i)
        .collect();
    if pairs.is_empty() {
        return Err(EstimationError::EmptySample);
    }
    let n = pairs.len() * months.len();
    let post_m: Vec<f64> = months.iter().map(|m| if *m >= opts.post_start { 1.0 } else { 0.0 }).collect();

    let mut outcome = Vec::with_capacity(n);
    let mut fe_pair = Vec::with_capacity(n);
    let mut fe_month = Vec::with_capacity(n);
    let mut cluster = Vec::with_capacity(n);
    let mut month = Vec::with_capacity(n);
    let mut post = Vec::with_capacity(n);
    for &p in &pairs {
        let pair = &panel.pairs()[p];
        let c = match opts.cluster {
            ClusterLevel::ProvincePair => pair.origin_province as u32 * n_provinces + pair.dest_province as u32,
            ClusterLevel::PairDirection => p as u32,
        };
        for (m, cell) in panel.cells_of(p).iter().enumerate() {
            outcome.push(opts.outcome.value(cell));
            fe_pair.push(p as u32);
            fe_month.push(m as u32);
            cluster.push(c);
            month.push(m);
            post.push(post_m[m]);
        }
    }

    let per_pair = |f: &dyn Fn(&PairDirection) -> f64| -> Vec<f64> {
        let mut col = Vec::with_capacity(n);
        for &p in &pairs {
            let v = f(&panel.pairs()[p]);
            col.extend(std::iter::repeat_n(v, months.len()));
        }
        col
    };
    let treatments: Vec<(String, Vec<f64>)> = treatment_columns(opts.degrees)
        .into_iter()
        .map(|(name, f)| (name.to_string(), per_pair(&|p| f(flags(p, opts.level)) as u8 as f64)))
        .collect();

    let times_post = |v: Vec<f64>| -> Vec<f64> { v.iter().zip(&post).map(|(a, b)| a * b).collect() };
    let mut controls: Vec<(String, Vec<f64>)> = Vec::new();
    if opts.partner_controls {
        controls.push(("origin_partners_x_post".into(), times_post(per_pair(&|p| p.origin_partners_pre as f64))));
        controls.push(("dest_partners_x_post".into(), times_post(per_pair(&|p| p.dest_partners_pre as f64))));
    }
    if let Some(dist) = &opts.distance {
        let lookup = |est: usize| -> Result<f64, EstimationError> {
            let rayon = &panel.establishments()[est].rayon_id;
            dist.get(rayon).copied().ok_or_else(|| EstimationError::Invalid(format!("no distance for rayon `{rayon}`")))
        };
        let max = dist.values().fold(0.0f64, |m, d| m.max(d.abs()));
        let scale = if max > 0.0 { max } else { 1.0 };
        for (side, pick) in [("sender", true), ("receiver", false)] {
            let mut polys: Vec<Vec<f64>> = vec![Vec::with_capacity(n); POLYNOMIAL_ORDER];
            for &p in &pairs {
                let pair = &panel.pairs()[p];
                let d = lookup(if pick { pair.origin } else { pair.dest })?;
                let basis = legendre(2.0 * d / scale - 1.0, POLYNOMIAL_ORDER);
                for (k, b) in basis.iter().enumerate() {
                    polys[k].extend(std::iter::repeat_n(*b, months.len()));
                }
            }
            for (k, col) in polys.into_iter().enumerate() {
                controls.push((format!("{side}_distance_p{}_x_post", k + 1), times_post(col)));
            }
        }
    }
    if opts.province_post {
        for (pi, name) in panel.provinces().iter().enumerate().skip(1) {
            let col = times_post(per_pair(&|p| (p.origin_province == pi) as u8 as f64));
            if col.iter().any(|v| *v != 0.0) {
                controls.push((format!("origin_province_{name}_x_post"), col));
            }
        }
    }

    let mut data = PanelDataset::new(outcome, cluster).with_fixed_effect("pair", fe_pair).with_fixed_effect("month", fe_month);
    data.regressors = controls;
    Ok(PropagationSample { data, treatments, month, post })
}

/// Pair-direction and month fixed-effects regression of trade on
/// treatment x Post interactions.
pub fn did_propagation(panel: &TradePanel, opts: &PropagationOptions) -> Result<RegressionResult, EstimationError> {
    let sample = build_sample(panel, opts)?;
    let mut data = sample.data;
    let controls = std::mem::take(&mut data.regressors);
    for (name, col) in sample.treatments {
        let col = col.iter().zip(&sample.post).map(|(a, b)| a * b).collect();
        data.regressors.push((format!("{name}_x_post"), col));
    }
    data.regressors.extend(controls);
    twoway_fe_ols(&data, &opts.estimation)
}

/// Quarterly event study: treatments interacted with quarter dummies,
/// `baseline` omitted.
pub fn event_study_propagation(
    panel: &TradePanel,
    opts: &PropagationOptions,
    baseline: YearQuarter,
) -> Result<EventStudy, EstimationError> {
    let sample = build_sample(panel, opts)?;
    let quarters: Vec<YearQuarter> = {
        let mut q: Vec<YearQuarter> = panel.months().iter().map(|m| YearQuarter::from(*m)).collect();
        q.dedup();
        q
    };
    let month_quarter: Vec<usize> = panel
        .months()
        .iter()
        .map(|m| quarters.binary_search(&YearQuarter::from(*m)).expect("quarter listed"))
        .collect();
    let base = quarters
        .binary_search(&baseline)
        .map_err(|_| EstimationError::MissingBaseline(baseline.to_string()))?;
    let period: Vec<usize> = sample.month.iter().map(|&m| month_quarter[m]).collect();
    let labels: Vec<String> = quarters.iter().map(|q| q.to_string()).collect();
    event_study(sample.data, &sample.treatments, &period, &labels, base, &opts.estimation)
}
