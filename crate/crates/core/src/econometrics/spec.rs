use std::io::Write;

use super::centrality::{CentralityDidOptions, FirmOutcome, Timing};
use super::event::EventStudy;
use super::propagation::{ClusterLevel, Degrees, PropagationOptions, TreatmentLevel};
use super::twfe::{EstimationOptions, RegressionResult};
use crate::config::{ConfigError, KeyValues};
use crate::graph::{CentralityKind, Transform};
use crate::ingest::TradeOutcome;
use crate::time::{YearMonth, YearQuarter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Propagation,
    Centrality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralitySpec {
    pub kind: CentralityKind,
    pub transform: Transform,
    pub timing: Timing,
    pub residualize: bool,
    pub options: CentralityDidOptions,
}

/// Parsed estimation spec. Distance values are referenced by file and loaded
/// by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSpec {
    pub model: ModelKind,
    pub propagation: PropagationOptions,
    pub distance_file: Option<String>,
    pub event_study: bool,
    pub baseline_quarter: YearQuarter,
    pub centrality: CentralitySpec,
}

pub const SPEC_KEYS: &[&str] = &[
    "model",
    "outcome",
    "degrees",
    "treatment_level",
    "post_start",
    "partner_controls",
    "distance_file",
    "province_post",
    "include_both_conflict",
    "exclude_entrants",
    "cluster",
    "event_study",
    "baseline_quarter",
    "centrality",
    "transform",
    "timing",
    "base_year",
    "post_year",
    "residualize",
    "demean_tol",
    "demean_max_iter",
    "drop_singletons",
];

/// Named presets, each a set of spec keys.
pub const PRESETS: &[(&str, &str)] = &[
    ("propagation-first-degree", "model = propagation\ndegrees = first"),
    ("propagation-both-degrees", "model = propagation\ndegrees = both"),
    ("propagation-buyer-supplier", "model = propagation\ndegrees = buyer_supplier"),
    ("propagation-firm-level", "model = propagation\ndegrees = both\ntreatment_level = firm"),
    ("propagation-partner-counts", "model = propagation\ndegrees = both\npartner_controls = true"),
    ("propagation-distance", "model = propagation\ndegrees = both\ndistance_file = distance.csv"),
    ("propagation-province-post", "model = propagation\ndegrees = both\nprovince_post = true"),
    ("propagation-event-study", "model = propagation\ndegrees = both\nevent_study = true"),
    ("centrality-sales", "model = centrality\noutcome = log_sales\ntiming = pre_post"),
    ("centrality-yearly", "model = centrality\noutcome = log_sales\ntiming = yearly"),
    ("centrality-profits", "model = centrality\noutcome = ihs_profits\ntiming = yearly"),
    ("centrality-margin", "model = centrality\noutcome = ihs_profits_minus_costs\ntiming = yearly"),
    ("centrality-joint", "model = centrality\noutcome = log_sales\ntiming = joint"),
    ("centrality-residualized", "model = centrality\noutcome = log_sales\ntiming = yearly\nresidualize = true"),
];

pub fn preset(name: &str) -> Option<KeyValues> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| KeyValues::parse(text).expect("valid preset"))
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::Invalid { key: key.into(), value: value.into(), reason: reason.into() }
}

fn parse_with<T>(kv: &KeyValues, key: &str, default: T, f: impl Fn(&str) -> Option<T>, expected: &str) -> Result<T, ConfigError> {
    match kv.get_str(key) {
        None => Ok(default),
        Some(v) => f(v).ok_or_else(|| invalid(key, v, expected)),
    }
}

impl EstimationSpec {
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, ConfigError> {
        kv.check_known(SPEC_KEYS)?;
        let model = parse_with(
            kv,
            "model",
            ModelKind::Propagation,
            |s| match s {
                "propagation" => Some(ModelKind::Propagation),
                "centrality" => Some(ModelKind::Centrality),
                _ => None,
            },
            "propagation or centrality",
        )?;
        let d = EstimationOptions::default();
        let estimation = EstimationOptions {
            demean_tol: kv.get_or("demean_tol", d.demean_tol)?,
            demean_max_iter: kv.get_or("demean_max_iter", d.demean_max_iter)?,
            drop_singletons: kv.get_bool("drop_singletons")?.unwrap_or(d.drop_singletons),
        };
        let pd = PropagationOptions::default();
        let flag = |key: &str| -> Result<bool, ConfigError> { Ok(kv.get_bool(key)?.unwrap_or(false)) };
        let propagation_outcome = if model == ModelKind::Propagation {
            parse_with(kv, "outcome", pd.outcome, TradeOutcome::parse, "any_shipment, log_shipments or log_weight")?
        } else {
            pd.outcome
        };
        let propagation = PropagationOptions {
            outcome: propagation_outcome,
            degrees: parse_with(kv, "degrees", pd.degrees, Degrees::parse, "first, both or buyer_supplier")?,
            level: parse_with(
                kv,
                "treatment_level",
                pd.level,
                |s| match s {
                    "establishment" => Some(TreatmentLevel::Establishment),
                    "firm" => Some(TreatmentLevel::Firm),
                    _ => None,
                },
                "establishment or firm",
            )?,
            post_start: parse_with(kv, "post_start", pd.post_start, |s| s.parse::<YearMonth>().ok(), "YYYY-MM")?,
            partner_controls: flag("partner_controls")?,
            distance: None,
            province_post: flag("province_post")?,
            include_both_conflict: flag("include_both_conflict")?,
            exclude_entrants: flag("exclude_entrants")?,
            cluster: parse_with(
                kv,
                "cluster",
                pd.cluster,
                |s| match s {
                    "province_pair" => Some(ClusterLevel::ProvincePair),
                    "pair" => Some(ClusterLevel::PairDirection),
                    _ => None,
                },
                "province_pair or pair",
            )?,
            estimation,
        };
        let cd = CentralityDidOptions::default();
        let centrality_outcome = if model == ModelKind::Centrality {
            parse_with(kv, "outcome", cd.outcome, FirmOutcome::parse, "log_sales, ihs_profits or ihs_profits_minus_costs")?
        } else {
            cd.outcome
        };
        let kind = parse_with(kv, "centrality", CentralityKind::Eigenvector, CentralityKind::parse, "eigenvector, betweenness or degree")?;
        let default_transform = if kind == CentralityKind::Betweenness { Transform::Log1p } else { Transform::Identity };
        let centrality = CentralitySpec {
            kind,
            transform: parse_with(
                kv,
                "transform",
                default_transform,
                |s| match s {
                    "identity" => Some(Transform::Identity),
                    "log1p" => Some(Transform::Log1p),
                    _ => None,
                },
                "identity or log1p",
            )?,
            timing: parse_with(kv, "timing", Timing::PrePost, Timing::parse, "pre_post, yearly or joint")?,
            residualize: flag("residualize")?,
            options: CentralityDidOptions {
                outcome: centrality_outcome,
                base_year: kv.get_or("base_year", cd.base_year)?,
                post_year: kv.get_or("post_year", cd.post_year)?,
                estimation,
            },
        };
        Ok(EstimationSpec {
            model,
            propagation,
            distance_file: kv.get_str("distance_file").map(str::to_string),
            event_study: flag("event_study")?,
            baseline_quarter: parse_with(
                kv,
                "baseline_quarter",
                YearQuarter { year: 2013, quarter: 4 },
                |s| s.parse().ok(),
                "YYYYQn",
            )?,
            centrality,
        })
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// `term,estimate,se,stars`.
pub fn write_results<W: Write>(mut w: W, result: &RegressionResult) -> std::io::Result<()> {
    writeln!(w, "term,estimate,se,stars")?;
    for (k, term) in result.terms.iter().enumerate() {
        writeln!(w, "{},{},{},{}", term, fmt(result.coefficients[k]), fmt(result.std_errors[k]), result.stars(k))?;
    }
    Ok(())
}

/// Event-study coefficients in the results layout; the baseline period is
/// written as an exact zero without stars.
pub fn write_event_study<W: Write>(mut w: W, study: &EventStudy) -> std::io::Result<()> {
    writeln!(w, "term,estimate,se,stars")?;
    let reg = &study.regression;
    for s in &study.series {
        for p in &s.points {
            let term = format!("{}_x_{}", s.treatment, p.period);
            let stars = reg.index(&term).map(|k| reg.stars(k)).unwrap_or("");
            writeln!(w, "{},{},{},{}", term, fmt(p.estimate), fmt(p.se), stars)?;
        }
    }
    for (k, term) in reg.terms.iter().enumerate() {
        if !study.series.iter().any(|s| term.starts_with(&format!("{}_x_", s.treatment))) {
            writeln!(w, "{},{},{},{}", term, fmt(reg.coefficients[k]), fmt(reg.std_errors[k]), reg.stars(k))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            let spec = EstimationSpec::from_key_values(&preset(name).unwrap()).unwrap();
            assert_eq!(spec.model == ModelKind::Centrality, name.starts_with("centrality"));
        }
        let spec = EstimationSpec::from_key_values(&preset("propagation-first-degree").unwrap()).unwrap();
        assert_eq!(spec.propagation.degrees, Degrees::First);
        assert_eq!(spec.propagation.post_start, YearMonth::new(2014, 3));
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(EstimationSpec::from_key_values(&KeyValues::parse("degrees = third").unwrap()).is_err());
        assert!(EstimationSpec::from_key_values(&KeyValues::parse("colour = red").unwrap()).is_err());
        let kv = KeyValues::parse("model = centrality\noutcome = log_sales\ncentrality = betweenness").unwrap();
        let spec = EstimationSpec::from_key_values(&kv).unwrap();
        assert_eq!(spec.centrality.transform, Transform::Log1p);
    }
}
