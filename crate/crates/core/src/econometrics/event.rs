use super::dataset::PanelDataset;
use super::twfe::{twoway_fe_ols, EstimationOptions, RegressionResult};
use super::EstimationError;

#[derive(Debug, Clone, PartialEq)]
pub struct EventPoint {
    pub period: String,
    pub estimate: f64,
    pub se: f64,
}

/// Coefficients of one treatment indicator across periods, baseline included as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    pub treatment: String,
    pub points: Vec<EventPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStudy {
    pub baseline: String,
    pub series: Vec<EventSeries>,
    pub regression: RegressionResult,
}

impl EventStudy {
    pub fn series(&self, treatment: &str) -> Option<&EventSeries> {
        self.series.iter().find(|s| s.treatment == treatment)
    }
}

/// Interacts each treatment with period dummies, omitting `baseline`, and
/// adds the interactions to `base` (which carries outcome, controls, fixed
/// effects and clusters).
///
/// `period` gives each row's index into `labels`.
pub fn event_study(
    base: PanelDataset,
    treatments: &[(String, Vec<f64>)],
    period: &[usize],
    labels: &[String],
    baseline: usize,
    opts: &EstimationOptions,
) -> Result<EventStudy, EstimationError> {
    if baseline >= labels.len() || !period.contains(&baseline) {
        return Err(EstimationError::MissingBaseline(labels.get(baseline).cloned().unwrap_or_default()));
    }
    let mut data = base;
    let mut names = Vec::new();
    for (t, values) in treatments {
        for (q, label) in labels.iter().enumerate() {
            if q == baseline {
                continue;
            }
            let name = format!("{t}_x_{label}");
            let col = values.iter().zip(period).map(|(v, &p)| if p == q { *v } else { 0.0 }).collect();
            data.regressors.push((name.clone(), col));
            names.push((t.clone(), q, name));
        }
    }
    let regression = twoway_fe_ols(&data, opts)?;
    let series = treatments
        .iter()
        .map(|(t, _)| EventSeries {
            treatment: t.clone(),
            points: labels
                .iter()
                .enumerate()
                .map(|(q, label)| {
                    let (estimate, se) = if q == baseline {
                        (0.0, 0.0)
                    } else {
                        let name = &names.iter().find(|(tt, qq, _)| tt == t && *qq == q).expect("term").2;
                        regression.get(name).expect("term estimated")
                    };
                    EventPoint { period: label.clone(), estimate, se }
                })
                .collect(),
        })
        .collect();
    Ok(EventStudy { baseline: labels[baseline].clone(), series, regression })
}
