use std::io::Write;

use super::{DistributionStats, RegionAggregation, ScenarioReport, STAT_NAMES};

pub const SCENARIO_REPORT_HEADER: &str = "scenario,stat,value,relative_to_baseline";

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// One row per scenario and statistic, then compensation shares when the
/// destruction and adjustment scenarios are present.
pub fn write_scenario_report<W: Write>(mut w: W, report: &ScenarioReport) -> std::io::Result<()> {
    writeln!(w, "{SCENARIO_REPORT_HEADER}")?;
    let baseline = report.baseline().map(|b| b.stats);
    for r in &report.results {
        let values = r.stats.values();
        let rel = baseline.map(|b| r.stats.relative_to(&b));
        for (k, name) in STAT_NAMES.iter().enumerate() {
            let rel = rel.map(|x| fmt(x[k])).unwrap_or_default();
            writeln!(w, "{},{},{},{}", r.scenario.kind.name(), name, fmt(values[k]), rel)?;
        }
    }
    for name in STAT_NAMES {
        if let Some(Ok(share)) = report.compensation_share(name) {
            writeln!(w, "compensation_share,{},{},", name, fmt(share))?;
        }
    }
    Ok(())
}

/// Dynamics path in the scenario report layout, one scenario label per year.
pub fn write_dynamics_report<W: Write>(mut w: W, path: &[(i32, DistributionStats)]) -> std::io::Result<()> {
    writeln!(w, "{SCENARIO_REPORT_HEADER}")?;
    let first = path.first().map(|p| p.1);
    for (year, stats) in path {
        let rel = first.map(|b| stats.relative_to(&b));
        for (k, name) in STAT_NAMES.iter().enumerate() {
            let rel = rel.map(|x| fmt(x[k])).unwrap_or_default();
            writeln!(w, "adjustment_{},{},{},{}", year, name, fmt(stats.values()[k]), rel)?;
        }
    }
    Ok(())
}

pub fn write_region_report<W: Write>(mut w: W, agg: &RegionAggregation) -> std::io::Result<()> {
    writeln!(w, "region_id,year,observed,counterfactual,relative")?;
    for r in &agg.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.region_id,
            r.year,
            fmt(r.observed),
            r.counterfactual.map(fmt).unwrap_or_default(),
            r.relative.map(fmt).unwrap_or_default()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterfactual::{distribution_stats, Scenario, ScenarioKind, ScenarioResult};
    use crate::leontief::{DemandVector, RevenueVector};

    fn result(kind: ScenarioKind, median: f64) -> ScenarioResult {
        ScenarioResult {
            scenario: Scenario::preset(kind, 2013, 2014),
            revenues: RevenueVector { year: 2013, values: vec![median] },
            demand: DemandVector::new(2013, vec![median]),
            iterations: 1,
            stats: distribution_stats(&[median], None).unwrap(),
        }
    }

    #[test]
    fn scenario_report_layout() {
        let report = ScenarioReport {
            results: vec![
                result(ScenarioKind::Baseline, 2.0),
                result(ScenarioKind::Destruction, 1.0),
                result(ScenarioKind::Adjustment, 1.5),
            ],
        };
        let mut buf = Vec::new();
        write_scenario_report(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SCENARIO_REPORT_HEADER);
        assert_eq!(lines.len(), 1 + 3 * 6 + 6);
        assert!(lines.contains(&"destruction,median,1.000000000000e0,-5.000000000000e-1"));
        assert!(lines.contains(&"compensation_share,median,5.000000000000e-1,"));
    }
}
