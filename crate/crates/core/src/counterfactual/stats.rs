use super::CounterfactualError;

/// Summary statistics of a revenue distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionStats {
    pub n: usize,
    pub p25: f64,
    pub p40: f64,
    pub median: f64,
    pub p60: f64,
    pub p75: f64,
    pub mean: f64,
}

/// Statistic names in report order.
pub const STAT_NAMES: [&str; 6] = ["p25", "p40", "median", "p60", "p75", "mean"];

impl DistributionStats {
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "p25" => self.p25,
            "p40" => self.p40,
            "median" => self.median,
            "p60" => self.p60,
            "p75" => self.p75,
            "mean" => self.mean,
            _ => return None,
        })
    }

    pub fn values(&self) -> [f64; 6] {
        [self.p25, self.p40, self.median, self.p60, self.p75, self.mean]
    }

    /// `stat / baseline_stat - 1` for every statistic, in [`STAT_NAMES`] order.
    pub fn relative_to(&self, baseline: &DistributionStats) -> [f64; 6] {
        let b = baseline.values();
        let mut out = self.values();
        for (o, b) in out.iter_mut().zip(b) {
            *o = *o / b - 1.0;
        }
        out
    }
}

/// Linearly interpolated quantile of sorted data (R type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Statistics over the entries of `revenues` selected by `sample`
/// (all entries when `None`).
pub fn distribution_stats(revenues: &[f64], sample: Option<&[bool]>) -> Result<DistributionStats, CounterfactualError> {
    let mut v: Vec<f64> = match sample {
        Some(mask) => revenues.iter().zip(mask).filter(|(_, &keep)| keep).map(|(r, _)| *r).collect(),
        None => revenues.to_vec(),
    };
    if v.is_empty() {
        return Err(CounterfactualError::EmptySample);
    }
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    Ok(DistributionStats {
        n: v.len(),
        p25: quantile_sorted(&v, 0.25),
        p40: quantile_sorted(&v, 0.40),
        median: quantile_sorted(&v, 0.5),
        p60: quantile_sorted(&v, 0.60),
        p75: quantile_sorted(&v, 0.75),
        mean,
    })
}

/// Share of the destruction-induced decline recovered under adjustment:
/// `(d_dest - d_adj) / d_dest` with `d_s = 1 - stat_s / baseline`.
pub fn compensation_share(baseline: f64, destruction: f64, adjustment: f64) -> Result<f64, CounterfactualError> {
    compensation_share_from_declines(1.0 - destruction / baseline, 1.0 - adjustment / baseline)
}

/// Same share from relative declines expressed as positive fractions.
pub fn compensation_share_from_declines(destruction: f64, adjustment: f64) -> Result<f64, CounterfactualError> {
    if !(destruction > 0.0) || !destruction.is_finite() {
        return Err(CounterfactualError::NoDestructionDecline(destruction));
    }
    Ok((destruction - adjustment) / destruction)
}
