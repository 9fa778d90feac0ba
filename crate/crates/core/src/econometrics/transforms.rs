use nalgebra::{DMatrix, DVector};

use super::EstimationError;

/// Inverse hyperbolic sine, `ln(x + sqrt(x^2 + 1))`.
pub fn ihs(x: f64) -> f64 {
    x.asinh()
}

/// `ln(1 + x)` for `x >= 0`.
pub fn log1p(x: f64) -> Result<f64, EstimationError> {
    if x < 0.0 || x.is_nan() {
        return Err(EstimationError::NegativeLog(x));
    }
    Ok(x.ln_1p())
}

/// Share of the total conflict effect missed by a first-degree-only
/// estimate: `1 - (b_naive n1) / (b1 n1 + b2 n2)`, where `n1`, `n2` are the
/// shares of links with first- and second-degree exposure.
pub fn underestimation_share(
    beta_naive: f64,
    beta1: f64,
    beta2: f64,
    n1: f64,
    n2: f64,
) -> Result<f64, EstimationError> {
    for s in [n1, n2] {
        if !(0.0..=1.0).contains(&s) {
            return Err(EstimationError::InvalidShare(s));
        }
    }
    let total = beta1 * n1 + beta2 * n2;
    if total == 0.0 || !total.is_finite() {
        return Err(EstimationError::ZeroTotal);
    }
    Ok(1.0 - beta_naive * n1 / total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residualized {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Residuals rescaled to unit sample standard deviation.
    pub standardized: Vec<f64>,
}

/// OLS residuals of `y` on an intercept and `characteristics`.
pub fn residualize(y: &[f64], characteristics: &[(String, Vec<f64>)]) -> Result<Residualized, EstimationError> {
    let n = y.len();
    let k = characteristics.len() + 1;
    if n <= k {
        return Err(EstimationError::Invalid(format!("{n} observations for {k} parameters")));
    }
    let mut x = DMatrix::from_element(n, k, 1.0);
    for (j, (name, col)) in characteristics.iter().enumerate() {
        if col.len() != n {
            return Err(EstimationError::Invalid(format!("{name} has {} rows, expected {n}", col.len())));
        }
        x.set_column(j + 1, &DVector::from_column_slice(col));
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank_tol = smax * n.max(k) as f64 * f64::EPSILON * 16.0;
    if svd.singular_values.iter().any(|s| *s <= rank_tol) {
        let xtx = x.transpose() * &x;
        let mut bad = Vec::new();
        // Name the columns whose removal restores full rank.
        for j in 1..k {
            let keep: Vec<usize> = (0..k).filter(|&c| c != j).collect();
            let sub = xtx.select_rows(&keep).select_columns(&keep);
            if sub.clone().svd(false, false).singular_values.min() > rank_tol * rank_tol {
                bad.push(characteristics[j - 1].0.clone());
            }
        }
        if bad.is_empty() {
            bad = characteristics.iter().map(|(n, _)| n.clone()).collect();
        }
        return Err(EstimationError::Collinear(bad));
    }
    let yv = DVector::from_column_slice(y);
    let beta = svd.solve(&yv, rank_tol).map_err(|e| EstimationError::Invalid(e.to_string()))?;
    let resid = &yv - &x * &beta;
    let residuals: Vec<f64> = resid.iter().copied().collect();
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let sd = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(EstimationError::Collinear(vec!["outcome".into()]));
    }
    Ok(Residualized {
        coefficients: beta.iter().copied().collect(),
        standardized: residuals.iter().map(|r| (r - mean) / sd).collect(),
        residuals,
    })
}

/// One firm-year of revenue and labor cost.
#[derive(Debug, Clone, PartialEq)]
pub struct LaborCostRecord {
    pub firm_id: String,
    pub year: i32,
    pub revenue: f64,
    pub labor_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// Within-firm elasticity of labor cost to revenue.
    pub slope: f64,
    pub n_used: usize,
    /// Rows dropped for non-positive revenue or labor cost.
    pub n_excluded: usize,
}

/// Labor share from `ln(labor cost) = a_i + b ln(revenue)`: the slope is the
/// within-firm elasticity and `exp(mean(ln l) - b mean(ln r))` the share.
pub fn estimate_alpha(records: &[LaborCostRecord], years: &[i32]) -> Result<AlphaEstimate, EstimationError> {
    let in_years: Vec<&LaborCostRecord> =
        records.iter().filter(|r| years.is_empty() || years.contains(&r.year)).collect();
    let used: Vec<&&LaborCostRecord> = in_years.iter().filter(|r| r.revenue > 0.0 && r.labor_cost > 0.0).collect();
    let n_excluded = in_years.len() - used.len();
    if used.is_empty() {
        return Err(EstimationError::EmptySample);
    }
    let x: Vec<f64> = used.iter().map(|r| r.revenue.ln()).collect();
    let y: Vec<f64> = used.iter().map(|r| r.labor_cost.ln()).collect();
    let mut firm_ids = std::collections::BTreeMap::new();
    let firm: Vec<usize> = used
        .iter()
        .map(|r| {
            let next = firm_ids.len();
            *firm_ids.entry(r.firm_id.as_str()).or_insert(next)
        })
        .collect();
    let g = firm_ids.len();
    let mut sx = vec![0.0; g];
    let mut sy = vec![0.0; g];
    let mut cnt = vec![0.0; g];
    for i in 0..x.len() {
        sx[firm[i]] += x[i];
        sy[firm[i]] += y[i];
        cnt[firm[i]] += 1.0;
    }
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..x.len() {
        let dx = x[i] - sx[firm[i]] / cnt[firm[i]];
        let dy = y[i] - sy[firm[i]] / cnt[firm[i]];
        sxx += dx * dx;
        sxy += dx * dy;
    }
    // Without within-firm revenue variation the elasticity is taken as one.
    let slope = if sxx > 0.0 { sxy / sxx } else { 1.0 };
    let n = x.len() as f64;
    let xbar = x.iter().sum::<f64>() / n;
    let ybar = y.iter().sum::<f64>() / n;
    Ok(AlphaEstimate { alpha: (ybar - slope * xbar).exp(), slope, n_used: used.len(), n_excluded })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ihs_fixtures() {
        assert_eq!(ihs(0.0), 0.0);
        assert_eq!(ihs(-3.5), -ihs(3.5));
        let direct = (10.0f64 + (101.0f64).sqrt()).ln();
        assert!((ihs(10.0) - direct).abs() < 1e-14);
        assert!((ihs(10.0) - 2.998_223).abs() < 1e-6);
    }

    #[test]
    fn log1p_rejects_negative() {
        assert_eq!(log1p(0.0).unwrap(), 0.0);
        assert!(matches!(log1p(-1.0), Err(EstimationError::NegativeLog(_))));
    }

    #[test]
    fn underestimation_fixtures() {
        assert_eq!(underestimation_share(-0.1, -0.1, 0.0, 0.3, 0.5).unwrap(), 0.0);
        let a = underestimation_share(-0.114, -0.131, -0.025, 0.105, 0.625).unwrap();
        let b = underestimation_share(-0.228, -0.262, -0.05, 0.105, 0.625).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!((a - 0.593).abs() < 5e-4);
        assert!(matches!(underestimation_share(-0.1, 0.0, 0.0, 0.3, 0.5), Err(EstimationError::ZeroTotal)));
        assert!(underestimation_share(-0.1, -0.1, 0.0, 1.3, 0.5).is_err());
    }

    #[test]
    fn residualize_orthogonality() {
        let y = vec![1.0, 3.0, 2.0, 5.0, 4.0, 7.0];
        let c1 = vec![0.5, 1.0, 0.0, 2.0, 1.0, 3.0];
        let c2 = vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        let r = residualize(&y, &[("c1".into(), c1.clone()), ("c2".into(), c2.clone())]).unwrap();
        let mean = r.residuals.iter().sum::<f64>() / 6.0;
        assert!(mean.abs() < 1e-12);
        for c in [&c1, &c2] {
            let dot: f64 = r.residuals.iter().zip(c).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-12);
        }
    }

    #[test]
    fn residualize_orthogonal_characteristic_centres() {
        // c has zero covariance with y, so residuals are y minus its mean.
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let c = vec![1.0, -1.0, -1.0, 1.0];
        let r = residualize(&y, &[("c".into(), c)]).unwrap();
        for (res, v) in r.residuals.iter().zip(&y) {
            assert!((res - (v - 2.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn residualize_names_collinear_column() {
        let y = vec![1.0, 2.0, 4.0, 3.0, 5.0];
        let a = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v + 1.0).collect();
        let c = vec![0.0, 1.0, 0.0, 1.0, 1.0];
        match residualize(&y, &[("a".into(), a), ("b".into(), b), ("c".into(), c)]) {
            Err(EstimationError::Collinear(cols)) => assert_eq!(cols, vec!["a".to_string(), "b".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn labor(alpha: f64) -> Vec<LaborCostRecord> {
        let mut out = Vec::new();
        for f in 0..5 {
            for (t, year) in [2013, 2014, 2015].into_iter().enumerate() {
                let revenue = 10.0 * (f + 1) as f64 * (1.0 + 0.3 * t as f64);
                out.push(LaborCostRecord { firm_id: format!("f{f}"), year, revenue, labor_cost: alpha * revenue });
            }
        }
        out
    }

    #[test]
    fn alpha_from_exact_first_order_condition() {
        let e = estimate_alpha(&labor(0.18), &[2013, 2014, 2015]).unwrap();
        assert!((e.alpha - 0.18).abs() < 1e-9);
        assert!((e.slope - 1.0).abs() < 1e-12);
        let e = estimate_alpha(&labor(1.0), &[]).unwrap();
        assert!((e.alpha - 1.0).abs() < 1e-9);
        let mut rows = labor(0.18);
        rows[0].labor_cost = 0.0;
        let e = estimate_alpha(&rows, &[]).unwrap();
        assert_eq!(e.n_excluded, 1);
    }
}
