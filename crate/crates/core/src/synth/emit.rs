use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::economy::SyntheticEconomy;
use super::rng;
use crate::ingest::{AccountingRecord, TransactionRecord};
use crate::time::YearMonth;

/// Data-generating values for one emitted link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTruth {
    pub supplier: usize,
    pub buyer: usize,
    pub base_prob: f64,
    pub first_degree: bool,
    /// Realized from preconflict shipments of the endpoints.
    pub second_degree: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionTruth {
    pub months: Vec<YearMonth>,
    pub month_effects: Vec<f64>,
    pub post_start: YearMonth,
    pub beta1: f64,
    pub beta2: f64,
    pub links: Vec<LinkTruth>,
}

impl EmissionTruth {
    /// Shipping probability of `link` in month index `m`.
    pub fn probability(&self, link: &LinkTruth, m: usize) -> f64 {
        let mut q = link.base_prob + self.month_effects[m];
        if self.months[m] >= self.post_start {
            if link.first_degree {
                q += self.beta1;
            }
            if link.second_degree {
                q += self.beta2;
            }
        }
        q.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Sorted by date, sender, receiver.
    pub transactions: Vec<TransactionRecord>,
    pub accounting: Vec<AccountingRecord>,
    pub truth: EmissionTruth,
}

fn months(first: YearMonth, last: YearMonth) -> Vec<YearMonth> {
    let mut out = vec![first];
    while *out.last().unwrap() < last {
        out.push(out.last().unwrap().next());
    }
    out
}

/// Monthly shipments over the economy's links and yearly accounting rows.
///
/// Links between two conflict-area firms are not emitted. Reported sales
/// equal equilibrium revenue times log-normal noise; profits are a uniform
/// margin in [-5%, 15%] of sales and costs the remainder.
pub fn emit_transactions(economy: &SyntheticEconomy) -> SyntheticData {
    let cfg = &economy.config.emission;
    let mut rng = rng(economy.config.seed, 1);
    let months = months(cfg.first_month, cfg.last_month);
    let month_effects: Vec<f64> = months
        .iter()
        .map(|_| if cfg.month_effect > 0.0 { rng.random_range(-cfg.month_effect..=cfg.month_effect) } else { 0.0 })
        .collect();
    let n_pre = months.iter().filter(|m| **m < cfg.post_start).count();
    let conflict = economy.conflict_mask();

    let emitted: Vec<(usize, usize)> =
        economy.links.iter().copied().filter(|&(i, j)| !(conflict[i] && conflict[j])).collect();
    let volume: Vec<f64> = emitted.iter().map(|&(i, j)| (economy.io.weight(i, j) * economy.revenues[j]).ln()).collect();
    let (lo, hi) = volume.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let base: Vec<f64> = volume
        .iter()
        .map(|v| {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            cfg.base_prob_min + t * (cfg.base_prob_max - cfg.base_prob_min)
        })
        .collect();
    let mut links: Vec<LinkTruth> = emitted
        .iter()
        .zip(&base)
        .map(|(&(i, j), &b)| LinkTruth {
            supplier: i,
            buyer: j,
            base_prob: b,
            first_degree: conflict[i] || conflict[j],
            second_degree: false,
        })
        .collect();

    let poisson = (cfg.extra_shipments > 0.0).then(|| Poisson::new(cfg.extra_shipments).expect("positive rate"));
    let mut counts = vec![0u32; links.len() * months.len()];
    let draw = |rng: &mut rand_chacha::ChaCha8Rng, q: f64| -> u32 {
        if rng.random::<f64>() < q {
            1 + poisson.as_ref().map_or(0, |p| p.sample(rng) as u32)
        } else {
            0
        }
    };
    for l in 0..links.len() {
        for m in 0..n_pre {
            let q = (links[l].base_prob + month_effects[m]).clamp(0.0, 1.0);
            counts[l * months.len() + m] = draw(&mut rng, q);
        }
    }

    // Second-degree exposure: an endpoint shipped to or from a conflict firm before the conflict.
    let mut exposed = vec![false; conflict.len()];
    for (l, link) in links.iter().enumerate() {
        if counts[l * months.len()..l * months.len() + n_pre].iter().any(|c| *c > 0) {
            if conflict[link.buyer] {
                exposed[link.supplier] = true;
            }
            if conflict[link.supplier] {
                exposed[link.buyer] = true;
            }
        }
    }
    for link in &mut links {
        link.second_degree = !link.first_degree && (exposed[link.supplier] || exposed[link.buyer]);
    }
    let truth = EmissionTruth {
        months: months.clone(),
        month_effects,
        post_start: cfg.post_start,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        links,
    };
    for l in 0..truth.links.len() {
        for m in n_pre..months.len() {
            counts[l * months.len() + m] = draw(&mut rng, truth.probability(&truth.links[l], m));
        }
    }

    if cfg.guarantee_support {
        let years: Vec<i32> = months.iter().map(|m| m.year).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        for year in years {
            let idx: Vec<usize> = (0..months.len()).filter(|&m| months[m].year == year).collect();
            if idx.len() != 12 || idx.iter().any(|&m| months[m] >= cfg.post_start) {
                continue;
            }
            for l in 0..truth.links.len() {
                if idx.iter().all(|&m| counts[l * months.len() + m] == 0) {
                    let m = idx[rng.random_range(0..idx.len())];
                    counts[l * months.len() + m] = 1;
                }
            }
        }
    }

    let per_year_shipments = 12.0 * (1.0 + cfg.extra_shipments);
    let mut transactions = Vec::new();
    for (l, link) in truth.links.iter().enumerate() {
        let (i, j) = (link.supplier, link.buyer);
        let kg = (cfg.kg_scale * economy.io.weight(i, j) / (per_year_shipments * link.base_prob)).round().max(1.0) as u64;
        let (si, sj) = (&economy.firms[i], &economy.firms[j]);
        for (m, ym) in months.iter().enumerate() {
            for _ in 0..counts[l * months.len() + m] {
                let day = rng.random_range(1..=28);
                transactions.push(TransactionRecord {
                    date: NaiveDate::from_ymd_opt(ym.year, ym.month, day).expect("valid day"),
                    sender_firm_id: si.firm_id.clone(),
                    receiver_firm_id: sj.firm_id.clone(),
                    sender_rayon_id: si.rayon_id.clone(),
                    receiver_rayon_id: sj.rayon_id.clone(),
                    weight_kg: kg,
                });
            }
        }
    }
    transactions.sort();

    let mut acc_rng = super::rng(economy.config.seed, 2);
    let noise = Normal::new(0.0, cfg.sales_noise).expect("finite noise");
    let mut accounting = Vec::new();
    for (f, firm) in economy.firms.iter().enumerate() {
        for year in cfg.first_month.year..=cfg.last_month.year {
            let sales = economy.revenues[f] * noise.sample(&mut acc_rng).exp();
            let margin = acc_rng.random_range(-0.05..0.15);
            let profits = margin * sales;
            accounting.push(AccountingRecord {
                firm_id: firm.firm_id.clone(),
                year,
                sales,
                profits,
                total_costs: sales - profits,
            });
        }
    }
    SyntheticData { transactions, accounting, truth }
}
