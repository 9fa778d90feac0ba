use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{SyntheticEconomyConfig, Topology};
use super::rng;
use crate::ingest::FirmRecord;
use crate::leontief::{backout_demand, solve_revenue, CsrMatrix, EconomyConfig, IOMatrix};

/// Cobb-Douglas-limit primitives consistent with the revenue system.
///
/// Production is `x_i = (z_i l_i)^alpha M_i^(1-alpha)` with
/// `M_i = prod_j (x_ji / a_ji)^a_ji`, the consumer has
/// `u = (sum c_i^eta)^(1/eta)` and the wage is the numeraire.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralPrimitives {
    pub sigma: f64,
    pub eta: f64,
    pub wage: f64,
    pub total_labor: f64,
    pub productivity: Vec<f64>,
    pub labor: Vec<f64>,
    pub prices: Vec<f64>,
    pub output: Vec<f64>,
    pub consumption: Vec<f64>,
    /// `M_i`.
    pub input_bundle: Vec<f64>,
    /// `(supplier j, buyer i, a_ji, x_ji)`.
    pub inputs: Vec<(usize, usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEconomy {
    pub config: SyntheticEconomyConfig,
    pub firms: Vec<FirmRecord>,
    /// Directed supplier -> buyer links, sorted.
    pub links: Vec<(usize, usize)>,
    pub io: IOMatrix,
    pub demand: Vec<f64>,
    pub revenues: Vec<f64>,
    pub primitives: StructuralPrimitives,
}

impl SyntheticEconomy {
    pub fn conflict_mask(&self) -> Vec<bool> {
        self.firms.iter().map(|f| f.conflict_flag).collect()
    }

    pub fn firm_ids(&self) -> &Arc<Vec<String>> {
        self.io.firms()
    }
}

pub fn firm_id(i: usize) -> String {
    format!("F{i:06}")
}

pub fn rayon_id(province: usize, rayon: usize) -> String {
    format!("R{province:02}{rayon:02}")
}

pub fn province_id(province: usize) -> String {
    format!("P{province:02}")
}

fn draw_geography(cfg: &SyntheticEconomyConfig, rng: &mut ChaCha8Rng) -> Vec<FirmRecord> {
    let mut firms: Vec<FirmRecord> = (0..cfg.n_firms)
        .map(|i| {
            let p = rng.random_range(0..cfg.n_provinces);
            let r = rng.random_range(0..cfg.rayons_per_province);
            FirmRecord {
                firm_id: firm_id(i),
                rayon_id: rayon_id(p, r),
                province_id: province_id(p),
                conflict_flag: p < cfg.conflict_provinces,
            }
        })
        .collect();
    // Keep both areas populated when requested.
    let set = |f: &mut FirmRecord, p: usize| {
        f.rayon_id = rayon_id(p, 0);
        f.province_id = province_id(p);
        f.conflict_flag = p < cfg.conflict_provinces;
    };
    if cfg.conflict_provinces > 0 && !firms.iter().any(|f| f.conflict_flag) {
        set(&mut firms[0], 0);
    }
    if !firms.iter().any(|f| !f.conflict_flag) {
        set(&mut firms[cfg.n_firms - 1], cfg.conflict_provinces);
    }
    firms
}

fn draw_links(cfg: &SyntheticEconomyConfig, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let n = cfg.n_firms;
    let mut links: BTreeSet<(usize, usize)> = BTreeSet::new();
    match cfg.topology {
        Topology::PreferentialAttachment { attachment } => {
            // Each endpoint of every link enters the urn once, plus one entry per firm.
            let mut urn: Vec<usize> = vec![0];
            for j in 1..n {
                let picks = attachment.min(j);
                let mut chosen = BTreeSet::new();
                while chosen.len() < picks {
                    chosen.insert(urn[rng.random_range(0..urn.len())]);
                }
                for i in chosen {
                    let link = if rng.random_bool(0.5) { (i, j) } else { (j, i) };
                    links.insert(link);
                    urn.push(i);
                    urn.push(j);
                }
                urn.push(j);
            }
        }
        Topology::Uniform { edges } => {
            while links.len() < edges {
                let i = rng.random_range(0..n);
                let j = rng.random_range(0..n);
                if i != j {
                    links.insert((i, j));
                }
            }
        }
    }
    // Every firm buys from at least one supplier so input shares sum to one.
    let mut has_supplier = vec![false; n];
    for &(_, j) in &links {
        has_supplier[j] = true;
    }
    for j in 0..n {
        if !has_supplier[j] {
            let mut i = rng.random_range(0..n - 1);
            if i >= j {
                i += 1;
            }
            links.insert((i, j));
        }
    }
    links.into_iter().collect()
}

/// Draws a network, outside demand and the implied equilibrium.
///
/// Revenues come from the revenue solver at a tight tolerance; demand is
/// then recomputed from them so that the revenue identity holds to rounding.
pub fn generate_economy(cfg: &SyntheticEconomyConfig) -> SyntheticEconomy {
    cfg.validate().expect("valid synthetic economy config");
    let mut rng = rng(cfg.seed, 0);
    let firms = draw_geography(cfg, &mut rng);
    let links = draw_links(cfg, &mut rng);
    let n = cfg.n_firms;

    let raw: Vec<f64> = links.iter().map(|_| rng.random_range(0.5..1.5)).collect();
    let mut column = vec![0.0; n];
    for (&(_, j), w) in links.iter().zip(&raw) {
        column[j] += w;
    }
    let omega = CsrMatrix::from_triplets(n, n, links.iter().zip(&raw).map(|(&(i, j), w)| (i, j, w / column[j])));
    let ids: Arc<Vec<String>> = Arc::new(firms.iter().map(|f| f.firm_id.clone()).collect());
    let io = IOMatrix::new(2013, ids, omega);

    let normal = Normal::new(0.0, cfg.demand_sigma).expect("finite sigma");
    let xi0: Vec<f64> = (0..n).map(|_| cfg.demand_scale * normal.sample(&mut rng).exp()).collect();
    let econ = EconomyConfig { alpha: cfg.alpha, tol: 1e-15, max_iter: 100_000 };
    let revenues = solve_revenue(&io, &xi0, &econ).expect("contractive by construction").revenues;
    let demand = backout_demand(&io, &revenues, &econ).expect("dimensions agree").values;
    let primitives = structural_primitives(&io, &revenues, &demand, cfg.alpha, cfg.eta);
    SyntheticEconomy { config: cfg.clone(), firms, links, io, demand, revenues, primitives }
}

/// Primitives supporting `(Omega, xi, r)` as a Cobb-Douglas equilibrium with
/// `a_ji = omega_ji` and unit wage.
pub fn structural_primitives(io: &IOMatrix, revenues: &[f64], demand: &[f64], alpha: f64, eta: f64) -> StructuralPrimitives {
    let n = io.n();
    let wage = 1.0;
    // Consumer first-order condition with unit multiplier: p_i = c_i^(eta - 1).
    let consumption: Vec<f64> = demand.iter().map(|xi| xi.powf(1.0 / eta)).collect();
    let prices: Vec<f64> = demand.iter().zip(&consumption).map(|(xi, c)| xi / c).collect();
    let output: Vec<f64> = revenues.iter().zip(&prices).map(|(r, p)| r / p).collect();
    let labor: Vec<f64> = revenues.iter().map(|r| alpha * r / wage).collect();
    let mut inputs = Vec::new();
    let mut log_bundle = vec![0.0; n];
    for (j, i, a) in io.omega().triplets() {
        let x = (1.0 - alpha) * a * revenues[i] / prices[j];
        inputs.push((j, i, a, x));
        log_bundle[i] += a * (x / a).ln();
    }
    let input_bundle: Vec<f64> = log_bundle.iter().map(|l| l.exp()).collect();
    let productivity = (0..n)
        .map(|i| {
            let bundle_term = if alpha < 1.0 { (1.0 - alpha) * log_bundle[i] } else { 0.0 };
            ((output[i].ln() - bundle_term) / alpha - labor[i].ln()).exp()
        })
        .collect();
    StructuralPrimitives {
        sigma: 1.0,
        eta,
        wage,
        total_labor: labor.iter().sum(),
        productivity,
        labor,
        prices,
        output,
        consumption,
        input_bundle,
        inputs,
    }
}

/// Largest relative violation of each equilibrium condition.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EquilibriumResiduals {
    /// `w l_i = alpha p_i x_i`.
    pub labor_foc: f64,
    /// `(1 - alpha) p_i x_i a_ji = p_j x_ji`.
    pub input_foc: f64,
    /// `x_i = sum_j x_ij + c_i`.
    pub goods_market: f64,
    /// `sum_i l_i = L`.
    pub labor_market: f64,
    /// `x_i = (z_i l_i)^alpha M_i^(1 - alpha)`.
    pub production: f64,
    /// `p_i c_i = xi_i` and `p_i = c_i^(eta - 1)`.
    pub consumer: f64,
    /// `r = (1 - alpha) Omega r + xi`.
    pub revenue_identity: f64,
    /// `sum_j a_ji = 1` for every firm.
    pub input_shares: f64,
}

impl EquilibriumResiduals {
    pub fn max(&self) -> f64 {
        [
            self.labor_foc,
            self.input_foc,
            self.goods_market,
            self.labor_market,
            self.production,
            self.consumer,
            self.revenue_identity,
            self.input_shares,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn check_equilibrium(economy: &SyntheticEconomy) -> EquilibriumResiduals {
    let p = &economy.primitives;
    let alpha = economy.config.alpha;
    let n = economy.firms.len();
    let mut out = EquilibriumResiduals::default();
    let mut sold = vec![0.0; n];
    let mut shares = vec![0.0; n];
    for &(j, i, a, x) in &p.inputs {
        out.input_foc = out.input_foc.max(rel((1.0 - alpha) * p.prices[i] * p.output[i] * a, p.prices[j] * x));
        sold[j] += x;
        shares[i] += a;
    }
    for i in 0..n {
        out.labor_foc = out.labor_foc.max(rel(p.wage * p.labor[i], alpha * p.prices[i] * p.output[i]));
        out.goods_market = out.goods_market.max(rel(p.output[i], sold[i] + p.consumption[i]));
        let produced = (p.productivity[i] * p.labor[i]).powf(alpha) * p.input_bundle[i].powf(1.0 - alpha);
        out.production = out.production.max(rel(p.output[i], produced));
        out.consumer = out
            .consumer
            .max(rel(p.prices[i] * p.consumption[i], economy.demand[i]))
            .max(rel(p.prices[i], p.consumption[i].powf(p.eta - 1.0)));
        out.input_shares = out.input_shares.max((shares[i] - 1.0).abs());
    }
    out.labor_market = rel(p.labor.iter().sum(), p.total_labor);
    let omega_r = economy.io.omega().mul_vec(&economy.revenues);
    for i in 0..n {
        let rhs = (1.0 - alpha) * omega_r[i] + economy.demand[i];
        out.revenue_identity = out.revenue_identity.max(rel(economy.revenues[i], rhs));
    }
    out
}
