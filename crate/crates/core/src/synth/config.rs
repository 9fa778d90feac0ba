use crate::config::{ConfigError, KeyValues};
use crate::time::YearMonth;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Topology {
    /// Each arriving firm links to `attachment` earlier firms chosen with
    /// probability proportional to degree + 1; link direction is random.
    PreferentialAttachment { attachment: usize },
    /// `edges` distinct directed links drawn uniformly.
    Uniform { edges: usize },
}

/// Economy, geography and planted effects for synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEconomyConfig {
    pub seed: u64,
    pub n_firms: usize,
    pub topology: Topology,
    pub alpha: f64,
    pub n_provinces: usize,
    pub rayons_per_province: usize,
    /// The first `conflict_provinces` provinces form the conflict area.
    pub conflict_provinces: usize,
    /// Log-normal outside demand: `demand_scale * exp(N(0, demand_sigma^2))`.
    pub demand_scale: f64,
    pub demand_sigma: f64,
    /// Consumer curvature in `u = (sum c_i^eta)^(1/eta)`.
    pub eta: f64,
    pub emission: EmissionConfig,
}

/// Monthly shipment process.
///
/// A link ships in a month with probability
/// `q = clamp(base + month_effect + beta1 * first + beta2 * second, 0, 1)`
/// where treatment terms apply from `post_start`, `base` lies in
/// `[base_prob_min, base_prob_max]` increasing in the link's input volume,
/// and month effects are uniform on `[-month_effect, month_effect]`. A
/// shipping month carries `1 + Poisson(extra_shipments)` shipments whose
/// weights scale with the link's input share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionConfig {
    pub first_month: YearMonth,
    pub last_month: YearMonth,
    pub post_start: YearMonth,
    pub beta1: f64,
    pub beta2: f64,
    pub base_prob_min: f64,
    pub base_prob_max: f64,
    pub month_effect: f64,
    pub extra_shipments: f64,
    /// Expected yearly kilograms per unit of input share.
    pub kg_scale: f64,
    /// Force at least one shipment per link in every fully preconflict year.
    pub guarantee_support: bool,
    /// Log-normal noise on reported sales.
    pub sales_noise: f64,
}

impl Default for EmissionConfig {
    fn default() -> Self {
        EmissionConfig {
            first_month: YearMonth::new(2013, 1),
            last_month: YearMonth::new(2016, 12),
            post_start: YearMonth::new(2014, 3),
            beta1: -0.131,
            beta2: -0.025,
            base_prob_min: 0.25,
            base_prob_max: 0.75,
            month_effect: 0.03,
            extra_shipments: 1.0,
            kg_scale: 1e7,
            guarantee_support: false,
            sales_noise: 0.0,
        }
    }
}

impl Default for SyntheticEconomyConfig {
    fn default() -> Self {
        SyntheticEconomyConfig {
            seed: 0,
            n_firms: 500,
            topology: Topology::PreferentialAttachment { attachment: 3 },
            alpha: 0.18,
            n_provinces: 12,
            rayons_per_province: 5,
            conflict_provinces: 1,
            demand_scale: 100.0,
            demand_sigma: 1.0,
            eta: 0.5,
            emission: EmissionConfig::default(),
        }
    }
}

pub const SYNTH_KEYS: &[&str] = &[
    "seed",
    "n_firms",
    "topology",
    "attachment",
    "edges",
    "alpha",
    "n_provinces",
    "rayons_per_province",
    "conflict_provinces",
    "demand_scale",
    "demand_sigma",
    "eta",
    "first_month",
    "last_month",
    "post_start",
    "beta1",
    "beta2",
    "base_prob_min",
    "base_prob_max",
    "month_effect",
    "extra_shipments",
    "kg_scale",
    "guarantee_support",
    "sales_noise",
];

fn invalid(key: &str, value: impl ToString, reason: &str) -> ConfigError {
    ConfigError::Invalid { key: key.into(), value: value.to_string(), reason: reason.into() }
}

impl SyntheticEconomyConfig {
    /// Reads a key-value config; `seed` is required.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self, ConfigError> {
        kv.check_known(SYNTH_KEYS)?;
        let d = SyntheticEconomyConfig::default();
        let seed = kv.get::<u64>("seed")?.ok_or_else(|| invalid("seed", "", "a seed is required"))?;
        let topology = match kv.get_str("topology").unwrap_or("preferential") {
            "preferential" => Topology::PreferentialAttachment { attachment: kv.get_or("attachment", 3usize)? },
            "uniform" => Topology::Uniform { edges: kv.get_or("edges", 3 * kv.get_or("n_firms", d.n_firms)?)? },
            other => return Err(invalid("topology", other, "expected preferential or uniform")),
        };
        let e = EmissionConfig::default();
        let emission = EmissionConfig {
            first_month: kv.get_or("first_month", e.first_month)?,
            last_month: kv.get_or("last_month", e.last_month)?,
            post_start: kv.get_or("post_start", e.post_start)?,
            beta1: kv.get_or("beta1", e.beta1)?,
            beta2: kv.get_or("beta2", e.beta2)?,
            base_prob_min: kv.get_or("base_prob_min", e.base_prob_min)?,
            base_prob_max: kv.get_or("base_prob_max", e.base_prob_max)?,
            month_effect: kv.get_or("month_effect", e.month_effect)?,
            extra_shipments: kv.get_or("extra_shipments", e.extra_shipments)?,
            kg_scale: kv.get_or("kg_scale", e.kg_scale)?,
            guarantee_support: kv.get_bool("guarantee_support")?.unwrap_or(e.guarantee_support),
            sales_noise: kv.get_or("sales_noise", e.sales_noise)?,
        };
        let cfg = SyntheticEconomyConfig {
            seed,
            n_firms: kv.get_or("n_firms", d.n_firms)?,
            topology,
            alpha: kv.get_or("alpha", d.alpha)?,
            n_provinces: kv.get_or("n_provinces", d.n_provinces)?,
            rayons_per_province: kv.get_or("rayons_per_province", d.rayons_per_province)?,
            conflict_provinces: kv.get_or("conflict_provinces", d.conflict_provinces)?,
            demand_scale: kv.get_or("demand_scale", d.demand_scale)?,
            demand_sigma: kv.get_or("demand_sigma", d.demand_sigma)?,
            eta: kv.get_or("eta", d.eta)?,
            emission,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_firms < 2 {
            return Err(invalid("n_firms", self.n_firms, "at least 2 firms required"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha", self.alpha, "must lie in (0, 1]"));
        }
        if self.n_provinces < 2 || self.conflict_provinces >= self.n_provinces {
            return Err(invalid("conflict_provinces", self.conflict_provinces, "must be below n_provinces"));
        }
        if self.rayons_per_province == 0 {
            return Err(invalid("rayons_per_province", 0, "must be positive"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid("eta", self.eta, "must lie in (0, 1)"));
        }
        if self.demand_scale <= 0.0 || self.demand_sigma < 0.0 {
            return Err(invalid("demand_scale", self.demand_scale, "scale must be positive, sigma non-negative"));
        }
        let e = &self.emission;
        if e.last_month < e.first_month {
            return Err(invalid("last_month", e.last_month, "precedes first_month"));
        }
        if !(0.0 <= e.base_prob_min && e.base_prob_min <= e.base_prob_max && e.base_prob_max <= 1.0) {
            return Err(invalid("base_prob_min", e.base_prob_min, "need 0 <= min <= max <= 1"));
        }
        if e.extra_shipments < 0.0 || e.kg_scale <= 0.0 || e.month_effect < 0.0 || e.sales_noise < 0.0 {
            return Err(invalid("extra_shipments", e.extra_shipments, "rates and scales must be non-negative"));
        }
        match self.topology {
            Topology::PreferentialAttachment { attachment } if attachment == 0 => {
                Err(invalid("attachment", attachment, "must be positive"))
            }
            Topology::Uniform { edges } if edges > self.n_firms * (self.n_firms - 1) => {
                Err(invalid("edges", edges, "more than n(n-1) links"))
            }
            _ => Ok(()),
        }
    }
}
