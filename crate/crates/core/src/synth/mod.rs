//! Seeded synthetic economies, shipment streams and firm panels with
//! planted effects.

mod centrality;
mod config;
mod economy;
mod emit;

pub use centrality::{plant_centrality_effect, CentralityEffectConfig, CentralityPanel};
pub use config::{EmissionConfig, SyntheticEconomyConfig, Topology, SYNTH_KEYS};
pub use economy::{
    check_equilibrium, firm_id, generate_economy, province_id, rayon_id, structural_primitives, EquilibriumResiduals,
    StructuralPrimitives, SyntheticEconomy,
};
pub use emit::{emit_transactions, EmissionTruth, LinkTruth, SyntheticData};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator stream `stream` for `seed`.
pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
