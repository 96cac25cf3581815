//! Population-scale contact networks.
//!
//! The GMM network samples a stub vector per node ([`ledger`]), rebalances
//! directional stub totals between age groups, and wires stubs by a
//! stratified configuration model ([`wiring`]). The comparator is a
//! stochastic block model over the survey contact matrix ([`sbm`]).

pub mod graph;
pub mod io;
pub mod ledger;
pub mod method;
pub mod population;
pub mod sbm;
pub mod wiring;

pub use graph::{ContactNetwork, Edge};
pub use io::{ages_path, edges_path, read_network, write_network};
pub use method::{fit_method, generate, FittedMethod, GenerationReport, GeneratorKind, Method};
pub use ledger::{rebalance_stubs, sample_stub_ledger, scaling_factor, RebalanceReport, StubLedger};
pub use population::{PopulationSpec, DEFAULT_PROPORTIONS};
pub use sbm::{block_probabilities, build_contact_matrix, generate_sbm, ContactMatrix};
pub use wiring::{wire_configuration, WiringReport};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gmm::FittedModels;
use crate::rng;
use crate::types::AGE_GROUPS;

/// Diagnostics from one GMM network build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmNetworkReport {
    pub rebalance: RebalanceReport,
    pub wiring: WiringReport,
    /// Mean sampled stubs per node before rebalancing.
    pub sampled_degree: [f64; AGE_GROUPS],
    pub realized_degree: [f64; AGE_GROUPS],
}

/// Stub sampling, rebalancing and wiring on streams derived from `seed`.
pub fn generate_gmm_network(models: &FittedModels, spec: &PopulationSpec, seed: u64) -> Result<(ContactNetwork, GmmNetworkReport)> {
    let ledger = sample_stub_ledger(models, spec, rng::derive_seed(seed, &[0]))?;
    let (balanced, rebalance) = rebalance_stubs(&ledger, &mut rng::stream(seed, &[1]));
    let (network, wiring) = wire_configuration(&balanced, rng::derive_seed(seed, &[2]))?;
    let report = GmmNetworkReport {
        rebalance,
        wiring,
        sampled_degree: ledger.mean_degree_by_age(),
        realized_degree: network.mean_degree_by_age(),
    };
    Ok((network, report))
}
