//! Contact-network reconstruction from egocentric survey data.
//!
//! The pipeline runs survey ingest ([`ingest`]), per-age Gaussian mixture
//! fits over log-transformed ego vectors ([`gmm`]), network generation by a
//! stratified configuration model or a stochastic block model ([`network`]),
//! ego-level fidelity scoring by earth mover's distance and optimal
//! assignment ([`fidelity`]), and stochastic SEIR simulation with
//! reproduction-number, final-size and dispersion analyses ([`epidemic`]).
//! [`pipeline`] wires the stages together behind a JSON config.

pub mod epidemic;
pub mod error;
pub mod fidelity;
pub mod gmm;
pub mod ingest;
pub mod network;
pub mod numeric;
pub mod pipeline;
pub mod rng;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use types::{AgeGroup, DurationCategory, EgoVector, AGE_GROUPS, CELLS, DURATIONS};
