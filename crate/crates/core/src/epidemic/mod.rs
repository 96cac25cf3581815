//! Stochastic SEIR epidemics on contact networks.
//!
//! [`gillespie`] simulates one outbreak exactly, recording who infected whom
//! and in which generation. [`stats`] turns sets of runs into reproduction
//! numbers, final sizes and contribution shares, and [`dispersion`] fits a
//! negative binomial to the offspring distribution.

pub mod dispersion;
pub mod gillespie;
pub mod stats;
pub mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::ContactNetwork;
use crate::rng;
use crate::types::{AGE_GROUPS, DURATIONS};

pub use dispersion::{fit_dispersion, fit_k, DispersionFit, K_CAP};
pub use gillespie::{gillespie_run, seed_index_case, Compartments, EpidemicParams, EpidemicTrace, EventRecord, Infection, RunOptions, State, Transition};
pub use stats::{age_contribution, duration_contribution, estimate_r0, final_size, leading_left_eigenvector, max_r0, secondary_cases, FinalSize};

/// Independent runs on one network, replicate `r` on stream `[r]`.
pub fn run_replicates(network: &ContactNetwork, params: &EpidemicParams, options: &RunOptions, replicates: usize, seed: u64) -> Result<Vec<EpidemicTrace>> {
    (0..replicates)
        .into_par_iter()
        .map(|r| gillespie_run(network, params, options, &mut rng::stream(seed, &[r as u64])))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummaryOptions {
    /// Runs below this attack rate count as early extinctions.
    pub extinction_threshold: f64,
    pub bootstrap: usize,
    /// Infectee generations pooled for contribution shares.
    pub contribution_generations: (u32, u32),
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions { extinction_threshold: 0.01, bootstrap: 100, contribution_generations: (2, 2) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpidemicSummary {
    pub tau: f64,
    pub replicates: usize,
    pub r0: Option<f64>,
    pub max_r0: Option<f64>,
    pub final_size: FinalSize,
    pub dispersion: Option<DispersionFit>,
    pub duration_share: Option<[f64; DURATIONS]>,
    pub age_share: Option<[f64; AGE_GROUPS]>,
}

pub fn summarize(traces: &[EpidemicTrace], network: &ContactNetwork, params: &EpidemicParams, options: &SummaryOptions, seed: u64) -> EpidemicSummary {
    let r0 = estimate_r0(traces);
    let offspring = secondary_cases(traces);
    let dispersion = (!offspring.is_empty()).then(|| fit_dispersion(&offspring, options.bootstrap, &mut rng::stream(seed, &[rng::label("bootstrap")])));
    EpidemicSummary {
        tau: params.tau,
        replicates: traces.len(),
        r0,
        max_r0: max_r0(traces, network),
        final_size: final_size(traces, r0, options.extinction_threshold),
        dispersion,
        duration_share: duration_contribution(traces, options.contribution_generations),
        age_share: age_contribution(traces, network, options.contribution_generations),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationOptions {
    pub tolerance: f64,
    pub replicates: usize,
    /// First upper bracket for `tau`; doubled until the target is passed.
    pub initial_tau: f64,
    /// Largest `tau` tried before declaring the target unreachable.
    pub max_tau: f64,
    pub max_iterations: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { tolerance: 0.05, replicates: 48, initial_tau: 0.5, max_tau: 1000.0, max_iterations: 40 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target: f64,
    pub tau: f64,
    pub r0: f64,
    pub reachable: bool,
    pub evaluations: usize,
}

/// Pooled R0 at `tau` from runs that stop once generation 3 is complete.
pub fn r0_at(network: &ContactNetwork, params: &EpidemicParams, tau: f64, replicates: usize, seed: u64) -> Result<f64> {
    let p = EpidemicParams { tau, ..params.clone() };
    let opts = RunOptions { stop_after_generation: Some(2), ..Default::default() };
    Ok(estimate_r0(&run_replicates(network, &p, &opts, replicates, seed)?).unwrap_or(0.0))
}

/// Bisection on `tau` for a target pooled R0. Every evaluation reuses the
/// same replicate streams, so the estimate is a deterministic function of
/// `tau`. Targets not reached by `max_tau` are reported unreachable.
pub fn calibrate_tau(network: &ContactNetwork, params: &EpidemicParams, target: f64, options: &CalibrationOptions, seed: u64) -> Result<Calibration> {
    let eval = |tau: f64| r0_at(network, params, tau, options.replicates, seed);
    let mut evaluations = 0;
    let mut best = (0.0, 0.0);
    let consider = |tau: f64, r: f64, best: &mut (f64, f64)| {
        if (r - target).abs() < (best.1 - target).abs() {
            *best = (tau, r);
        }
    };
    let (mut lo, mut hi) = (0.0, options.initial_tau.min(options.max_tau));
    loop {
        let r = eval(hi)?;
        evaluations += 1;
        consider(hi, r, &mut best);
        if (r - target).abs() <= options.tolerance {
            return Ok(Calibration { target, tau: hi, r0: r, reachable: true, evaluations });
        }
        if r > target {
            break;
        }
        if hi >= options.max_tau {
            return Ok(Calibration { target, tau: hi, r0: r, reachable: false, evaluations });
        }
        lo = hi;
        hi = (hi * 2.0).min(options.max_tau);
    }
    for _ in 0..options.max_iterations {
        let mid = 0.5 * (lo + hi);
        let r = eval(mid)?;
        evaluations += 1;
        consider(mid, r, &mut best);
        if (r - target).abs() <= options.tolerance {
            return Ok(Calibration { target, tau: mid, r0: r, reachable: true, evaluations });
        }
        if r > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Calibration { target, tau: best.0, r0: best.1, reachable: (best.1 - target).abs() <= options.tolerance, evaluations })
}

/// One row per `tau`: full runs summarized.
pub fn sweep_tau(network: &ContactNetwork, params: &EpidemicParams, taus: &[f64], replicates: usize, options: &SummaryOptions, seed: u64) -> Result<Vec<EpidemicSummary>> {
    taus.iter()
        .enumerate()
        .map(|(k, &tau)| {
            let p = EpidemicParams { tau, ..params.clone() };
            let traces = run_replicates(network, &p, &RunOptions::default(), replicates, rng::derive_seed(seed, &[k as u64]))?;
            Ok(summarize(&traces, network, &p, options, rng::derive_seed(seed, &[k as u64, 1])))
        })
        .collect()
}
