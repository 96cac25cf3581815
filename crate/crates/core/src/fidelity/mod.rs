//! Agreement between generated networks and survey data.
//!
//! A model sample of ego-networks, matched to the data in size and age
//! composition, is paired one-to-one with the data egos by minimum total
//! [`emd`](emd::emd) within each age group. The mean matched distance per
//! individual is the fidelity score; the self-fitting baseline scores a
//! model against data generated by itself.

pub mod assignment;
pub mod emd;

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::SelectOptions;
use crate::network::{fit_method, generate, ContactNetwork, FittedMethod, Method, PopulationSpec};
use crate::numeric::{interval_95, largest_remainder, mean};
use crate::rng;
use crate::types::{AgeGroup, EgoVector, AGE_GROUPS};

pub use assignment::solve_assignment;
pub use emd::{emd, excess_penalty, AgeHistogram, PENALTY_C};

/// How data and model egos may be paired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matching {
    /// Only egos of the same age group (cross-age cost is infinite).
    Stratified,
    /// All egos in one block.
    Pooled,
}

impl Matching {
    pub fn for_method(method: Method) -> Self {
        if method.age_structured {
            Matching::Stratified
        } else {
            Matching::Pooled
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub total: f64,
    pub per_individual: f64,
    /// Mean matched distance of data egos in each age group.
    pub per_age: [Option<f64>; AGE_GROUPS],
}

pub fn composition(egos: &[AgeHistogram]) -> [usize; AGE_GROUPS] {
    let mut c = [0; AGE_GROUPS];
    for e in egos {
        c[e.owner_age.index()] += 1;
    }
    c
}

/// Optimal assignment within one block, evaluating each distinct
/// (data, model) histogram pair once. Returns the distance of each data ego.
fn match_block(data: &[&AgeHistogram], model: &[&AgeHistogram]) -> Result<Vec<f64>> {
    let n = data.len();
    let mut keys: HashMap<[u64; AGE_GROUPS], usize> = HashMap::new();
    let mut unique_model: Vec<&AgeHistogram> = Vec::new();
    let model_idx: Vec<usize> = model
        .iter()
        .map(|&h| {
            *keys.entry(h.key()).or_insert_with(|| {
                unique_model.push(h);
                unique_model.len() - 1
            })
        })
        .collect();
    let mut data_keys: HashMap<[u64; AGE_GROUPS], usize> = HashMap::new();
    let mut unique_data: Vec<&AgeHistogram> = Vec::new();
    let data_idx: Vec<usize> = data
        .iter()
        .map(|&h| {
            *data_keys.entry(h.key()).or_insert_with(|| {
                unique_data.push(h);
                unique_data.len() - 1
            })
        })
        .collect();
    let m = unique_model.len();
    let table: Vec<f64> = unique_data
        .par_iter()
        .flat_map_iter(|d| unique_model.iter().map(move |k| emd(d, k)))
        .collect();
    let mut cost = vec![0.0; n * n];
    for (i, &di) in data_idx.iter().enumerate() {
        for (j, &mj) in model_idx.iter().enumerate() {
            cost[i * n + j] = table[di * m + mj];
        }
    }
    let (assign, _) = solve_assignment(n, &cost)?;
    Ok((0..n).map(|i| cost[i * n + assign[i]]).collect())
}

/// Minimum total distance over one-to-one pairings of `data` with `model`.
pub fn match_error(data: &[AgeHistogram], model: &[AgeHistogram], matching: Matching) -> Result<MatchResult> {
    if data.len() != model.len() {
        return Err(Error::InvalidInput(format!("data sample has {} egos, model sample {}", data.len(), model.len())));
    }
    let (dc, mc) = (composition(data), composition(model));
    if matching == Matching::Stratified {
        if let Some(a) = (0..AGE_GROUPS).find(|&a| dc[a] != mc[a]) {
            return Err(Error::CompositionMismatch { age: AgeGroup::ALL[a], data: dc[a], model: mc[a] });
        }
    }
    let blocks: Vec<(Vec<usize>, Vec<&AgeHistogram>)> = match matching {
        Matching::Stratified => AgeGroup::ALL
            .iter()
            .map(|&a| {
                let di: Vec<usize> = (0..data.len()).filter(|&i| data[i].owner_age == a).collect();
                let mk: Vec<&AgeHistogram> = model.iter().filter(|h| h.owner_age == a).collect();
                (di, mk)
            })
            .filter(|(d, _)| !d.is_empty())
            .collect(),
        Matching::Pooled => vec![((0..data.len()).collect(), model.iter().collect())],
    };
    let mut per_ego = vec![0.0; data.len()];
    for (di, mk) in &blocks {
        let d: Vec<&AgeHistogram> = di.iter().map(|&i| &data[i]).collect();
        for (&i, c) in di.iter().zip(match_block(&d, mk)?) {
            per_ego[i] = c;
        }
    }
    let total: f64 = per_ego.iter().sum();
    let per_age = std::array::from_fn(|a| {
        let xs: Vec<f64> = (0..data.len()).filter(|&i| data[i].owner_age.index() == a).map(|i| per_ego[i]).collect();
        (!xs.is_empty()).then(|| mean(&xs))
    });
    let per_individual = if data.is_empty() { 0.0 } else { total / data.len() as f64 };
    Ok(MatchResult { total, per_individual, per_age })
}

/// Stratified sample without replacement of `counts[a]` nodes of each age
/// group, returned as ego vectors in age order.
pub fn sample_model_egos<R: Rng + ?Sized>(network: &ContactNetwork, counts: &[usize; AGE_GROUPS], rng: &mut R) -> Result<Vec<EgoVector>> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); AGE_GROUPS];
    for (i, a) in network.ages().iter().enumerate() {
        members[a.index()].push(i);
    }
    let mut out = Vec::with_capacity(counts.iter().sum());
    for a in AgeGroup::ALL {
        let (pool, want) = (&members[a.index()], counts[a.index()]);
        if pool.len() < want {
            return Err(Error::InsufficientNodes { age: a, available: pool.len(), requested: want });
        }
        let mut picks = index::sample(rng, pool.len(), want).into_vec();
        picks.sort_unstable();
        out.extend(picks.into_iter().map(|k| network.ego_vector(pool[k])));
    }
    Ok(out)
}

pub fn histograms(egos: &[EgoVector]) -> Vec<AgeHistogram> {
    egos.iter().map(AgeHistogram::from).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub method: String,
    pub matching: Matching,
    /// Per-individual error of each realization.
    pub realizations: Vec<f64>,
    pub mean: f64,
    pub interval: (f64, f64),
    pub per_age_mean: [Option<f64>; AGE_GROUPS],
}

impl FidelityReport {
    fn from_results(method: &str, matching: Matching, results: &[MatchResult]) -> Self {
        let values: Vec<f64> = results.iter().map(|r| r.per_individual).collect();
        let m = mean(&values);
        let per_age_mean = std::array::from_fn(|a| {
            let xs: Vec<f64> = results.iter().filter_map(|r| r.per_age[a]).collect();
            (!xs.is_empty()).then(|| mean(&xs))
        });
        FidelityReport { method: method.to_string(), matching, interval: interval_95(&values, m), mean: m, realizations: values, per_age_mean }
    }
}

/// Score `fitted` against the data: each realization generates a network,
/// samples egos with the data's age composition, and matches them.
pub fn evaluate_fidelity(
    method: Method,
    fitted: &FittedMethod,
    spec: &PopulationSpec,
    data: &[EgoVector],
    realizations: usize,
    seed: u64,
) -> Result<FidelityReport> {
    let matching = Matching::for_method(method);
    let data_h = histograms(data);
    let counts = composition(&data_h);
    let results: Vec<MatchResult> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let (net, _) = generate(fitted, spec, rng::derive_seed(seed, &[r as u64, 0]))?;
            let model = sample_model_egos(&net, &counts, &mut rng::stream(seed, &[r as u64, 1]))?;
            match_error(&data_h, &histograms(&model), matching)
        })
        .collect::<Result<_>>()?;
    Ok(FidelityReport::from_results(method.name(), matching, &results))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfFitOptions {
    /// Egos drawn from the first surrogate as synthetic survey data.
    pub sample_size: usize,
    pub realizations: usize,
    /// Refit the method on the synthetic data before generating the second
    /// surrogate. When false the first surrogate is reused, which leaves
    /// only resampling noise.
    pub refit: bool,
}

/// Baseline error of a method against data it generated itself.
pub fn self_fit_baseline(
    method: Method,
    fitted: &FittedMethod,
    spec: &PopulationSpec,
    options: &SelfFitOptions,
    select: &SelectOptions,
    seed: u64,
) -> Result<FidelityReport> {
    let matching = Matching::for_method(method);
    let shares = largest_remainder(options.sample_size, &spec.age_proportions);
    let counts: [usize; AGE_GROUPS] = std::array::from_fn(|a| shares[a]);
    let results: Vec<MatchResult> = (0..options.realizations)
        .into_par_iter()
        .map(|r| {
            let path = |k: u64| rng::derive_seed(seed, &[r as u64, k]);
            let (first, _) = generate(fitted, spec, path(0))?;
            let synthetic = sample_model_egos(&first, &counts, &mut rng::stream(path(1), &[]))?;
            let second = if options.refit {
                let refit = fit_method(method, &synthetic, spec, path(2), select)?;
                generate(&refit, spec, path(3))?.0
            } else {
                first
            };
            let model = sample_model_egos(&second, &counts, &mut rng::stream(path(4), &[]))?;
            match_error(&histograms(&synthetic), &histograms(&model), matching)
        })
        .collect::<Result<_>>()?;
    Ok(FidelityReport::from_results(&format!("{}-self-fit", method.name()), matching, &results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Edge;
    use crate::types::DurationCategory;

    fn h(age: usize, mass: &[(usize, f64)]) -> AgeHistogram {
        let mut m = [0.0; AGE_GROUPS];
        for &(a, v) in mass {
            m[a] = v;
        }
        AgeHistogram::new(AgeGroup::ALL[age], m)
    }

    #[test]
    fn identical_samples_match_exactly() {
        let data = vec![h(0, &[(0, 2.0)]), h(0, &[(3, 1.0)]), h(5, &[(5, 4.0), (6, 1.0)])];
        let r = match_error(&data, &data, Matching::Stratified).unwrap();
        assert_eq!(r.total, 0.0);
        let mut shuffled = data.clone();
        shuffled.swap(0, 1);
        assert_eq!(match_error(&data, &shuffled, Matching::Stratified).unwrap().total, 0.0);
    }

    #[test]
    fn composition_mismatch_is_an_error() {
        let data = vec![h(0, &[(0, 1.0)])];
        let model = vec![h(1, &[(0, 1.0)])];
        assert!(matches!(match_error(&data, &model, Matching::Stratified), Err(Error::CompositionMismatch { .. })));
        assert!(match_error(&data, &model, Matching::Pooled).is_ok());
    }

    #[test]
    fn never_pairs_across_ages() {
        // Pooled matching would swap the two model egos to reach zero cost.
        let data = vec![h(0, &[(4, 2.0)]), h(4, &[(0, 2.0)])];
        let model = vec![h(0, &[(0, 2.0)]), h(4, &[(4, 2.0)])];
        let strat = match_error(&data, &model, Matching::Stratified).unwrap();
        assert!((strat.total - 2.0 * emd(&data[0], &model[0])).abs() < 1e-12);
        assert!(strat.total > 0.0);
        let pooled = match_error(&data, &model, Matching::Pooled).unwrap();
        assert!((pooled.total - 2.0 * emd(&data[0], &model[1])).abs() < 1e-12);
    }

    #[test]
    fn model_sampling_is_stratified() {
        let ages: Vec<AgeGroup> = (0..20).map(|i| AgeGroup::ALL[i % 2 * 4]).collect();
        let edges = vec![Edge::new(0, 1, DurationCategory::LONGEST), Edge::new(0, 3, DurationCategory::LONGEST), Edge::new(0, 5, DurationCategory::SHORTEST)];
        let g = ContactNetwork::new(ages, edges).unwrap();
        let mut counts = [0; AGE_GROUPS];
        counts[0] = 10;
        counts[4] = 3;
        let egos = sample_model_egos(&g, &counts, &mut rng::stream(0, &[])).unwrap();
        assert_eq!(composition(&histograms(&egos)), counts);
        let hub = egos.iter().find(|e| e.total() == 3).expect("all age-0 nodes are drawn");
        assert_eq!(AgeHistogram::from(hub).mass[4], 3.0);
        counts[4] = 11;
        assert!(matches!(sample_model_egos(&g, &counts, &mut rng::stream(0, &[])), Err(Error::InsufficientNodes { .. })));
    }
}
