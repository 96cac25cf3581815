//! Component-count selection by mean held-out BIC.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::em::{fit_em, EmOptions};
use super::{data_matrix, log_transform, parameter_count, MixtureModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::types::{AgeGroup, EgoVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectOptions {
    pub splits: usize,
    pub train_frac: f64,
    pub max_components: usize,
    pub em: EmOptions,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions { splits: 100, train_frac: 0.8, max_components: 30, em: EmOptions::default() }
    }
}

/// Held-out BIC values for each scanned component count.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BicTrace {
    /// `scores[g - 1]` holds one BIC per split for `g` components.
    pub scores: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub selected: usize,
    /// Too little data for a split; a single component was fitted directly.
    pub small_data: bool,
    /// The selected model was refitted on all data after selection.
    pub refit_on_all: bool,
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub components: usize,
    pub model: MixtureModel,
    pub trace: BicTrace,
}

/// `p ln m - 2 ln L` on a held-out set of size `m`.
pub fn bic(model: &MixtureModel, test: &DMatrix<f64>) -> Result<f64> {
    let ll = model.prepare()?.log_likelihood(test);
    let p = parameter_count(model.components(), model.dim) as f64;
    Ok(p * (test.nrows() as f64).ln() - 2.0 * ll)
}

fn rows(data: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), data.ncols(), |i, j| data[(idx[i], j)])
}

/// Scan `n_g = 1, 2, ...` until the mean test BIC increases and return the
/// previous count's model refitted on all of `data`.
///
/// The same train/test partitions are reused for every `n_g`.
pub fn select_components(data: &DMatrix<f64>, seed: u64, options: &SelectOptions) -> Result<Selection> {
    let n = data.nrows();
    if n == 0 {
        return Err(Error::TooFewPoints { points: 0, components: 1 });
    }
    let n_train = ((n as f64) * options.train_frac).round() as usize;
    if n < 5 || n_train == 0 || n_train >= n {
        let (model, _) = fit_em(data, 1, &mut rng::stream(seed, &[u64::MAX]), &options.em)?;
        let trace = BicTrace { selected: 1, small_data: true, refit_on_all: true, ..Default::default() };
        return Ok(Selection { components: 1, model, trace });
    }
    let upper = options.max_components.min(n / 10).min(n_train).max(1);

    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..options.splits.max(1))
        .map(|s| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng::stream(seed, &[0, s as u64]));
            let test = idx.split_off(n_train);
            (idx, test)
        })
        .collect();

    let mut trace = BicTrace { refit_on_all: true, ..Default::default() };
    let mut selected = 1;
    for g in 1..=upper {
        let scores: Vec<f64> = splits
            .par_iter()
            .enumerate()
            .map(|(s, (train, test))| -> Result<f64> {
                let mut r = rng::stream(seed, &[1, g as u64, s as u64]);
                let (model, _) = fit_em(&rows(data, train), g, &mut r, &options.em)?;
                bic(&model, &rows(data, test))
            })
            .collect::<Result<_>>()?;
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        trace.scores.push(scores);
        trace.means.push(mean);
        if g > 1 && mean > trace.means[g - 2] {
            selected = g - 1;
            break;
        }
        selected = g;
    }
    trace.selected = selected;
    let (model, _) = fit_em(data, selected, &mut rng::stream(seed, &[2, selected as u64]), &options.em)?;
    Ok(Selection { components: selected, model, trace })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    /// `None` for the pooled, age-free model.
    pub age_group: Option<AgeGroup>,
    pub respondents: usize,
    pub model: MixtureModel,
    pub bic: BicTrace,
}

/// Mixture models for every age group, or one pooled model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModels {
    pub age_structured: bool,
    pub groups: BTreeMap<AgeGroup, GroupFit>,
    pub pooled: Option<GroupFit>,
}

impl FittedModels {
    /// Model used to sample stubs for a node of age `a`.
    pub fn model_for(&self, a: AgeGroup) -> Option<&MixtureModel> {
        if self.age_structured {
            self.groups.get(&a).map(|g| &g.model)
        } else {
            self.pooled.as_ref().map(|g| &g.model)
        }
    }

    pub fn components(&self) -> Vec<(Option<AgeGroup>, usize)> {
        if self.age_structured {
            self.groups.iter().map(|(a, g)| (Some(*a), g.bic.selected)).collect()
        } else {
            self.pooled.iter().map(|g| (None, g.bic.selected)).collect()
        }
    }
}

/// Fit one mixture per age group present in `vectors` (or a single pooled
/// mixture when `age_structured` is false). Groups are fitted in parallel,
/// each on its own seed-derived stream.
pub fn fit_groups(vectors: &[EgoVector], age_structured: bool, seed: u64, options: &SelectOptions) -> Result<FittedModels> {
    let fit = |age: Option<AgeGroup>, members: Vec<&EgoVector>| -> Result<GroupFit> {
        let rows: Vec<Vec<f64>> = members.iter().map(|v| log_transform(v).values).collect();
        let data = data_matrix(&rows);
        let tag = age.map_or(99, |a| a.index() as u64);
        let sel = select_components(&data, rng::derive_seed(seed, &[tag]), options)?;
        Ok(GroupFit { age_group: age, respondents: members.len(), model: sel.model, bic: sel.trace })
    };
    if !age_structured {
        if vectors.is_empty() {
            return Err(Error::TooFewPoints { points: 0, components: 1 });
        }
        let pooled = fit(None, vectors.iter().collect())?;
        return Ok(FittedModels { age_structured, groups: BTreeMap::new(), pooled: Some(pooled) });
    }
    let groups: Vec<GroupFit> = AgeGroup::ALL
        .par_iter()
        .filter_map(|&a| {
            let members: Vec<&EgoVector> = vectors.iter().filter(|v| v.owner_age == a).collect();
            (!members.is_empty()).then(|| fit(Some(a), members))
        })
        .collect::<Result<_>>()?;
    Ok(FittedModels {
        age_structured,
        groups: groups.into_iter().map(|g| (g.age_group.expect("age-structured fit"), g)).collect(),
        pooled: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identical_points_select_one() {
        let data = data_matrix(&vec![vec![0.5; 45]; 3]);
        let sel = select_components(&data, 1, &SelectOptions::default()).unwrap();
        assert_eq!(sel.components, 1);
        assert!(sel.trace.small_data);
    }

    #[test]
    fn unimodal_selects_one() {
        let mut r = rng::stream(2, &[]);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..45).map(|_| 1.0 + 0.3 * Distribution::<f64>::sample(&StandardNormal, &mut r)).collect()).collect();
        let opts = SelectOptions { splits: 10, ..Default::default() };
        let sel = select_components(&data_matrix(&rows), 3, &opts).unwrap();
        assert_eq!(sel.components, 1);
        assert_eq!(sel.trace.means.len(), 2);
        assert!(sel.trace.means[1] > sel.trace.means[0]);
        assert_eq!(sel.trace.scores[0].len(), 10);
    }

    #[test]
    fn separated_clusters_select_more_than_one() {
        // Low-dimensional data so the parameter penalty does not dominate.
        let mut r = rng::stream(4, &[]);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|i| {
                let off = if i % 2 == 0 { 0.0 } else { 6.0 };
                (0..2).map(|_| off + Distribution::<f64>::sample(&StandardNormal, &mut r)).collect()
            })
            .collect();
        let opts = SelectOptions { splits: 10, ..Default::default() };
        let sel = select_components(&data_matrix(&rows), 5, &opts).unwrap();
        assert_eq!(sel.components, 2);
    }

    #[test]
    fn selection_is_reproducible() {
        let mut r = rng::stream(6, &[]);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..3).map(|_| StandardNormal.sample(&mut r)).collect()).collect();
        let data = data_matrix(&rows);
        let opts = SelectOptions { splits: 5, ..Default::default() };
        let a = select_components(&data, 9, &opts).unwrap();
        let b = select_components(&data, 9, &opts).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.model, b.model);
    }
}
