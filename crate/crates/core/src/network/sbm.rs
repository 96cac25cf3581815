use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{ContactNetwork, Edge};
use super::population::PopulationSpec;
use crate::error::{Error, Result};
use crate::types::{AgeGroup, DurationCategory, EgoVector, AGE_GROUPS, DURATIONS};

/// Mean reported contacts by respondent age (row) and contact age (column),
/// with the duration-resolved decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactMatrix {
    pub c: [[f64; AGE_GROUPS]; AGE_GROUPS],
    pub c_tau: [[[f64; DURATIONS]; AGE_GROUPS]; AGE_GROUPS],
    pub respondents: [usize; AGE_GROUPS],
    /// Rows with no respondents; left as zeros.
    pub empty_rows: Vec<AgeGroup>,
}

impl ContactMatrix {
    pub fn zeros() -> Self {
        ContactMatrix {
            c: [[0.0; AGE_GROUPS]; AGE_GROUPS],
            c_tau: [[[0.0; DURATIONS]; AGE_GROUPS]; AGE_GROUPS],
            respondents: [0; AGE_GROUPS],
            empty_rows: AgeGroup::ALL.to_vec(),
        }
    }

    /// Recompute `c` as the sum of `c_tau` over durations.
    fn sum_durations(&mut self) {
        for a in 0..AGE_GROUPS {
            for b in 0..AGE_GROUPS {
                self.c[a][b] = self.c_tau[a][b].iter().sum();
            }
        }
    }

    /// Age-free variant: every respondent pooled, contacts spread over
    /// contact ages in proportion to the population, so that all pairs of
    /// nodes end up linked with the same probability.
    pub fn age_free(vectors: &[EgoVector], proportions: &[f64; AGE_GROUPS]) -> Self {
        let mut m = ContactMatrix::zeros();
        let mut per_tau = [0.0; DURATIONS];
        for v in vectors {
            for (k, &c) in v.counts.iter().enumerate() {
                per_tau[k % DURATIONS] += c as f64;
            }
        }
        let n = vectors.len().max(1) as f64;
        for row in m.c_tau.iter_mut() {
            for (cells, p) in row.iter_mut().zip(proportions) {
                for (x, t) in cells.iter_mut().zip(&per_tau) {
                    *x = t / n * p;
                }
            }
        }
        m.respondents = [vectors.len(); AGE_GROUPS];
        m.empty_rows = if vectors.is_empty() { AgeGroup::ALL.to_vec() } else { Vec::new() };
        m.sum_durations();
        m
    }

    /// Replace `C` by its reciprocal form for group sizes `sizes`:
    /// `(C_ab n_a + C_ba n_b) / (2 n_a)`, so that the implied contact totals
    /// `n_a C_ab` and `n_b C_ba` agree. Applied per duration.
    pub fn reciprocal(&self, sizes: &[usize; AGE_GROUPS]) -> Self {
        let mut out = self.clone();
        for a in 0..AGE_GROUPS {
            for b in 0..AGE_GROUPS {
                for t in 0..DURATIONS {
                    out.c_tau[a][b][t] = if sizes[a] == 0 {
                        0.0
                    } else {
                        let (na, nb) = (sizes[a] as f64, sizes[b] as f64);
                        (self.c_tau[a][b][t] * na + self.c_tau[b][a][t] * nb) / (2.0 * na)
                    };
                }
            }
        }
        out.sum_durations();
        out
    }
}

/// `C_ab` = mean over respondents of age `a` of their contacts to age `b`.
pub fn build_contact_matrix(vectors: &[EgoVector]) -> ContactMatrix {
    let mut m = ContactMatrix::zeros();
    for v in vectors {
        let a = v.owner_age.index();
        m.respondents[a] += 1;
        for (k, &c) in v.counts.iter().enumerate() {
            m.c_tau[a][k / DURATIONS][k % DURATIONS] += c as f64;
        }
    }
    for a in 0..AGE_GROUPS {
        let r = m.respondents[a];
        if r > 0 {
            for row in m.c_tau[a].iter_mut() {
                for x in row.iter_mut() {
                    *x /= r as f64;
                }
            }
        }
    }
    m.empty_rows = AgeGroup::ALL.into_iter().filter(|a| m.respondents[a.index()] == 0).collect();
    m.sum_durations();
    m
}

/// Edge probability for each block after reciprocal symmetrization:
/// `C_ab / n_b` across groups and `C_aa / (n_a - 1)` within a group, so a
/// node's expected degree toward `b` is `C_ab`.
pub fn block_probabilities(cm: &ContactMatrix, sizes: &[usize; AGE_GROUPS]) -> Result<[[f64; AGE_GROUPS]; AGE_GROUPS]> {
    let sym = cm.reciprocal(sizes);
    let mut p = [[0.0; AGE_GROUPS]; AGE_GROUPS];
    for a in 0..AGE_GROUPS {
        for b in 0..AGE_GROUPS {
            let partners = if a == b { sizes[b].saturating_sub(1) } else { sizes[b] };
            if sizes[a] == 0 || partners == 0 {
                continue;
            }
            p[a][b] = sym.c[a][b] / partners as f64;
            if p[a][b] > 1.0 {
                return Err(Error::ProbabilityOverflow {
                    from: AgeGroup::ALL[a],
                    to: AgeGroup::ALL[b],
                    probability: p[a][b],
                });
            }
        }
    }
    Ok(p)
}

/// Visit the indices of successes among `m` Bernoulli(`p`) trials by
/// geometric skipping.
fn bernoulli_indices<R: Rng + ?Sized>(m: u64, p: f64, rng: &mut R, mut visit: impl FnMut(u64)) {
    if p <= 0.0 || m == 0 {
        return;
    }
    if p >= 1.0 {
        (0..m).for_each(visit);
        return;
    }
    let log_q = (-p).ln_1p();
    let mut idx: u64 = 0;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_q).floor();
        if skip >= (m - idx) as f64 {
            return;
        }
        idx += skip as u64;
        visit(idx);
        idx += 1;
        if idx >= m {
            return;
        }
    }
}

/// Unordered pair `(i, j)`, `i < j`, with linear index `k` in row order
/// `(0,1), (0,2), (1,2), (0,3), ...`.
fn triangle_pair(k: u64) -> (u64, u64) {
    let mut j = ((1.0 + (1.0 + 8.0 * k as f64).sqrt()) / 2.0).floor() as u64;
    while j * (j - 1) / 2 > k {
        j -= 1;
    }
    while (j + 1) * j / 2 <= k {
        j += 1;
    }
    (k - j * (j - 1) / 2, j)
}

fn draw_duration<R: Rng + ?Sized>(weights: &[f64; DURATIONS], rng: &mut R) -> DurationCategory {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (t, &w) in weights.iter().enumerate() {
        if u < w {
            return DurationCategory::ALL[t];
        }
        u -= w;
    }
    *DurationCategory::ALL.iter().rev().find(|t| weights[t.index()] > 0.0).unwrap_or(&DurationCategory::LONGEST)
}

/// Stochastic block model with duration-labelled edges. Each pair of nodes
/// is linked independently with its block probability; the duration of an
/// edge is drawn with probability `C^tau_ab / C_ab`.
pub fn generate_sbm<R: Rng + ?Sized>(cm: &ContactMatrix, spec: &PopulationSpec, rng: &mut R) -> Result<ContactNetwork> {
    spec.validate()?;
    let sizes = spec.group_sizes();
    let p = block_probabilities(cm, &sizes)?;
    let sym = cm.reciprocal(&sizes);
    let ages = spec.node_ages();
    let mut start = [0u64; AGE_GROUPS];
    for a in 1..AGE_GROUPS {
        start[a] = start[a - 1] + sizes[a - 1] as u64;
    }
    let mut edges = Vec::new();
    for a in 0..AGE_GROUPS {
        for b in a..AGE_GROUPS {
            let (na, nb) = (sizes[a] as u64, sizes[b] as u64);
            if a == b {
                bernoulli_indices(na * na.saturating_sub(1) / 2, p[a][a], rng, |k| {
                    let (i, j) = triangle_pair(k);
                    edges.push((start[a] + i, start[a] + j));
                });
            } else {
                bernoulli_indices(na * nb, p[a][b], rng, |k| {
                    edges.push((start[a] + k / nb, start[b] + k % nb));
                });
            }
        }
    }
    let labelled = label_edges(edges, &ages, &sym, rng);
    ContactNetwork::new(ages, labelled)
}

fn label_edges<R: Rng + ?Sized>(pairs: Vec<(u64, u64)>, ages: &[AgeGroup], sym: &ContactMatrix, rng: &mut R) -> Vec<Edge> {
    pairs
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (ages[i as usize].index(), ages[j as usize].index());
            Edge::new(i as u32, j as u32, draw_duration(&sym.c_tau[a][b], rng))
        })
        .collect()
}
