use serde::{Deserialize, Serialize};

use super::gillespie::EpidemicTrace;
use crate::network::ContactNetwork;
use crate::types::{AGE_GROUPS, DURATIONS};

/// Pooled `sum |g3| / sum |g2|` over runs; `None` when no run has a
/// second generation.
pub fn estimate_r0(traces: &[EpidemicTrace]) -> Option<f64> {
    let g2: u64 = traces.iter().map(|t| t.generation_size(2)).sum();
    let g3: u64 = traces.iter().map(|t| t.generation_size(3)).sum();
    (g2 > 0).then(|| g3 as f64 / g2 as f64)
}

/// Mean degree of generation-2 cases minus one, pooled over runs: no case
/// can infect more than its neighbours other than its infector.
pub fn max_r0(traces: &[EpidemicTrace], network: &ContactNetwork) -> Option<f64> {
    let mut count = 0u64;
    let mut degree = 0u64;
    for inf in traces.iter().flat_map(|t| &t.infections).filter(|i| i.generation == 2) {
        count += 1;
        degree += network.degree(inf.node as usize) as u64;
    }
    (count > 0).then(|| degree as f64 / count as f64 - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalSize {
    pub value: f64,
    /// Runs averaged (outbreaks at or above the threshold).
    pub included: usize,
    pub excluded: usize,
}

/// Mean `R(end) / n` over runs that reached `threshold * n` cases, or 0
/// when `r0 < 1`.
pub fn final_size(traces: &[EpidemicTrace], r0: Option<f64>, threshold: f64) -> FinalSize {
    if r0.is_none_or(|r| r < 1.0) {
        return FinalSize { value: 0.0, included: 0, excluded: traces.len() };
    }
    let sizes: Vec<f64> = traces.iter().map(|t| t.recovered() as f64 / t.n as f64).collect();
    let kept: Vec<f64> = sizes.iter().copied().filter(|&s| s >= threshold).collect();
    let value = if kept.is_empty() { 0.0 } else { kept.iter().sum::<f64>() / kept.len() as f64 };
    FinalSize { value, included: kept.len(), excluded: sizes.len() - kept.len() }
}

/// Offspring counts of every generation-2 case, pooled over runs.
pub fn secondary_cases(traces: &[EpidemicTrace]) -> Vec<u64> {
    traces.iter().flat_map(|t| t.offspring(2)).collect()
}

/// Infections within the generation window `[from, to]`.
fn window(traces: &[EpidemicTrace], generations: (u32, u32)) -> impl Iterator<Item = &super::gillespie::Infection> {
    traces.iter().flat_map(|t| &t.infections).filter(move |i| i.generation >= generations.0 && i.generation <= generations.1 && i.infector.is_some())
}

/// Share of infections in the window transmitted over each duration.
pub fn duration_contribution(traces: &[EpidemicTrace], generations: (u32, u32)) -> Option<[f64; DURATIONS]> {
    let mut counts = [0u64; DURATIONS];
    for inf in window(traces, generations) {
        counts[inf.via.expect("transmissions carry an edge duration").index()] += 1;
    }
    let total: u64 = counts.iter().sum();
    (total > 0).then(|| counts.map(|c| c as f64 / total as f64))
}

/// `M[a][b]`: infections in the window from infector age `a` to infectee age `b`.
pub fn age_matrix(traces: &[EpidemicTrace], network: &ContactNetwork, generations: (u32, u32)) -> [[f64; AGE_GROUPS]; AGE_GROUPS] {
    let mut m = [[0.0; AGE_GROUPS]; AGE_GROUPS];
    for inf in window(traces, generations) {
        let a = network.age(inf.infector.expect("window excludes index cases") as usize).index();
        let b = network.age(inf.node as usize).index();
        m[a][b] += 1.0;
    }
    m
}

/// Nonnegative left Perron vector of `m` (`x M = lambda x`), normalized to
/// sum 1: the stable age distribution of cases under the transmission
/// counts. Power iteration on `M / max + I`, which has the same
/// eigenvectors and a unique dominant eigenvalue on the Perron root.
pub fn leading_left_eigenvector(m: &[[f64; AGE_GROUPS]; AGE_GROUPS]) -> Option<[f64; AGE_GROUPS]> {
    let scale = m.iter().flatten().copied().fold(0.0, f64::max);
    if scale <= 0.0 {
        return None;
    }
    let mut x = [1.0 / AGE_GROUPS as f64; AGE_GROUPS];
    for _ in 0..100_000 {
        let mut y = x;
        for b in 0..AGE_GROUPS {
            y[b] += (0..AGE_GROUPS).map(|a| x[a] * m[a][b] / scale).sum::<f64>();
        }
        let s: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= s);
        let delta: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = y;
        if delta < 1e-15 {
            break;
        }
    }
    Some(x)
}

pub fn age_contribution(traces: &[EpidemicTrace], network: &ContactNetwork, generations: (u32, u32)) -> Option<[f64; AGE_GROUPS]> {
    leading_left_eigenvector(&age_matrix(traces, network, generations))
}
