use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::population::PopulationSpec;
use crate::error::{Error, Result};
use crate::gmm::{sample_ego, FittedModels, PreparedMixture};
use crate::numeric::stochastic_round;
use crate::rng;
use crate::types::{cell, AgeGroup, DurationCategory, AGE_GROUPS, CELLS};

/// Per-node stub counts toward each (age group, duration) cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StubLedger {
    pub ages: Vec<AgeGroup>,
    /// Row-major `n x CELLS`.
    stubs: Vec<u32>,
}

impl StubLedger {
    pub fn new(ages: Vec<AgeGroup>, stubs: Vec<u32>) -> Result<Self> {
        if stubs.len() != ages.len() * CELLS {
            return Err(Error::InvalidInput(format!("{} stub cells for {} nodes", stubs.len(), ages.len())));
        }
        Ok(StubLedger { ages, stubs })
    }

    pub fn from_rows(ages: Vec<AgeGroup>, rows: &[Vec<u32>]) -> Result<Self> {
        if rows.iter().any(|r| r.len() != CELLS) {
            return Err(Error::InvalidInput("stub row has wrong length".into()));
        }
        Self::new(ages, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    pub fn node(&self, i: usize) -> &[u32] {
        &self.stubs[i * CELLS..(i + 1) * CELLS]
    }

    pub fn get(&self, i: usize, target: AgeGroup, duration: DurationCategory) -> u32 {
        self.stubs[i * CELLS + cell(target, duration)]
    }

    pub fn total(&self) -> u64 {
        self.stubs.iter().map(|&s| s as u64).sum()
    }

    /// `L[a][x]`: total stubs from nodes of age `a` toward cell `x`.
    pub fn directed_totals(&self) -> Vec<[u64; CELLS]> {
        let mut out = vec![[0u64; CELLS]; AGE_GROUPS];
        for (i, a) in self.ages.iter().enumerate() {
            for (x, &s) in self.node(i).iter().enumerate() {
                out[a.index()][x] += s as u64;
            }
        }
        out
    }

    /// Mean stub count per node of each age group.
    pub fn mean_degree_by_age(&self) -> [f64; AGE_GROUPS] {
        let mut sums = [0.0; AGE_GROUPS];
        let mut counts = [0usize; AGE_GROUPS];
        for (i, a) in self.ages.iter().enumerate() {
            sums[a.index()] += self.node(i).iter().map(|&s| s as f64).sum::<f64>();
            counts[a.index()] += 1;
        }
        std::array::from_fn(|a| if counts[a] == 0 { 0.0 } else { sums[a] / counts[a] as f64 })
    }
}

/// Assign node ages per `spec` and draw each node's stub vector from its
/// age group's mixture. Every node uses its own derived stream.
pub fn sample_stub_ledger(models: &FittedModels, spec: &PopulationSpec, seed: u64) -> Result<StubLedger> {
    spec.validate()?;
    let ages = spec.node_ages();
    let mut prepared: Vec<Option<PreparedMixture>> = vec![None; AGE_GROUPS];
    let sizes = spec.group_sizes();
    for a in AgeGroup::ALL {
        if sizes[a.index()] > 0 {
            let model = models.model_for(a).ok_or(Error::MissingModel(a))?;
            prepared[a.index()] = Some(model.prepare()?);
        }
    }
    let mut stubs = vec![0u32; ages.len() * CELLS];
    stubs.par_chunks_mut(CELLS).zip(ages.par_iter()).enumerate().for_each(|(i, (row, &a))| {
        let model = prepared[a.index()].as_ref().expect("prepared for populated groups");
        let v = sample_ego(model, a, &mut rng::stream(seed, &[i as u64]));
        row.copy_from_slice(&v.counts);
    });
    StubLedger::new(ages, stubs)
}

/// `s = (L + L') / (2 min(L, L'))`, or `None` when either side is zero.
pub fn scaling_factor(forward: u64, reverse: u64) -> Option<f64> {
    let lo = forward.min(reverse);
    (lo > 0).then(|| (forward + reverse) as f64 / (2.0 * lo as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockScaling {
    pub source: AgeGroup,
    pub target: AgeGroup,
    pub duration: DurationCategory,
    /// `L` from `source` toward `(target, duration)`.
    pub forward: u64,
    /// `L` from `target` toward `(source, duration)`.
    pub reverse: u64,
    /// `None` when one side is zero and the other is not.
    pub factor: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RebalanceReport {
    pub blocks: Vec<BlockScaling>,
    /// Blocks with stubs on one side only, left unscaled.
    pub one_sided: usize,
    pub stubs_before: u64,
    pub stubs_after: u64,
}

/// Scale the deficient side of every cross-age block `(a, b, tau)` by its
/// scaling factor and stochastically round the scaled cells. Within-group
/// blocks are their own reciprocal and are left alone.
pub fn rebalance_stubs<R: Rng + ?Sized>(ledger: &StubLedger, rng: &mut R) -> (StubLedger, RebalanceReport) {
    let totals = ledger.directed_totals();
    let mut factor = vec![[1.0f64; CELLS]; AGE_GROUPS];
    let mut report = RebalanceReport { stubs_before: ledger.total(), ..Default::default() };
    for a in AgeGroup::ALL {
        for b in AgeGroup::ALL.into_iter().filter(|b| b.index() > a.index()) {
            for tau in DurationCategory::ALL {
                let forward = totals[a.index()][cell(b, tau)];
                let reverse = totals[b.index()][cell(a, tau)];
                if forward == 0 && reverse == 0 {
                    continue;
                }
                let s = scaling_factor(forward, reverse);
                match s {
                    Some(s) if forward < reverse => factor[a.index()][cell(b, tau)] = s,
                    Some(s) if reverse < forward => factor[b.index()][cell(a, tau)] = s,
                    Some(_) => {}
                    None => report.one_sided += 1,
                }
                report.blocks.push(BlockScaling { source: a, target: b, duration: tau, forward, reverse, factor: s });
            }
        }
    }
    let mut stubs = ledger.stubs.clone();
    for (i, a) in ledger.ages.iter().enumerate() {
        for (x, s) in stubs[i * CELLS..(i + 1) * CELLS].iter_mut().enumerate() {
            let f = factor[a.index()][x];
            if f != 1.0 && *s > 0 {
                *s = stochastic_round(*s as f64 * f, rng) as u32;
            }
        }
    }
    let out = StubLedger { ages: ledger.ages.clone(), stubs };
    report.stubs_after = out.total();
    (out, report)
}
