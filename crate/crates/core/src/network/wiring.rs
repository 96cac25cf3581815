use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{ContactNetwork, Edge};
use super::ledger::StubLedger;
use crate::error::Result;
use crate::rng;
use crate::types::{AgeGroup, DurationCategory, AGE_GROUPS};

/// Uniform draws of a partner before falling back to an explicit scan.
const REJECTION_TRIES: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockWiring {
    pub source: AgeGroup,
    pub target: AgeGroup,
    pub duration: DurationCategory,
    /// Stubs from `source` toward `(target, duration)`.
    pub forward: u64,
    /// Stubs from `target` toward `(source, duration)`; equal to `forward`
    /// for within-group blocks, which share one pool.
    pub reverse: u64,
    pub edges: u64,
    pub leftover: u64,
    /// Nodes dropped because every remaining partner was already linked.
    pub saturated: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WiringReport {
    pub blocks: Vec<BlockWiring>,
    pub edges: u64,
    pub leftover: u64,
}

/// Nodes with stubs remaining in one block, with O(1) removal.
struct Pool {
    nodes: Vec<u32>,
    remaining: Vec<u32>,
    pos: Vec<usize>,
}

impl Pool {
    fn new(members: &[u32], stubs: impl Fn(u32) -> u32) -> Self {
        let mut pool = Pool { nodes: Vec::new(), remaining: Vec::new(), pos: vec![usize::MAX; members.len()] };
        for (local, &node) in members.iter().enumerate() {
            let s = stubs(node);
            if s > 0 {
                pool.pos[local] = pool.nodes.len();
                pool.nodes.push(local as u32);
                pool.remaining.push(s);
            }
        }
        pool
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn remove_at(&mut self, k: usize) {
        let local = self.nodes[k] as usize;
        self.pos[local] = usize::MAX;
        self.nodes.swap_remove(k);
        self.remaining.swap_remove(k);
        if k < self.nodes.len() {
            self.pos[self.nodes[k] as usize] = k;
        }
    }

    /// Use one stub of the node at slot `k`; drop it when exhausted.
    fn consume(&mut self, k: usize) {
        self.remaining[k] -= 1;
        if self.remaining[k] == 0 {
            self.remove_at(k);
        }
    }

    fn total(&self) -> u64 {
        self.remaining.iter().map(|&r| r as u64).sum()
    }
}

fn key(i: u32, j: u32) -> (u32, u32) {
    (i.min(j), i.max(j))
}

struct PairWirer<'a> {
    members_a: &'a [u32],
    members_b: &'a [u32],
    linked: HashSet<(u32, u32)>,
    edges: Vec<Edge>,
}

impl PairWirer<'_> {
    /// Slot in `pool_b` of a uniformly chosen partner not yet linked to
    /// `i`, excluding slot `skip` (used for within-group blocks).
    fn partner<R: Rng + ?Sized>(&self, i: u32, pool_b: &Pool, skip: Option<usize>, rng: &mut R) -> Option<usize> {
        let open = |k: usize| {
            let j = self.members_b[pool_b.nodes[k] as usize];
            Some(k) != skip && !self.linked.contains(&key(i, j))
        };
        for _ in 0..REJECTION_TRIES {
            let k = rng.random_range(0..pool_b.len());
            if open(k) {
                return Some(k);
            }
        }
        let candidates: Vec<usize> = (0..pool_b.len()).filter(|&k| open(k)).collect();
        (!candidates.is_empty()).then(|| candidates[rng.random_range(0..candidates.len())])
    }

    fn link(&mut self, i: u32, j: u32, tau: DurationCategory) {
        self.linked.insert(key(i, j));
        self.edges.push(Edge::new(i, j, tau));
    }

    fn cross_block<R: Rng + ?Sized>(&mut self, ledger: &StubLedger, a: AgeGroup, b: AgeGroup, tau: DurationCategory, rng: &mut R) -> BlockWiring {
        let mut pa = Pool::new(self.members_a, |i| ledger.get(i as usize, b, tau));
        let mut pb = Pool::new(self.members_b, |j| ledger.get(j as usize, a, tau));
        let (forward, reverse) = (pa.total(), pb.total());
        let (mut edges, mut saturated) = (0, 0);
        while pa.len() > 0 && pb.len() > 0 {
            let ka = rng.random_range(0..pa.len());
            let i = self.members_a[pa.nodes[ka] as usize];
            match self.partner(i, &pb, None, rng) {
                Some(kb) => {
                    let j = self.members_b[pb.nodes[kb] as usize];
                    self.link(i, j, tau);
                    pa.consume(ka);
                    pb.consume(kb);
                    edges += 1;
                }
                None => {
                    pa.remove_at(ka);
                    saturated += 1;
                }
            }
        }
        BlockWiring { source: a, target: b, duration: tau, forward, reverse, edges, leftover: forward + reverse - 2 * edges, saturated }
    }

    fn within_block<R: Rng + ?Sized>(&mut self, ledger: &StubLedger, a: AgeGroup, tau: DurationCategory, rng: &mut R) -> BlockWiring {
        let mut pool = Pool::new(self.members_a, |i| ledger.get(i as usize, a, tau));
        let total = pool.total();
        let (mut edges, mut saturated) = (0, 0);
        while pool.len() > 1 {
            let ki = rng.random_range(0..pool.len());
            let i = self.members_a[pool.nodes[ki] as usize];
            match self.partner(i, &pool, Some(ki), rng) {
                Some(kj) => {
                    let j = self.members_a[pool.nodes[kj] as usize];
                    self.link(i, j, tau);
                    let local_i = pool.nodes[ki] as usize;
                    pool.consume(kj);
                    // `consume` may have moved node i into the vacated slot.
                    pool.consume(pool.pos[local_i]);
                    edges += 1;
                }
                None => {
                    pool.remove_at(ki);
                    saturated += 1;
                }
            }
        }
        BlockWiring { source: a, target: a, duration: tau, forward: total, reverse: total, edges, leftover: total - 2 * edges, saturated }
    }
}

/// Stratified configuration-model wiring of a finalized stub ledger.
///
/// Age pairs are independent (edges for `(a, b)` only join nodes of those
/// two groups) and run in parallel, each on its own derived stream.
/// Duration categories within a pair run in order and share the pair's
/// linked set, so no pair of nodes is joined twice.
pub fn wire_configuration(ledger: &StubLedger, seed: u64) -> Result<(ContactNetwork, WiringReport)> {
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); AGE_GROUPS];
    for (i, a) in ledger.ages.iter().enumerate() {
        members[a.index()].push(i as u32);
    }
    let pairs: Vec<(AgeGroup, AgeGroup)> = AgeGroup::ALL
        .iter()
        .flat_map(|&a| AgeGroup::ALL.iter().filter(move |b| b.index() >= a.index()).map(move |&b| (a, b)))
        .collect();
    let parts: Vec<(Vec<Edge>, Vec<BlockWiring>)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut r = rng::stream(seed, &[a.index() as u64, b.index() as u64]);
            let mut w = PairWirer { members_a: &members[a.index()], members_b: &members[b.index()], linked: HashSet::new(), edges: Vec::new() };
            let blocks: Vec<BlockWiring> = DurationCategory::ALL
                .iter()
                .map(|&tau| if a == b { w.within_block(ledger, a, tau, &mut r) } else { w.cross_block(ledger, a, b, tau, &mut r) })
                .filter(|blk| blk.forward > 0 || blk.reverse > 0)
                .collect();
            (w.edges, blocks)
        })
        .collect();
    let mut edges = Vec::new();
    let mut report = WiringReport::default();
    for (e, blocks) in parts {
        edges.extend(e);
        report.blocks.extend(blocks);
    }
    report.edges = edges.len() as u64;
    report.leftover = report.blocks.iter().map(|b| b.leftover).sum();
    debug_assert!(report.blocks.iter().all(|b| b.forward + b.reverse >= 2 * b.edges));
    Ok((ContactNetwork::new(ledger.ages.clone(), edges)?, report))
}
