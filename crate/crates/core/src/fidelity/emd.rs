//! Earth mover's distance between contact-age histograms.
//!
//! Mass `min(|d|, |k|)` is moved between the two histograms at ground cost
//! `|a - b| / |d|`, solved as a min-cost flow on the bipartite network
//! source -> data bins -> model bins -> sink. Unmatched mass is charged
//! by [`excess_penalty`].

use serde::{Deserialize, Serialize};

use crate::types::{AgeGroup, EgoVector, AGE_GROUPS};

/// Excess-mass penalty scale.
pub const PENALTY_C: f64 = 10.0;

const EPS: f64 = 1e-12;

/// Contacts per contact-age group for one ego.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgeHistogram {
    pub owner_age: AgeGroup,
    pub mass: [f64; AGE_GROUPS],
}

impl AgeHistogram {
    pub fn new(owner_age: AgeGroup, mass: [f64; AGE_GROUPS]) -> Self {
        AgeHistogram { owner_age, mass }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Bit pattern of the masses, for grouping identical histograms.
    pub(crate) fn key(&self) -> [u64; AGE_GROUPS] {
        self.mass.map(f64::to_bits)
    }
}

impl From<&EgoVector> for AgeHistogram {
    fn from(v: &EgoVector) -> Self {
        AgeHistogram { owner_age: v.owner_age, mass: v.by_age().map(|c| c as f64) }
    }
}

/// `c / ((|d| + |k|) / 2 + 1) * | |d| - |k| |`.
pub fn excess_penalty(d_total: f64, k_total: f64) -> f64 {
    PENALTY_C / ((d_total + k_total) / 2.0 + 1.0) * (d_total - k_total).abs()
}

struct Arc {
    to: usize,
    cap: f64,
    cost: f64,
}

/// Successive shortest paths with Bellman-Ford on a small dense network.
struct FlowNetwork {
    arcs: Vec<Arc>,
    out: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        FlowNetwork { arcs: Vec::new(), out: vec![Vec::new(); nodes] }
    }

    fn add(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        self.out[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap, cost });
        self.out[to].push(self.arcs.len());
        self.arcs.push(Arc { to: from, cap: 0.0, cost: -cost });
    }

    /// Send up to `amount` from `s` to `t` at minimum cost; returns the cost.
    fn min_cost_flow(&mut self, s: usize, t: usize, mut amount: f64) -> f64 {
        let n = self.out.len();
        let mut total = 0.0;
        while amount > EPS {
            let mut dist = vec![f64::INFINITY; n];
            let mut via = vec![usize::MAX; n];
            dist[s] = 0.0;
            for _ in 0..n {
                let mut changed = false;
                for u in 0..n {
                    if dist[u].is_infinite() {
                        continue;
                    }
                    for &e in &self.out[u] {
                        let arc = &self.arcs[e];
                        if arc.cap > EPS && dist[u] + arc.cost < dist[arc.to] - EPS {
                            dist[arc.to] = dist[u] + arc.cost;
                            via[arc.to] = e;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if dist[t].is_infinite() {
                break;
            }
            let mut push = amount;
            let mut v = t;
            while v != s {
                let e = via[v];
                push = push.min(self.arcs[e].cap);
                v = self.arcs[e ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let e = via[v];
                self.arcs[e].cap -= push;
                self.arcs[e ^ 1].cap += push;
                v = self.arcs[e ^ 1].to;
            }
            total += push * dist[t];
            amount -= push;
        }
        total
    }
}

/// Minimum of `sum T_ab |a - b|` over plans moving `min(|d|, |k|)` mass
/// with row sums at most `d` and column sums at most `k`.
pub fn transport_cost(d: &[f64; AGE_GROUPS], k: &[f64; AGE_GROUPS]) -> f64 {
    let amount = d.iter().sum::<f64>().min(k.iter().sum());
    if amount <= 0.0 {
        return 0.0;
    }
    let (s, t) = (0, 2 * AGE_GROUPS + 1);
    let mut net = FlowNetwork::new(2 * AGE_GROUPS + 2);
    for a in 0..AGE_GROUPS {
        if d[a] > 0.0 {
            net.add(s, 1 + a, d[a], 0.0);
        }
        if k[a] > 0.0 {
            net.add(1 + AGE_GROUPS + a, t, k[a], 0.0);
        }
    }
    for a in (0..AGE_GROUPS).filter(|&a| d[a] > 0.0) {
        for b in (0..AGE_GROUPS).filter(|&b| k[b] > 0.0) {
            net.add(1 + a, 1 + AGE_GROUPS + b, f64::INFINITY, a.abs_diff(b) as f64);
        }
    }
    net.min_cost_flow(s, t, amount)
}

/// Distance from data ego `d` to model ego `k`.
pub fn emd(d: &AgeHistogram, k: &AgeHistogram) -> f64 {
    let (dt, kt) = (d.total(), k.total());
    if dt == 0.0 && kt == 0.0 {
        return 0.0;
    }
    let flow = if dt > 0.0 { transport_cost(&d.mass, &k.mass) / dt } else { 0.0 };
    flow + excess_penalty(dt, kt)
}
