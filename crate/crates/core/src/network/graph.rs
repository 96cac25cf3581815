use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{cell, AgeGroup, DurationCategory, EgoVector, AGE_GROUPS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: u32,
    pub j: u32,
    pub duration: DurationCategory,
    pub weight: f64,
}

impl Edge {
    pub fn new(i: u32, j: u32, duration: DurationCategory) -> Self {
        Edge { i, j, duration, weight: duration.weight() }
    }

    pub fn other(&self, node: u32) -> u32 {
        if self.i == node {
            self.j
        } else {
            self.i
        }
    }
}

/// Undirected simple graph with duration-labelled edges and per-node
/// adjacency in compressed form.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactNetwork {
    ages: Vec<AgeGroup>,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    /// `(neighbour, edge index)` per adjacency slot.
    adjacency: Vec<(u32, u32)>,
}

impl ContactNetwork {
    /// Build and validate: endpoints in range, no self-loops, no repeated pairs.
    pub fn new(ages: Vec<AgeGroup>, edges: Vec<Edge>) -> Result<Self> {
        let n = ages.len();
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for e in &edges {
            if e.i as usize >= n || e.j as usize >= n {
                return Err(Error::InvalidInput(format!("edge ({}, {}) out of range for {n} nodes", e.i, e.j)));
            }
            if e.i == e.j {
                return Err(Error::InvalidInput(format!("self-loop at node {}", e.i)));
            }
            pairs.push((e.i.min(e.j), e.i.max(e.j)));
        }
        pairs.sort_unstable();
        if let Some(w) = pairs.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!("repeated edge ({}, {})", w[0].0, w[0].1)));
        }
        let mut degree = vec![0usize; n + 1];
        for e in &edges {
            degree[e.i as usize + 1] += 1;
            degree[e.j as usize + 1] += 1;
        }
        for k in 1..=n {
            degree[k] += degree[k - 1];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let mut adjacency = vec![(0u32, 0u32); 2 * edges.len()];
        for (k, e) in edges.iter().enumerate() {
            adjacency[fill[e.i as usize]] = (e.j, k as u32);
            fill[e.i as usize] += 1;
            adjacency[fill[e.j as usize]] = (e.i, k as u32);
            fill[e.j as usize] += 1;
        }
        Ok(ContactNetwork { ages, edges, offsets, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.ages.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn ages(&self) -> &[AgeGroup] {
        &self.ages
    }

    pub fn age(&self, i: usize) -> AgeGroup {
        self.ages[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Neighbours of `i` with the connecting edge.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (u32, &Edge)> + '_ {
        self.adjacency[self.offsets[i]..self.offsets[i + 1]].iter().map(|&(j, k)| (j, &self.edges[k as usize]))
    }

    /// Reset every edge weight to `f(tau) / max f` of its duration.
    pub fn assign_weights(&mut self) {
        for e in &mut self.edges {
            e.weight = e.duration.weight();
        }
    }

    /// The node's realized contacts as an ego vector.
    pub fn ego_vector(&self, i: usize) -> EgoVector {
        let mut v = EgoVector::zeros(self.ages[i]);
        for (j, e) in self.neighbors(i) {
            v.counts[cell(self.ages[j as usize], e.duration)] += 1;
        }
        v
    }

    pub fn ego_vectors(&self) -> Vec<EgoVector> {
        (0..self.node_count()).map(|i| self.ego_vector(i)).collect()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.ages.is_empty() {
            return 0.0;
        }
        2.0 * self.edges.len() as f64 / self.ages.len() as f64
    }

    pub fn mean_degree_by_age(&self) -> [f64; AGE_GROUPS] {
        let mut sums = [0.0; AGE_GROUPS];
        let mut counts = [0usize; AGE_GROUPS];
        for (i, a) in self.ages.iter().enumerate() {
            sums[a.index()] += self.degree(i) as f64;
            counts[a.index()] += 1;
        }
        std::array::from_fn(|a| if counts[a] == 0 { 0.0 } else { sums[a] / counts[a] as f64 })
    }

    /// Degree counts from node age `a` toward age `b`, per node of age `a`.
    pub fn degrees_toward(&self, a: AgeGroup, b: AgeGroup) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&i| self.ages[i] == a)
            .map(|i| self.neighbors(i).filter(|(j, _)| self.ages[*j as usize] == b).count())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ages(n: usize) -> Vec<AgeGroup> {
        vec![AgeGroup::new(0).unwrap(); n]
    }

    #[test]
    fn rejects_self_loops_and_duplicates() {
        let d = DurationCategory::SHORTEST;
        assert!(ContactNetwork::new(ages(3), vec![Edge::new(1, 1, d)]).is_err());
        assert!(ContactNetwork::new(ages(3), vec![Edge::new(0, 1, d), Edge::new(1, 0, d)]).is_err());
        assert!(ContactNetwork::new(ages(3), vec![Edge::new(0, 3, d)]).is_err());
    }

    #[test]
    fn adjacency_matches_edges() {
        let d = DurationCategory::LONGEST;
        let g = ContactNetwork::new(ages(4), vec![Edge::new(0, 1, d), Edge::new(1, 2, d), Edge::new(3, 1, d)]).unwrap();
        assert_eq!(g.degree(1), 3);
        assert_eq!(g.degree(0), 1);
        let mut nb: Vec<u32> = g.neighbors(1).map(|(j, _)| j).collect();
        nb.sort();
        assert_eq!(nb, vec![0, 2, 3]);
        assert_eq!(g.ego_vector(1).total(), 3);
        assert_eq!(g.mean_degree(), 1.5);
    }

    #[test]
    fn weights_follow_duration_midpoints() {
        assert_eq!(DurationCategory::LONGEST.weight(), 1.0);
        assert_eq!(DurationCategory::new(3).unwrap().weight(), 0.3125);
        assert!((DurationCategory::SHORTEST.weight() - 2.5 / 480.0).abs() < 1e-15);
        let mut g = ContactNetwork::new(ages(2), vec![Edge { i: 0, j: 1, duration: DurationCategory::new(2).unwrap(), weight: 0.0 }]).unwrap();
        g.assign_weights();
        assert_eq!(g.edges()[0].weight, 0.078125);
    }
}
