use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PreparedMixture;
use crate::numeric::stochastic_round;
use crate::types::{AgeGroup, EgoVector};

/// Largest count a sampled cell may take. Only reachable through far tails
/// of the Gaussian, where `exp` would otherwise overflow the count type.
pub const MAX_CELL_COUNT: f64 = 1.0e6;

impl PreparedMixture {
    /// Draw one vector in log space.
    pub fn sample_log<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let u: f64 = rng.random();
        let k = self
            .cumulative_weights
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative_weights.len() - 1);
        let eps = DVector::from_fn(self.dim, |_, _| StandardNormal.sample(rng));
        &self.means[k] + &self.factors[k] * eps
    }

    /// Real-valued contact counts `max(exp(z) - 1, 0)` before rounding.
    pub fn sample_counts<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_log(rng).iter().map(|z| z.exp_m1().clamp(0.0, MAX_CELL_COUNT)).collect()
    }
}

/// Draw a synthetic ego vector: Gaussian draw, inverse log transform,
/// negatives clamped to zero, stochastic rounding to integers.
pub fn sample_ego<R: Rng + ?Sized>(model: &PreparedMixture, owner_age: AgeGroup, rng: &mut R) -> EgoVector {
    let counts = model
        .sample_counts(rng)
        .into_iter()
        .map(|x| stochastic_round(x, rng) as u32)
        .collect();
    EgoVector { owner_age, counts }
}
