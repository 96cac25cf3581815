use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::largest_remainder;
use crate::types::{AgeGroup, AGE_GROUPS};

/// Census-like age proportions used when a config does not supply its own.
pub const DEFAULT_PROPORTIONS: [f64; AGE_GROUPS] = [0.057, 0.083, 0.071, 0.155, 0.135, 0.125, 0.135, 0.11, 0.129];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub n: usize,
    pub age_proportions: [f64; AGE_GROUPS],
}

impl PopulationSpec {
    pub fn new(n: usize, age_proportions: [f64; AGE_GROUPS]) -> Result<Self> {
        let spec = PopulationSpec { n, age_proportions };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(n: usize) -> Self {
        PopulationSpec { n, age_proportions: [1.0 / AGE_GROUPS as f64; AGE_GROUPS] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("population size must be at least 1".into()));
        }
        if self.age_proportions.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput("age proportions must be nonnegative".into()));
        }
        let sum: f64 = self.age_proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("age proportions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Nodes per age group by largest-remainder apportionment of `n * p`.
    pub fn group_sizes(&self) -> [usize; AGE_GROUPS] {
        let v = largest_remainder(self.n, &self.age_proportions);
        std::array::from_fn(|a| v[a])
    }

    /// Node ages, grouped in ascending age order.
    pub fn node_ages(&self) -> Vec<AgeGroup> {
        self.group_sizes()
            .iter()
            .zip(AgeGroup::ALL)
            .flat_map(|(&k, a)| std::iter::repeat_n(a, k))
            .collect()
    }
}
