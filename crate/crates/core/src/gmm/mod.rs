//! Finite Gaussian mixtures over log-transformed ego vectors.
//!
//! Each age group's ego vectors are mapped through `ln(x + 1)` and fitted
//! with a full-covariance mixture by EM ([`em`]). The number of components
//! is chosen by mean held-out BIC over repeated train/test splits
//! ([`select`]). Fitted models generate synthetic ego vectors ([`sample`]).

pub mod em;
pub mod sample;
pub mod select;

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::types::{AgeGroup, EgoVector};

pub use em::{fit_em, EmOptions, FitDiagnostics};
pub use sample::sample_ego;
pub use select::{fit_groups, select_components, BicTrace, FittedModels, GroupFit, SelectOptions, Selection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEgoVector {
    pub owner_age: AgeGroup,
    pub values: Vec<f64>,
}

pub fn log_transform(v: &EgoVector) -> LogEgoVector {
    LogEgoVector {
        owner_age: v.owner_age,
        values: v.counts.iter().map(|&c| (c as f64).ln_1p()).collect(),
    }
}

/// Inverse of [`log_transform`] on real values: `exp(x) - 1`.
pub fn inverse_transform(values: &[f64]) -> Vec<f64> {
    values.iter().map(|x| x.exp_m1()).collect()
}

/// Full-covariance Gaussian mixture. Covariances are stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
}

impl MixtureModel {
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn covariance(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.covariances[k])
    }

    /// Free parameters: means, covariance triangles and `n_g - 1` weights.
    pub fn parameter_count(&self) -> usize {
        parameter_count(self.components(), self.dim)
    }

    pub fn prepare(&self) -> Result<PreparedMixture> {
        PreparedMixture::new(self)
    }

    fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.covariances.len() != k {
            return Err(Error::InvalidInput("mixture component arrays disagree in length".into()));
        }
        if self.means.iter().any(|m| m.len() != self.dim) || self.covariances.iter().any(|c| c.len() != self.dim * self.dim) {
            return Err(Error::InvalidInput("mixture component has wrong dimension".into()));
        }
        Ok(())
    }
}

pub fn parameter_count(components: usize, dim: usize) -> usize {
    components * (dim + dim * (dim + 1) / 2) + components - 1
}

/// A mixture with Cholesky factors cached for density evaluation and sampling.
#[derive(Clone, Debug)]
pub struct PreparedMixture {
    pub(crate) dim: usize,
    pub(crate) log_weights: Vec<f64>,
    pub(crate) cumulative_weights: Vec<f64>,
    pub(crate) means: Vec<DVector<f64>>,
    pub(crate) factors: Vec<DMatrix<f64>>,
    pub(crate) log_norms: Vec<f64>,
}

pub(crate) fn cholesky(cov: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let n = cov.nrows();
    let mut jitter = 0.0;
    let scale = (0..n).map(|i| cov[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    for _ in 0..8 {
        let mut m = cov.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok(c);
        }
        jitter = if jitter == 0.0 { scale * 1e-12 } else { jitter * 100.0 };
    }
    Err(Error::InvalidInput("covariance matrix is not positive definite".into()))
}

impl PreparedMixture {
    pub fn new(model: &MixtureModel) -> Result<Self> {
        model.validate()?;
        let d = model.dim;
        let mut factors = Vec::with_capacity(model.components());
        let mut log_norms = Vec::with_capacity(model.components());
        for k in 0..model.components() {
            let l = cholesky(model.covariance(k))?.unpack();
            let log_det: f64 = (0..d).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
            log_norms.push(-0.5 * (d as f64 * (2.0 * PI).ln() + log_det));
            factors.push(l);
        }
        let total: f64 = model.weights.iter().sum();
        let mut acc = 0.0;
        let cumulative_weights = model
            .weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Ok(PreparedMixture {
            dim: d,
            log_weights: model.weights.iter().map(|w| (w / total).ln()).collect(),
            cumulative_weights,
            means: model.means.iter().map(|m| DVector::from_column_slice(m)).collect(),
            factors,
            log_norms,
        })
    }

    /// `log(phi_k N(x | mu_k, Sigma_k))` for every row of `data` (n x k).
    pub(crate) fn weighted_log_densities(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        let n = data.nrows();
        let k = self.means.len();
        let mut out = DMatrix::zeros(n, k);
        for c in 0..k {
            let mut centered = data.transpose();
            for mut col in centered.column_iter_mut() {
                col -= &self.means[c];
            }
            let solved = self.factors[c]
                .solve_lower_triangular(&centered)
                .expect("Cholesky factor has a positive diagonal");
            for i in 0..n {
                let maha = solved.column(i).norm_squared();
                out[(i, c)] = self.log_weights[c] + self.log_norms[c] - 0.5 * maha;
            }
        }
        out
    }

    /// Total log-likelihood of the rows of `data`.
    pub fn log_likelihood(&self, data: &DMatrix<f64>) -> f64 {
        let lp = self.weighted_log_densities(data);
        let mut buf = vec![0.0; lp.ncols()];
        (0..lp.nrows())
            .map(|i| {
                for (c, b) in buf.iter_mut().enumerate() {
                    *b = lp[(i, c)];
                }
                log_sum_exp(&buf)
            })
            .sum()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_likelihood(&DMatrix::from_row_slice(1, self.dim, x))
    }
}

/// Stack vectors as the rows of a matrix.
pub fn data_matrix<V: AsRef<[f64]>>(rows: &[V]) -> DMatrix<f64> {
    let d = rows.first().map_or(0, |r| r.as_ref().len());
    DMatrix::from_fn(rows.len(), d, |i, j| rows[i].as_ref()[j])
}

impl AsRef<[f64]> for LogEgoVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::CELLS;

    #[test]
    fn log_transform_values() {
        let mut v = EgoVector::zeros(AgeGroup::new(0).unwrap());
        assert!(log_transform(&v).values.iter().all(|&x| x == 0.0));
        v.counts[3] = 99;
        assert!((log_transform(&v).values[3] - 4.605_170_185_988_091).abs() < 1e-12);
    }

    #[test]
    fn log_transform_inverts() {
        let mut v = EgoVector::zeros(AgeGroup::new(0).unwrap());
        for (i, c) in [0u32, 1, 7, 120].into_iter().enumerate() {
            v.counts[i] = c;
        }
        let back = inverse_transform(&log_transform(&v).values);
        for (b, &c) in back.iter().zip(&v.counts) {
            assert!((b - c as f64).abs() < 1e-9 * (1.0 + c as f64));
        }
        assert_eq!(back.len(), CELLS);
    }

    #[test]
    fn parameter_count_matches_convention() {
        assert_eq!(parameter_count(1, 45), 45 + 45 * 46 / 2);
        assert_eq!(parameter_count(3, 45), 3 * (45 + 1035) + 2);
    }

    #[test]
    fn standard_normal_density() {
        let m = MixtureModel { dim: 2, weights: vec![1.0], means: vec![vec![0.0, 0.0]], covariances: vec![vec![1.0, 0.0, 0.0, 1.0]] };
        let p = m.prepare().unwrap();
        assert!((p.log_density(&[0.0, 0.0]) + (2.0 * PI).ln()).abs() < 1e-12);
        assert!((p.log_density(&[1.0, 0.0]) + (2.0 * PI).ln() + 0.5).abs() < 1e-12);
    }
}
