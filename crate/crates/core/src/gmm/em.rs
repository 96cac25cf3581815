//! Expectation-maximisation for full-covariance Gaussian mixtures.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MixtureModel, PreparedMixture};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmOptions {
    /// Stop when the relative log-likelihood improvement falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Added to every covariance diagonal after each M-step.
    pub reg_covar: f64,
    /// Independent k-means++ initialisations; the best final fit is kept.
    pub restarts: usize,
    /// Components whose responsibility mass drops below this are re-seeded.
    pub collapse_floor: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { tol: 1e-6, max_iter: 500, reg_covar: 1e-6, restarts: 3, collapse_floor: 1e-3 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Log-likelihood of the parameters at each accepted iteration.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
    /// An M-step lowered the likelihood (possible only through the covariance
    /// ridge); the previous parameters were kept and iteration stopped.
    pub stopped_on_decrease: bool,
    /// Iterations (indices into `log_likelihood`) preceded by a re-seed.
    pub reseeded_at: Vec<usize>,
    pub restart: usize,
}

impl FitDiagnostics {
    pub fn final_log_likelihood(&self) -> f64 {
        self.log_likelihood.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Fit an `n_components` mixture to the rows of `data` by EM.
///
/// Runs `options.restarts` k-means++ initialisations and returns the one with
/// the highest final log-likelihood.
pub fn fit_em<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    n_components: usize,
    rng: &mut R,
    options: &EmOptions,
) -> Result<(MixtureModel, FitDiagnostics)> {
    let n = data.nrows();
    if n_components == 0 || n < n_components {
        return Err(Error::TooFewPoints { points: n, components: n_components });
    }
    let mut best: Option<(MixtureModel, FitDiagnostics)> = None;
    for restart in 0..options.restarts.max(1) {
        let (model, mut diag) = fit_once(data, n_components, rng, options)?;
        diag.restart = restart;
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| diag.final_log_likelihood() > b.final_log_likelihood());
        if better {
            best = Some((model, diag));
        }
    }
    Ok(best.expect("at least one restart"))
}

fn squared_distance(data: &DMatrix<f64>, i: usize, center: &[f64]) -> f64 {
    center.iter().enumerate().map(|(j, c)| (data[(i, j)] - c).powi(2)).sum()
}

/// k-means++ seeding followed by a few Lloyd steps; returns hard labels.
fn kmeans_labels<R: Rng + ?Sized>(data: &DMatrix<f64>, k: usize, rng: &mut R) -> Vec<usize> {
    let n = data.nrows();
    let row = |i: usize| -> Vec<f64> { data.row(i).iter().copied().collect() };
    let mut centers: Vec<Vec<f64>> = vec![row(rng.random_range(0..n))];
    let mut d2: Vec<f64> = (0..n).map(|i| squared_distance(data, i, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_distance(data, i, &c));
        }
        centers.push(c);
    }

    let mut labels = vec![0usize; n];
    for _ in 0..5 {
        for (i, l) in labels.iter_mut().enumerate() {
            *l = (0..k)
                .map(|c| (c, squared_distance(data, i, &centers[c])))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c)
                .unwrap();
        }
        let dim = data.ncols();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for j in 0..dim {
                sums[l][j] += data[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    labels
}

struct Params {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covs: Vec<DMatrix<f64>>,
}

impl Params {
    fn to_model(&self) -> MixtureModel {
        let dim = self.means[0].len();
        MixtureModel {
            dim,
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| m.iter().copied().collect()).collect(),
            covariances: self
                .covs
                .iter()
                .map(|c| (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| c[(i, j)]).collect())
                .collect(),
        }
    }
}

/// Maximisation step from an n x k responsibility matrix.
fn m_step<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    resp: &DMatrix<f64>,
    options: &EmOptions,
    rng: &mut R,
) -> (Params, bool) {
    let (n, dim) = data.shape();
    let k = resp.ncols();
    let mut reseeded = false;
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    let global_var: Vec<f64> = (0..dim)
        .map(|j| {
            let col = data.column(j);
            let m = col.mean();
            col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64
        })
        .collect();

    for c in 0..k {
        let nk: f64 = resp.column(c).sum();
        if nk < options.collapse_floor {
            reseeded = true;
            let i = rng.random_range(0..n);
            means.push(data.row(i).transpose());
            let mut cov = DMatrix::zeros(dim, dim);
            for j in 0..dim {
                cov[(j, j)] = global_var[j] + options.reg_covar;
            }
            covs.push(cov);
            weights.push(1.0 / k as f64);
            continue;
        }
        let rc = resp.column(c);
        let mean: DVector<f64> = data.tr_mul(&rc) / nk;
        let mut w = data.clone();
        for i in 0..n {
            let s = rc[i].sqrt();
            for j in 0..dim {
                w[(i, j)] = (w[(i, j)] - mean[j]) * s;
            }
        }
        let mut cov = w.tr_mul(&w) / nk;
        // Exact symmetry; the product is symmetric only up to rounding.
        for i in 0..dim {
            for j in 0..i {
                let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
            cov[(i, i)] += options.reg_covar;
        }
        weights.push(nk / n as f64);
        means.push(mean);
        covs.push(cov);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    (Params { weights, means, covs }, reseeded)
}

/// Expectation step: (responsibilities, log-likelihood).
fn e_step(data: &DMatrix<f64>, prepared: &PreparedMixture) -> (DMatrix<f64>, f64) {
    let mut lp = prepared.weighted_log_densities(data);
    let k = lp.ncols();
    let mut ll = 0.0;
    let mut buf = vec![0.0; k];
    for i in 0..lp.nrows() {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = lp[(i, c)];
        }
        let norm = log_sum_exp(&buf);
        ll += norm;
        for c in 0..k {
            lp[(i, c)] = (lp[(i, c)] - norm).exp();
        }
    }
    (lp, ll)
}

fn fit_once<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    k: usize,
    rng: &mut R,
    options: &EmOptions,
) -> Result<(MixtureModel, FitDiagnostics)> {
    let n = data.nrows();
    let labels = if k == 1 { vec![0; n] } else { kmeans_labels(data, k, rng) };
    let mut resp = DMatrix::zeros(n, k);
    for (i, &l) in labels.iter().enumerate() {
        resp[(i, l)] = 1.0;
    }
    let (mut params, reseeded) = m_step(data, &resp, options, rng);
    let mut model = params.to_model();
    let mut diag = FitDiagnostics::default();
    if reseeded {
        diag.reseeded_at.push(0);
    }

    let mut prev_ll = f64::NEG_INFINITY;
    let mut prev_model: Option<MixtureModel> = None;
    let mut finished = false;
    for iter in 0..options.max_iter.max(1) {
        let prepared = model.prepare()?;
        let (resp, ll) = e_step(data, &prepared);
        let after_reseed = diag.reseeded_at.last() == Some(&diag.log_likelihood.len());
        if ll < prev_ll && !after_reseed {
            diag.stopped_on_decrease = true;
            model = prev_model.take().expect("a previous iterate exists");
            finished = true;
            break;
        }
        diag.log_likelihood.push(ll);
        if iter > 0 && !after_reseed && (ll - prev_ll) <= options.tol * prev_ll.abs().max(1e-300) {
            diag.converged = true;
            finished = true;
            break;
        }
        prev_ll = ll;
        let (next, reseeded) = m_step(data, &resp, options, rng);
        if reseeded {
            diag.reseeded_at.push(diag.log_likelihood.len());
        }
        params = next;
        prev_model = Some(std::mem::replace(&mut model, params.to_model()));
    }
    if !finished {
        // The last M-step produced parameters that were never evaluated;
        // return the last evaluated iterate so the trace describes the model.
        if let Some(prev) = prev_model {
            model = prev;
        }
    }
    Ok((model, diag))
}
