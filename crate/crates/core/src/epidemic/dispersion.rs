use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numeric::interval_95;

/// Finite stand-in for `k = infinity` (no excess variance).
pub const K_CAP: f64 = 1.0e6;
const K_FLOOR: f64 = 1.0e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionFit {
    pub samples: usize,
    pub mean: f64,
    pub k: f64,
    /// `k` hit [`K_CAP`]: the sample is not overdispersed.
    pub k_infinite: bool,
    pub interval: (f64, f64),
}

/// Profile score `d/dk` of the negative-binomial log-likelihood with the
/// mean fixed at the sample mean. `tail[j]` counts samples greater than `j`.
fn score(k: f64, tail: &[u64], n: f64, mean: f64) -> f64 {
    let s: f64 = tail.iter().enumerate().map(|(j, &c)| c as f64 / (k + j as f64)).sum();
    s + n * (k / (k + mean)).ln()
}

/// Maximum-likelihood `k` with the mean profiled out, by bisection on
/// `ln k` over `[1e-4, 1e6]`. Returns `(mean, k, capped)`.
pub fn fit_k(xs: &[u64]) -> (f64, f64, bool) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, K_CAP, true);
    }
    let mean = xs.iter().sum::<u64>() as f64 / n;
    let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    if mean == 0.0 || var <= mean {
        return (mean, K_CAP, true);
    }
    let max = *xs.iter().max().expect("nonempty") as usize;
    let mut tail = vec![0u64; max];
    for &x in xs {
        for t in tail.iter_mut().take(x as usize) {
            *t += 1;
        }
    }
    let f = |lk: f64| score(lk.exp(), &tail, n, mean);
    let (mut lo, mut hi) = (K_FLOOR.ln(), K_CAP.ln());
    if f(hi) > 0.0 {
        return (mean, K_CAP, true);
    }
    if f(lo) < 0.0 {
        return (mean, K_FLOOR, false);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    (mean, (0.5 * (lo + hi)).exp(), false)
}

/// Negative-binomial fit with a percentile bootstrap interval for `k`.
pub fn fit_dispersion<R: Rng + ?Sized>(xs: &[u64], bootstrap: usize, rng: &mut R) -> DispersionFit {
    let (mean, k, k_infinite) = fit_k(xs);
    let mut boots = Vec::with_capacity(bootstrap);
    let mut buf = vec![0u64; xs.len()];
    if !xs.is_empty() {
        for _ in 0..bootstrap {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..xs.len())];
            }
            boots.push(fit_k(&buf).1);
        }
    }
    let interval = if boots.is_empty() { (k, k) } else { interval_95(&boots, k) };
    DispersionFit { samples: xs.len(), mean, k, k_infinite, interval }
}
