//! Small numeric helpers shared across modules.

use rand::Rng;

/// Round to floor or ceiling at random so that the expectation is `x`.
///
/// Integral inputs are returned unchanged without consuming randomness.
pub fn stochastic_round<R: Rng + ?Sized>(x: f64, rng: &mut R) -> f64 {
    let lo = x.floor();
    let frac = x - lo;
    if frac == 0.0 {
        return lo;
    }
    if rng.random::<f64>() < frac {
        lo + 1.0
    } else {
        lo
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Linear-interpolated quantile of a sample (`q` in [0, 1]).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Central 95% percentile interval, widened if needed to contain `point`.
pub fn interval_95(xs: &[f64], point: f64) -> (f64, f64) {
    let lo = quantile(xs, 0.025);
    let hi = quantile(xs, 0.975);
    (lo.min(point), hi.max(point))
}

/// Largest-remainder apportionment of `total` into shares proportional to
/// `weights`. Ties in the remainder go to the lower index.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut out: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn stochastic_round_preserves_expectation() {
        let mut r = rng::stream(11, &[]);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let v = stochastic_round(2.5, &mut r);
            assert!(v == 2.0 || v == 3.0);
            sum += v;
        }
        let m = sum / n as f64;
        let se = (0.25f64 / n as f64).sqrt();
        assert!((m - 2.5).abs() < 3.0 * se, "{m}");
        assert_eq!(stochastic_round(4.0, &mut r), 4.0);
    }

    #[test]
    fn apportionment() {
        assert_eq!(largest_remainder(9, &[1.0; 9]), vec![1; 9]);
        assert_eq!(largest_remainder(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        let w = [0.057, 0.083, 0.071, 0.155, 0.135, 0.125, 0.135, 0.11, 0.129];
        assert_eq!(largest_remainder(1001, &w).iter().sum::<usize>(), 1001);
    }

    #[test]
    fn quantiles() {
        let xs = [3.0, 1.0, 2.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 5.0);
        assert_eq!(interval_95(&[1.0, 1.0], 2.0), (1.0, 2.0));
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }
}
