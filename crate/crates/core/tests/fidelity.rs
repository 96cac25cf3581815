use contactnet::fidelity::{emd, excess_penalty, match_error, solve_assignment, AgeHistogram, Matching};
use contactnet::{AgeGroup, AGE_GROUPS};
use proptest::prelude::*;

fn mass() -> impl Strategy<Value = [f64; AGE_GROUPS]> {
    prop::array::uniform9(0u32..6).prop_map(|m| m.map(f64::from))
}

fn hist(owner: usize, m: [f64; AGE_GROUPS]) -> AgeHistogram {
    AgeHistogram::new(AgeGroup::ALL[owner], m)
}

/// Equal-mass transport on a line is the L1 distance between CDFs.
fn cdf_distance(d: &[f64; AGE_GROUPS], k: &[f64; AGE_GROUPS]) -> f64 {
    let (mut cd, mut ck, mut out) = (0.0, 0.0, 0.0);
    for a in 0..AGE_GROUPS {
        cd += d[a];
        ck += k[a];
        out += (cd - ck).abs();
    }
    out
}

fn brute_assignment(n: usize, cost: &[f64]) -> f64 {
    fn go(row: usize, n: usize, used: &mut Vec<bool>, cost: &[f64], acc: f64, best: &mut f64) {
        if row == n {
            *best = best.min(acc);
            return;
        }
        for c in 0..n {
            if !used[c] {
                used[c] = true;
                go(row + 1, n, used, cost, acc + cost[row * n + c], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, n, &mut vec![false; n], cost, 0.0, &mut best);
    best
}

proptest! {
    #[test]
    fn emd_of_identical_histograms_is_zero(m in mass()) {
        prop_assert_eq!(emd(&hist(0, m), &hist(0, m)), 0.0);
    }

    #[test]
    fn emd_is_nonnegative(d in mass(), k in mass()) {
        prop_assert!(emd(&hist(0, d), &hist(0, k)) >= 0.0);
    }

    #[test]
    fn equal_mass_emd_is_symmetric_cdf_distance(d in mass(), perm in Just(()).prop_perturb(|_, mut r| {
        let mut idx: Vec<usize> = (0..AGE_GROUPS).collect();
        for i in (1..AGE_GROUPS).rev() {
            idx.swap(i, (r.next_u32() as usize) % (i + 1));
        }
        idx
    })) {
        let mut k = [0.0; AGE_GROUPS];
        for (a, &p) in perm.iter().enumerate() {
            k[p] = d[a];
        }
        let total: f64 = d.iter().sum();
        prop_assume!(total > 0.0);
        let (x, y) = (emd(&hist(0, d), &hist(0, k)), emd(&hist(0, k), &hist(0, d)));
        prop_assert!((x - y).abs() < 1e-9);
        prop_assert!((x - cdf_distance(&d, &k) / total).abs() < 1e-9, "{} vs {}", x, cdf_distance(&d, &k) / total);
    }

    #[test]
    fn empty_side_pays_only_the_penalty(d in mass()) {
        let total: f64 = d.iter().sum();
        let zero = [0.0; AGE_GROUPS];
        prop_assert!((emd(&hist(0, d), &hist(0, zero)) - excess_penalty(total, 0.0)).abs() < 1e-12);
        prop_assert!((emd(&hist(0, zero), &hist(0, d)) - excess_penalty(0.0, total)).abs() < 1e-12);
    }

    #[test]
    fn assignment_matches_brute_force(n in 1usize..=6, raw in prop::collection::vec(0u32..50, 36)) {
        let cost: Vec<f64> = raw[..n * n].iter().map(|&c| c as f64).collect();
        let (cols, total) = solve_assignment(n, &cost).unwrap();
        let mut seen = cols.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let recomputed: f64 = cols.iter().enumerate().map(|(r, &c)| cost[r * n + c]).sum();
        prop_assert_eq!(recomputed, total);
        prop_assert_eq!(total, brute_assignment(n, &cost));
    }

    #[test]
    fn stratified_matching_is_never_cheaper_than_pooled(data in prop::collection::vec((0usize..3, mass()), 1..8), seed in any::<u64>()) {
        // Model egos are a shuffled copy with fresh masses but the same ages.
        let mut r = seed;
        let model: Vec<AgeHistogram> = data
            .iter()
            .map(|&(a, m)| {
                r = r.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                hist(a, m.map(|x| ((x as u64 + (r >> 60)) % 6) as f64))
            })
            .collect();
        let data: Vec<AgeHistogram> = data.into_iter().map(|(a, m)| hist(a, m)).collect();
        let pooled = match_error(&data, &model, Matching::Pooled).unwrap();
        let strat = match_error(&data, &model, Matching::Stratified).unwrap();
        prop_assert!(pooled.total <= strat.total + 1e-9);
        prop_assert!((strat.per_individual - strat.total / data.len() as f64).abs() < 1e-9);
    }
}

#[test]
fn identical_ego_sets_match_at_zero_cost() {
    let data: Vec<AgeHistogram> = (0..12).map(|i| hist(i % 4, std::array::from_fn(|a| ((i * 7 + a * 3) % 5) as f64))).collect();
    let mut model = data.clone();
    model.reverse();
    for m in [Matching::Pooled, Matching::Stratified] {
        let r = match_error(&data, &model, m).unwrap();
        assert_eq!(r.total, 0.0);
        assert!(r.per_age.iter().take(4).all(|x| *x == Some(0.0)));
    }
}
