#![allow(clippy::needless_range_loop)]

use contactnet::network::{generate_sbm, rebalance_stubs, wire_configuration, ContactMatrix, PopulationSpec, StubLedger, DEFAULT_PROPORTIONS};
use contactnet::types::{cell, cell_parts};
use contactnet::{rng, AgeGroup, DurationCategory, AGE_GROUPS, CELLS, DURATIONS};
use proptest::prelude::*;

fn ledger_strategy() -> impl Strategy<Value = StubLedger> {
    (2usize..40).prop_flat_map(|n| {
        let ages = prop::collection::vec(0usize..3, n);
        // Sparse rows over the first three age groups so blocks overlap.
        let rows = prop::collection::vec(prop::collection::vec((0usize..3, 0usize..DURATIONS, 0u32..4), 0..5), n);
        (ages, rows).prop_map(|(ages, rows)| {
            let ages: Vec<AgeGroup> = ages.into_iter().map(|a| AgeGroup::ALL[a]).collect();
            let rows: Vec<Vec<u32>> = rows
                .into_iter()
                .map(|r| {
                    let mut v = vec![0u32; CELLS];
                    for (b, t, c) in r {
                        v[cell(AgeGroup::ALL[b], DurationCategory::ALL[t])] += c;
                    }
                    v
                })
                .collect();
            StubLedger::from_rows(ages, &rows).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wiring_never_exceeds_stubs(ledger in ledger_strategy(), seed in any::<u64>()) {
        let (net, report) = wire_configuration(&ledger, seed).unwrap();
        prop_assert_eq!(2 * report.edges + report.leftover, ledger.total());
        prop_assert_eq!(report.edges as usize, net.edge_count());
        for b in &report.blocks {
            prop_assert!(b.edges <= b.forward.min(b.reverse));
        }
        // Each node uses at most its own stubs toward each (age, duration).
        for i in 0..ledger.len() {
            let mut used = [0u32; CELLS];
            for (j, e) in net.neighbors(i) {
                used[cell(net.age(j as usize), e.duration)] += 1;
            }
            for (x, &u) in used.iter().enumerate() {
                prop_assert!(u <= ledger.node(i)[x], "node {i} cell {x:?}: {u} > {}", ledger.node(i)[x]);
            }
        }
    }

    #[test]
    fn rebalancing_moves_deficient_side_to_the_mean(ledger in ledger_strategy(), seed in any::<u64>()) {
        let before = ledger.directed_totals();
        let (after_ledger, report) = rebalance_stubs(&ledger, &mut rng::stream(seed, &[]));
        let after = after_ledger.directed_totals();
        for b in &report.blocks {
            let (a, t, tau) = (b.source.index(), b.target.index(), b.duration);
            let (f0, r0) = (before[a][cell(b.target, tau)], before[t][cell(b.source, tau)]);
            let (f1, r1) = (after[a][cell(b.target, tau)], after[t][cell(b.source, tau)]);
            match b.factor {
                Some(s) if f0 < r0 => {
                    prop_assert_eq!(r1, r0);
                    let (lo, hi) = node_bounds(&ledger, b.source, b.target, tau, s);
                    prop_assert!(lo <= f1 && f1 <= hi);
                }
                Some(s) if r0 < f0 => {
                    prop_assert_eq!(f1, f0);
                    let (lo, hi) = node_bounds(&ledger, b.target, b.source, tau, s);
                    prop_assert!(lo <= r1 && r1 <= hi);
                }
                _ => prop_assert_eq!((f1, r1), (f0, r0)),
            }
        }
    }
}

/// Floor and ceiling sums of the scaled stub counts on one side of a block.
fn node_bounds(ledger: &StubLedger, from: AgeGroup, to: AgeGroup, tau: DurationCategory, s: f64) -> (u64, u64) {
    let mut lo = 0;
    let mut hi = 0;
    for i in (0..ledger.len()).filter(|&i| ledger.ages[i] == from) {
        let x = ledger.get(i, to, tau) as f64 * s;
        lo += x.floor() as u64;
        hi += x.ceil() as u64;
    }
    (lo, hi)
}

#[test]
fn rebalanced_blocks_are_nearly_reciprocal() {
    // 100 stubs one way, 40 back: the deficient side grows to about 70.
    let mut rows = vec![vec![0u32; CELLS]; 20];
    let ages: Vec<AgeGroup> = (0..20).map(|i| AgeGroup::ALL[if i < 10 { 0 } else { 1 }]).collect();
    for (i, row) in rows.iter_mut().enumerate() {
        if i < 10 {
            row[cell(AgeGroup::ALL[1], DurationCategory::LONGEST)] = 10;
        } else {
            row[cell(AgeGroup::ALL[0], DurationCategory::LONGEST)] = 4;
        }
    }
    let ledger = StubLedger::from_rows(ages, &rows).unwrap();
    let (after, report) = rebalance_stubs(&ledger, &mut rng::stream(1, &[]));
    assert_eq!(report.blocks[0].factor, Some(140.0 / 80.0));
    let t = after.directed_totals();
    assert_eq!(t[0][cell(AgeGroup::ALL[1], DurationCategory::LONGEST)], 100);
    assert_eq!(t[1][cell(AgeGroup::ALL[0], DurationCategory::LONGEST)], 70);
}

#[test]
fn sbm_mean_degree_matches_reciprocal_matrix() {
    let mut cm = ContactMatrix::zeros();
    let base = [[3.0, 1.0, 0.5], [0.8, 4.0, 1.2], [0.2, 1.5, 2.0]];
    for a in 0..AGE_GROUPS {
        for b in 0..AGE_GROUPS {
            let v = if a < 3 && b < 3 { base[a][b] } else if a == b { 1.0 } else { 0.1 };
            cm.c_tau[a][b] = [v * 0.1, v * 0.2, v * 0.3, v * 0.2, v * 0.2];
            cm.c[a][b] = v;
        }
    }
    cm.respondents = [100; AGE_GROUPS];
    cm.empty_rows.clear();
    let spec = PopulationSpec::new(10_000, DEFAULT_PROPORTIONS).unwrap();
    let net = generate_sbm(&cm, &spec, &mut rng::stream(9, &[])).unwrap();
    let target = cm.reciprocal(&spec.group_sizes());
    let by_age = net.mean_degree_by_age();
    for a in 0..AGE_GROUPS {
        let expected: f64 = target.c[a].iter().sum();
        let n_a = spec.group_sizes()[a] as f64;
        let se = (expected / n_a).sqrt();
        assert!((by_age[a] - expected).abs() < 5.0 * se + 1e-9, "age {a}: {} vs {expected}", by_age[a]);
    }
    // Duration shares follow the duration split of C.
    let mut counts = [0usize; DURATIONS];
    for e in net.edges() {
        counts[e.duration.index()] += 1;
    }
    let total = net.edge_count() as f64;
    for (t, share) in [0.1, 0.2, 0.3, 0.2, 0.2].iter().enumerate() {
        assert!((counts[t] as f64 / total - share).abs() < 0.02, "{t}: {counts:?}");
    }
}

#[test]
fn cell_indexing_round_trips() {
    for x in 0..CELLS {
        let (a, d) = cell_parts(x);
        assert_eq!(cell(a, d), x);
    }
}
