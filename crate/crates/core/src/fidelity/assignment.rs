//! Square linear sum assignment by shortest augmenting paths with dual
//! potentials (the Jonker-Volgenant family, in Crouse's formulation).

use crate::error::{Error, Result};

/// Minimum-cost perfect matching on a row-major `n x n` cost matrix.
/// Returns the column assigned to each row and the total cost.
pub fn solve_assignment(n: usize, cost: &[f64]) -> Result<(Vec<usize>, f64)> {
    if cost.len() != n * n {
        return Err(Error::InvalidInput(format!("cost matrix has {} entries, expected {}", cost.len(), n * n)));
    }
    if cost.iter().any(|c| c.is_nan() || *c == f64::NEG_INFINITY) {
        return Err(Error::InvalidInput("cost matrix contains NaN or -inf".into()));
    }
    const NONE: usize = usize::MAX;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut path = vec![NONE; n];
    let mut col4row = vec![NONE; n];
    let mut row4col = vec![NONE; n];
    let mut sr = vec![false; n];
    let mut sc = vec![false; n];
    let mut remaining = vec![0usize; n];

    for cur in 0..n {
        // Dijkstra over reduced costs from `cur` to the nearest free column.
        let mut min_val = 0.0;
        let mut num_remaining = n;
        for (it, r) in remaining.iter_mut().enumerate() {
            *r = n - it - 1;
        }
        sr.fill(false);
        sc.fill(false);
        dist.fill(f64::INFINITY);
        let mut i = cur;
        let sink = loop {
            let mut index = NONE;
            let mut lowest = f64::INFINITY;
            sr[i] = true;
            for (it, &j) in remaining[..num_remaining].iter().enumerate() {
                let r = min_val + cost[i * n + j] - u[i] - v[j];
                if r < dist[j] {
                    path[j] = i;
                    dist[j] = r;
                }
                if dist[j] < lowest || (dist[j] == lowest && row4col[j] == NONE) {
                    lowest = dist[j];
                    index = it;
                }
            }
            min_val = lowest;
            if index == NONE || min_val.is_infinite() {
                return Err(Error::InvalidInput("assignment is infeasible".into()));
            }
            let j = remaining[index];
            sc[j] = true;
            num_remaining -= 1;
            remaining[index] = remaining[num_remaining];
            if row4col[j] == NONE {
                break j;
            }
            i = row4col[j];
        };

        u[cur] += min_val;
        for r in 0..n {
            if sr[r] && r != cur {
                u[r] += min_val - dist[col4row[r]];
            }
        }
        for c in 0..n {
            if sc[c] {
                v[c] -= min_val - dist[c];
            }
        }
        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            std::mem::swap(&mut col4row[r], &mut j);
            if r == cur {
                break;
            }
        }
    }
    let total = (0..n).map(|r| cost[r * n + col4row[r]]).sum();
    Ok((col4row, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let (a, c) = solve_assignment(2, &[1.0, 2.0, 3.0, 1.0]).unwrap();
        assert_eq!(a, vec![0, 1]);
        assert_eq!(c, 2.0);
    }

    #[test]
    fn anti_diagonal() {
        let (a, c) = solve_assignment(3, &[9.0, 9.0, 1.0, 9.0, 1.0, 9.0, 1.0, 9.0, 9.0]).unwrap();
        assert_eq!(a, vec![2, 1, 0]);
        assert_eq!(c, 3.0);
    }

    #[test]
    fn empty_and_bad_shapes() {
        assert_eq!(solve_assignment(0, &[]).unwrap().1, 0.0);
        assert!(solve_assignment(2, &[1.0]).is_err());
        assert!(solve_assignment(1, &[f64::NAN]).is_err());
    }

    #[test]
    fn forbidden_entries_are_avoided() {
        let inf = f64::INFINITY;
        let (a, c) = solve_assignment(2, &[inf, 5.0, 1.0, inf]).unwrap();
        assert_eq!(a, vec![1, 0]);
        assert_eq!(c, 6.0);
        assert!(solve_assignment(2, &[inf, inf, 1.0, 1.0]).is_err());
    }
}
