//! Optimal one-to-one assignment (Hungarian method with potentials).

/// Assignment maximizing the total weight of a rectangular weight matrix.
///
/// Returns, for each row, the column assigned to it. Every row gets a column
/// when there are at least as many columns as rows, and vice versa. Runs in
/// `O(n²·m)` for an `n × m` problem.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    assert!(
        weights.iter().all(|r| r.len() == cols),
        "ragged weight matrix"
    );

    if rows <= cols {
        min_cost_rows_to_cols(rows, cols, |i, j| -weights[i][j])
            .into_iter()
            .map(Some)
            .collect()
    } else {
        let col_to_row = min_cost_rows_to_cols(cols, rows, |j, i| -weights[i][j]);
        let mut out = vec![None; rows];
        for (j, i) in col_to_row.into_iter().enumerate() {
            out[i] = Some(j);
        }
        out
    }
}

/// Min-cost assignment of `n` rows into `m ≥ n` columns; returns the column of each row.
fn min_cost_rows_to_cols(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    debug_assert!(n <= m);
    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    row_to_col
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn total(weights: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
        assignment
            .iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| weights[i][j]))
            .sum()
    }

    /// Exhaustive search over injective maps of the smaller side.
    fn brute_force(weights: &[Vec<f64>]) -> f64 {
        fn go(w: &[Vec<f64>], i: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if i == w.len() {
                *best = best.max(acc);
                return;
            }
            let free = used.iter().filter(|u| !**u).count();
            // Rows may stay unassigned only when columns run out.
            if w.len() - i > free {
                go(w, i + 1, used, acc, best);
            }
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    go(w, i + 1, used, acc + w[i][j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::NEG_INFINITY;
        go(
            weights,
            0,
            &mut vec![false; weights[0].len()],
            0.0,
            &mut best,
        );
        best
    }

    #[test]
    fn empty_inputs() {
        assert!(max_weight_assignment(&[]).is_empty());
        assert_eq!(max_weight_assignment(&[vec![], vec![]]), vec![None, None]);
    }

    #[test]
    fn picks_the_optimal_not_the_greedy_pairing() {
        // Greedy would take 0.9 and be forced into 0.0.
        let w = vec![vec![0.9, 0.8], vec![0.7, 0.0]];
        assert_eq!(max_weight_assignment(&w), vec![Some(1), Some(0)]);
    }

    #[test]
    fn rectangular_both_ways() {
        let wide = vec![vec![0.1, 0.5, 0.2]];
        assert_eq!(max_weight_assignment(&wide), vec![Some(1)]);
        let tall = vec![vec![0.1], vec![0.5], vec![0.2]];
        assert_eq!(max_weight_assignment(&tall), vec![None, Some(0), None]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in proptest::collection::vec(0.0f64..1.0, 25),
        ) {
            let w: Vec<Vec<f64>> = (0..rows)
                .map(|i| (0..cols).map(|j| seed[i * 5 + j]).collect())
                .collect();
            let a = max_weight_assignment(&w);
            let mut seen = std::collections::HashSet::new();
            prop_assert!(a.iter().flatten().all(|j| seen.insert(*j)));
            prop_assert_eq!(a.iter().flatten().count(), rows.min(cols));
            prop_assert!((total(&w, &a) - brute_force(&w)).abs() < 1e-9);
        }
    }
}
