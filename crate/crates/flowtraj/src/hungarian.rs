//! Minimum-cost one-to-one assignment (Hungarian algorithm, potential form
//! with shortest augmenting paths, O(n^3)).

/// Solves the square assignment problem. `cost[r][c]` must be finite.
/// Returns the column assigned to each row.
fn solve_square(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // job[w] = row assigned to column w (columns are 1-indexed internally,
    // with a virtual column n used as the starting slot).
    let mut job: Vec<Option<usize>> = vec![None; n + 1];
    let mut ys = vec![0.0f64; n];
    let mut yt = vec![0.0f64; n + 1];

    for row in 0..n {
        let mut w_cur = n;
        job[w_cur] = Some(row);
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut prv: Vec<Option<usize>> = vec![None; n + 1];
        let mut in_z = vec![false; n + 1];

        while let Some(j) = job[w_cur] {
            in_z[w_cur] = true;
            let mut delta = f64::INFINITY;
            let mut w_next = 0;
            for w in 0..n {
                if in_z[w] {
                    continue;
                }
                let reduced = cost[j][w] - ys[j] - yt[w];
                if reduced < min_to[w] {
                    min_to[w] = reduced;
                    prv[w] = Some(w_cur);
                }
                if min_to[w] < delta {
                    delta = min_to[w];
                    w_next = w;
                }
            }
            for w in 0..=n {
                if in_z[w] {
                    if let Some(jw) = job[w] {
                        ys[jw] += delta;
                    }
                    yt[w] -= delta;
                } else {
                    min_to[w] -= delta;
                }
            }
            w_cur = w_next;
        }
        // augment along the alternating path
        while w_cur != n {
            let w_prev = prv[w_cur].expect("augmenting path is connected");
            job[w_cur] = job[w_prev];
            w_cur = w_prev;
        }
    }

    let mut assignment = vec![0usize; n];
    for w in 0..n {
        if let Some(r) = job[w] {
            assignment[r] = w;
        }
    }
    assignment
}

/// Result of a (possibly rectangular) assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// For each row, the assigned column, or None when the row fell on a
    /// padding column.
    pub row_to_col: Vec<Option<usize>>,
    /// Total cost over real (non-padded) matches.
    pub total_cost: f64,
}

/// Minimum-total-cost one-to-one assignment. Rectangular matrices are padded
/// to square with a constant cost above the maximum entry; matches that land
/// on padding are reported as unmatched.
pub fn assign(cost: &[Vec<f64>]) -> Assignment {
    let rows = cost.len();
    if rows == 0 {
        return Assignment {
            row_to_col: Vec::new(),
            total_cost: 0.0,
        };
    }
    let cols = cost[0].len();
    debug_assert!(cost.iter().all(|r| r.len() == cols));
    let n = rows.max(cols);
    let pad = cost
        .iter()
        .flat_map(|r| r.iter().copied())
        .fold(0.0f64, f64::max)
        + 1.0;
    let square: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            (0..n)
                .map(|c| {
                    if r < rows && c < cols {
                        cost[r][c]
                    } else {
                        pad
                    }
                })
                .collect()
        })
        .collect();
    let raw = solve_square(&square);
    let mut row_to_col = vec![None; rows];
    let mut total_cost = 0.0;
    for (r, item) in row_to_col.iter_mut().enumerate() {
        let c = raw[r];
        if c < cols {
            *item = Some(c);
            total_cost += cost[r][c];
        }
    }
    Assignment {
        row_to_col,
        total_cost,
    }
}

#[cfg(test)]
pub fn brute_force_min_cost(cost: &[Vec<f64>]) -> f64 {
    // Exhaustive minimum over all row->column injections.
    fn recurse(cost: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == cost.len() {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        for c in 0..cost[row].len() {
            if !used[c] {
                used[c] = true;
                recurse(cost, row + 1, used, acc + cost[row][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    let cols = cost[0].len();
    recurse(cost, 0, &mut vec![false; cols], 0.0, &mut best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn diagonal_identity() {
        let cost = vec![
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ];
        let a = assign(&cost);
        assert_eq!(a.row_to_col, vec![Some(0), Some(1), Some(2)]);
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn seeded_5x5_matches_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let cost: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..5).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let a = assign(&cost);
            let expected = brute_force_min_cost(&cost);
            assert!(
                (a.total_cost - expected).abs() < 1e-9,
                "{} vs {expected}",
                a.total_cost
            );
        }
    }

    #[test]
    fn rectangular_padding() {
        let cost = vec![vec![5.0, 1.0, 9.0], vec![1.0, 5.0, 9.0]];
        let a = assign(&cost);
        assert_eq!(a.row_to_col, vec![Some(1), Some(0)]);
        assert_eq!(a.total_cost, 2.0);

        // more rows than columns: one row unmatched
        let tall = vec![vec![1.0], vec![0.5], vec![2.0]];
        let a = assign(&tall);
        let matched: Vec<usize> = a.row_to_col.iter().flatten().copied().collect();
        assert_eq!(matched, vec![0]);
        assert_eq!(a.row_to_col[1], Some(0));
        assert_eq!(a.total_cost, 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn matches_brute_force_up_to_8(n in 1usize..=8, seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let a = assign(&cost);
            let expected = brute_force_min_cost(&cost);
            prop_assert!((a.total_cost - expected).abs() < 1e-9);
        }
    }
}
