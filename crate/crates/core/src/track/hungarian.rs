//! Rectangular minimum-cost assignment (shortest augmenting paths with
//! row/column potentials, O(n^2 m)).

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

/// Assigns `min(rows, cols)` pairs one-to-one with globally minimal total cost.
pub fn hungarian(cost: ArrayView2<'_, f64>) -> Result<Assignment> {
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("assignment costs must be finite".into()));
    }
    let (rows, cols) = cost.dim();
    if rows == 0 || cols == 0 {
        return Ok(Assignment { pairs: Vec::new(), total_cost: 0.0 });
    }
    let mut pairs = if rows <= cols {
        solve(cost)
    } else {
        let t: Array2<f64> = cost.t().to_owned();
        solve(t.view()).into_iter().map(|(c, r)| (r, c)).collect()
    };
    pairs.sort_unstable();
    let total_cost = pairs.iter().map(|&(r, c)| cost[[r, c]]).sum();
    Ok(Assignment { pairs, total_cost })
}

/// Requires `rows <= cols`. Indices inside are 1-based with 0 as sentinel.
fn solve(a: ArrayView2<'_, f64>) -> Vec<(usize, usize)> {
    let (n, m) = a.dim();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a[[i0 - 1, j - 1]] - u[i0] - v[j];
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
    (1..=m).filter(|&j| owner[j] != 0).map(|j| (owner[j] - 1, j - 1)).collect()
}

/// Maximum-weight matching restricted to pairs with `weight >= min_weight`.
/// Among matchings, the one with the most admissible pairs wins first, then
/// the one with the largest total weight.
pub fn max_weight_matching(weights: ArrayView2<'_, f64>, min_weight: f64) -> Result<Vec<(usize, usize)>> {
    let (rows, cols) = weights.dim();
    let admissible = |w: f64| w >= min_weight;
    let span = weights.iter().copied().filter(|&w| admissible(w)).fold(0.0f64, |acc, w| acc.max((w - min_weight).abs()));
    // Any admissible pair costs less than `big` by more than the total spread of
    // admissible weights, so adding one more admissible pair always pays off.
    let big = (span + 1.0) * (rows.min(cols) as f64 + 1.0);
    let cost = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let w = weights[[r, c]];
        if admissible(w) {
            -(w - min_weight)
        } else {
            big
        }
    });
    Ok(hungarian(cost.view())?.pairs.into_iter().filter(|&(r, c)| admissible(weights[[r, c]])).collect())
}
