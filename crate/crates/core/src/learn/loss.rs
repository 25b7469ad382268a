//! Class-weighted softmax cross-entropy.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Mean over the batch of `-w[y] * log softmax(z)[y]`, with the gradient
/// with respect to the logits.
pub fn weighted_cross_entropy(logits: ArrayView2<'_, f64>, targets: &[usize], weights: &[f64]) -> Result<(f64, Array2<f64>)> {
    let (b, c) = logits.dim();
    if targets.len() != b || weights.len() != c {
        return Err(Error::Shape(format!("logits {b}x{c} with {} targets and {} weights", targets.len(), weights.len())));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= c) {
        return Err(Error::InvalidClass(format!("target {t} with {c} classes")));
    }
    let mut grad = Array2::zeros((b, c));
    let mut loss = 0.0;
    for (i, row) in logits.rows().into_iter().enumerate() {
        let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let sum: f64 = row.iter().map(|v| (v - m).exp()).sum();
        let log_z = m + sum.ln();
        let t = targets[i];
        let w = weights[t];
        loss += w * (log_z - row[t]);
        for (j, v) in row.iter().enumerate() {
            grad[[i, j]] = w * (v - log_z).exp() / b as f64;
        }
        grad[[i, t]] -= w / b as f64;
    }
    Ok((loss / b.max(1) as f64, grad))
}

pub fn softmax_rows(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

/// Index of the largest logit per row, lowest index on ties.
pub fn argmax_rows(logits: ArrayView2<'_, f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_and_saturated() {
        let (l, _) = weighted_cross_entropy(array![[0.0, 0.0]].view(), &[1], &[1.0, 1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        let (l, _) = weighted_cross_entropy(array![[30.0, 0.0, 0.0]].view(), &[0], &[1.0; 3]).unwrap();
        assert!(l < 1e-12);
    }

    #[test]
    fn gradient_matches_differences() {
        let z = array![[0.3, -1.2, 2.0, 0.1, 0.5], [1.0, 1.0, -0.5, 0.0, 3.0]];
        let w = [0.1, 0.3, 0.2, 0.25, 0.15];
        let t = [2, 4];
        let (_, g) = weighted_cross_entropy(z.view(), &t, &w).unwrap();
        let h = 1e-5;
        for i in 0..2 {
            for j in 0..5 {
                let mut p = z.clone();
                p[[i, j]] += h;
                let mut m = z.clone();
                m[[i, j]] -= h;
                let fd = (weighted_cross_entropy(p.view(), &t, &w).unwrap().0
                    - weighted_cross_entropy(m.view(), &t, &w).unwrap().0)
                    / (2.0 * h);
                assert!((fd - g[[i, j]]).abs() <= 1e-6 * fd.abs().max(g[[i, j]].abs()).max(1e-6));
            }
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax_rows(array![[0.2, 0.9, 0.9]].view()), vec![1]);
    }
}
