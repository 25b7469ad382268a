//! Exact t-SNE: perplexity-calibrated Gaussian affinities, Student-t
//! similarities in 2-D, gradient descent with momentum and per-parameter
//! gains, early exaggeration.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    /// n x 2
    pub points: Array2<f64>,
    pub kl_initial: f64,
    pub kl_final: f64,
    /// `(iteration, KL)` every 50 iterations and at the end.
    pub kl_history: Vec<(usize, f64)>,
}

const MIN_PROB: f64 = 1e-12;
const ENTROPY_TOL: f64 = 1e-10;
const JITTER: f64 = 1e-8;
const MIN_GAIN: f64 = 0.01;

pub fn tsne(data: ArrayView2<'_, f64>, cfg: &TsneConfig) -> Result<TsneResult> {
    let n = data.nrows();
    if n < 3 {
        return Err(Error::InvalidInput(format!("t-SNE needs at least 3 points, got {n}")));
    }
    if !(cfg.perplexity > 0.0 && cfg.perplexity < n as f64) {
        return Err(Error::InvalidConfig(format!("perplexity {} must lie in (0, {n})", cfg.perplexity)));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("t-SNE input must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x = jitter_duplicates(data, &mut rng);
    let p = joint_probabilities(&x, cfg.perplexity);

    let init = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut y = Array2::from_shape_fn((n, 2), |_| init.sample(&mut rng));
    let mut update = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));

    let kl_initial = kl_divergence(&p, &y);
    let mut kl_history = vec![(0, kl_initial)];
    for it in 0..cfg.iterations {
        let exaggeration = if it < cfg.exaggeration_iterations { cfg.early_exaggeration } else { 1.0 };
        let momentum = if it < cfg.momentum_switch { cfg.initial_momentum } else { cfg.final_momentum };
        let grad = gradient(&p, &y, exaggeration);
        for ((g, u), gain) in grad.iter().zip(update.iter_mut()).zip(gains.iter_mut()) {
            *gain = if (*g > 0.0) != (*u > 0.0) { *gain + 0.2 } else { *gain * 0.8 };
            *gain = gain.max(MIN_GAIN);
            *u = momentum * *u - cfg.learning_rate * *gain * g;
        }
        y += &update;
        let mean = y.mean_axis(ndarray::Axis(0)).expect("n > 0");
        y -= &mean;
        if (it + 1) % 50 == 0 && it + 1 != cfg.iterations {
            kl_history.push((it + 1, kl_divergence(&p, &y)));
        }
    }
    let kl_final = kl_divergence(&p, &y);
    kl_history.push((cfg.iterations, kl_final));
    if kl_history.iter().any(|(_, kl)| !kl.is_finite()) {
        return Err(Error::Divergence("t-SNE KL divergence became non-finite".into()));
    }
    Ok(TsneResult { points: y, kl_initial, kl_final, kl_history })
}

/// Exact duplicate rows get a tiny seeded offset so their affinities differ.
fn jitter_duplicates(data: ArrayView2<'_, f64>, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut x = data.to_owned();
    let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0) * JITTER;
    let noise = Normal::new(0.0, scale).expect("valid normal");
    for i in 1..x.nrows() {
        if (0..i).any(|j| data.row(j) == data.row(i)) {
            for v in x.row_mut(i) {
                *v += noise.sample(rng);
            }
        }
    }
    x
}

fn squared_distances(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Symmetrized affinities summing to one.
fn joint_probabilities(x: &Array2<f64>, perplexity: f64) -> Array2<f64> {
    let n = x.nrows();
    let p = conditional_probabilities(x, perplexity);
    let mut sym = (&p + &p.t()) / (2.0 * n as f64);
    for ((i, j), v) in sym.indexed_iter_mut() {
        *v = if i == j { 0.0 } else { v.max(MIN_PROB) };
    }
    sym
}

/// Row `i` is `P(j | i)` with the precision found by bisection on the entropy.
fn conditional_probabilities(x: &Array2<f64>, perplexity: f64) -> Array2<f64> {
    let n = x.nrows();
    let d = squared_distances(x);
    let target = perplexity.ln();
    let mut p = Array2::<f64>::zeros((n, n));
    let mut row = vec![0.0; n];
    for i in 0..n {
        let d_min = (0..n).filter(|&j| j != i).map(|j| d[[i, j]]).fold(f64::INFINITY, f64::min);
        let (mut beta, mut lo, mut hi) = (1.0, f64::NEG_INFINITY, f64::INFINITY);
        for _ in 0..200 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-(d[[i, j]] - d_min) * beta).exp() };
                sum += row[j];
                weighted += row[j] * (d[[i, j]] - d_min);
            }
            // H = log(sum) + beta * E[d - d_min]
            let entropy = sum.ln() + beta * weighted / sum;
            for v in row.iter_mut() {
                *v /= sum;
            }
            let diff = entropy - target;
            if diff.abs() < ENTROPY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
            }
        }
        for j in 0..n {
            p[[i, j]] = row[j];
        }
    }
    p
}

/// Student-t kernel `1 / (1 + |yi - yj|^2)` with a zero diagonal.
fn kernel(y: &Array2<f64>) -> (Array2<f64>, f64) {
    let n = y.nrows();
    let mut num = Array2::<f64>::zeros((n, n));
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[[i, 0]] - y[[j, 0]];
            let dy = y[[i, 1]] - y[[j, 1]];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[[i, j]] = v;
            num[[j, i]] = v;
            total += 2.0 * v;
        }
    }
    (num, total)
}

fn gradient(p: &Array2<f64>, y: &Array2<f64>, exaggeration: f64) -> Array2<f64> {
    let n = y.nrows();
    let (num, total) = kernel(y);
    let mut grad = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        let (mut gx, mut gy) = (0.0, 0.0);
        for j in 0..n {
            if i == j {
                continue;
            }
            let q = (num[[i, j]] / total).max(MIN_PROB);
            let m = (exaggeration * p[[i, j]] - q) * num[[i, j]];
            gx += m * (y[[i, 0]] - y[[j, 0]]);
            gy += m * (y[[i, 1]] - y[[j, 1]]);
        }
        grad[[i, 0]] = 4.0 * gx;
        grad[[i, 1]] = 4.0 * gy;
    }
    grad
}

fn kl_divergence(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let n = y.nrows();
    let (num, total) = kernel(y);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let q = (num[[i, j]] / total).max(MIN_PROB);
                kl += p[[i, j]] * (p[[i, j]] / q).ln();
            }
        }
    }
    kl
}
