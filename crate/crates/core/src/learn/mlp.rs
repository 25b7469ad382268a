//! Three-layer feedforward classifier over single-frame embeddings.

use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{relu, relu_grad, Classifier, Dropout};
use super::params::Layout;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: [usize; 2],
    pub dropout: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: [512, 256], dropout: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub input_dim: usize,
    pub num_classes: usize,
    pub config: MlpConfig,
    layout: Layout,
    params: Vec<f64>,
}

const W1: usize = 0;
const B1: usize = 1;
const W2: usize = 2;
const B2: usize = 3;
const W3: usize = 4;
const B3: usize = 5;

pub struct MlpCache {
    x: Array2<f64>,
    z1: Array2<f64>,
    h1: Array2<f64>,
    z2: Array2<f64>,
    h2: Array2<f64>,
    masks: Vec<Option<Array2<f64>>>,
}

impl Mlp {
    fn layout(input_dim: usize, num_classes: usize, cfg: &MlpConfig) -> Layout {
        let [a, b] = cfg.hidden;
        let mut l = Layout::default();
        l.push("w1", input_dim, a);
        l.push("b1", 1, a);
        l.push("w2", a, b);
        l.push("b2", 1, b);
        l.push("w3", b, num_classes);
        l.push("b3", 1, num_classes);
        l
    }

    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new(input_dim: usize, num_classes: usize, cfg: MlpConfig, rng: &mut ChaCha8Rng) -> Self {
        let layout = Self::layout(input_dim, num_classes, &cfg);
        let mut params = vec![0.0; layout.len()];
        for k in 0..layout.blocks.len() {
            let fan_in = layout.blocks[k - k % 2].rows;
            layout.init_uniform(&mut params, k, 1.0 / (fan_in as f64).sqrt(), rng);
        }
        Mlp { input_dim, num_classes, config: cfg, layout, params }
    }

    pub fn from_params(input_dim: usize, num_classes: usize, cfg: MlpConfig, params: Vec<f64>) -> Result<Self> {
        let layout = Self::layout(input_dim, num_classes, &cfg);
        if layout.len() != params.len() {
            return Err(Error::Shape(format!("expected {} MLP parameters, got {}", layout.len(), params.len())));
        }
        Ok(Mlp { input_dim, num_classes, config: cfg, layout, params })
    }

    /// Hidden activations after both dropout layers.
    pub fn hidden(&self, x: &Array2<f64>, dropout: Dropout<'_>) -> Result<[Array2<f64>; 2]> {
        let (_, cache) = self.forward(x, dropout)?;
        Ok([cache.h1, cache.h2])
    }
}

impl Classifier for Mlp {
    type Input = Array2<f64>;
    type Cache = MlpCache;

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, x: &Array2<f64>, mut dropout: Dropout<'_>) -> Result<(Array2<f64>, MlpCache)> {
        if x.ncols() != self.input_dim {
            return Err(Error::Shape(format!("MLP expects dim {}, got {}", self.input_dim, x.ncols())));
        }
        let l = &self.layout;
        let p = &self.params;
        let z1 = x.dot(&l.mat(p, W1)) + l.vec(p, B1);
        let m1 = dropout.mask(0, z1.dim(), self.config.dropout);
        let mut h1 = relu(&z1);
        if let Some(m) = &m1 {
            h1 *= m;
        }
        let z2 = h1.dot(&l.mat(p, W2)) + l.vec(p, B2);
        let m2 = dropout.mask(1, z2.dim(), self.config.dropout);
        let mut h2 = relu(&z2);
        if let Some(m) = &m2 {
            h2 *= m;
        }
        let logits = h2.dot(&l.mat(p, W3)) + l.vec(p, B3);
        Ok((logits, MlpCache { x: x.clone(), z1, h1, z2, h2, masks: vec![m1, m2] }))
    }

    fn backward(&self, c: &MlpCache, dlogits: &Array2<f64>) -> Vec<f64> {
        let l = &self.layout;
        let p = &self.params;
        let mut grad = vec![0.0; p.len()];
        let mut put = |k: usize, g: &Array2<f64>| {
            let dst = &mut grad[l.blocks[k].range()];
            for (d, s) in dst.iter_mut().zip(g.iter()) {
                *d = *s;
            }
        };
        let sum_rows = |g: &Array2<f64>| g.sum_axis(Axis(0)).insert_axis(Axis(0));

        put(W3, &c.h2.t().dot(dlogits));
        put(B3, &sum_rows(dlogits));
        let mut dh2 = dlogits.dot(&l.mat(p, W3).t());
        if let Some(m) = &c.masks[1] {
            dh2 *= m;
        }
        let dz2 = relu_grad(&c.z2, &dh2);
        put(W2, &c.h1.t().dot(&dz2));
        put(B2, &sum_rows(&dz2));
        let mut dh1 = dz2.dot(&l.mat(p, W2).t());
        if let Some(m) = &c.masks[0] {
            dh1 *= m;
        }
        let dz1 = relu_grad(&c.z1, &dh1);
        put(W1, &c.x.t().dot(&dz1));
        put(B1, &sum_rows(&dz1));
        grad
    }

    fn dropout_masks(cache: &MlpCache) -> Vec<Array2<f64>> {
        cache.masks.iter().zip([&cache.z1, &cache.z2]).map(|(m, z)| m.clone().unwrap_or_else(|| Array2::ones(z.dim()))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_params_give_uniform_logits() {
        let cfg = MlpConfig::default();
        let n = Mlp::layout(6, 4, &cfg).len();
        let m = Mlp::from_params(6, 4, cfg, vec![0.0; n]).unwrap();
        let x = Array2::from_elem((3, 6), 0.7);
        assert!(m.logits(&x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = Mlp::new(6, 3, MlpConfig { hidden: [8, 4], dropout: 0.5 }, &mut rng);
        assert!(matches!(m.logits(&Array2::zeros((2, 5))), Err(Error::Shape(_))));
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mlp::new(5, 3, MlpConfig { hidden: [16, 8], dropout: 0.5 }, &mut rng);
        let x = Array2::from_shape_fn((1, 5), |(_, j)| 0.5 + j as f64 * 0.3);
        let [eval1, _] = m.hidden(&x, Dropout::Off).unwrap();
        let mut acc = Array2::<f64>::zeros(eval1.dim());
        let trials = 10_000;
        for _ in 0..trials {
            acc += &m.hidden(&x, Dropout::Sample(&mut rng)).unwrap()[0];
        }
        acc /= trials as f64;
        for (a, e) in acc.iter().zip(eval1.iter()) {
            if *e > 1e-3 {
                assert!((a - e).abs() / e < 0.05, "{a} vs {e}");
            }
        }
        let total: f64 = acc.sum();
        assert!((total - eval1.sum()).abs() / eval1.sum() < 0.02);
    }
}
