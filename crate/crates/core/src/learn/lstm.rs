//! Bidirectional LSTM over embedding sequences with a two-layer head.
//!
//! The sequence representation is the last element of the per-step output:
//! the forward state after input `T` joined with the backward state after it
//! has consumed input `T` alone.

use ndarray::{s, Array2, Array3, ArrayView2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{relu, relu_grad, Classifier, Dropout};
use super::params::Layout;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiLstmConfig {
    pub hidden: usize,
    pub head: usize,
    pub dropout: f64,
}

impl Default for BiLstmConfig {
    fn default() -> Self {
        BiLstmConfig { hidden: 128, head: 128, dropout: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub input_dim: usize,
    pub num_classes: usize,
    pub config: BiLstmConfig,
    layout: Layout,
    params: Vec<f64>,
}

const FWD: usize = 0;
const BWD: usize = 3;
const WX: usize = 0;
const WH: usize = 1;
const B: usize = 2;
const W4: usize = 6;
const B4: usize = 7;
const W5: usize = 8;
const B5: usize = 9;

/// Gate activations for one step, gates in the order i, f, g, o.
struct Step {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    c: Array2<f64>,
    h: Array2<f64>,
}

pub struct BiLstmCache {
    fwd: Vec<Step>,
    bwd: Step,
    rep: Array2<f64>,
    z4: Array2<f64>,
    h4: Array2<f64>,
    mask: Option<Array2<f64>>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl BiLstm {
    fn layout(input_dim: usize, num_classes: usize, cfg: &BiLstmConfig) -> Layout {
        let h = cfg.hidden;
        let mut l = Layout::default();
        l.push("fwd_wx", input_dim, 4 * h);
        l.push("fwd_wh", h, 4 * h);
        l.push("fwd_b", 1, 4 * h);
        l.push("bwd_wx", input_dim, 4 * h);
        l.push("bwd_wh", h, 4 * h);
        l.push("bwd_b", 1, 4 * h);
        l.push("w4", 2 * h, cfg.head);
        l.push("b4", 1, cfg.head);
        l.push("w5", cfg.head, num_classes);
        l.push("b5", 1, num_classes);
        l
    }

    /// Recurrent weights uniform in `±1/sqrt(H)`, head layers in `±1/sqrt(fan_in)`.
    pub fn new(input_dim: usize, num_classes: usize, cfg: BiLstmConfig, rng: &mut ChaCha8Rng) -> Self {
        let layout = Self::layout(input_dim, num_classes, &cfg);
        let mut params = vec![0.0; layout.len()];
        let k_rec = 1.0 / (cfg.hidden as f64).sqrt();
        for k in 0..W4 {
            layout.init_uniform(&mut params, k, k_rec, rng);
        }
        for k in W4..=B5 {
            let fan_in = layout.blocks[k - (k - W4) % 2].rows;
            layout.init_uniform(&mut params, k, 1.0 / (fan_in as f64).sqrt(), rng);
        }
        BiLstm { input_dim, num_classes, config: cfg, layout, params }
    }

    pub fn from_params(input_dim: usize, num_classes: usize, cfg: BiLstmConfig, params: Vec<f64>) -> Result<Self> {
        let layout = Self::layout(input_dim, num_classes, &cfg);
        if layout.len() != params.len() {
            return Err(Error::Shape(format!("expected {} BiLSTM parameters, got {}", layout.len(), params.len())));
        }
        Ok(BiLstm { input_dim, num_classes, config: cfg, layout, params })
    }

    fn step(&self, dir: usize, x: ArrayView2<'_, f64>, h_prev: Array2<f64>, c_prev: Array2<f64>) -> Step {
        let hs = self.config.hidden;
        let l = &self.layout;
        let p = &self.params;
        let z = x.dot(&l.mat(p, dir + WX)) + h_prev.dot(&l.mat(p, dir + WH)) + l.vec(p, dir + B);
        let i = z.slice(s![.., 0..hs]).mapv(sigmoid);
        let f = z.slice(s![.., hs..2 * hs]).mapv(sigmoid);
        let g = z.slice(s![.., 2 * hs..3 * hs]).mapv(f64::tanh);
        let o = z.slice(s![.., 3 * hs..]).mapv(sigmoid);
        let c = &f * &c_prev + &i * &g;
        let h = &o * &c.mapv(f64::tanh);
        Step { x: x.to_owned(), h_prev, c_prev, i, f, g, o, c, h }
    }

    /// Concatenated per-step outputs of both directions, shape `B × T × 2H`.
    pub fn sequence_outputs(&self, x: &Array3<f64>) -> Result<Array3<f64>> {
        let (b, t, _) = self.check(x)?;
        let hs = self.config.hidden;
        let mut out = Array3::zeros((b, t, 2 * hs));
        let zero = || Array2::<f64>::zeros((b, hs));
        let (mut h, mut c) = (zero(), zero());
        for k in 0..t {
            let st = self.step(FWD, x.slice(s![.., k, ..]), h, c);
            out.slice_mut(s![.., k, 0..hs]).assign(&st.h);
            (h, c) = (st.h, st.c);
        }
        let (mut h, mut c) = (zero(), zero());
        for k in (0..t).rev() {
            let st = self.step(BWD, x.slice(s![.., k, ..]), h, c);
            out.slice_mut(s![.., k, hs..]).assign(&st.h);
            (h, c) = (st.h, st.c);
        }
        Ok(out)
    }

    fn check(&self, x: &Array3<f64>) -> Result<(usize, usize, usize)> {
        let (b, t, d) = x.dim();
        if t == 0 {
            return Err(Error::EmptySequence);
        }
        if d != self.input_dim {
            return Err(Error::Shape(format!("BiLSTM expects dim {}, got {d}", self.input_dim)));
        }
        Ok((b, t, d))
    }

    fn step_backward(
        &self,
        dir: usize,
        st: &Step,
        dh: &Array2<f64>,
        dc: &Array2<f64>,
        grad: &mut [f64],
    ) -> (Array2<f64>, Array2<f64>) {
        let hs = self.config.hidden;
        let tc = st.c.mapv(f64::tanh);
        let d_o = dh * &tc;
        let dc = dc + &(dh * &st.o * &tc.mapv(|v| 1.0 - v * v));
        let di = &dc * &st.g;
        let dg = &dc * &st.i;
        let df = &dc * &st.c_prev;
        let dc_prev = &dc * &st.f;
        let mut dz = Array2::<f64>::zeros((dh.nrows(), 4 * hs));
        dz.slice_mut(s![.., 0..hs]).assign(&(&di * &st.i.mapv(|v| v * (1.0 - v))));
        dz.slice_mut(s![.., hs..2 * hs]).assign(&(&df * &st.f.mapv(|v| v * (1.0 - v))));
        dz.slice_mut(s![.., 2 * hs..3 * hs]).assign(&(&dg * &st.g.mapv(|v| 1.0 - v * v)));
        dz.slice_mut(s![.., 3 * hs..]).assign(&(&d_o * &st.o.mapv(|v| v * (1.0 - v))));
        let l = &self.layout;
        l.mat_mut(grad, dir + WX).scaled_add(1.0, &st.x.t().dot(&dz));
        l.mat_mut(grad, dir + WH).scaled_add(1.0, &st.h_prev.t().dot(&dz));
        l.mat_mut(grad, dir + B).scaled_add(1.0, &dz.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let dh_prev = dz.dot(&l.mat(&self.params, dir + WH).t());
        (dh_prev, dc_prev)
    }
}

impl Classifier for BiLstm {
    type Input = Array3<f64>;
    type Cache = BiLstmCache;

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn forward(&self, x: &Array3<f64>, mut dropout: Dropout<'_>) -> Result<(Array2<f64>, BiLstmCache)> {
        let (b, t, _) = self.check(x)?;
        let hs = self.config.hidden;
        let zero = || Array2::<f64>::zeros((b, hs));
        let mut fwd = Vec::with_capacity(t);
        let (mut h, mut c) = (zero(), zero());
        for k in 0..t {
            let st = self.step(FWD, x.slice(s![.., k, ..]), h, c);
            (h, c) = (st.h.clone(), st.c.clone());
            fwd.push(st);
        }
        let bwd = self.step(BWD, x.slice(s![.., t - 1, ..]), zero(), zero());
        let mut rep = Array2::zeros((b, 2 * hs));
        rep.slice_mut(s![.., 0..hs]).assign(&h);
        rep.slice_mut(s![.., hs..]).assign(&bwd.h);

        let l = &self.layout;
        let p = &self.params;
        let z4 = rep.dot(&l.mat(p, W4)) + l.vec(p, B4);
        let mask = dropout.mask(0, z4.dim(), self.config.dropout);
        let mut h4 = relu(&z4);
        if let Some(m) = &mask {
            h4 *= m;
        }
        let logits = h4.dot(&l.mat(p, W5)) + l.vec(p, B5);
        Ok((logits, BiLstmCache { fwd, bwd, rep, z4, h4, mask }))
    }

    fn backward(&self, c: &BiLstmCache, dlogits: &Array2<f64>) -> Vec<f64> {
        let hs = self.config.hidden;
        let l = &self.layout;
        let p = &self.params;
        let mut grad = vec![0.0; p.len()];
        l.mat_mut(&mut grad, W5).assign(&c.h4.t().dot(dlogits));
        l.mat_mut(&mut grad, B5).assign(&dlogits.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let mut dh4 = dlogits.dot(&l.mat(p, W5).t());
        if let Some(m) = &c.mask {
            dh4 *= m;
        }
        let dz4 = relu_grad(&c.z4, &dh4);
        l.mat_mut(&mut grad, W4).assign(&c.rep.t().dot(&dz4));
        l.mat_mut(&mut grad, B4).assign(&dz4.sum_axis(Axis(0)).insert_axis(Axis(0)));
        let drep = dz4.dot(&l.mat(p, W4).t());

        let b = drep.nrows();
        let dh_b = drep.slice(s![.., hs..]).to_owned();
        self.step_backward(BWD, &c.bwd, &dh_b, &Array2::zeros((b, hs)), &mut grad);
        let mut dh = drep.slice(s![.., 0..hs]).to_owned();
        let mut dc = Array2::zeros((b, hs));
        for st in c.fwd.iter().rev() {
            (dh, dc) = self.step_backward(FWD, st, &dh, &dc, &mut grad);
        }
        grad
    }

    fn dropout_masks(cache: &BiLstmCache) -> Vec<Array2<f64>> {
        vec![cache.mask.clone().unwrap_or_else(|| Array2::ones(cache.z4.dim()))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn small(seed: u64) -> BiLstm {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BiLstm::new(3, 2, BiLstmConfig { hidden: 4, head: 5, dropout: 0.3 }, &mut rng)
    }

    #[test]
    fn zero_recurrent_weights_leave_head_bias() {
        let cfg = BiLstmConfig::default();
        let n = BiLstm::layout(4, 3, &cfg).len();
        let mut params = vec![0.0; n];
        let tail = params.len() - 3;
        params[tail..].copy_from_slice(&[0.5, -1.0, 2.0]);
        let m = BiLstm::from_params(4, 3, cfg, params).unwrap();
        let x = Array3::from_elem((2, 6, 4), 0.9);
        let logits = m.logits(&x).unwrap();
        for row in logits.rows() {
            assert_eq!(row.to_vec(), vec![0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn empty_sequence_is_rejected() {
        assert!(matches!(small(0).logits(&Array3::zeros((1, 0, 3))), Err(Error::EmptySequence)));
    }

    #[test]
    fn representation_is_last_step_output() {
        let m = small(2);
        let x = Array3::from_shape_fn((2, 5, 3), |(b, t, d)| ((b * 7 + t * 3 + d) % 5) as f64 * 0.3 - 0.5);
        let out = m.sequence_outputs(&x).unwrap();
        let (_, cache) = m.forward(&x, Dropout::Off).unwrap();
        let last = out.slice(s![.., 4, ..]);
        for (a, b) in last.iter().zip(cache.rep.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_step_directions_share_input() {
        let m = small(3);
        let x = Array3::from_shape_fn((1, 1, 3), |(_, _, d)| d as f64 - 1.0);
        let out = m.sequence_outputs(&x).unwrap();
        assert_eq!(out.dim(), (1, 1, 8));
        let (_, cache) = m.forward(&x, Dropout::Off).unwrap();
        assert_eq!(out.slice(s![0, 0, ..]), cache.rep.row(0));
    }
}
