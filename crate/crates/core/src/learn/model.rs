//! Shared classifier interface, dropout, and batch selection.

use ndarray::{Array2, Array3, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// How dropout layers behave during a forward pass.
pub enum Dropout<'a> {
    /// Evaluation mode.
    Off,
    /// Draw fresh inverted-dropout masks.
    Sample(&'a mut ChaCha8Rng),
    /// Reuse masks from an earlier pass, in layer order.
    Fixed(&'a [Array2<f64>]),
}

impl Dropout<'_> {
    /// Returns a mask of 0 or `1/(1-p)` entries, or `None` when disabled.
    pub(crate) fn mask(&mut self, layer: usize, shape: (usize, usize), p: f64) -> Option<Array2<f64>> {
        match self {
            Dropout::Off => None,
            Dropout::Fixed(masks) => Some(masks[layer].clone()),
            Dropout::Sample(_) if p <= 0.0 => None,
            Dropout::Sample(rng) => {
                let keep = 1.0 / (1.0 - p);
                Some(Array2::from_shape_fn(shape, |_| if rng.random::<f64>() < p { 0.0 } else { keep }))
            }
        }
    }
}

/// Examples stacked along the first axis.
pub trait Batch: Sized {
    fn count(&self) -> usize;
    fn gather(&self, idx: &[usize]) -> Self;
}

impl Batch for Array2<f64> {
    fn count(&self) -> usize {
        self.nrows()
    }

    fn gather(&self, idx: &[usize]) -> Self {
        self.select(Axis(0), idx)
    }
}

impl Batch for Array3<f64> {
    fn count(&self) -> usize {
        self.len_of(Axis(0))
    }

    fn gather(&self, idx: &[usize]) -> Self {
        self.select(Axis(0), idx)
    }
}

pub trait Classifier: Clone {
    type Input: Batch;
    type Cache;

    fn num_classes(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];
    fn forward(&self, x: &Self::Input, dropout: Dropout<'_>) -> Result<(Array2<f64>, Self::Cache)>;
    /// Gradient of the loss with respect to every parameter, in storage order.
    fn backward(&self, cache: &Self::Cache, dlogits: &Array2<f64>) -> Vec<f64>;
    /// Masks drawn during the forward pass that produced `cache`.
    fn dropout_masks(cache: &Self::Cache) -> Vec<Array2<f64>>;

    fn logits(&self, x: &Self::Input) -> Result<Array2<f64>> {
        Ok(self.forward(x, Dropout::Off)?.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Bilstm,
}

impl std::str::FromStr for ModelKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "bilstm" => Ok(ModelKind::Bilstm),
            other => Err(crate::Error::InvalidConfig(format!("unknown model kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Bilstm => "bilstm",
        })
    }
}

pub(crate) fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

pub(crate) fn relu_grad(z: &Array2<f64>, upstream: &Array2<f64>) -> Array2<f64> {
    let mut g = upstream.clone();
    g.zip_mut_with(z, |g, &z| {
        if z <= 0.0 {
            *g = 0.0
        }
    });
    g
}
