//! Symmetric contrastive loss over paired image and text embeddings and
//! zero-shot classification by cosine similarity.
//!
//! Logits are `τ·S` with `S` the cosine similarity matrix.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClipLoss {
    pub loss: f64,
    pub image_loss: f64,
    pub text_loss: f64,
    pub grad_images: Array2<f64>,
    pub grad_texts: Array2<f64>,
}

fn normalize_rows(x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let norms = x.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if norms.iter().any(|&n| !(n > 0.0)) {
        return Err(Error::UndefinedCosine);
    }
    Ok((&x / &norms.view().insert_axis(Axis(1)), norms))
}

/// Gradient through `x / |x|` for each row.
fn unnormalize_grad(unit: &Array2<f64>, norms: &Array1<f64>, d_unit: &Array2<f64>) -> Array2<f64> {
    let proj = (unit * d_unit).sum_axis(Axis(1)).insert_axis(Axis(1));
    (d_unit - &(unit * &proj)) / norms.view().insert_axis(Axis(1))
}

/// Row-wise cross-entropy against the diagonal, returning the mean loss and
/// `softmax - I` per row.
fn diagonal_ce(logits: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = logits.nrows();
    let mut loss = 0.0;
    let mut g = Array2::zeros((n, n));
    for (i, row) in logits.rows().into_iter().enumerate() {
        let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let log_z = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += log_z - row[i];
        for j in 0..n {
            g[[i, j]] = (row[j] - log_z).exp();
        }
        g[[i, i]] -= 1.0;
    }
    (loss / n as f64, g)
}

pub fn clip_loss(images: ArrayView2<'_, f64>, texts: ArrayView2<'_, f64>, tau: f64) -> Result<ClipLoss> {
    if images.dim() != texts.dim() || images.nrows() == 0 {
        return Err(Error::Shape(format!("image batch {:?} and text batch {:?}", images.dim(), texts.dim())));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("temperature must be positive, got {tau}")));
    }
    let n = images.nrows() as f64;
    let (ui, ni) = normalize_rows(images)?;
    let (ut, nt) = normalize_rows(texts)?;
    let logits = ui.dot(&ut.t()) * tau;
    let (image_loss, gi) = diagonal_ce(&logits);
    let (text_loss, gt) = diagonal_ce(&logits.t().to_owned());
    let dlogits = (&gi + &gt.t()) / (2.0 * n);
    let ds = dlogits * tau;
    let d_ui = ds.dot(&ut);
    let d_ut = ds.t().dot(&ui);
    Ok(ClipLoss {
        loss: 0.5 * (image_loss + text_loss),
        image_loss,
        text_loss,
        grad_images: unnormalize_grad(&ui, &ni, &d_ui),
        grad_texts: unnormalize_grad(&ut, &nt, &d_ut),
    })
}

/// Class with the highest cosine similarity, lowest index on ties.
pub fn clip_zero_shot(image: ArrayView1<'_, f64>, class_texts: ArrayView2<'_, f64>) -> Result<usize> {
    if class_texts.nrows() == 0 || class_texts.ncols() != image.len() {
        return Err(Error::Shape(format!("image dim {} against text batch {:?}", image.len(), class_texts.dim())));
    }
    let norm = image.dot(&image).sqrt();
    if !(norm > 0.0) {
        return Err(Error::UndefinedCosine);
    }
    let (ut, _) = normalize_rows(class_texts)?;
    let sims = ut.dot(&image) / norm;
    let mut best = 0;
    for (k, &s) in sims.iter().enumerate() {
        if s > sims[best] {
            best = k;
        }
    }
    Ok(best)
}
