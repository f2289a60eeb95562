//! Evaluation: accuracy, Fréchet distance and logit-gradient profiles.

mod frechet;
mod profile;

pub use frechet::{frechet_distance, frechet_from_stats, matrix_sqrt_psd, FrechetStats};
pub use profile::{record_logit_gradients, GradientProfile, LossEvaluator};

use crate::autodiff::Tensor;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nets::{argmax, Network, Role};

/// Rows evaluated per forward pass.
const EVAL_CHUNK: usize = 512;

/// Fraction of samples whose argmax prediction equals the label. This is
/// the one place that reads dataset labels.
pub fn accuracy(net: &Network, ds: &Dataset) -> Result<f64> {
    if net.role() != Role::Classifier {
        return Err(Error::Contract("accuracy needs a classifier".into()));
    }
    if ds.is_empty() {
        return Err(Error::Contract("accuracy on an empty dataset".into()));
    }
    if net.output_dim() < ds.classes() {
        return Err(Error::Contract(format!(
            "classifier has {} outputs, dataset has {} classes",
            net.output_dim(),
            ds.classes()
        )));
    }
    let preds = predict_classes(net, ds.samples())?;
    let labels = ds.eval_labels();
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / ds.len() as f64)
}

/// Argmax class for each row of a `[N, n]` batch.
pub fn predict_classes(net: &Network, x: &Tensor) -> Result<Vec<usize>> {
    let (rows, cols) = x.rows_cols();
    let mut out = Vec::with_capacity(rows);
    for start in (0..rows).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(rows);
        let chunk = Tensor::from_parts(vec![end - start, cols], x.values()[start * cols..end * cols].to_vec());
        let p = net.predict(&chunk)?;
        out.extend(p.rows().map(argmax));
    }
    Ok(out)
}

/// `m` generator outputs for a `[m, C]` latent batch.
pub fn generate_batch(gen: &Network, z: &Tensor) -> Result<Tensor> {
    gen.predict(z)
}
