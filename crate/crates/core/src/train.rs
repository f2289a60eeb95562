//! Supervised cross-entropy training, used to produce teachers.

use crate::autodiff::{Graph, OptimizerSettings, Sgd, Tensor, Var};
use crate::data::{batches, Dataset};
use crate::error::{Error, Result};
use crate::metrics;
use crate::nets::{Network, Role};
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSettings,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            optimizer: OptimizerSettings { lr: 0.05, momentum: 0.9, milestones: vec![30, 40], gamma: 0.1, clip_norm: None },
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}

/// One-hot rows for `labels`, `[m, classes]`.
pub fn one_hot(labels: &[usize], classes: usize) -> Result<Tensor> {
    let mut values = vec![0.0; labels.len() * classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::Contract(format!("label {l} outside [0, {classes})")));
        }
        values[i * classes + l] = 1.0;
    }
    Tensor::new(vec![labels.len(), classes], values)
}

/// Batch-mean cross-entropy `−(1/m) Σ log softmax(z)_y` from logits.
pub fn cross_entropy_term(g: &mut Graph, logits: Var, targets: &Tensor) -> Result<Var> {
    let m = g.value(logits).rows_cols().0;
    let lsm = g.log_softmax(logits)?;
    let t = g.constant(targets.clone())?;
    let picked = g.mul(t, lsm)?;
    let s = g.sum(picked)?;
    g.scale(s, -1.0 / m as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub lr: f64,
}

pub const TRAIN_LOG_HEADER: &str = "epoch,loss,train_acc,test_acc,lr";

pub fn train_log_csv(rows: &[TrainLogRow]) -> String {
    let mut out = format!("{TRAIN_LOG_HEADER}\n");
    for r in rows {
        let test = r.test_acc.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", r.epoch, r.loss, r.train_acc, test, r.lr));
    }
    out
}

/// Trains a classifier with labels. This is the only training routine that
/// reads `Dataset::labels`.
pub fn train_classifier(
    net: &mut Network,
    train: &Dataset,
    eval: Option<&Dataset>,
    settings: &TrainSettings,
    seed: u64,
) -> Result<Vec<TrainLogRow>> {
    settings.validate()?;
    if net.role() != Role::Classifier {
        return Err(Error::Contract("only classifiers are trained with labels".into()));
    }
    if net.input_dim() != train.dim() || net.output_dim() != train.classes() {
        return Err(Error::Contract(format!(
            "network {}→{} does not fit data {}→{}",
            net.input_dim(),
            net.output_dim(),
            train.dim(),
            train.classes()
        )));
    }
    let n = train.len();
    let labels = train.labels().to_vec();
    let mut sgd = Sgd::new(settings.optimizer.lr, settings.optimizer.momentum);
    let mut rows = Vec::with_capacity(settings.epochs);
    for epoch in 0..settings.epochs {
        let lr = settings.optimizer.lr_at(epoch);
        sgd.lr = lr;
        let plan = batches(n, settings.batch_size.min(n), derive_seed(seed, &[epoch as u64]), true)?;
        let mut total = 0.0;
        for (step, idx) in plan.iter().enumerate() {
            let diverged = |e: Error| Error::Diverged { epoch, step, detail: e.to_string() };
            let batch_labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let targets = one_hot(&batch_labels, train.classes())?;
            let mut g = Graph::new();
            let x = g.input("x", train.gather(idx))?;
            let logits = net.logits(&mut g, x).map_err(diverged)?;
            let loss = cross_entropy_term(&mut g, logits, &targets).map_err(diverged)?;
            let mut grads = g.backward(loss)?;
            if let Some(c) = settings.optimizer.clip_norm {
                grads.clip_global_norm(c);
            }
            sgd.step(net.trainable_mut(), &grads)?;
            total += g.scalar(loss) * idx.len() as f64;
        }
        let row = TrainLogRow {
            epoch,
            loss: total / n as f64,
            train_acc: metrics::accuracy(net, train)?,
            test_acc: eval.map(|e| metrics::accuracy(net, e)).transpose()?,
            lr,
        };
        log::debug!("classifier epoch {epoch}: loss={:.5} train_acc={:.4}", row.loss, row.train_acc);
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::NetworkSpec;

    #[test]
    fn cross_entropy_of_uniform_logits_is_log_c() {
        let mut g = Graph::new();
        let z = g.input("z", Tensor::matrix(2, 4, vec![0.0; 8]).unwrap()).unwrap();
        let t = one_hot(&[1, 3], 4).unwrap();
        let l = cross_entropy_term(&mut g, z, &t).unwrap();
        assert!((g.scalar(l) - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn one_hot_rejects_out_of_range() {
        assert!(one_hot(&[0, 2], 2).is_err());
    }

    #[test]
    fn learns_separable_blobs() {
        let ds = crate::data::synth_blobs(2, 4, 50, 0.05, 3).unwrap();
        let mut net = Network::build(NetworkSpec::classifier(4, 2, vec![8]), "t", 1).unwrap();
        let settings = TrainSettings { epochs: 20, batch_size: 20, ..TrainSettings::default() };
        let rows = train_classifier(&mut net, &ds, None, &settings, 0).unwrap();
        assert!(rows.last().unwrap().train_acc >= 0.99);
    }

    #[test]
    fn zero_epochs_is_noop() {
        let ds = crate::data::synth_blobs(2, 4, 5, 0.05, 3).unwrap();
        let mut net = Network::build(NetworkSpec::classifier(4, 2, vec![8]), "t", 1).unwrap();
        let before = net.clone();
        let settings = TrainSettings { epochs: 0, ..TrainSettings::default() };
        train_classifier(&mut net, &ds, None, &settings, 0).unwrap();
        assert_eq!(net, before);
    }
}
