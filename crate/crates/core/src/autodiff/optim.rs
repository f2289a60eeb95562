use std::collections::BTreeMap;

use super::graph::{Gradients, Param};
use crate::error::{Error, Result};

/// SGD hyperparameters plus a multi-step learning-rate schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerSettings {
    pub lr: f64,
    pub momentum: f64,
    pub milestones: Vec<usize>,
    pub gamma: f64,
    /// Optional global-norm gradient clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { lr: 0.05, momentum: 0.9, milestones: Vec::new(), gamma: 0.1, clip_norm: None }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0,1), got {}", self.momentum)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0,1], got {}", self.gamma)));
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("milestones must be strictly increasing".into()));
        }
        if let Some(c) = self.clip_norm {
            if c <= 0.0 {
                return Err(Error::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        multistep_lr(epoch, self.lr, &self.milestones, self.gamma)
    }
}

/// `base_lr · gamma^(number of milestones ≤ epoch)`.
pub fn multistep_lr(epoch: usize, base_lr: f64, milestones: &[usize], gamma: f64) -> f64 {
    let passed = milestones.iter().filter(|&&m| m <= epoch).count();
    base_lr * gamma.powi(passed as i32)
}

/// Momentum SGD: `v ← μ·v + g`, `p ← p − lr·v`.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: BTreeMap<String, Vec<f64>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self { lr, momentum, velocity: BTreeMap::new() }
    }

    pub fn velocity(&self, name: &str) -> Option<&[f64]> {
        self.velocity.get(name).map(Vec::as_slice)
    }

    /// Applies one update to every parameter. Every parameter must have a
    /// gradient; nothing is modified if one is missing.
    pub fn step<'a, I>(&mut self, params: I, grads: &Gradients) -> Result<()>
    where
        I: IntoIterator<Item = &'a mut Param>,
    {
        let params: Vec<&mut Param> = params.into_iter().collect();
        for p in &params {
            let g = grads.get(&p.name).ok_or_else(|| Error::MissingGradient(p.name.clone()))?;
            if g.len() != p.value.len() {
                return Err(Error::shape("sgd_step", format!("gradient for `{}` has wrong size", p.name)));
            }
        }
        for p in params {
            let g = grads.get(&p.name).expect("checked above").values();
            let v = self.velocity.entry(p.name.clone()).or_insert_with(|| vec![0.0; g.len()]);
            for ((pv, vv), &gv) in p.value.values_mut().iter_mut().zip(v.iter_mut()).zip(g) {
                *vv = self.momentum * *vv + gv;
                *pv -= self.lr * *vv;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn grads(name: &str, g: f64) -> Gradients {
        let mut out = Gradients::default();
        out.insert(name.into(), Tensor::scalar(g));
        out
    }

    #[test]
    fn one_plain_step() {
        let mut p = Param::new("p", Tensor::scalar(1.0));
        let mut sgd = Sgd::new(0.1, 0.0);
        sgd.step([&mut p], &grads("p", 0.5)).unwrap();
        assert!((p.value.values()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = Param::new("p", Tensor::scalar(1.25));
        let mut sgd = Sgd::new(0.1, 0.9);
        for _ in 0..3 {
            sgd.step([&mut p], &grads("p", 0.0)).unwrap();
        }
        assert_eq!(p.value.values()[0], 1.25);
    }

    #[test]
    fn momentum_recurrence_two_steps() {
        let mut p = Param::new("p", Tensor::scalar(1.0));
        let mut sgd = Sgd::new(0.1, 0.9);
        sgd.step([&mut p], &grads("p", 1.0)).unwrap();
        sgd.step([&mut p], &grads("p", 1.0)).unwrap();
        assert!((p.value.values()[0] - 0.71).abs() < 1e-12);
        assert!((sgd.velocity("p").unwrap()[0] - 1.9).abs() < 1e-12);
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut p = Param::new("p", Tensor::scalar(1.0));
        let mut sgd = Sgd::new(0.1, 0.0);
        let err = sgd.step([&mut p], &grads("q", 1.0)).unwrap_err();
        assert!(matches!(err, Error::MissingGradient(n) if n == "p"));
        assert_eq!(p.value.values()[0], 1.0);
    }

    #[test]
    fn multistep_schedule() {
        let ms = [150, 180, 210];
        assert_eq!(multistep_lr(0, 0.1, &ms, 0.1), 0.1);
        assert!((multistep_lr(160, 0.1, &ms, 0.1) - 0.01).abs() < 1e-15);
        assert!((multistep_lr(220, 0.1, &ms, 0.1) - 0.0001).abs() < 1e-15);
        assert!((multistep_lr(150, 0.1, &ms, 0.1) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn settings_validation() {
        let mut s = OptimizerSettings::default();
        assert!(s.validate().is_ok());
        s.milestones = vec![5, 5];
        assert!(s.validate().is_err());
        s.milestones.clear();
        s.momentum = 1.0;
        assert!(s.validate().is_err());
    }
}
