use crate::autodiff::{Graph, Tensor};
use crate::distill::{student_loss_from_logits, DistillConfig, Norm, TeacherTargets};
use crate::error::{Error, Result};
use crate::nets::{Network, ProbVector};

/// Loss whose logit gradient is being profiled.
#[derive(Clone, Copy, Debug)]
pub enum LossEvaluator<'a> {
    /// Cross-entropy against the ground-truth class.
    SupervisedCe,
    /// Soft-target KL at temperature `tau`.
    BaselineKd { teacher: &'a ProbVector, tau: f64 },
    /// Generated-image distance plus KL through a frozen generator.
    Mekd { teacher: &'a ProbVector, generator: &'a Network, norm: Norm, alpha: f64, beta: f64, tau: f64 },
}

impl LossEvaluator<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            LossEvaluator::SupervisedCe => "ce",
            LossEvaluator::BaselineKd { .. } => "kd",
            LossEvaluator::Mekd { norm: Norm::L1, .. } => "mekd-l1",
            LossEvaluator::Mekd { norm: Norm::L2, .. } => "mekd-l2",
        }
    }
}

/// Gradient of a loss with respect to the student's pre-softmax outputs,
/// reordered so the ground-truth class comes first and the rest keep
/// their relative order.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientProfile {
    pub true_class: usize,
    pub values: Vec<f64>,
}

impl GradientProfile {
    fn from_raw(raw: &[f64], true_class: usize) -> Self {
        let mut values = Vec::with_capacity(raw.len());
        values.push(raw[true_class]);
        values.extend(raw.iter().enumerate().filter(|(i, _)| *i != true_class).map(|(_, v)| *v));
        Self { true_class, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `experiment,sample,g0..g{C-1}` row.
    pub fn csv_row(&self, experiment: &str, sample: usize) -> String {
        let vals: Vec<String> = self.values.iter().map(|v| v.to_string()).collect();
        format!("{experiment},{sample},{}", vals.join(","))
    }

    pub fn csv_header(classes: usize) -> String {
        let cols: Vec<String> = (0..classes).map(|i| format!("g{i}")).collect();
        format!("experiment,sample,{}", cols.join(","))
    }
}

pub fn record_logit_gradients(
    student: &Network,
    evaluator: &LossEvaluator<'_>,
    sample: &[f64],
    true_class: usize,
) -> Result<GradientProfile> {
    let classes = student.output_dim();
    if true_class >= classes {
        return Err(Error::Contract(format!("class {true_class} outside [0, {classes})")));
    }
    let mut g = Graph::new();
    let x = g.input("x", Tensor::matrix(1, sample.len(), sample.to_vec())?)?;
    let logits = student.logits(&mut g, x)?;
    let loss = match *evaluator {
        LossEvaluator::SupervisedCe => {
            let lp = g.log_softmax(logits)?;
            let mut onehot = vec![0.0; classes];
            onehot[true_class] = 1.0;
            let oh = g.constant(Tensor::matrix(1, classes, onehot)?)?;
            let picked = g.mul(oh, lp)?;
            let s = g.sum(picked)?;
            g.scale(s, -1.0)?
        }
        LossEvaluator::BaselineKd { teacher, tau } => {
            let cfg = DistillConfig { alpha: 0.0, beta: 1.0, tau, ..DistillConfig::default() };
            let targets = TeacherTargets::new(std::slice::from_ref(teacher), &cfg)?;
            student_loss_from_logits(&mut g, logits, None, &targets, &cfg)?.total
        }
        LossEvaluator::Mekd { teacher, generator, norm, alpha, beta, tau } => {
            let cfg = DistillConfig { alpha, beta, tau, norm, ..DistillConfig::default() };
            let targets = TeacherTargets::new(std::slice::from_ref(teacher), &cfg)?;
            student_loss_from_logits(&mut g, logits, Some(generator), &targets, &cfg)?.total
        }
    };
    g.backward(loss)?;
    let raw = g.grad(logits).expect("logits reach the loss").to_vec();
    Ok(GradientProfile::from_raw(&raw, true_class))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::NetworkSpec;

    #[test]
    fn reorders_true_class_first() {
        let p = GradientProfile::from_raw(&[0.1, 0.2, 0.3, 0.4], 2);
        assert_eq!(p.values, vec![0.3, 0.1, 0.2, 0.4]);
        let mut a = p.values.clone();
        a.sort_by(f64::total_cmp);
        assert_eq!(a, vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn ce_gradient_is_p_minus_onehot() {
        let net = Network::build(NetworkSpec::classifier(5, 3, vec![4]), "s", 7).unwrap();
        let x = [0.2, 0.4, 0.1, 0.9, 0.5];
        let p = net.classify(&x).unwrap();
        let prof = record_logit_gradients(&net, &LossEvaluator::SupervisedCe, &x, 1).unwrap();
        assert_eq!(prof.len(), 3);
        let expected = [p.values()[1] - 1.0, p.values()[0], p.values()[2]];
        for (a, b) in prof.values.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn class_out_of_range() {
        let net = Network::build(NetworkSpec::classifier(5, 3, vec![4]), "s", 7).unwrap();
        assert!(record_logit_gradients(&net, &LossEvaluator::SupervisedCe, &[0.0; 5], 3).is_err());
    }
}
