//! Classifier, generator and discriminator MLPs with their role contracts.
//!
//! - classifier: `[n] → softmax → [C]`
//! - generator: `[C] → tanh, rescaled to the data range → [n]`
//! - discriminator: `[n] → sigmoid → [1]`; the pre-sigmoid score is the
//!   critic value used by the gradient-penalty variant.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng as _;

use crate::autodiff::{kernels, Graph, Param, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::{self, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Classifier,
    Generator,
    Discriminator,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Classifier => "classifier",
            Role::Generator => "generator",
            Role::Discriminator => "discriminator",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "leaky_relu" | "leaky-relu" => Ok(Activation::LeakyRelu(0.2)),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::LeakyRelu(_) => "leaky_relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    fn apply(self, g: &mut Graph, x: Var) -> Result<Var> {
        match self {
            Activation::Relu => g.relu(x),
            Activation::LeakyRelu(s) => g.leaky_relu(x, s),
            Activation::Tanh => g.tanh(x),
            Activation::Sigmoid => g.sigmoid(x),
        }
    }

    /// Elementwise derivative at pre-activation `pre`, as a tape node that is
    /// itself differentiable wherever the derivative is non-constant.
    fn derivative(self, g: &mut Graph, pre: Var) -> Result<Var> {
        match self {
            Activation::Relu => g.step_mask(pre, 0.0),
            Activation::LeakyRelu(s) => g.step_mask(pre, s),
            Activation::Tanh => {
                let t = g.tanh(pre)?;
                let t2 = g.square(t)?;
                let neg = g.scale(t2, -1.0)?;
                g.add_scalar(neg, 1.0)
            }
            Activation::Sigmoid => {
                let s = g.sigmoid(pre)?;
                let s2 = g.square(s)?;
                g.sub(s, s2)
            }
        }
    }
}

/// Value range of data samples and of generator outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataRange {
    ZeroOne,
    SymmetricOne,
}

impl DataRange {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            DataRange::ZeroOne => (0.0, 1.0),
            DataRange::SymmetricOne => (-1.0, 1.0),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "0,1" | "[0,1]" | "zero_one" => Ok(DataRange::ZeroOne),
            "-1,1" | "[-1,1]" | "symmetric" => Ok(DataRange::SymmetricOne),
            other => Err(Error::Config(format!("unknown data range `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DataRange::ZeroOne => "0,1",
            DataRange::SymmetricOne => "-1,1",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub role: Role,
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    /// Category count of the task the network belongs to.
    pub classes: usize,
    pub activation: Activation,
    pub range: DataRange,
}

impl NetworkSpec {
    pub fn classifier(n: usize, classes: usize, hidden: Vec<usize>) -> Self {
        Self {
            role: Role::Classifier,
            input_dim: n,
            hidden,
            output_dim: classes,
            classes,
            activation: Activation::Relu,
            range: DataRange::ZeroOne,
        }
    }

    pub fn generator(classes: usize, n: usize, hidden: Vec<usize>) -> Self {
        Self {
            role: Role::Generator,
            input_dim: classes,
            hidden,
            output_dim: n,
            classes,
            activation: Activation::LeakyRelu(0.2),
            range: DataRange::ZeroOne,
        }
    }

    pub fn discriminator(n: usize, classes: usize, hidden: Vec<usize>) -> Self {
        Self {
            role: Role::Discriminator,
            input_dim: n,
            hidden,
            output_dim: 1,
            classes,
            activation: Activation::LeakyRelu(0.2),
            range: DataRange::ZeroOne,
        }
    }

    /// Default desk-scale teacher: `n → 128 → 64 → C`.
    pub fn default_teacher(n: usize, classes: usize) -> Self {
        Self::classifier(n, classes, vec![128, 64])
    }

    /// Default desk-scale student: `n → 32 → C`.
    pub fn default_student(n: usize, classes: usize) -> Self {
        Self::classifier(n, classes, vec![32])
    }

    /// Default generator: `C → 64 → 128 → n`.
    pub fn default_generator(classes: usize, n: usize) -> Self {
        Self::generator(classes, n, vec![64, 128])
    }

    /// Default discriminator: `n → 128 → 64 → 1`.
    pub fn default_discriminator(n: usize, classes: usize) -> Self {
        Self::discriminator(n, classes, vec![128, 64])
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Contract(format!("{} has a zero-width layer", self.role.as_str())));
        }
        if self.classes < 2 {
            return Err(Error::Contract(format!("need at least 2 classes, got {}", self.classes)));
        }
        match self.role {
            Role::Classifier if self.output_dim != self.classes => Err(Error::Contract(format!(
                "classifier output dimension {} must equal the class count {}",
                self.output_dim, self.classes
            ))),
            Role::Generator if self.input_dim != self.classes => Err(Error::Contract(format!(
                "generator latent dimension {} must equal the class count {}",
                self.input_dim, self.classes
            ))),
            Role::Discriminator if self.output_dim != 1 => Err(Error::Contract(format!(
                "discriminator must have a single output, got {}",
                self.output_dim
            ))),
            _ => Ok(()),
        }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim];
        w.extend_from_slice(&self.hidden);
        w.push(self.output_dim);
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Dense {
    weight: Param,
    bias: Param,
}

/// A parameterized MLP with a role-specific output head.
pub struct Network {
    spec: NetworkSpec,
    name: String,
    layers: Vec<Dense>,
    frozen: bool,
    internal_reads: AtomicUsize,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            name: self.name.clone(),
            layers: self.layers.clone(),
            frozen: self.frozen,
            internal_reads: AtomicUsize::new(0),
        }
    }
}

impl fmt::Debug for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Network")
            .field("name", &self.name)
            .field("role", &self.spec.role)
            .field("widths", &self.spec.widths())
            .field("frozen", &self.frozen)
            .finish()
    }
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.layers == other.layers
    }
}

/// Activations of a discriminator forward pass kept for input-gradient
/// construction.
struct CriticTrace {
    pre: Vec<Var>,
    score: Var,
}

impl Network {
    /// Builds a network with weights and biases drawn uniformly from
    /// `[-1/√fan_in, 1/√fan_in]`.
    pub fn build(spec: NetworkSpec, name: impl Into<String>, seed: u64) -> Result<Self> {
        spec.validate()?;
        let name = name.into();
        let mut rng = rng::rng(seed, &[stream::INIT]);
        let widths = spec.widths();
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight: Vec<f64> =
                    (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
                let bias: Vec<f64> = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
                Dense {
                    weight: Param::new(
                        format!("{name}.{i}.weight"),
                        Tensor::from_parts(vec![fan_in, fan_out], weight),
                    ),
                    bias: Param::new(format!("{name}.{i}.bias"), Tensor::from_parts(vec![fan_out], bias)),
                }
            })
            .collect();
        Ok(Self { spec, name, layers, frozen: false, internal_reads: AtomicUsize::new(0) })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.spec.role
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Freezes all parameters: tape leaves created from this network never
    /// receive exported gradients and optimizers skip it.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    /// Number of times parameters were read through the public accessors.
    pub fn internal_reads(&self) -> usize {
        self.internal_reads.load(Ordering::Relaxed)
    }

    /// All parameters in layer order (weight, bias, ...).
    pub fn params(&self) -> Vec<&Param> {
        self.internal_reads.fetch_add(1, Ordering::Relaxed);
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    /// Snapshot of all parameters, for checkpointing.
    pub fn export_params(&self) -> Vec<Param> {
        self.params().into_iter().cloned().collect()
    }

    /// Trainable parameters; empty when frozen.
    pub fn trainable_mut(&mut self) -> Vec<&mut Param> {
        if self.frozen {
            return Vec::new();
        }
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.value.len() + l.bias.value.len()).sum()
    }

    /// Loads parameter values matched by position; names may differ (e.g. a
    /// teacher checkpoint loaded into an identically shaped student) but
    /// every shape must agree.
    pub fn load_params(&mut self, params: &[Param]) -> Result<()> {
        let n = self.layers.len() * 2;
        if params.len() != n {
            return Err(Error::Contract(format!(
                "{} expects {n} parameter tensors, checkpoint has {}",
                self.name,
                params.len()
            )));
        }
        for (dst, src) in self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).zip(params) {
            if dst.value.shape() != src.value.shape() {
                return Err(Error::Contract(format!(
                    "parameter `{}` has shape {:?}, checkpoint `{}` has {:?}",
                    dst.name,
                    dst.value.shape(),
                    src.name,
                    src.value.shape()
                )));
            }
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            l.weight.value = it.next().unwrap().value.clone();
            l.bias.value = it.next().unwrap().value.clone();
        }
        Ok(())
    }

    pub fn copy_params_from(&mut self, other: &Network) -> Result<()> {
        let params: Vec<Param> = other.layers.iter().flat_map(|l| [l.weight.clone(), l.bias.clone()]).collect();
        self.load_params(&params)
    }

    /// Zeroes the last layer's weights and bias.
    pub fn zero_output_layer(&mut self) {
        if let Some(last) = self.layers.last_mut() {
            last.weight.value.values_mut().iter_mut().for_each(|v| *v = 0.0);
            last.bias.value.values_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn check_input(&self, g: &Graph, x: Var) -> Result<()> {
        let t = g.value(x);
        if t.rank() != 2 || t.shape()[1] != self.spec.input_dim {
            return Err(Error::shape(
                "network input",
                format!("{} expects [m, {}], got {:?}", self.name, self.spec.input_dim, t.shape()),
            ));
        }
        Ok(())
    }

    fn layer_vars(&self, g: &mut Graph, detached: bool) -> Result<Vec<(Var, Var)>> {
        let frozen = self.frozen || detached;
        self.layers
            .iter()
            .map(|l| Ok((g.param(&l.weight, frozen)?, g.param(&l.bias, frozen)?)))
            .collect()
    }

    fn trace(&self, g: &mut Graph, x: Var, detached: bool) -> Result<CriticTrace> {
        self.check_input(g, x)?;
        let vars = self.layer_vars(g, detached)?;
        let mut h = x;
        let mut pre = Vec::with_capacity(vars.len());
        for (i, &(w, b)) in vars.iter().enumerate() {
            let z = g.linear(h, w, b)?;
            if i + 1 < vars.len() {
                pre.push(z);
                h = self.spec.activation.apply(g, z)?;
            } else {
                h = z;
            }
        }
        Ok(CriticTrace { pre, score: h })
    }

    /// Output of the last linear layer, before the role head.
    pub fn logits(&self, g: &mut Graph, x: Var) -> Result<Var> {
        Ok(self.trace(g, x, false)?.score)
    }

    /// Like [`Network::logits`] but the parameters enter the tape as frozen
    /// leaves for this graph only: gradients flow through to `x` but are
    /// not exported for this network.
    pub fn logits_detached(&self, g: &mut Graph, x: Var) -> Result<Var> {
        Ok(self.trace(g, x, true)?.score)
    }

    /// Applies the role head to pre-head outputs.
    pub fn head(&self, g: &mut Graph, logits: Var) -> Result<Var> {
        match self.spec.role {
            Role::Classifier => g.softmax(logits),
            Role::Discriminator => g.sigmoid(logits),
            Role::Generator => {
                let t = g.tanh(logits)?;
                match self.spec.range {
                    DataRange::SymmetricOne => Ok(t),
                    DataRange::ZeroOne => {
                        let half = g.scale(t, 0.5)?;
                        g.add_scalar(half, 0.5)
                    }
                }
            }
        }
    }

    /// Full forward pass: probabilities, images or discriminator outputs.
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let z = self.logits(g, x)?;
        self.head(g, z)
    }

    /// Critic score and its gradient with respect to the input, both as tape
    /// nodes. The input gradient is assembled from the layer Jacobians so a
    /// penalty on it can be differentiated into the parameters.
    pub fn score_and_input_grad(&self, g: &mut Graph, x: Var) -> Result<(Var, Var)> {
        if self.spec.output_dim != 1 {
            return Err(Error::Contract("input gradient requires a scalar-output network".into()));
        }
        let trace = self.trace(g, x, false)?;
        let vars = self.layer_vars(g, false)?;
        let rows = g.value(x).shape()[0];
        let mut grad = g.constant(Tensor::from_parts(vec![rows, 1], vec![1.0; rows]))?;
        for (i, &(w, _)) in vars.iter().enumerate().rev() {
            let wt = g.transpose(w)?;
            grad = g.matmul(grad, wt)?;
            if i > 0 {
                let d = self.spec.activation.derivative(g, trace.pre[i - 1])?;
                grad = g.mul(grad, d)?;
            }
        }
        Ok((trace.score, grad))
    }

    /// Forward-only evaluation of a `[m, input_dim]` batch.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let xv = g.input("x", x.clone())?;
        let y = self.forward(&mut g, xv)?;
        Ok(g.value(y).clone())
    }

    /// Probability vector for a single sample.
    pub fn classify(&self, x: &[f64]) -> Result<ProbVector> {
        if self.spec.role != Role::Classifier {
            return Err(Error::Contract(format!("{} is not a classifier", self.name)));
        }
        if x.len() != self.spec.input_dim {
            return Err(Error::shape(
                "classify",
                format!("expected {} features, got {}", self.spec.input_dim, x.len()),
            ));
        }
        let y = self.predict(&Tensor::matrix(1, x.len(), x.to_vec())?)?;
        Ok(ProbVector(y.into_values()))
    }

    /// Image for a single latent / probability vector of length C.
    pub fn generate(&self, y: &[f64]) -> Result<Tensor> {
        if self.spec.role != Role::Generator {
            return Err(Error::Contract(format!("{} is not a generator", self.name)));
        }
        if y.len() != self.spec.input_dim {
            return Err(Error::shape(
                "generate",
                format!("expected latent of length {}, got {}", self.spec.input_dim, y.len()),
            ));
        }
        let out = self.predict(&Tensor::matrix(1, y.len(), y.to_vec())?)?;
        out.reshape(vec![self.spec.output_dim])
    }
}

/// A categorical distribution over C classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates that components lie in `[0,1]` and sum to one within 1e-9.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Contract("probability component outside [0,1]".into()));
        }
        let s: f64 = values.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!("probabilities sum to {s}")));
        }
        Ok(Self(values))
    }

    pub fn from_logits(logits: &[f64]) -> Self {
        let mut v = logits.to_vec();
        kernels::softmax_in_place(&mut v);
        Self(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    /// Re-softens at temperature `tau`: `softmax(log p / tau)`, which equals
    /// `softmax(logits / tau)` for the logits that produced `p`.
    pub fn soften(&self, tau: f64) -> Self {
        if tau == 1.0 {
            return self.clone();
        }
        let logs: Vec<f64> = self.0.iter().map(|&p| p.max(1e-300).ln() / tau).collect();
        Self::from_logits(&logs)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}
