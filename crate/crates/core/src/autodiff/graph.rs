use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU32, Ordering};

use super::kernels;
use super::tensor::Tensor;
use crate::error::{Error, Result};

static NEXT_GRAPH_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to a node on a [`Graph`] tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    graph: u32,
    idx: u32,
}

impl Var {
    pub fn index(self) -> usize {
        self.idx as usize
    }
}

/// A named trainable tensor owned by a network.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        Self { name: name.into(), value }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input(String),
    Param { name: String, frozen: bool },
    MatMul(Var, Var),
    Transpose(Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    StepMask(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Log(Var),
    Exp(Var),
    Sqrt(Var),
    Abs(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    Concat(Vec<Var>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input(_) => "input",
            Op::Param { .. } => "param",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::AddBias(..) => "add_bias",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Relu(_) => "relu",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::StepMask(..) => "step_mask",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Softmax(_) => "softmax",
            Op::LogSoftmax(_) => "log_softmax",
            Op::Log(_) => "log",
            Op::Exp(_) => "exp",
            Op::Sqrt(_) => "sqrt",
            Op::Abs(_) => "abs",
            Op::Square(_) => "square",
            Op::Clamp(..) => "clamp",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::SumRows(_) => "sum_rows",
            Op::Concat(_) => "concat",
        }
    }
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Parameter gradients produced by [`Graph::backward`], keyed by parameter name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    by_name: BTreeMap<String, Tensor>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.by_name.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.by_name.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn global_norm(&self) -> f64 {
        self.by_name
            .values()
            .flat_map(|t| t.values())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales all gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for t in self.by_name.values_mut() {
                t.values_mut().iter_mut().for_each(|g| *g *= s);
            }
        }
        norm
    }

    /// Adds `other` into `self`, name by name.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (name, g) in &other.by_name {
            match self.by_name.get_mut(name) {
                Some(acc) => acc
                    .values_mut()
                    .iter_mut()
                    .zip(g.values())
                    .for_each(|(a, b)| *a += b),
                None => {
                    self.by_name.insert(name.clone(), g.clone());
                }
            }
        }
    }

    pub(crate) fn insert(&mut self, name: String, grad: Tensor) {
        self.by_name.insert(name, grad);
    }
}

/// Define-by-run reverse-mode tape.
///
/// Every op evaluates eagerly and records itself; intermediate values stay on
/// the tape until the graph is dropped. `backward` walks the tape in exact
/// reverse insertion order, which is a reverse topological order because a
/// node can only reference nodes created before it.
pub struct Graph {
    id: u32,
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            params: HashMap::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        let idx = self.nodes.len();
        if !value.all_finite() {
            return Err(Error::NonFinite { node: idx, op: op.name() });
        }
        self.nodes.push(Node { op, value });
        Ok(Var { graph: self.id, idx: idx as u32 })
    }

    fn node(&self, v: Var) -> &Tensor {
        &self.nodes[v.index()].value
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.graph != self.id || v.index() >= self.nodes.len() {
            return Err(Error::BackwardBeforeForward(format!(
                "variable {} does not belong to this graph",
                v.idx
            )));
        }
        Ok(())
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.node(v)
    }

    /// Scalar value of a single-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.node(v).values()[0]
    }

    /// Gradient of the last `backward` loss with respect to `v`, if reached.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.index()).and_then(|g| g.as_deref())
    }

    /// Name an input leaf was registered under.
    pub fn input_name(&self, v: Var) -> Option<&str> {
        self.check(v).ok()?;
        match &self.nodes[v.index()].op {
            Op::Input(name) => Some(name),
            _ => None,
        }
    }

    pub fn input(&mut self, name: impl Into<String>, value: Tensor) -> Result<Var> {
        self.push(Op::Input(name.into()), value)
    }

    /// Constant leaf; gradients are recorded for it but never exported.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.input("const", value)
    }

    /// Parameter leaf. A parameter registered twice maps to the same node so
    /// its gradient accumulates across every use.
    pub fn param(&mut self, p: &Param, frozen: bool) -> Result<Var> {
        if let Some(&v) = self.params.get(&p.name) {
            return Ok(v);
        }
        let v = self.push(Op::Param { name: p.name.clone(), frozen }, p.value.clone())?;
        self.params.insert(p.name.clone(), v);
        Ok(v)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let t = self.node(a);
        let out = Tensor::from_parts(t.shape().to_vec(), t.values().iter().map(|&x| f(x)).collect());
        self.push(op, out)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.node(a).shape(), self.node(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        self.same_shape(op.name(), a, b)?;
        let (ta, tb) = (self.node(a), self.node(b));
        let values = ta.values().iter().zip(tb.values()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::from_parts(ta.shape().to_vec(), values);
        self.push(op, out)
    }

    fn as_matrix(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        let t = self.node(v);
        if t.rank() != 2 {
            return Err(Error::shape(op, format!("expected rank 2, got {:?}", t.shape())));
        }
        Ok((t.shape()[0], t.shape()[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, k) = self.as_matrix("matmul", a)?;
        let (k2, c) = self.as_matrix("matmul", b)?;
        if k != k2 {
            return Err(Error::shape("matmul", format!("[{r},{k}] x [{k2},{c}]")));
        }
        let out = kernels::matmul(self.node(a).values(), self.node(b).values(), r, k, c);
        self.push(Op::MatMul(a, b), Tensor::from_parts(vec![r, c], out))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.as_matrix("transpose", a)?;
        let out = kernels::transpose(self.node(a).values(), r, c);
        self.push(Op::Transpose(a), Tensor::from_parts(vec![c, r], out))
    }

    /// Adds a length-`cols` bias to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (rows, cols) = self.node(a).rows_cols();
        if self.node(bias).len() != cols {
            return Err(Error::shape(
                "add_bias",
                format!("bias of {} for {cols} columns", self.node(bias).len()),
            ));
        }
        let b = self.node(bias).values();
        let mut out = self.node(a).values().to_vec();
        for r in 0..rows {
            out[r * cols..(r + 1) * cols].iter_mut().zip(b).for_each(|(o, &bv)| *o += bv);
        }
        let shape = self.node(a).shape().to_vec();
        self.push(Op::AddBias(a, bias), Tensor::from_parts(shape, out))
    }

    /// `x · W + b` for a batch `x` of shape `[m, in]`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let h = self.matmul(x, weight)?;
        self.add_bias(h, bias)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        self.unary(a, Op::Scale(a, s), |x| x * s)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var> {
        self.unary(a, Op::AddScalar(a), |x| x + s)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.unary(a, Op::LeakyRelu(a, slope), |x| if x > 0.0 { x } else { slope * x })
    }

    /// Derivative of a (leaky) rectifier as a constant mask: 1 where `a > 0`,
    /// `slope` elsewhere. Carries no gradient (zero almost everywhere).
    pub fn step_mask(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.unary(a, Op::StepMask(a), |x| if x > 0.0 { 1.0 } else { slope })
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Sigmoid(a), kernels::sigmoid)
    }

    /// Row-wise softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.node(a);
        let (_, cols) = t.rows_cols();
        let mut out = t.values().to_vec();
        out.chunks_mut(cols).for_each(kernels::softmax_in_place);
        let shape = t.shape().to_vec();
        self.push(Op::Softmax(a), Tensor::from_parts(shape, out))
    }

    /// Row-wise log-softmax over the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.node(a);
        let (_, cols) = t.rows_cols();
        let mut out = t.values().to_vec();
        out.chunks_mut(cols).for_each(kernels::log_softmax_in_place);
        let shape = t.shape().to_vec();
        self.push(Op::LogSoftmax(a), Tensor::from_parts(shape, out))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Log(a), f64::ln)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    /// Square root; the gradient at exactly zero is taken as zero.
    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Sqrt(a), f64::sqrt)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Abs(a), f64::abs)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    /// Clamps into `[lo, hi]`; gradient passes only strictly inside the range.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        self.unary(a, Op::Clamp(a, lo, hi), |x| x.clamp(lo, hi))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.node(a).values().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.node(a);
        let s = t.values().iter().sum::<f64>() / t.len() as f64;
        self.push(Op::Mean(a), Tensor::scalar(s))
    }

    /// Per-row sum, producing `[rows, 1]`.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.node(a);
        let (rows, _) = t.rows_cols();
        let out: Vec<f64> = t.rows().map(|r| r.iter().sum()).collect();
        self.push(Op::SumRows(a), Tensor::from_parts(vec![rows, 1], out))
    }

    /// Concatenates along the last axis; all parts must have the same row count.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat", "no inputs"));
        }
        let rows = self.node(parts[0]).rows_cols().0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.node(p).rows_cols();
            if r != rows {
                return Err(Error::shape("concat", format!("row counts {rows} vs {r}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.node(p).values()[r * w..(r + 1) * w]);
            }
        }
        self.push(Op::Concat(parts.to_vec()), Tensor::from_parts(vec![rows, total], out))
    }

    /// Reverse pass from a scalar `loss`. Populates the gradient of every
    /// node reachable backwards from `loss` and returns the gradients of all
    /// non-frozen parameters that were reached.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::BackwardBeforeForward("graph has no recorded operations".into()));
        }
        self.check(loss)?;
        if !self.node(loss).is_scalar() {
            return Err(Error::NonScalarLoss(self.node(loss).shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.index()] = Some(vec![1.0]);

        for i in (0..=loss.index()).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        let mut out = Gradients::default();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param { name, frozen: false } = &node.op {
                if let Some(g) = &grads[i] {
                    out.insert(name.clone(), Tensor::from_parts(node.value.shape().to_vec(), g.clone()));
                }
            }
        }
        self.grads = grads;
        Ok(out)
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = node.value.values();
        let val = |v: Var| self.nodes[v.index()].value.values();
        // Accumulates `f(k)` into the gradient buffer of `v`.
        let mut acc = |v: Var, f: &dyn Fn(usize) -> f64| {
            let n = self.nodes[v.index()].value.len();
            let buf = grads[v.index()].get_or_insert_with(|| vec![0.0; n]);
            buf.iter_mut().enumerate().for_each(|(k, b)| *b += f(k));
        };

        match &node.op {
            Op::Input(_) | Op::Param { .. } => {}
            Op::MatMul(a, b) => {
                let (r, k) = (self.node(*a).shape()[0], self.node(*a).shape()[1]);
                let c = self.node(*b).shape()[1];
                let ga = kernels::matmul_nt(g, val(*b), r, c, k);
                let gb = kernels::matmul_tn(val(*a), g, r, k, c);
                acc(*a, &|idx| ga[idx]);
                acc(*b, &|idx| gb[idx]);
            }
            Op::Transpose(a) => {
                let (r, c) = (self.node(*a).shape()[0], self.node(*a).shape()[1]);
                let gt = kernels::transpose(g, c, r);
                acc(*a, &|idx| gt[idx]);
            }
            Op::AddBias(a, b) => {
                acc(*a, &|idx| g[idx]);
                let cols = self.node(*b).len();
                let mut gb = vec![0.0; cols];
                g.chunks(cols).for_each(|row| gb.iter_mut().zip(row).for_each(|(s, &x)| *s += x));
                acc(*b, &|idx| gb[idx]);
            }
            Op::Add(a, b) => {
                acc(*a, &|idx| g[idx]);
                acc(*b, &|idx| g[idx]);
            }
            Op::Sub(a, b) => {
                acc(*a, &|idx| g[idx]);
                acc(*b, &|idx| -g[idx]);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc(*a, &|idx| g[idx] * vb[idx]);
                acc(*b, &|idx| g[idx] * va[idx]);
            }
            Op::Scale(a, s) => acc(*a, &|idx| g[idx] * s),
            Op::AddScalar(a) => acc(*a, &|idx| g[idx]),
            Op::Relu(a) => {
                let x = val(*a);
                acc(*a, &|idx| if x[idx] > 0.0 { g[idx] } else { 0.0 });
            }
            Op::LeakyRelu(a, slope) => {
                let x = val(*a);
                acc(*a, &|idx| if x[idx] > 0.0 { g[idx] } else { slope * g[idx] });
            }
            Op::StepMask(a) => acc(*a, &|_| 0.0),
            Op::Tanh(a) => acc(*a, &|idx| g[idx] * (1.0 - out[idx] * out[idx])),
            Op::Sigmoid(a) => acc(*a, &|idx| g[idx] * out[idx] * (1.0 - out[idx])),
            Op::Softmax(a) => {
                let cols = node.value.rows_cols().1;
                let mut ga = vec![0.0; g.len()];
                for ((gr, yr), dst) in g.chunks(cols).zip(out.chunks(cols)).zip(ga.chunks_mut(cols)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    dst.iter_mut().enumerate().for_each(|(k, d)| *d = yr[k] * (gr[k] - dot));
                }
                acc(*a, &|idx| ga[idx]);
            }
            Op::LogSoftmax(a) => {
                let cols = node.value.rows_cols().1;
                let mut ga = vec![0.0; g.len()];
                for ((gr, yr), dst) in g.chunks(cols).zip(out.chunks(cols)).zip(ga.chunks_mut(cols)) {
                    let total: f64 = gr.iter().sum();
                    dst.iter_mut().enumerate().for_each(|(k, d)| *d = gr[k] - yr[k].exp() * total);
                }
                acc(*a, &|idx| ga[idx]);
            }
            Op::Log(a) => {
                let x = val(*a);
                acc(*a, &|idx| g[idx] / x[idx]);
            }
            Op::Exp(a) => acc(*a, &|idx| g[idx] * out[idx]),
            Op::Sqrt(a) => acc(*a, &|idx| if out[idx] > 0.0 { g[idx] * 0.5 / out[idx] } else { 0.0 }),
            Op::Abs(a) => {
                let x = val(*a);
                acc(*a, &|idx| g[idx] * kernels::sign(x[idx]));
            }
            Op::Square(a) => {
                let x = val(*a);
                acc(*a, &|idx| 2.0 * x[idx] * g[idx]);
            }
            Op::Clamp(a, lo, hi) => {
                let x = val(*a);
                acc(*a, &|idx| if x[idx] > *lo && x[idx] < *hi { g[idx] } else { 0.0 });
            }
            Op::Sum(a) => acc(*a, &|_| g[0]),
            Op::Mean(a) => {
                let n = self.node(*a).len() as f64;
                acc(*a, &|_| g[0] / n);
            }
            Op::SumRows(a) => {
                let cols = self.node(*a).rows_cols().1;
                acc(*a, &|idx| g[idx / cols]);
            }
            Op::Concat(parts) => {
                let rows = node.value.rows_cols().0;
                let total = node.value.rows_cols().1;
                let mut offset = 0;
                for &p in parts {
                    let w = self.node(p).rows_cols().1;
                    let start = offset;
                    acc(p, &|idx| {
                        let (r, c) = (idx / w, idx % w);
                        g[r * total + start + c]
                    });
                    offset += w;
                }
                debug_assert!(rows > 0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_t(v: &[f64]) -> Tensor {
        Tensor::vector(v.to_vec()).unwrap()
    }

    #[test]
    fn identity_graph_returns_input() {
        let mut g = Graph::new();
        let x = g.input("x", vec_t(&[1.0, 2.0])).unwrap();
        assert_eq!(g.value(x).values(), &[1.0, 2.0]);
    }

    #[test]
    fn identity_weights_linear() {
        let mut g = Graph::new();
        let x = g.input("x", Tensor::matrix(1, 2, vec![3.0, 4.0]).unwrap()).unwrap();
        let w = g.param(&Param::new("w", Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap()), false).unwrap();
        let b = g.param(&Param::new("b", vec_t(&[0.0, 0.0])), false).unwrap();
        let y = g.linear(x, w, b).unwrap();
        assert_eq!(g.value(y).values(), &[3.0, 4.0]);
    }

    #[test]
    fn zero_linear_then_softmax_is_uniform() {
        let mut g = Graph::new();
        let x = g.input("x", Tensor::matrix(1, 2, vec![0.3, -7.0]).unwrap()).unwrap();
        let w = g.param(&Param::new("w", Tensor::zeros(vec![2, 2])), false).unwrap();
        let b = g.param(&Param::new("b", Tensor::zeros(vec![2])), false).unwrap();
        let h = g.linear(x, w, b).unwrap();
        let p = g.softmax(h).unwrap();
        assert_eq!(g.value(p).values(), &[0.5, 0.5]);
    }

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let x = g.param(&Param::new("x", Tensor::scalar(3.0)), false).unwrap();
        let y = g.square(x).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get("x").unwrap().values(), &[6.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.input("x", vec_t(&[1.0, 2.0])).unwrap();
        assert!(matches!(g.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn backward_before_forward_rejected() {
        let mut other = Graph::new();
        let v = other.input("x", Tensor::scalar(1.0)).unwrap();
        let mut empty = Graph::new();
        assert!(matches!(empty.backward(v), Err(Error::BackwardBeforeForward(_))));
        let mut g = Graph::new();
        g.input("y", Tensor::scalar(2.0)).unwrap();
        assert!(matches!(g.backward(v), Err(Error::BackwardBeforeForward(_))));
    }

    #[test]
    fn non_finite_reports_node() {
        let mut g = Graph::new();
        let x = g.input("x", vec_t(&[0.0, 1.0])).unwrap();
        let err = g.log(x).unwrap_err();
        assert!(matches!(err, Error::NonFinite { node: 1, op: "log" }));
    }

    #[test]
    fn shape_mismatch_reported() {
        let mut g = Graph::new();
        let a = g.input("a", vec_t(&[1.0, 2.0])).unwrap();
        let b = g.input("b", vec_t(&[1.0, 2.0, 3.0])).unwrap();
        assert!(matches!(g.add(a, b), Err(Error::Shape { .. })));
    }

    #[test]
    fn frozen_params_are_not_exported() {
        let mut g = Graph::new();
        let w = g.param(&Param::new("w", Tensor::scalar(2.0)), true).unwrap();
        let x = g.param(&Param::new("x", Tensor::scalar(3.0)), false).unwrap();
        let y = g.mul(w, x).unwrap();
        let grads = g.backward(y).unwrap();
        assert!(!grads.contains("w"));
        assert_eq!(grads.get("x").unwrap().values(), &[2.0]);
        // the tape still knows the frozen leaf's sensitivity
        assert_eq!(g.grad(w), Some(&[3.0][..]));
    }

    #[test]
    fn reused_param_accumulates() {
        let mut g = Graph::new();
        let p = Param::new("x", Tensor::scalar(3.0));
        let a = g.param(&p, false).unwrap();
        let b = g.param(&p, false).unwrap();
        assert_eq!(a, b);
        let y = g.mul(a, b).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get("x").unwrap().values(), &[6.0]);
    }

    #[test]
    fn reachable_param_gets_gradient_through_mask() {
        let mut g = Graph::new();
        let x = g.param(&Param::new("x", vec_t(&[1.0, -1.0])), false).unwrap();
        let m = g.step_mask(x, 0.2).unwrap();
        let s = g.sum(m).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get("x").unwrap().values(), &[0.0, 0.0]);
    }

    #[test]
    fn clip_global_norm_rescales() {
        let mut grads = Gradients::default();
        grads.insert("a".into(), vec_t(&[3.0, 4.0]));
        let before = grads.clip_global_norm(1.0);
        assert!((before - 5.0).abs() < 1e-12);
        assert!((grads.global_norm() - 1.0).abs() < 1e-12);
    }
}
