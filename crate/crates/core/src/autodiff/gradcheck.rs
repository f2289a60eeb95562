//! Finite-difference verification of tape gradients.
//!
//! Every op is wrapped into a scalar `Σ w ⊙ op(x)` with a fixed random `w`
//! and compared against central differences with `h = 1e-5`. Inputs are drawn
//! away from kinks (ReLU at 0, clamp bounds) and inside the domain of log and
//! sqrt, where the derivative is well defined.

use rand::Rng as _;

use super::graph::{Graph, Param, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const STEP: f64 = 1e-5;
/// Floor on the relative-error denominator, so that near-zero gradients are
/// compared in absolute terms.
pub const DENOM_FLOOR: f64 = 1e-3;

pub type Builder = dyn Fn(&mut Graph, &[Var]) -> Result<Var>;

/// Largest relative error between tape and central-difference gradients of
/// the scalar built by `build` from `inputs`.
pub fn max_relative_error(build: &Builder, inputs: &[Tensor]) -> Result<f64> {
    let names: Vec<String> = (0..inputs.len()).map(|i| format!("x{i}")).collect();
    let eval = |inputs: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars = names
            .iter()
            .zip(inputs)
            .map(|(n, t)| g.param(&Param::new(n.clone(), t.clone()), false))
            .collect::<Result<Vec<_>>>()?;
        let out = build(&mut g, &vars)?;
        Ok(g.scalar(out))
    };

    let mut g = Graph::new();
    let vars = names
        .iter()
        .zip(inputs)
        .map(|(n, t)| g.param(&Param::new(n.clone(), t.clone()), false))
        .collect::<Result<Vec<_>>>()?;
    let out = build(&mut g, &vars)?;
    let grads = g.backward(out)?;

    let mut worst = 0.0f64;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get(&names[i]).ok_or_else(|| Error::MissingGradient(names[i].clone()))?;
        for j in 0..input.len() {
            let mut plus = inputs.to_vec();
            let mut minus = inputs.to_vec();
            plus[i].values_mut()[j] += STEP;
            minus[i].values_mut()[j] -= STEP;
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * STEP);
            let a = analytic.values()[j];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOM_FLOOR);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OpReport {
    pub op: &'static str,
    pub cases: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Copy)]
enum Domain {
    /// Uniform in `[-2, 2]` with `|x| ≥ 0.05`.
    AwayFromZero,
    Positive,
}

fn draw(rng: &mut Rng, rows: usize, cols: usize, domain: Domain) -> Tensor {
    let values = (0..rows * cols)
        .map(|_| match domain {
            Domain::Positive => rng.random_range(0.3..2.0),
            Domain::AwayFromZero => loop {
                let v: f64 = rng.random_range(-2.0..2.0);
                if v.abs() >= 0.05 && (v.abs() - 1.0).abs() >= 0.05 {
                    break v;
                }
            },
        })
        .collect();
    Tensor::from_parts(vec![rows, cols], values)
}

/// Weighted-sum reduction so the upstream gradient is not uniform.
fn weighted(g: &mut Graph, y: Var, w: &Tensor) -> Result<Var> {
    let wv = g.constant(w.clone())?;
    let p = g.mul(y, wv)?;
    g.sum(p)
}

type Case = (&'static str, Box<dyn Fn(&mut Rng, usize, usize) -> (Box<Builder>, Vec<Tensor>)>);

fn unary(name: &'static str, domain: Domain, op: fn(&mut Graph, Var) -> Result<Var>) -> Case {
    (
        name,
        Box::new(move |rng, r, c| {
            let x = draw(rng, r, c, domain);
            let w = draw(rng, r, c, Domain::AwayFromZero);
            let b: Box<Builder> = Box::new(move |g, v| {
                let y = op(g, v[0])?;
                weighted(g, y, &w)
            });
            (b, vec![x])
        }),
    )
}

fn binary(name: &'static str, op: fn(&mut Graph, Var, Var) -> Result<Var>) -> Case {
    (
        name,
        Box::new(move |rng, r, c| {
            let a = draw(rng, r, c, Domain::AwayFromZero);
            let b = draw(rng, r, c, Domain::AwayFromZero);
            let w = draw(rng, r, c, Domain::AwayFromZero);
            let f: Box<Builder> = Box::new(move |g, v| {
                let y = op(g, v[0], v[1])?;
                weighted(g, y, &w)
            });
            (f, vec![a, b])
        }),
    )
}

fn reduction(name: &'static str, op: fn(&mut Graph, Var) -> Result<Var>) -> Case {
    (
        name,
        Box::new(move |rng, r, c| {
            let x = draw(rng, r, c, Domain::AwayFromZero);
            let f: Box<Builder> = Box::new(move |g, v| {
                let y = op(g, v[0])?;
                let sq = g.square(y)?;
                g.sum(sq)
            });
            (f, vec![x])
        }),
    )
}

fn cases() -> Vec<Case> {
    vec![
        (
            "matmul",
            Box::new(|rng, r, c| {
                let k = rng.random_range(1..5);
                let a = draw(rng, r, k, Domain::AwayFromZero);
                let b = draw(rng, k, c, Domain::AwayFromZero);
                let w = draw(rng, r, c, Domain::AwayFromZero);
                let f: Box<Builder> = Box::new(move |g, v| {
                    let y = g.matmul(v[0], v[1])?;
                    weighted(g, y, &w)
                });
                (f, vec![a, b])
            }),
        ),
        (
            "transpose",
            Box::new(|rng, r, c| {
                let x = draw(rng, r, c, Domain::AwayFromZero);
                let w = draw(rng, c, r, Domain::AwayFromZero);
                let f: Box<Builder> = Box::new(move |g, v| {
                    let y = g.transpose(v[0])?;
                    weighted(g, y, &w)
                });
                (f, vec![x])
            }),
        ),
        (
            "add_bias",
            Box::new(|rng, r, c| {
                let x = draw(rng, r, c, Domain::AwayFromZero);
                let b = Tensor::from_parts(vec![c], draw(rng, 1, c, Domain::AwayFromZero).into_values());
                let w = draw(rng, r, c, Domain::AwayFromZero);
                let f: Box<Builder> = Box::new(move |g, v| {
                    let y = g.add_bias(v[0], v[1])?;
                    weighted(g, y, &w)
                });
                (f, vec![x, b])
            }),
        ),
        binary("add", Graph::add),
        binary("sub", Graph::sub),
        binary("mul", Graph::mul),
        unary("scale", Domain::AwayFromZero, |g, x| g.scale(x, -1.7)),
        unary("add_scalar", Domain::AwayFromZero, |g, x| g.add_scalar(x, 0.3)),
        unary("relu", Domain::AwayFromZero, Graph::relu),
        unary("leaky_relu", Domain::AwayFromZero, |g, x| g.leaky_relu(x, 0.2)),
        unary("step_mask", Domain::AwayFromZero, |g, x| g.step_mask(x, 0.2)),
        unary("tanh", Domain::AwayFromZero, Graph::tanh),
        unary("sigmoid", Domain::AwayFromZero, Graph::sigmoid),
        unary("softmax", Domain::AwayFromZero, Graph::softmax),
        unary("log_softmax", Domain::AwayFromZero, Graph::log_softmax),
        unary("log", Domain::Positive, Graph::log),
        unary("exp", Domain::AwayFromZero, Graph::exp),
        unary("sqrt", Domain::Positive, Graph::sqrt),
        unary("abs", Domain::AwayFromZero, Graph::abs),
        unary("square", Domain::AwayFromZero, Graph::square),
        unary("clamp", Domain::AwayFromZero, |g, x| g.clamp(x, -1.0, 1.0)),
        reduction("sum", Graph::sum),
        reduction("mean", Graph::mean),
        reduction("sum_rows", Graph::sum_rows),
        (
            "concat",
            Box::new(|rng, r, c| {
                let c2 = rng.random_range(1..4);
                let a = draw(rng, r, c, Domain::AwayFromZero);
                let b = draw(rng, r, c2, Domain::AwayFromZero);
                let w = draw(rng, r, c + c2, Domain::AwayFromZero);
                let f: Box<Builder> = Box::new(move |g, v| {
                    let y = g.concat(&[v[0], v[1]])?;
                    weighted(g, y, &w)
                });
                (f, vec![a, b])
            }),
        ),
        (
            // Squared input-gradient norm of a one-hidden-layer tanh critic,
            // differentiated with respect to its weights and inputs.
            "critic_input_grad",
            Box::new(|rng, r, c| {
                let h = rng.random_range(1..5);
                let x = draw(rng, r, c, Domain::AwayFromZero);
                let w1 = draw(rng, c, h, Domain::AwayFromZero);
                let b1 = Tensor::from_parts(vec![h], draw(rng, 1, h, Domain::AwayFromZero).into_values());
                let w2 = draw(rng, h, 1, Domain::AwayFromZero);
                let f: Box<Builder> = Box::new(|g, v| {
                    let pre = g.linear(v[0], v[1], v[2])?;
                    let t = g.tanh(pre)?;
                    let t2 = g.square(t)?;
                    let neg = g.scale(t2, -1.0)?;
                    let d = g.add_scalar(neg, 1.0)?;
                    let rows = g.value(v[0]).shape()[0];
                    let ones = g.constant(Tensor::from_parts(vec![rows, 1], vec![1.0; rows]))?;
                    let w2t = g.transpose(v[3])?;
                    let up = g.matmul(ones, w2t)?;
                    let dw = g.mul(up, d)?;
                    let w1t = g.transpose(v[1])?;
                    let gx = g.matmul(dw, w1t)?;
                    let sq = g.square(gx)?;
                    let n = g.sum_rows(sq)?;
                    let n = g.add_scalar(n, 1e-3)?;
                    let n = g.sqrt(n)?;
                    let dev = g.add_scalar(n, -1.0)?;
                    let dev = g.square(dev)?;
                    g.mean(dev)
                });
                (f, vec![x, w1, b1, w2])
            }),
        ),
    ]
}

/// Checks every op on `cases_per_op` random shapes.
pub fn run_suite(seed: u64, cases_per_op: usize) -> Result<Vec<OpReport>> {
    let mut reports = Vec::new();
    for (k, (op, make)) in cases().into_iter().enumerate() {
        let mut rng = rng::rng(seed, &[k as u64]);
        let mut worst = 0.0f64;
        for _ in 0..cases_per_op {
            let rows = rng.random_range(1..5);
            let cols = rng.random_range(1..6);
            let (build, inputs) = make(&mut rng, rows, cols);
            worst = worst.max(max_relative_error(build.as_ref(), &inputs)?);
        }
        reports.push(OpReport { op, cases: cases_per_op, max_rel_err: worst });
    }
    Ok(reports)
}
