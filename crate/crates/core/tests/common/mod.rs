//! Plain-loop reference implementations used as oracles by the integration
//! tests. Nothing here goes through the tape.
#![allow(dead_code)]

use mekd::nets::{Activation, DataRange, Network, Role};
use mekd::Tensor;
use rand::Rng as _;

pub fn random_matrix(rng: &mut mekd::rng::Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    let v: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::matrix(rows, cols, v).unwrap()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn random_probs(rng: &mut mekd::rng::Rng, c: usize) -> Vec<f64> {
    let l: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();
    softmax(&l)
}

fn activate(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Relu => v.max(0.0),
        Activation::LeakyRelu(s) => {
            if v > 0.0 {
                v
            } else {
                s * v
            }
        }
        Activation::Tanh => v.tanh(),
        Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
    }
}

/// Forward pass of one sample with explicit loops over the exported
/// parameters.
pub fn mlp_forward(net: &Network, x: &[f64]) -> Vec<f64> {
    let params = net.export_params();
    let layers = params.len() / 2;
    let mut h = x.to_vec();
    for i in 0..layers {
        let w = params.iter().find(|p| p.name.ends_with(&format!(".{i}.weight"))).unwrap();
        let b = params.iter().find(|p| p.name.ends_with(&format!(".{i}.bias"))).unwrap();
        let (fan_in, fan_out) = (w.value.shape()[0], w.value.shape()[1]);
        assert_eq!(fan_in, h.len());
        let mut z = b.value.values().to_vec();
        for (k, zk) in z.iter_mut().enumerate() {
            for (j, hj) in h.iter().enumerate() {
                *zk += hj * w.value.values()[j * fan_out + k];
            }
        }
        h = if i + 1 < layers { z.iter().map(|&v| activate(net.spec().activation, v)).collect() } else { z };
    }
    match net.role() {
        Role::Classifier => softmax(&h),
        Role::Discriminator => h.iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect(),
        Role::Generator => match net.spec().range {
            DataRange::ZeroOne => h.iter().map(|&v| 0.5 + 0.5 * v.tanh()).collect(),
            DataRange::SymmetricOne => h.iter().map(|&v| v.tanh()).collect(),
        },
    }
}

pub fn soften(p: &[f64], tau: f64) -> Vec<f64> {
    let l: Vec<f64> = p.iter().map(|v| v.ln() / tau).collect();
    softmax(&l)
}

pub fn kld(teacher: &[Vec<f64>], student: &[Vec<f64>], tau: f64) -> f64 {
    let mut total = 0.0;
    for (t, s) in teacher.iter().zip(student) {
        let (t, s) = (soften(t, tau), soften(s, tau));
        for (pt, ps) in t.iter().zip(&s) {
            if *pt > 0.0 {
                total += pt * (pt / ps).ln();
            }
        }
    }
    total / teacher.len() as f64
}

/// Mean and unbiased covariance of row samples.
pub fn moments(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    (mean, cov)
}

/// Lower-triangular `L` with `L Lᵀ = a`.
pub fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (a[i][i] - s).max(0.0).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let d = a.len();
    let mut m = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..d).map(|i| m[i][i]).collect()
}

/// Fréchet distance through a Cholesky factor: the eigenvalues of
/// `Lᵀ Σ_B L` equal those of `Σ_A Σ_B`.
pub fn frechet(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let (ma, ca) = moments(a);
    let (mb, cb) = moments(b);
    let d = ma.len();
    let l = cholesky(&ca);
    let mut inner = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                for m in 0..d {
                    s += l[k][i] * cb[k][m] * l[m][j];
                }
            }
            inner[i][j] = s;
        }
    }
    let cross: f64 = jacobi_eigenvalues(&inner).iter().map(|v| v.max(0.0).sqrt()).sum();
    let mean_sq: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y) * (x - y)).sum();
    let traces: f64 = (0..d).map(|i| ca[i][i] + cb[i][i]).sum();
    mean_sq + traces - 2.0 * cross
}

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    t.rows().map(<[f64]>::to_vec).collect()
}
