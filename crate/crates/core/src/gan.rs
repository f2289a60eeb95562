//! Adversarial training of the emulator generator.
//!
//! The generator's latent dimension is the class count `C`, so that after
//! training it can be fed classifier outputs. Each outer iteration performs
//! `k` discriminator updates followed by one generator update. Every random
//! draw (batch order, noise, penalty interpolation) is a pure function of the
//! run seed and its (epoch, iteration, step) coordinates, so any logged loss
//! can be recomputed from checkpointed parameters.

use rand::Rng as _;
use rand_distr::{Exp1, StandardNormal};

use crate::autodiff::{Graph, OptimizerSettings, Sgd, Tensor, Var};
use crate::data::{batches, Dataset};
use crate::error::{Error, Result};
use crate::nets::{Network, Role};
use crate::rng::{self, derive_seed, stream, Rng};

/// Clamp applied to discriminator probabilities before logs.
pub const D_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    /// Uniform on `[-1, 1]`.
    Uniform,
    /// Flat Dirichlet, i.e. uniform on the probability simplex.
    SimplexDirichlet,
}

impl NoiseKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "uniform" => Ok(NoiseKind::Uniform),
            "simplex" | "simplex-dirichlet" | "dirichlet" => Ok(NoiseKind::SimplexDirichlet),
            other => Err(Error::Config(format!("unknown noise prior `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Uniform => "uniform",
            NoiseKind::SimplexDirichlet => "simplex-dirichlet",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoisePrior {
    pub kind: NoiseKind,
    pub dim: usize,
}

impl NoisePrior {
    pub fn new(kind: NoiseKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("noise dimension must be positive".into()));
        }
        Ok(Self { kind, dim })
    }

    pub fn gaussian(dim: usize) -> Self {
        Self { kind: NoiseKind::Gaussian, dim }
    }

    /// `m` independent draws as a `[m, dim]` tensor.
    pub fn sample(&self, m: usize, rng: &mut Rng) -> Tensor {
        let mut values = Vec::with_capacity(m * self.dim);
        for _ in 0..m {
            match self.kind {
                NoiseKind::Gaussian => values.extend((0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal))),
                NoiseKind::Uniform => values.extend((0..self.dim).map(|_| rng.random_range(-1.0..1.0))),
                NoiseKind::SimplexDirichlet => {
                    let e: Vec<f64> = (0..self.dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                    let s: f64 = e.iter().sum();
                    values.extend(e.iter().map(|v| v / s));
                }
            }
        }
        Tensor::from_parts(vec![m, self.dim], values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GanVariant {
    /// Binary cross-entropy discriminator with a sigmoid head.
    Vanilla,
    /// Critic on the pre-sigmoid score with a gradient penalty.
    WganGp,
}

impl GanVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(GanVariant::Vanilla),
            "wgan-gp" | "wgan_gp" => Ok(GanVariant::WganGp),
            other => Err(Error::Config(format!("unknown GAN variant `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GanVariant::Vanilla => "vanilla",
            GanVariant::WganGp => "wgan-gp",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorLossMode {
    /// `(1/m) Σ log(1 − D(G(z)))`, minimized.
    MinimizeLog1m,
    /// `−(1/m) Σ log D(G(z))`.
    NonSaturating,
}

impl GeneratorLossMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "minimize-log1m" | "log1m" => Ok(GeneratorLossMode::MinimizeLog1m),
            "non-saturating" | "nonsaturating" => Ok(GeneratorLossMode::NonSaturating),
            other => Err(Error::Config(format!("unknown generator loss mode `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorLossMode::MinimizeLog1m => "minimize-log1m",
            GeneratorLossMode::NonSaturating => "non-saturating",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanConfig {
    pub batch_size: usize,
    /// Discriminator updates per generator update.
    pub d_steps: usize,
    pub epochs: usize,
    pub variant: GanVariant,
    pub gp_lambda: f64,
    pub generator_loss: GeneratorLossMode,
    pub opt_g: OptimizerSettings,
    pub opt_d: OptimizerSettings,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            d_steps: 1,
            epochs: 200,
            variant: GanVariant::Vanilla,
            gp_lambda: 10.0,
            generator_loss: GeneratorLossMode::NonSaturating,
            opt_g: OptimizerSettings { lr: 0.05, momentum: 0.5, ..OptimizerSettings::default() },
            opt_d: OptimizerSettings { lr: 0.05, momentum: 0.5, ..OptimizerSettings::default() },
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_steps == 0 {
            return Err(Error::Config("k (discriminator steps) must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.gp_lambda >= 0.0) {
            return Err(Error::Config("gp_lambda must be non-negative".into()));
        }
        self.opt_g.validate()?;
        self.opt_d.validate()
    }
}

/// Discriminator loss `−(1/m) Σ [log D(x) + log(1 − D(G(z)))]` on the tape,
/// from discriminator probabilities for real and fake batches.
pub fn discriminator_loss_term(g: &mut Graph, d_real: Var, d_fake: Var) -> Result<Var> {
    let real = g.clamp(d_real, D_EPS, 1.0 - D_EPS)?;
    let log_real = g.log(real)?;
    let fake = g.clamp(d_fake, D_EPS, 1.0 - D_EPS)?;
    let one_minus = g.scale(fake, -1.0)?;
    let one_minus = g.add_scalar(one_minus, 1.0)?;
    let log_fake = g.log(one_minus)?;
    let a = g.mean(log_real)?;
    let b = g.mean(log_fake)?;
    let s = g.add(a, b)?;
    g.scale(s, -1.0)
}

pub fn generator_loss_term(g: &mut Graph, d_fake: Var, mode: GeneratorLossMode) -> Result<Var> {
    let fake = g.clamp(d_fake, D_EPS, 1.0 - D_EPS)?;
    match mode {
        GeneratorLossMode::MinimizeLog1m => {
            let om = g.scale(fake, -1.0)?;
            let om = g.add_scalar(om, 1.0)?;
            let l = g.log(om)?;
            g.mean(l)
        }
        GeneratorLossMode::NonSaturating => {
            let l = g.log(fake)?;
            let m = g.mean(l)?;
            g.scale(m, -1.0)
        }
    }
}

/// `(1/m) Σ (‖∇_x̂ D(x̂)‖₂ − 1)²` at `x̂ = t·x_real + (1−t)·x_fake` with
/// `t ~ U[0,1]` per sample. `D` is the critic score.
pub fn gradient_penalty_term(
    g: &mut Graph,
    disc: &Network,
    x_real: &Tensor,
    x_fake: &Tensor,
    rng: &mut Rng,
) -> Result<Var> {
    if x_real.shape() != x_fake.shape() {
        return Err(Error::shape("gradient_penalty", format!("{:?} vs {:?}", x_real.shape(), x_fake.shape())));
    }
    let (m, n) = x_real.rows_cols();
    let mut values = Vec::with_capacity(m * n);
    for (r, f) in x_real.rows().zip(x_fake.rows()) {
        let t: f64 = rng.random_range(0.0..1.0);
        values.extend(r.iter().zip(f).map(|(a, b)| t * a + (1.0 - t) * b));
    }
    let x_hat = g.input("x_hat", Tensor::from_parts(vec![m, n], values))?;
    let (_, grad) = disc.score_and_input_grad(g, x_hat)?;
    let sq = g.square(grad)?;
    let s = g.sum_rows(sq)?;
    let norm = g.sqrt(s)?;
    let dev = g.add_scalar(norm, -1.0)?;
    let dev2 = g.square(dev)?;
    g.mean(dev2)
}

/// Discriminator loss for concrete batches.
pub fn discriminator_loss(disc: &Network, gen: &Network, x: &Tensor, z: &Tensor) -> Result<f64> {
    if x.shape()[0] != z.shape()[0] {
        return Err(Error::shape("discriminator_loss", "real and noise batches differ in size"));
    }
    let fake = gen.predict(z)?;
    let mut g = Graph::new();
    let xr = g.input("x", x.clone())?;
    let xf = g.input("fake", fake)?;
    let dr = disc.forward(&mut g, xr)?;
    let df = disc.forward(&mut g, xf)?;
    let l = discriminator_loss_term(&mut g, dr, df)?;
    Ok(g.scalar(l))
}

pub fn generator_loss(disc: &Network, gen: &Network, z: &Tensor, mode: GeneratorLossMode) -> Result<f64> {
    let mut g = Graph::new();
    let zv = g.input("z", z.clone())?;
    let fake = gen.forward(&mut g, zv)?;
    let df = disc.forward(&mut g, fake)?;
    let l = generator_loss_term(&mut g, df, mode)?;
    Ok(g.scalar(l))
}

pub fn gradient_penalty(disc: &Network, x_real: &Tensor, x_fake: &Tensor, rng: &mut Rng) -> Result<f64> {
    let mut g = Graph::new();
    let p = gradient_penalty_term(&mut g, disc, x_real, x_fake, rng)?;
    Ok(g.scalar(p))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanLogRow {
    pub epoch: usize,
    pub step: usize,
    pub loss_d: f64,
    pub loss_g: f64,
    pub gp: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GanLog {
    pub rows: Vec<GanLogRow>,
}

impl GanLog {
    pub const CSV_HEADER: &'static str = "epoch,step,L_D,L_G,gp";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let gp = r.gp.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", r.epoch, r.step, r.loss_d, r.loss_g, gp));
        }
        out
    }
}

/// Losses of one discriminator step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DStepLoss {
    pub loss: f64,
    pub gp: Option<f64>,
}

/// Stateful trainer; exposes single iterations for replay and inspection.
pub struct GanTrainer {
    pub generator: Network,
    pub discriminator: Network,
    cfg: GanConfig,
    prior: NoisePrior,
    seed: u64,
    sgd_g: Sgd,
    sgd_d: Sgd,
}

impl GanTrainer {
    pub fn new(generator: Network, discriminator: Network, cfg: GanConfig, prior: NoisePrior, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if generator.role() != Role::Generator || discriminator.role() != Role::Discriminator {
            return Err(Error::Contract("expected a generator and a discriminator".into()));
        }
        let classes = generator.spec().classes;
        if generator.input_dim() != classes || prior.dim != classes {
            return Err(Error::Contract(format!(
                "latent dimension must equal the class count {classes} (generator {}, prior {})",
                generator.input_dim(),
                prior.dim
            )));
        }
        if generator.output_dim() != discriminator.input_dim() {
            return Err(Error::Contract("generator output and discriminator input differ".into()));
        }
        let sgd_g = Sgd::new(cfg.opt_g.lr, cfg.opt_g.momentum);
        let sgd_d = Sgd::new(cfg.opt_d.lr, cfg.opt_d.momentum);
        Ok(Self { generator, discriminator, cfg, prior, seed, sgd_g, sgd_d })
    }

    pub fn config(&self) -> &GanConfig {
        &self.cfg
    }

    /// Real-batch plan for an epoch.
    pub fn epoch_plan(&self, ds: &Dataset, epoch: usize) -> Result<Vec<Vec<usize>>> {
        batches(ds.len(), self.cfg.batch_size.min(ds.len()), derive_seed(self.seed, &[epoch as u64]), true)
    }

    pub fn iterations(&self, plan_len: usize) -> usize {
        plan_len.div_ceil(self.cfg.d_steps)
    }

    fn d_graph(&self, ds: &Dataset, plan: &[Vec<usize>], epoch: usize, iter: usize, j: usize) -> Result<(Graph, Var, Option<Var>)> {
        let idx = &plan[iter * self.cfg.d_steps + j];
        let coords = [epoch as u64, iter as u64, j as u64];
        let mut zr = rng::rng(self.seed, &[stream::NOISE_D, coords[0], coords[1], coords[2]]);
        let z = self.prior.sample(idx.len(), &mut zr);
        let x = ds.gather(idx);
        let fake = self.generator.predict(&z)?;
        let mut g = Graph::new();
        let xr = g.input("x", x.clone())?;
        let xf = g.input("fake", fake.clone())?;
        match self.cfg.variant {
            GanVariant::Vanilla => {
                let dr = self.discriminator.forward(&mut g, xr)?;
                let df = self.discriminator.forward(&mut g, xf)?;
                let l = discriminator_loss_term(&mut g, dr, df)?;
                Ok((g, l, None))
            }
            GanVariant::WganGp => {
                let sr = self.discriminator.logits(&mut g, xr)?;
                let sf = self.discriminator.logits(&mut g, xf)?;
                let mr = g.mean(sr)?;
                let mf = g.mean(sf)?;
                let w = g.sub(mf, mr)?;
                let mut pr = rng::rng(self.seed, &[stream::PENALTY, coords[0], coords[1], coords[2]]);
                let gp = gradient_penalty_term(&mut g, &self.discriminator, &x, &fake, &mut pr)?;
                let gpw = g.scale(gp, self.cfg.gp_lambda)?;
                let l = g.add(w, gpw)?;
                Ok((g, l, Some(gp)))
            }
        }
    }

    fn g_graph(&self, epoch: usize, iter: usize) -> Result<(Graph, Var)> {
        let mut zr = rng::rng(self.seed, &[stream::NOISE_G, epoch as u64, iter as u64]);
        let z = self.prior.sample(self.cfg.batch_size, &mut zr);
        let mut g = Graph::new();
        let zv = g.input("z", z)?;
        let fake = self.generator.forward(&mut g, zv)?;
        let score = self.discriminator.logits_detached(&mut g, fake)?;
        let l = match self.cfg.variant {
            GanVariant::Vanilla => {
                let df = g.sigmoid(score)?;
                generator_loss_term(&mut g, df, self.cfg.generator_loss)?
            }
            GanVariant::WganGp => {
                let m = g.mean(score)?;
                g.scale(m, -1.0)?
            }
        };
        Ok((g, l))
    }

    /// Discriminator loss of step `j` of iteration `iter`, at current parameters.
    pub fn d_step_loss(&self, ds: &Dataset, epoch: usize, iter: usize, j: usize) -> Result<DStepLoss> {
        let plan = self.epoch_plan(ds, epoch)?;
        let (g, l, gp) = self.d_graph(ds, &plan, epoch, iter, j)?;
        Ok(DStepLoss { loss: g.scalar(l), gp: gp.map(|v| g.scalar(v)) })
    }

    /// Generator loss of iteration `iter`, at current parameters.
    pub fn g_step_loss(&self, epoch: usize, iter: usize) -> Result<f64> {
        let (g, l) = self.g_graph(epoch, iter)?;
        Ok(g.scalar(l))
    }

    /// One outer iteration: up to `k` discriminator updates, then one
    /// generator update. Logged losses are the pre-update values.
    pub fn iteration(&mut self, ds: &Dataset, plan: &[Vec<usize>], epoch: usize, iter: usize) -> Result<GanLogRow> {
        let diverged = |e: Error| Error::Diverged { epoch, step: iter, detail: e.to_string() };
        let k = self.cfg.d_steps.min(plan.len() - iter * self.cfg.d_steps);
        let (mut sum_d, mut sum_gp) = (0.0, 0.0);
        for j in 0..k {
            let (mut g, l, gp) = self.d_graph(ds, plan, epoch, iter, j).map_err(diverged)?;
            let mut grads = g.backward(l)?;
            if let Some(c) = self.cfg.opt_d.clip_norm {
                grads.clip_global_norm(c);
            }
            self.sgd_d.step(self.discriminator.trainable_mut(), &grads)?;
            sum_d += g.scalar(l);
            sum_gp += gp.map_or(0.0, |v| g.scalar(v));
        }
        let (mut g, l) = self.g_graph(epoch, iter).map_err(diverged)?;
        let mut grads = g.backward(l)?;
        if let Some(c) = self.cfg.opt_g.clip_norm {
            grads.clip_global_norm(c);
        }
        self.sgd_g.step(self.generator.trainable_mut(), &grads)?;
        let row = GanLogRow {
            epoch,
            step: iter,
            loss_d: sum_d / k as f64,
            loss_g: g.scalar(l),
            gp: (self.cfg.variant == GanVariant::WganGp).then_some(sum_gp / k as f64),
        };
        if !(row.loss_d.is_finite() && row.loss_g.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                step: iter,
                detail: format!("L_D={} L_G={}", row.loss_d, row.loss_g),
            });
        }
        Ok(row)
    }

    pub fn run_epoch(&mut self, ds: &Dataset, epoch: usize) -> Result<Vec<GanLogRow>> {
        if ds.dim() != self.generator.output_dim() {
            return Err(Error::Contract(format!(
                "dataset dimension {} differs from generator output {}",
                ds.dim(),
                self.generator.output_dim()
            )));
        }
        self.sgd_g.lr = self.cfg.opt_g.lr_at(epoch);
        self.sgd_d.lr = self.cfg.opt_d.lr_at(epoch);
        let plan = self.epoch_plan(ds, epoch)?;
        (0..self.iterations(plan.len())).map(|it| self.iteration(ds, &plan, epoch, it)).collect()
    }

    /// Frozen copy of the current generator.
    pub fn frozen_generator(&self) -> Network {
        let mut g = self.generator.clone();
        g.freeze();
        g
    }
}

pub struct GanOutcome {
    /// Trained generator, frozen.
    pub generator: Network,
    pub discriminator: Network,
    pub log: GanLog,
}

/// Trains for `cfg.epochs` epochs and returns the frozen generator.
pub fn train_gan(
    generator: Network,
    discriminator: Network,
    ds: &Dataset,
    cfg: &GanConfig,
    prior: NoisePrior,
    seed: u64,
) -> Result<GanOutcome> {
    train_gan_with(generator, discriminator, ds, cfg, prior, seed, |_, _| Ok(()))
}

/// [`train_gan`] with a hook called after every epoch with the number of
/// completed epochs.
pub fn train_gan_with<F>(
    generator: Network,
    discriminator: Network,
    ds: &Dataset,
    cfg: &GanConfig,
    prior: NoisePrior,
    seed: u64,
    mut after_epoch: F,
) -> Result<GanOutcome>
where
    F: FnMut(usize, &GanTrainer) -> Result<()>,
{
    let mut trainer = GanTrainer::new(generator, discriminator, cfg.clone(), prior, seed)?;
    let mut log = GanLog::default();
    for epoch in 0..cfg.epochs {
        let rows = trainer.run_epoch(ds, epoch)?;
        if let Some(last) = rows.last() {
            log::debug!("gan epoch {epoch}: L_D={:.4} L_G={:.4}", last.loss_d, last.loss_g);
        }
        log.rows.extend(rows);
        after_epoch(epoch + 1, &trainer)?;
    }
    let GanTrainer { mut generator, discriminator, .. } = trainer;
    generator.freeze();
    Ok(GanOutcome { generator, discriminator, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::NetworkSpec;

    fn two_vars(g: &mut Graph, real: &[f64], fake: &[f64]) -> (Var, Var) {
        let r = g.input("r", Tensor::matrix(real.len(), 1, real.to_vec()).unwrap()).unwrap();
        let f = g.input("f", Tensor::matrix(fake.len(), 1, fake.to_vec()).unwrap()).unwrap();
        (r, f)
    }

    #[test]
    fn perfect_discriminator_loss_near_zero() {
        let mut g = Graph::new();
        let (r, f) = two_vars(&mut g, &[1.0 - D_EPS, 1.0], &[D_EPS, 0.0]);
        let l = discriminator_loss_term(&mut g, r, f).unwrap();
        assert!(g.scalar(l).abs() < 1e-6);
    }

    #[test]
    fn half_discriminator_is_two_ln2() {
        let mut g = Graph::new();
        let (r, f) = two_vars(&mut g, &[0.5; 3], &[0.5; 3]);
        let l = discriminator_loss_term(&mut g, r, f).unwrap();
        assert!((g.scalar(l) - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn discriminator_loss_closed_form() {
        let mut g = Graph::new();
        let (r, f) = two_vars(&mut g, &[0.8], &[0.3]);
        let l = discriminator_loss_term(&mut g, r, f).unwrap();
        assert!((g.scalar(l) - 0.579_818_495_252_942).abs() < 1e-12);
    }

    #[test]
    fn generator_loss_modes() {
        let mut g = Graph::new();
        let (_, f) = two_vars(&mut g, &[0.5], &[0.5]);
        let l = generator_loss_term(&mut g, f, GeneratorLossMode::MinimizeLog1m).unwrap();
        assert!((g.scalar(l) + std::f64::consts::LN_2).abs() < 1e-12);

        let (_, f) = two_vars(&mut g, &[0.5], &[0.25]);
        let l = generator_loss_term(&mut g, f, GeneratorLossMode::NonSaturating).unwrap();
        assert!((g.scalar(l) - 1.386_294_361_119_890_6).abs() < 1e-12);

        let (_, f) = two_vars(&mut g, &[0.5], &[1.0 - D_EPS]);
        let l = generator_loss_term(&mut g, f, GeneratorLossMode::MinimizeLog1m).unwrap();
        assert!((g.scalar(l) - D_EPS.ln()).abs() < 1e-6);
    }

    #[test]
    fn noise_shapes_and_determinism() {
        let prior = NoisePrior::gaussian(4);
        let a = prior.sample(2, &mut rng::rng(1, &[]));
        assert_eq!(a.shape(), &[2, 4]);
        assert_eq!(a, prior.sample(2, &mut rng::rng(1, &[])));
        let simplex = NoisePrior::new(NoiseKind::SimplexDirichlet, 3).unwrap().sample(5, &mut rng::rng(2, &[]));
        for row in simplex.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v > 0.0));
        }
        let uni = NoisePrior::new(NoiseKind::Uniform, 3).unwrap().sample(50, &mut rng::rng(2, &[]));
        assert!(uni.values().iter().all(|v| (-1.0..1.0).contains(v)));
    }

    #[test]
    fn gaussian_moments() {
        let prior = NoisePrior::gaussian(4);
        let n = 100_000;
        let s = prior.sample(n, &mut rng::rng(12345, &[]));
        for c in 0..4 {
            let col: Vec<f64> = s.rows().map(|r| r[c]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            assert!(mean.abs() < 0.02, "mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "var {var}");
        }
    }

    fn linear_critic(weights: &[f64]) -> Network {
        let n = weights.len();
        let mut d = Network::build(NetworkSpec::discriminator(n, 2, vec![]), "d", 0).unwrap();
        let params = vec![
            crate::autodiff::Param::new("d.0.weight", Tensor::matrix(n, 1, weights.to_vec()).unwrap()),
            crate::autodiff::Param::new("d.0.bias", Tensor::vector(vec![0.3]).unwrap()),
        ];
        d.load_params(&params).unwrap();
        d
    }

    #[test]
    fn penalty_zero_for_unit_linear_critic() {
        let d = linear_critic(&[0.6, 0.8]);
        let real = Tensor::matrix(3, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let fake = Tensor::matrix(3, 2, vec![0.9, 0.1, 0.2, 0.2, 0.0, 1.0]).unwrap();
        let p = gradient_penalty(&d, &real, &fake, &mut rng::rng(0, &[])).unwrap();
        assert!(p.abs() < 1e-15);
    }

    #[test]
    fn penalty_one_for_constant_critic() {
        let d = linear_critic(&[0.0, 0.0]);
        let real = Tensor::matrix(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let p = gradient_penalty(&d, &real, &real, &mut rng::rng(0, &[])).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trainer_rejects_wrong_latent_dimension() {
        let gen = Network::build(NetworkSpec::generator(3, 8, vec![4]), "g", 0).unwrap();
        let disc = Network::build(NetworkSpec::discriminator(8, 3, vec![4]), "d", 0).unwrap();
        let prior = NoisePrior::gaussian(4);
        assert!(matches!(
            GanTrainer::new(gen, disc, GanConfig::default(), prior, 0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn zero_epochs_leaves_generator_unchanged_and_frozen() {
        let ds = crate::data::synth_blobs(3, 8, 10, 0.05, 0).unwrap();
        let gen = Network::build(NetworkSpec::generator(3, 8, vec![4]), "g", 0).unwrap();
        let disc = Network::build(NetworkSpec::discriminator(8, 3, vec![4]), "d", 0).unwrap();
        let cfg = GanConfig { epochs: 0, ..GanConfig::default() };
        let out = train_gan(gen.clone(), disc, &ds, &cfg, NoisePrior::gaussian(3), 1).unwrap();
        assert_eq!(out.generator, gen);
        assert!(out.generator.is_frozen());
        assert!(out.log.rows.is_empty());
    }
}
