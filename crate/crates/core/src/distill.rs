//! Student training against a query-only teacher.
//!
//! The frozen generator is grafted onto both classifiers: for a batch `x`
//! the student minimizes
//!
//! ```text
//! α · mean_i ‖G(S(x_i)) − G(T(x_i))‖_p  +  β · mean_i KL(T_τ(x_i) ‖ S_τ(x_i))
//! ```
//!
//! With `α = 0` this is the classic soft-target KD baseline.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::autodiff::{Graph, OptimizerSettings, Sgd, Tensor, Var};
use crate::data::{batches, AugmentFlags, Augmenter, Dataset};
use crate::error::{Error, Result};
use crate::metrics;
use crate::nets::{Network, ProbVector, Role};
use crate::rng::{self, derive_seed, stream};

/// Probabilities below this are clamped before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// A model reachable only through input → probability queries.
pub trait TeacherQuery: Send + Sync {
    /// Probabilities for a `[m, n]` batch, `[m, C]`.
    fn query(&self, x: &Tensor) -> Result<Tensor>;
    fn input_dim(&self) -> usize;
    fn classes(&self) -> usize;
    /// Reads of internals (parameters, activations) since construction.
    fn internal_reads(&self) -> usize {
        0
    }
}

impl TeacherQuery for Network {
    fn query(&self, x: &Tensor) -> Result<Tensor> {
        self.predict(x)
    }

    fn input_dim(&self) -> usize {
        Network::input_dim(self)
    }

    fn classes(&self) -> usize {
        self.output_dim()
    }

    fn internal_reads(&self) -> usize {
        Network::internal_reads(self)
    }
}

/// Source-blind wrapper: exposes `classify` and nothing else about the
/// underlying model. Every classified sample increments the query counter.
pub struct BlindTeacher {
    backend: Box<dyn TeacherQuery>,
    queries: AtomicUsize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TeacherAudit {
    pub queries: usize,
    pub internal_reads: usize,
}

impl BlindTeacher {
    /// Wraps a trained classifier. The network is moved in and cannot be
    /// reached again.
    pub fn new(net: Network) -> Result<Self> {
        if net.role() != Role::Classifier {
            return Err(Error::Contract("a teacher must be a classifier".into()));
        }
        Ok(Self::from_query(net))
    }

    pub fn from_query(backend: impl TeacherQuery + 'static) -> Self {
        Self { backend: Box::new(backend), queries: AtomicUsize::new(0) }
    }

    pub fn classes(&self) -> usize {
        self.backend.classes()
    }

    pub fn input_dim(&self) -> usize {
        self.backend.input_dim()
    }

    pub fn classify(&self, x: &[f64]) -> Result<ProbVector> {
        let t = Tensor::matrix(1, x.len(), x.to_vec())?;
        Ok(self.classify_batch(&t)?.pop().expect("one row"))
    }

    pub fn classify_batch(&self, x: &Tensor) -> Result<Vec<ProbVector>> {
        if x.rank() != 2 || x.shape()[1] != self.input_dim() {
            return Err(Error::shape(
                "teacher query",
                format!("expected [m, {}], got {:?}", self.input_dim(), x.shape()),
            ));
        }
        let out = self.backend.query(x)?;
        self.queries.fetch_add(x.shape()[0], Ordering::Relaxed);
        if out.rows_cols() != (x.shape()[0], self.classes()) {
            return Err(Error::shape("teacher query", format!("teacher returned {:?}", out.shape())));
        }
        out.rows().map(|r| ProbVector::new(r.to_vec())).collect()
    }

    pub fn queries(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn audit(&self) -> TeacherAudit {
        TeacherAudit { queries: self.queries(), internal_reads: self.backend.internal_reads() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn from_order(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Norm::L1),
            2 => Ok(Norm::L2),
            other => Err(Error::Config(format!("p_norm must be 1 or 2, got {other}"))),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Norm::L1 => 1,
            Norm::L2 => 2,
        }
    }
}

/// What the generator consumes from a classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorInput {
    /// Softmax probabilities (on the simplex).
    Probabilities,
    /// Log-probabilities, i.e. logits shifted by their log-sum-exp. A blind
    /// teacher only returns probabilities, so this is the logit view both
    /// sides can produce.
    Logits,
}

impl GeneratorInput {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "probabilities" | "probs" => Ok(GeneratorInput::Probabilities),
            "logits" => Ok(GeneratorInput::Logits),
            other => Err(Error::Config(format!("unknown generator input `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeneratorInput::Probabilities => "probabilities",
            GeneratorInput::Logits => "logits",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistillConfig {
    pub norm: Norm,
    /// Weight of the generated-image distance.
    pub alpha: f64,
    /// Weight of the KL term.
    pub beta: f64,
    /// Temperature of the KL term.
    pub tau: f64,
    /// Temperature applied to classifier outputs before they enter the generator.
    pub gen_temperature: f64,
    pub gen_input: GeneratorInput,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerSettings,
    /// Cache teacher answers per training sample after the first query.
    pub cache_teacher: bool,
    pub augment: AugmentFlags,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            norm: Norm::L1,
            alpha: 1.0,
            beta: 1.0,
            tau: 1.0,
            gen_temperature: 1.0,
            gen_input: GeneratorInput::Probabilities,
            batch_size: 64,
            epochs: 30,
            optimizer: OptimizerSettings { lr: 0.05, momentum: 0.9, milestones: vec![20, 25], gamma: 0.1, clip_norm: None },
            cache_teacher: true,
            augment: AugmentFlags::default(),
        }
    }
}

impl DistillConfig {
    /// Soft-target KD baseline defaults: no distance term, `τ = 4`.
    pub fn kd_baseline() -> Self {
        Self { alpha: 0.0, tau: 4.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0) || !(self.alpha + self.beta > 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be non-negative with a positive sum, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) || !(self.gen_temperature > 0.0 && self.gen_temperature.is_finite()) {
            return Err(Error::Config("temperatures must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}

/// Batch-mean KL divergence `Σ_c p_T log(p_T / p_S)` after softening both
/// sides at temperature `tau`.
pub fn kld_loss(p_teacher: &[ProbVector], p_student: &[ProbVector], tau: f64) -> Result<f64> {
    if p_teacher.len() != p_student.len() || p_teacher.is_empty() {
        return Err(Error::shape("kld_loss", format!("{} vs {} rows", p_teacher.len(), p_student.len())));
    }
    let mut total = 0.0;
    for (t, s) in p_teacher.iter().zip(p_student) {
        if t.len() != s.len() {
            return Err(Error::shape("kld_loss", "class counts differ"));
        }
        let (t, s) = (t.soften(tau), s.soften(tau));
        total += t
            .values()
            .iter()
            .zip(s.values())
            .filter(|(&pt, _)| pt > 0.0)
            .map(|(&pt, &ps)| pt * (pt.ln() - ps.max(PROB_FLOOR).ln()))
            .sum::<f64>();
    }
    Ok(total / p_teacher.len() as f64)
}

/// KL term on the tape: `teacher` is the already-softened `[m, C]` target,
/// `student_probs` the softened student probabilities.
pub fn kld_term(g: &mut Graph, teacher: &Tensor, student_probs: Var) -> Result<Var> {
    let m = teacher.rows_cols().0 as f64;
    let entropy_part: f64 = teacher.values().iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum();
    let pt = g.constant(teacher.clone())?;
    let clamped = g.clamp(student_probs, PROB_FLOOR, 1.0)?;
    let log_ps = g.log(clamped)?;
    let cross = g.mul(pt, log_ps)?;
    let cross = g.sum(cross)?;
    let neg = g.scale(cross, -1.0 / m)?;
    g.add_scalar(neg, entropy_part / m)
}

/// Batch-mean `‖G(y_s) − G(y_t)‖_p` on the tape. `gen` must be frozen.
pub fn generation_distance_term(g: &mut Graph, gen: &Network, y_s: Var, y_t: Var, norm: Norm) -> Result<Var> {
    if !gen.is_frozen() {
        return Err(Error::Contract("the grafted generator must be frozen".into()));
    }
    if g.value(y_s).shape() != g.value(y_t).shape() {
        return Err(Error::shape(
            "generation_distance",
            format!("{:?} vs {:?}", g.value(y_s).shape(), g.value(y_t).shape()),
        ));
    }
    let img_s = gen.forward(g, y_s)?;
    let img_t = gen.forward(g, y_t)?;
    let diff = g.sub(img_s, img_t)?;
    let per_image = match norm {
        Norm::L1 => {
            let a = g.abs(diff)?;
            g.sum_rows(a)?
        }
        Norm::L2 => {
            let sq = g.square(diff)?;
            let s = g.sum_rows(sq)?;
            g.sqrt(s)?
        }
    };
    g.mean(per_image)
}

/// Numeric generation distance between two `[m, C]` batches of generator inputs.
pub fn generation_distance(gen: &Network, y_s: &Tensor, y_t: &Tensor, norm: Norm) -> Result<f64> {
    let mut g = Graph::new();
    let s = g.input("y_s", y_s.clone())?;
    let t = g.input("y_t", y_t.clone())?;
    let d = generation_distance_term(&mut g, gen, s, t, norm)?;
    Ok(g.scalar(d))
}

/// Teacher answers as the two targets the student loss needs.
pub struct TeacherTargets {
    /// Generator input derived from the teacher, `[m, C]`.
    pub gen_input: Tensor,
    /// KL target softened at `τ`, `[m, C]`.
    pub soft: Tensor,
}

impl TeacherTargets {
    pub fn new(probs: &[ProbVector], cfg: &DistillConfig) -> Result<Self> {
        let gen_rows: Vec<Vec<f64>> = probs
            .iter()
            .map(|p| {
                let q = p.soften(cfg.gen_temperature);
                match cfg.gen_input {
                    GeneratorInput::Probabilities => q.values().to_vec(),
                    GeneratorInput::Logits => q.values().iter().map(|v| v.max(PROB_FLOOR).ln()).collect(),
                }
            })
            .collect();
        let soft_rows: Vec<Vec<f64>> = probs.iter().map(|p| p.soften(cfg.tau).values().to_vec()).collect();
        Ok(Self { gen_input: Tensor::from_rows(&gen_rows)?, soft: Tensor::from_rows(&soft_rows)? })
    }
}

/// Tape nodes of one student-loss evaluation.
pub struct StudentLossVars {
    pub total: Var,
    pub distance: Option<Var>,
    pub kld: Var,
    pub logits: Var,
}

/// Builds the student loss for a batch given the student logits node.
pub fn student_loss_from_logits(
    g: &mut Graph,
    logits: Var,
    gen: Option<&Network>,
    targets: &TeacherTargets,
    cfg: &DistillConfig,
) -> Result<StudentLossVars> {
    let scaled = g.scale(logits, 1.0 / cfg.tau)?;
    let ps = g.softmax(scaled)?;
    let kld = kld_term(g, &targets.soft, ps)?;
    let kld_w = g.scale(kld, cfg.beta)?;
    if cfg.alpha == 0.0 {
        return Ok(StudentLossVars { total: kld_w, distance: None, kld, logits });
    }
    let gen = gen.ok_or_else(|| Error::Config("alpha > 0 requires a generator".into()))?;
    let gl = g.scale(logits, 1.0 / cfg.gen_temperature)?;
    let y_s = match cfg.gen_input {
        GeneratorInput::Probabilities => g.softmax(gl)?,
        GeneratorInput::Logits => {
            let lp = g.log_softmax(gl)?;
            g.clamp(lp, PROB_FLOOR.ln(), 0.0)?
        }
    };
    let y_t = g.constant(targets.gen_input.clone())?;
    let distance = generation_distance_term(g, gen, y_s, y_t, cfg.norm)?;
    let dist_w = g.scale(distance, cfg.alpha)?;
    let total = g.add(dist_w, kld_w)?;
    Ok(StudentLossVars { total, distance: Some(distance), kld, logits })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudentLoss {
    pub total: f64,
    pub distance: f64,
    pub kld: f64,
}

/// Evaluates the student loss on a `[m, n]` batch, querying the teacher.
pub fn student_loss(
    student: &Network,
    teacher: &BlindTeacher,
    gen: Option<&Network>,
    x: &Tensor,
    cfg: &DistillConfig,
) -> Result<StudentLoss> {
    cfg.validate()?;
    let probs = teacher.classify_batch(x)?;
    let targets = TeacherTargets::new(&probs, cfg)?;
    let mut g = Graph::new();
    let xv = g.input("x", x.clone())?;
    let logits = student.logits(&mut g, xv)?;
    let vars = student_loss_from_logits(&mut g, logits, gen, &targets, cfg)?;
    Ok(StudentLoss {
        total: g.scalar(vars.total),
        distance: vars.distance.map_or(0.0, |d| g.scalar(d)),
        kld: g.scalar(vars.kld),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistillLogRow {
    pub epoch: usize,
    pub total: f64,
    pub distance: f64,
    pub kld: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DistillLog {
    pub rows: Vec<DistillLogRow>,
}

impl DistillLog {
    pub const CSV_HEADER: &'static str = "epoch,L_total,L_distance,L_kld,train_acc,test_acc,lr";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let test = r.test_acc.map(|a| a.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.epoch, r.total, r.distance, r.kld, r.train_acc, test, r.lr
            ));
        }
        out
    }
}

/// Trains `student` by SGD on the student loss. Labels of `train` are never
/// read; `eval` (and train accuracy) only go through metric evaluation.
pub fn distill(
    student: &mut Network,
    teacher: &BlindTeacher,
    gen: Option<&Network>,
    train: &Dataset,
    eval: Option<&Dataset>,
    cfg: &DistillConfig,
    seed: u64,
) -> Result<DistillLog> {
    cfg.validate()?;
    if student.role() != Role::Classifier {
        return Err(Error::Contract("the student must be a classifier".into()));
    }
    if student.input_dim() != train.dim() || teacher.input_dim() != train.dim() {
        return Err(Error::Contract("student, teacher and dataset dimensions disagree".into()));
    }
    if student.output_dim() != teacher.classes() {
        return Err(Error::Contract(format!(
            "student has {} classes, teacher {}",
            student.output_dim(),
            teacher.classes()
        )));
    }
    if teacher.classes() < 2 {
        return Err(Error::Config("distillation needs at least two classes".into()));
    }
    if cfg.alpha > 0.0 {
        let g = gen.ok_or_else(|| Error::Config("alpha > 0 requires a generator".into()))?;
        if g.input_dim() != teacher.classes() || g.output_dim() != train.dim() {
            return Err(Error::Contract("generator dimensions do not match the task".into()));
        }
        if !g.is_frozen() {
            return Err(Error::Contract("the grafted generator must be frozen".into()));
        }
    }

    let n = train.len();
    let augmenter = Augmenter { flags: cfg.augment, spatial: train.spatial() };
    let use_cache = cfg.cache_teacher && !cfg.augment.any();
    let mut cache: Vec<Option<ProbVector>> = vec![None; if use_cache { n } else { 0 }];
    let mut sgd = Sgd::new(cfg.optimizer.lr, cfg.optimizer.momentum);
    let mut log = DistillLog::default();

    for epoch in 0..cfg.epochs {
        let lr = cfg.optimizer.lr_at(epoch);
        sgd.lr = lr;
        let plan = batches(n, cfg.batch_size.min(n), derive_seed(seed, &[epoch as u64]), true)?;
        let (mut sum_total, mut sum_dist, mut sum_kld) = (0.0, 0.0, 0.0);
        for (step, idx) in plan.iter().enumerate() {
            let mut x = train.gather(idx);
            if cfg.augment.any() {
                let mut r = rng::rng(seed, &[stream::AUGMENT, epoch as u64, step as u64]);
                x = augmenter.apply_batch(&x, &mut r)?;
            }
            let probs = if use_cache {
                let missing: Vec<usize> = idx.iter().copied().filter(|&i| cache[i].is_none()).collect();
                if !missing.is_empty() {
                    let answers = teacher.classify_batch(&train.gather(&missing))?;
                    for (i, p) in missing.into_iter().zip(answers) {
                        cache[i] = Some(p);
                    }
                }
                idx.iter().map(|&i| cache[i].clone().expect("filled above")).collect()
            } else {
                teacher.classify_batch(&x)?
            };
            let targets = TeacherTargets::new(&probs, cfg)?;

            let diverged = |e: Error| Error::Diverged { epoch, step, detail: e.to_string() };
            let mut g = Graph::new();
            let xv = g.input("x", x)?;
            let logits = student.logits(&mut g, xv).map_err(diverged)?;
            let vars = student_loss_from_logits(&mut g, logits, gen, &targets, cfg).map_err(diverged)?;
            let mut grads = g.backward(vars.total)?;
            if let Some(c) = cfg.optimizer.clip_norm {
                grads.clip_global_norm(c);
            }
            sgd.step(student.trainable_mut(), &grads)?;

            let w = idx.len() as f64;
            sum_total += g.scalar(vars.total) * w;
            sum_dist += vars.distance.map_or(0.0, |d| g.scalar(d)) * w;
            sum_kld += g.scalar(vars.kld) * w;
        }
        let row = DistillLogRow {
            epoch,
            total: sum_total / n as f64,
            distance: sum_dist / n as f64,
            kld: sum_kld / n as f64,
            train_acc: metrics::accuracy(student, train)?,
            test_acc: eval.map(|e| metrics::accuracy(student, e)).transpose()?,
            lr,
        };
        log::debug!(
            "distill epoch {epoch}: total={:.5} dist={:.5} kld={:.5} train_acc={:.4}",
            row.total,
            row.distance,
            row.kld,
            row.train_acc
        );
        log.rows.push(row);
    }
    Ok(log)
}

/// Soft-target KD: [`distill`] with the distance term removed.
pub fn baseline_kd(
    student: &mut Network,
    teacher: &BlindTeacher,
    train: &Dataset,
    eval: Option<&Dataset>,
    cfg: &DistillConfig,
    seed: u64,
) -> Result<DistillLog> {
    let cfg = DistillConfig { alpha: 0.0, ..cfg.clone() };
    distill(student, teacher, None, train, eval, &cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::NetworkSpec;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn kld_of_identical_is_zero() {
        let p = [pv(&[0.2, 0.3, 0.5])];
        assert!(kld_loss(&p, &p, 1.0).unwrap().abs() < 1e-15);
        assert!(kld_loss(&p, &p, 4.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn kld_near_one_hot_against_uniform() {
        let eps = 1e-9;
        let v = kld_loss(&[pv(&[1.0 - eps, eps])], &[pv(&[0.5, 0.5])], 1.0).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-7, "{v}");
    }

    #[test]
    fn kld_term_matches_numeric() {
        let t = [pv(&[0.1, 0.6, 0.3]), pv(&[0.7, 0.2, 0.1])];
        let s = [pv(&[0.3, 0.3, 0.4]), pv(&[0.5, 0.25, 0.25])];
        let mut g = Graph::new();
        let sv = g.input("s", Tensor::from_rows(&s.iter().map(|p| p.values().to_vec()).collect::<Vec<_>>()).unwrap()).unwrap();
        let tt = Tensor::from_rows(&t.iter().map(|p| p.values().to_vec()).collect::<Vec<_>>()).unwrap();
        let k = kld_term(&mut g, &tt, sv).unwrap();
        assert!((g.scalar(k) - kld_loss(&t, &s, 1.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn kld_gradient_vanishes_at_minimum() {
        let logits = [0.3, -1.2, 2.0, 0.1];
        let p = ProbVector::from_logits(&logits);
        let mut g = Graph::new();
        let s = g.param(&crate::autodiff::Param::new("s", Tensor::matrix(1, 4, logits.to_vec()).unwrap()), false).unwrap();
        let ps = g.softmax(s).unwrap();
        let target = Tensor::matrix(1, 4, p.values().to_vec()).unwrap();
        let k = kld_term(&mut g, &target, ps).unwrap();
        let grads = g.backward(k).unwrap();
        assert!(grads.get("s").unwrap().values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn generation_distance_requires_frozen_generator() {
        let gen = Network::build(NetworkSpec::generator(3, 5, vec![4]), "g", 0).unwrap();
        let y = Tensor::matrix(1, 3, vec![0.2, 0.3, 0.5]).unwrap();
        assert!(generation_distance(&gen, &y, &y, Norm::L1).is_err());
    }

    #[test]
    fn generation_distance_identity_and_symmetry() {
        let mut gen = Network::build(NetworkSpec::generator(3, 5, vec![4]), "g", 0).unwrap();
        gen.freeze();
        let a = Tensor::matrix(2, 3, vec![0.2, 0.3, 0.5, 0.9, 0.05, 0.05]).unwrap();
        let b = Tensor::matrix(2, 3, vec![0.6, 0.3, 0.1, 0.1, 0.1, 0.8]).unwrap();
        for norm in [Norm::L1, Norm::L2] {
            assert_eq!(generation_distance(&gen, &a, &a, norm).unwrap(), 0.0);
            let ab = generation_distance(&gen, &a, &b, norm).unwrap();
            let ba = generation_distance(&gen, &b, &a, norm).unwrap();
            assert!(ab > 0.0);
            assert!((ab - ba).abs() < 1e-15);
        }
        let c = Tensor::matrix(1, 4, vec![0.25; 4]).unwrap();
        assert!(generation_distance(&gen, &a, &c, Norm::L1).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = DistillConfig::default();
        assert!(c.validate().is_ok());
        c.alpha = 0.0;
        c.beta = 0.0;
        assert!(c.validate().is_err());
        c.beta = 1.0;
        c.tau = 0.0;
        assert!(c.validate().is_err());
        assert_eq!(Norm::from_order(3).map_err(|e| e.is_validation()).unwrap_err(), true);
    }

    #[test]
    fn blind_teacher_counts_queries() {
        let net = Network::build(NetworkSpec::classifier(4, 2, vec![3]), "t", 1).unwrap();
        let t = BlindTeacher::new(net).unwrap();
        t.classify(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        t.classify_batch(&Tensor::matrix(3, 4, vec![0.5; 12]).unwrap()).unwrap();
        assert_eq!(t.audit(), TeacherAudit { queries: 4, internal_reads: 0 });
        assert!(t.classify(&[0.1]).is_err());
    }

    #[test]
    fn blind_teacher_rejects_non_classifier() {
        let g = Network::build(NetworkSpec::generator(2, 4, vec![3]), "g", 1).unwrap();
        assert!(BlindTeacher::new(g).is_err());
    }

    #[test]
    fn weighted_sum_structure() {
        let teacher_net = Network::build(NetworkSpec::classifier(6, 3, vec![5]), "t", 1).unwrap();
        let student = Network::build(NetworkSpec::classifier(6, 3, vec![4]), "s", 2).unwrap();
        let mut gen = Network::build(NetworkSpec::generator(3, 6, vec![4]), "g", 3).unwrap();
        gen.freeze();
        let teacher = BlindTeacher::new(teacher_net).unwrap();
        let x = Tensor::matrix(2, 6, (0..12).map(|i| i as f64 / 12.0).collect()).unwrap();
        let cfg = DistillConfig { alpha: 0.7, beta: 1.3, ..DistillConfig::default() };
        let l = student_loss(&student, &teacher, Some(&gen), &x, &cfg).unwrap();
        assert!((l.total - (0.7 * l.distance + 1.3 * l.kld)).abs() < 1e-12);
        let kd = DistillConfig { alpha: 0.0, ..cfg };
        let l0 = student_loss(&student, &teacher, None, &x, &kd).unwrap();
        assert_eq!(l0.distance, 0.0);
        assert!((l0.total - 1.3 * l.kld).abs() < 1e-15);
    }
}
