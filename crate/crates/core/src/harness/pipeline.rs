//! Experiment stages: teacher → GAN → distillation → evaluation.
//!
//! Every stage writes its artifacts into the run's output directory with
//! atomic renames, so stages can run as separate processes and an
//! interrupted stage never corrupts an earlier checkpoint.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::{DataSource, RunConfig};
use crate::autodiff::checkpoint::{self, write_atomic};
use crate::autodiff::Tensor;
use crate::data::{read_idx_files, synth_blobs, Dataset};
use crate::distill::{distill, BlindTeacher, DistillConfig, DistillLog, TeacherAudit};
use crate::error::{Error, Result};
use crate::gan::{train_gan_with, GanLog, NoisePrior};
use crate::metrics::{self, frechet_distance};
use crate::nets::{Network, NetworkSpec};
use crate::rng::{self, derive_seed, stream};
use crate::train::{train_classifier, train_log_csv, TrainLogRow};

pub const CONFIG_FILE: &str = "config.ini";
pub const TEACHER_CKPT: &str = "teacher.ckpt";
pub const TEACHER_LOG: &str = "teacher_log.csv";
pub const GENERATOR_CKPT: &str = "generator.ckpt";
pub const GAN_LOG: &str = "gan_log.csv";
pub const GAN_FID: &str = "gan_fid.csv";
pub const RESULTS: &str = "results.csv";
pub const ABLATION_RESULTS: &str = "ablation_results.csv";

/// Seed-stream roles within a run.
mod role {
    pub const TEACHER: u64 = 0;
    pub const GENERATOR: u64 = 1;
    pub const DISCRIMINATOR: u64 = 2;
    pub const STUDENT: u64 = 3;
    pub const GAN_SPLIT: u64 = 4;
}

pub fn snapshot_name(epoch: usize) -> String {
    format!("generator_e{epoch:04}.ckpt")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Mekd,
    Kd,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mekd" => Ok(Method::Mekd),
            "kd" => Ok(Method::Kd),
            other => Err(Error::Config(format!("unknown method `{other}` (expected mekd or kd)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mekd => "mekd",
            Method::Kd => "kd",
        }
    }
}

/// Data splits of one run. The teacher trains on `train`, the GAN on `gan`
/// and the student on `distill`; `gan` and `distill` equal `train` unless
/// disjoint splits are configured.
#[derive(Debug)]
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
    pub gan: Dataset,
    pub distill: Dataset,
}

impl Splits {
    pub fn classes(&self) -> usize {
        self.train.classes()
    }

    pub fn dim(&self) -> usize {
        self.train.dim()
    }
}

pub fn load_data(cfg: &RunConfig) -> Result<Splits> {
    let (train, test) = match &cfg.data.source {
        DataSource::Blobs { classes, dim, per_class, spread } => {
            let all = synth_blobs(*classes, *dim, *per_class, *spread, cfg.seed)?;
            all.split(cfg.data.test_fraction, cfg.seed)?
        }
        DataSource::Idx { images, labels, test_images, test_labels } => {
            let all = read_idx_files(images, labels)?;
            match (test_images, test_labels) {
                (Some(ti), Some(tl)) => (all, read_idx_files(ti, tl)?),
                (None, None) => all.split(cfg.data.test_fraction, cfg.seed)?,
                _ => return Err(Error::Config("test_images and test_labels must be given together".into())),
            }
        }
    };
    let train = if cfg.data.subset > 0 { train.take(cfg.data.subset)? } else { train };
    let train = train.rescaled(cfg.data.range)?;
    let test = test.rescaled(cfg.data.range)?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::Config("train and test splits must both be non-empty".into()));
    }
    if train.dim() != test.dim() {
        return Err(Error::Config("train and test dimensions differ".into()));
    }
    let (gan, distill) = if cfg.data.disjoint_gan_split {
        let (a, b) = train.split(0.5, derive_seed(cfg.seed, &[role::GAN_SPLIT]))?;
        (a, b)
    } else {
        (train.clone(), train.clone())
    };
    Ok(Splits { train, test, gan, distill })
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join(CONFIG_FILE);
    write_atomic(&path, cfg.to_ini().as_bytes())?;
    Ok(&cfg.out_dir)
}

fn init_seed(cfg: &RunConfig, role: u64) -> u64 {
    derive_seed(cfg.seed, &[stream::INIT, role])
}

fn order_seed(cfg: &RunConfig, role: u64) -> u64 {
    derive_seed(cfg.seed, &[stream::PERMUTE, role])
}

pub fn load_network(spec: NetworkSpec, name: &str, path: &Path) -> Result<Network> {
    let params = checkpoint::load(path)
        .map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("cannot read {}: {io}", path.display())),
            other => other,
        })?;
    let mut net = Network::build(spec, name, 0)?;
    net.load_params(&params)?;
    Ok(net)
}

pub fn load_teacher(cfg: &RunConfig, data: &Splits) -> Result<Network> {
    load_network(cfg.teacher_spec(data.dim(), data.classes()), "teacher", &cfg.out_dir.join(TEACHER_CKPT))
}

/// Loads a generator checkpoint and freezes it.
pub fn load_generator(cfg: &RunConfig, data: &Splits, path: &Path) -> Result<Network> {
    let mut g = load_network(cfg.generator_spec(data.classes(), data.dim()), "generator", path)?;
    g.freeze();
    Ok(g)
}

pub struct TeacherRun {
    pub teacher: Network,
    pub train_acc: f64,
    pub test_acc: f64,
    pub log: Vec<TrainLogRow>,
}

pub fn run_train_teacher(cfg: &RunConfig, data: &Splits) -> Result<TeacherRun> {
    let out = ensure_out_dir(cfg)?;
    let mut teacher = Network::build(cfg.teacher_spec(data.dim(), data.classes()), "teacher", init_seed(cfg, role::TEACHER))?;
    let log = train_classifier(&mut teacher, &data.train, None, &cfg.teacher, order_seed(cfg, role::TEACHER))?;
    let train_acc = metrics::accuracy(&teacher, &data.train)?;
    let test_acc = metrics::accuracy(&teacher, &data.test)?;
    checkpoint::save(&out.join(TEACHER_CKPT), &teacher.export_params())?;
    write_atomic(&out.join(TEACHER_LOG), train_log_csv(&log).as_bytes())?;
    log::info!("teacher: train_acc={train_acc:.4} test_acc={test_acc:.4}");
    Ok(TeacherRun { teacher, train_acc, test_acc, log })
}

/// Fréchet distance between `n` generated samples and `real`. The noise is
/// a fixed function of the run seed so scores of different checkpoints are
/// comparable.
pub fn generator_fid(gen: &Network, real: &Tensor, prior: NoisePrior, n: usize, seed: u64) -> Result<f64> {
    let z = prior.sample(n, &mut rng::rng(seed, &[stream::EVAL]));
    frechet_distance(&metrics::generate_batch(gen, &z)?, real)
}

/// Fréchet distance between images generated from teacher outputs and the
/// real set.
pub fn teacher_output_fid(gen: &Network, teacher: &BlindTeacher, real: &Tensor) -> Result<f64> {
    let probs = teacher.classify_batch(real)?;
    let rows: Vec<&[f64]> = probs.iter().map(|p| p.values()).collect();
    let y = Tensor::from_rows(&rows)?;
    frechet_distance(&metrics::generate_batch(gen, &y)?, real)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub epoch: usize,
    pub path: PathBuf,
    pub fid: f64,
}

pub struct GanRun {
    /// Trained generator, frozen.
    pub generator: Network,
    pub initial_fid: f64,
    pub fid: f64,
    pub teacher_output_fid: f64,
    pub snapshots: Vec<Snapshot>,
    pub log: GanLog,
}

fn fid_samples(cfg: &RunConfig, real: &Dataset) -> usize {
    if cfg.gan.fid_samples > 0 { cfg.gan.fid_samples } else { real.len() }
}

pub fn prior_for(cfg: &RunConfig, classes: usize) -> Result<NoisePrior> {
    NoisePrior::new(cfg.gan.prior, classes)
}

/// Trains the emulator. The teacher only supplies the class count here and,
/// after training, answers queries for the teacher-output quality check.
pub fn run_train_gan(cfg: &RunConfig, data: &Splits, teacher: &Network) -> Result<GanRun> {
    let classes = teacher.output_dim();
    if classes != data.classes() || teacher.input_dim() != data.dim() {
        return Err(Error::Contract("teacher does not match the dataset".into()));
    }
    let out = ensure_out_dir(cfg)?;
    let prior = prior_for(cfg, classes)?;
    let real = data.gan.samples();
    let n_fid = fid_samples(cfg, &data.gan);
    let gen = Network::build(cfg.generator_spec(classes, data.dim()), "generator", init_seed(cfg, role::GENERATOR))?;
    let disc = Network::build(cfg.discriminator_spec(data.dim(), classes), "discriminator", init_seed(cfg, role::DISCRIMINATOR))?;
    let initial_fid = generator_fid(&gen, real, prior, n_fid, cfg.seed)?;

    let mut snapshots = Vec::new();
    if cfg.gan.snapshots.contains(&0) {
        let path = out.join(snapshot_name(0));
        checkpoint::save(&path, &gen.export_params())?;
        snapshots.push(Snapshot { epoch: 0, path, fid: initial_fid });
    }
    let outcome = train_gan_with(gen, disc, &data.gan, &cfg.gan.gan, prior, order_seed(cfg, role::GENERATOR), |epoch, tr| {
        if cfg.gan.snapshots.contains(&epoch) && epoch < cfg.gan.gan.epochs {
            let path = out.join(snapshot_name(epoch));
            checkpoint::save(&path, &tr.generator.export_params())?;
            let fid = generator_fid(&tr.generator, real, prior, n_fid, cfg.seed)?;
            log::info!("gan snapshot epoch {epoch}: fid={fid:.4}");
            snapshots.push(Snapshot { epoch, path, fid });
        }
        Ok(())
    })?;
    let generator = outcome.generator;
    let fid = generator_fid(&generator, real, prior, n_fid, cfg.seed)?;
    let blind = BlindTeacher::new(teacher.clone())?;
    let teacher_output_fid = teacher_output_fid(&generator, &blind, real)?;

    checkpoint::save(&out.join(GENERATOR_CKPT), &generator.export_params())?;
    write_atomic(&out.join(GAN_LOG), outcome.log.to_csv().as_bytes())?;
    let hash = cfg.hash();
    let mut summary = String::from("checkpoint,epoch,fid,teacher_output_fid,config_hash\n");
    summary.push_str(&format!("init,0,{initial_fid},,{hash}\n"));
    for s in &snapshots {
        summary.push_str(&format!("{},{},{},,{hash}\n", file_name(&s.path), s.epoch, s.fid));
    }
    summary.push_str(&format!("{GENERATOR_CKPT},{},{fid},{teacher_output_fid},{hash}\n", cfg.gan.gan.epochs));
    write_atomic(&out.join(GAN_FID), summary.as_bytes())?;
    log::info!("gan: fid {initial_fid:.4} -> {fid:.4}, teacher-output fid {teacher_output_fid:.4}");
    Ok(GanRun { generator, initial_fid, fid, teacher_output_fid, snapshots, log: outcome.log })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub seed: u64,
    pub teacher_acc: f64,
    pub student_acc: f64,
    pub gen_fid: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub p_norm: u32,
    pub tau: f64,
    pub config_hash: String,
}

impl ResultRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.method.as_str(),
            self.seed,
            self.teacher_acc,
            self.student_acc,
            self.gen_fid.map(|f| f.to_string()).unwrap_or_default(),
            self.alpha,
            self.beta,
            self.p_norm,
            self.tau,
            self.config_hash
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(Error::Format(format!("results row has {} fields, expected 10", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number `{s}`")));
        Ok(Self {
            method: Method::parse(f[0]).map_err(|e| Error::Format(e.to_string()))?,
            seed: f[1].parse().map_err(|_| Error::Format(format!("bad seed `{}`", f[1])))?,
            teacher_acc: num(f[2])?,
            student_acc: num(f[3])?,
            gen_fid: if f[4].is_empty() { None } else { Some(num(f[4])?) },
            alpha: num(f[5])?,
            beta: num(f[6])?,
            p_norm: f[7].parse().map_err(|_| Error::Format(format!("bad p_norm `{}`", f[7])))?,
            tau: num(f[8])?,
            config_hash: f[9].to_string(),
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub const HEADER: &'static str = "method,seed,teacher_acc,student_acc,gen_fid,alpha,beta,p_norm,tau,config_hash";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            s.push_str(&r.csv());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == Self::HEADER => {}
            _ => return Err(Error::Format("results file lacks the expected header".into())),
        }
        let rows = lines.filter(|l| !l.trim().is_empty()).map(ResultRow::parse).collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Appends one row to the table at `path`, creating it if needed. The
    /// whole file is rewritten atomically.
    pub fn append_row(path: &Path, row: &ResultRow) -> Result<()> {
        let mut table = if path.exists() { Self::load(path)? } else { Self::default() };
        table.rows.push(row.clone());
        write_atomic(path, table.to_csv().as_bytes())
    }

    pub fn median_student_acc(&self, method: Method) -> Option<f64> {
        let mut v: Vec<f64> = self.rows.iter().filter(|r| r.method == method).map(|r| r.student_acc).collect();
        median(&mut v)
    }
}

pub fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

pub struct DistillRun {
    pub student: Network,
    pub log: DistillLog,
    pub row: ResultRow,
    pub audit: TeacherAudit,
}

pub fn method_config(cfg: &RunConfig, method: Method) -> DistillConfig {
    match method {
        Method::Mekd => cfg.distill.clone(),
        Method::Kd => cfg.kd_config(),
    }
}

/// Distills a fresh student without writing artifacts.
pub fn distill_student(
    cfg: &RunConfig,
    data: &Splits,
    teacher: &Network,
    generator: Option<(&Network, f64)>,
    method: Method,
) -> Result<DistillRun> {
    let dcfg = method_config(cfg, method);
    let generator = if dcfg.alpha > 0.0 {
        Some(generator.ok_or_else(|| Error::Config("mekd needs a generator checkpoint (run train-gan first)".into()))?)
    } else {
        None
    };
    if let Some((g, _)) = generator {
        if g.input_dim() != data.classes() || g.output_dim() != data.dim() {
            return Err(Error::Contract(format!(
                "generator maps {}→{} but the task needs {}→{}",
                g.input_dim(),
                g.output_dim(),
                data.classes(),
                data.dim()
            )));
        }
    }
    if teacher.output_dim() != data.classes() || teacher.input_dim() != data.dim() {
        return Err(Error::Contract("teacher does not match the dataset".into()));
    }
    let teacher_acc = metrics::accuracy(teacher, &data.test)?;
    let blind = BlindTeacher::new(teacher.clone())?;
    let mut student = Network::build(cfg.student_spec(data.dim(), data.classes()), "student", init_seed(cfg, role::STUDENT))?;
    let log = distill(
        &mut student,
        &blind,
        generator.map(|(g, _)| g),
        &data.distill,
        Some(&data.test),
        &dcfg,
        order_seed(cfg, role::STUDENT),
    )?;
    let student_acc = metrics::accuracy(&student, &data.test)?;
    let row = ResultRow {
        method,
        seed: cfg.seed,
        teacher_acc,
        student_acc,
        gen_fid: generator.map(|(_, f)| f),
        alpha: dcfg.alpha,
        beta: dcfg.beta,
        p_norm: dcfg.norm.order(),
        tau: dcfg.tau,
        config_hash: cfg.hash(),
    };
    Ok(DistillRun { student, log, row, audit: blind.audit() })
}

pub fn student_ckpt_name(method: Method) -> String {
    format!("student_{}.ckpt", method.as_str())
}

/// Distills, writes the student checkpoint and log, and appends a row to
/// the results table.
pub fn run_distill(
    cfg: &RunConfig,
    data: &Splits,
    teacher: &Network,
    generator: Option<(&Network, f64)>,
    method: Method,
) -> Result<DistillRun> {
    let out = ensure_out_dir(cfg)?;
    let run = distill_student(cfg, data, teacher, generator, method)?;
    checkpoint::save(&out.join(student_ckpt_name(method)), &run.student.export_params())?;
    write_atomic(&out.join(format!("distill_{}_log.csv", method.as_str())), run.log.to_csv().as_bytes())?;
    ResultsTable::append_row(&out.join(RESULTS), &run.row)?;
    log::info!(
        "{}: teacher_acc={:.4} student_acc={:.4}",
        method.as_str(),
        run.row.teacher_acc,
        run.row.student_acc
    );
    Ok(run)
}

/// Distills one MEKD student per generator checkpoint; rows are sorted by
/// ascending generator Fréchet distance.
pub fn run_ablation_fid(cfg: &RunConfig, data: &Splits, teacher: &Network, checkpoints: &[PathBuf]) -> Result<ResultsTable> {
    if checkpoints.len() < 2 {
        return Err(Error::Config(format!("the ablation needs at least 2 generator checkpoints, got {}", checkpoints.len())));
    }
    let out = ensure_out_dir(cfg)?;
    let prior = prior_for(cfg, data.classes())?;
    let n_fid = fid_samples(cfg, &data.gan);
    let mut rows = Vec::with_capacity(checkpoints.len());
    for path in checkpoints {
        let gen = load_generator(cfg, data, path)?;
        let fid = generator_fid(&gen, data.gan.samples(), prior, n_fid, cfg.seed)?;
        let run = distill_student(cfg, data, teacher, Some((&gen, fid)), Method::Mekd)?;
        log::info!("ablation {}: fid={fid:.4} student_acc={:.4}", path.display(), run.row.student_acc);
        rows.push(run.row);
    }
    rows.sort_by(|a, b| a.gen_fid.unwrap_or(f64::INFINITY).total_cmp(&b.gen_fid.unwrap_or(f64::INFINITY)));
    let table = ResultsTable { rows };
    write_atomic(&out.join(ABLATION_RESULTS), table.to_csv().as_bytes())?;
    Ok(table)
}

/// Generator checkpoints present in the output directory: snapshots in
/// epoch order followed by the final generator.
pub fn generator_checkpoints(out: &Path) -> Result<Vec<PathBuf>> {
    let mut snaps: Vec<PathBuf> = fs::read_dir(out)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let n = file_name(p);
            n.starts_with("generator_e") && n.ends_with(".ckpt")
        })
        .collect();
    snaps.sort();
    let fin = out.join(GENERATOR_CKPT);
    if fin.exists() {
        snaps.push(fin);
    }
    Ok(snaps)
}

pub struct PipelineRun {
    pub teacher: TeacherRun,
    pub gan: GanRun,
    pub mekd: DistillRun,
    pub kd: DistillRun,
}

/// Teacher, GAN, then MEKD and KD students, in one process.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineRun> {
    let data = load_data(cfg)?;
    let teacher = run_train_teacher(cfg, &data)?;
    let gan = run_train_gan(cfg, &data, &teacher.teacher)?;
    let mekd = run_distill(cfg, &data, &teacher.teacher, Some((&gan.generator, gan.fid)), Method::Mekd)?;
    let kd = run_distill(cfg, &data, &teacher.teacher, None, Method::Kd)?;
    Ok(PipelineRun { teacher, gan, mekd, kd })
}
