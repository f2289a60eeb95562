//! Run configuration: a flat `key = value` file with `[section]` headers.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! [`RunConfig::to_ini`] writes every field, and parsing that output yields
//! the same configuration; the SHA-256 of that canonical text is the config
//! hash stamped on result rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::autodiff::OptimizerSettings;
use crate::data::AugmentFlags;
use crate::distill::{DistillConfig, GeneratorInput, Norm};
use crate::error::{Error, Result};
use crate::gan::{GanConfig, GanVariant, GeneratorLossMode, NoiseKind};
use crate::nets::{Activation, DataRange, NetworkSpec};
use crate::train::TrainSettings;

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Blobs { classes: usize, dim: usize, per_class: usize, spread: f64 },
    Idx { images: PathBuf, labels: PathBuf, test_images: Option<PathBuf>, test_labels: Option<PathBuf> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    /// Keep only the first `subset` training samples (0 keeps all).
    pub subset: usize,
    /// Held-out fraction when no separate test files are given.
    pub test_fraction: f64,
    pub range: DataRange,
    /// Train the GAN on one half of the training split and distill on the
    /// other half instead of sharing the split.
    pub disjoint_gan_split: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Blobs { classes: 4, dim: 64, per_class: 500, spread: 0.1 },
            subset: 0,
            test_fraction: 0.2,
            range: DataRange::ZeroOne,
            disjoint_gan_split: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchConfig {
    pub teacher_hidden: Vec<usize>,
    pub teacher_activation: Activation,
    pub student_hidden: Vec<usize>,
    pub student_activation: Activation,
    pub generator_hidden: Vec<usize>,
    pub generator_activation: Activation,
    pub discriminator_hidden: Vec<usize>,
    pub discriminator_activation: Activation,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            teacher_hidden: vec![128, 64],
            teacher_activation: Activation::Relu,
            student_hidden: vec![32],
            student_activation: Activation::Relu,
            generator_hidden: vec![64, 128],
            generator_activation: Activation::LeakyRelu(0.2),
            discriminator_hidden: vec![128, 64],
            discriminator_activation: Activation::LeakyRelu(0.2),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GanRunConfig {
    pub gan: GanConfig,
    pub prior: NoiseKind,
    /// Epochs after which a generator snapshot is written for the ablation.
    pub snapshots: Vec<usize>,
    /// Generated samples used for the Fréchet distance (0 uses the real-set size).
    pub fid_samples: usize,
}

impl Default for GanRunConfig {
    fn default() -> Self {
        let opt = OptimizerSettings { lr: 0.01, momentum: 0.5, milestones: vec![], gamma: 0.1, clip_norm: None };
        Self {
            gan: GanConfig {
                batch_size: 64,
                d_steps: 1,
                epochs: 200,
                variant: GanVariant::WganGp,
                gp_lambda: 10.0,
                generator_loss: GeneratorLossMode::NonSaturating,
                opt_g: opt.clone(),
                opt_d: opt,
            },
            prior: NoiseKind::Gaussian,
            snapshots: vec![2, 20],
            fid_samples: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub arch: ArchConfig,
    pub teacher: TrainSettings,
    pub gan: GanRunConfig,
    pub distill: DistillConfig,
    /// KL temperature of the KD baseline.
    pub kd_tau: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            data: DataConfig::default(),
            arch: ArchConfig::default(),
            teacher: TrainSettings::default(),
            gan: GanRunConfig::default(),
            distill: DistillConfig::default(),
            kd_tau: 4.0,
        }
    }
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn write_optimizer(out: &mut String, prefix: &str, o: &OptimizerSettings) {
    let _ = writeln!(out, "{prefix}lr = {}", o.lr);
    let _ = writeln!(out, "{prefix}momentum = {}", o.momentum);
    let _ = writeln!(out, "{prefix}milestones = {}", list(&o.milestones));
    let _ = writeln!(out, "{prefix}gamma = {}", o.gamma);
    let _ = writeln!(out, "{prefix}clip_norm = {}", o.clip_norm.map(|c| c.to_string()).unwrap_or_default());
}

impl RunConfig {
    /// Canonical text form; every field is written.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]\nseed = {}\nout_dir = {}\n", self.seed, self.out_dir.display());

        let d = &self.data;
        s.push_str("[data]\n");
        match &d.source {
            DataSource::Blobs { classes, dim, per_class, spread } => {
                let _ = writeln!(
                    s,
                    "source = blobs\nclasses = {classes}\ndim = {dim}\nper_class = {per_class}\nspread = {spread}"
                );
            }
            DataSource::Idx { images, labels, test_images, test_labels } => {
                let _ = writeln!(
                    s,
                    "source = idx\nimages = {}\nlabels = {}\ntest_images = {}\ntest_labels = {}",
                    images.display(),
                    labels.display(),
                    opt_path(test_images),
                    opt_path(test_labels)
                );
            }
        }
        let _ = writeln!(
            s,
            "subset = {}\ntest_fraction = {}\nrange = {}\ndisjoint_gan_split = {}\n",
            d.subset,
            d.test_fraction,
            d.range.as_str(),
            d.disjoint_gan_split
        );

        let a = &self.arch;
        for (name, hidden, act) in [
            ("teacher", &a.teacher_hidden, a.teacher_activation),
            ("student", &a.student_hidden, a.student_activation),
            ("generator", &a.generator_hidden, a.generator_activation),
            ("discriminator", &a.discriminator_hidden, a.discriminator_activation),
        ] {
            let _ = writeln!(s, "[{name}]\nhidden = {}\nactivation = {}", list(hidden), act.as_str());
            if name == "teacher" {
                let t = &self.teacher;
                let _ = writeln!(s, "epochs = {}\nbatch_size = {}", t.epochs, t.batch_size);
                write_optimizer(&mut s, "", &t.optimizer);
            }
            s.push('\n');
        }

        let g = &self.gan;
        let _ = writeln!(
            s,
            "[gan]\nvariant = {}\nepochs = {}\nbatch_size = {}\nk = {}\ngp_lambda = {}\ngenerator_loss = {}\nprior = {}\nsnapshots = {}\nfid_samples = {}",
            g.gan.variant.as_str(),
            g.gan.epochs,
            g.gan.batch_size,
            g.gan.d_steps,
            g.gan.gp_lambda,
            g.gan.generator_loss.as_str(),
            g.prior.as_str(),
            list(&g.snapshots),
            g.fid_samples
        );
        write_optimizer(&mut s, "g_", &g.gan.opt_g);
        write_optimizer(&mut s, "d_", &g.gan.opt_d);
        s.push('\n');

        let c = &self.distill;
        let _ = writeln!(
            s,
            "[distill]\np_norm = {}\nalpha = {}\nbeta = {}\ntau = {}\nkd_tau = {}\ngen_temperature = {}\ngen_input = {}\nepochs = {}\nbatch_size = {}\ncache_teacher = {}\nhflip = {}\ncrop_pad = {}",
            c.norm.order(),
            c.alpha,
            c.beta,
            c.tau,
            self.kd_tau,
            c.gen_temperature,
            c.gen_input.as_str(),
            c.epochs,
            c.batch_size,
            c.cache_teacher,
            c.augment.hflip,
            c.augment.crop_pad
        );
        write_optimizer(&mut s, "", &c.optimizer);
        s
    }

    /// Hex SHA-256 of [`RunConfig::to_ini`], truncated to 16 characters.
    /// The output directory is blanked first: where results are written is
    /// not part of the experiment.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { out_dir: PathBuf::new(), ..self.clone() }.to_ini();
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = Entries::parse(text)?;
        let mut cfg = RunConfig::default();

        kv.set("run", "seed", &mut cfg.seed)?;
        if let Some(v) = kv.take("run", "out_dir") {
            cfg.out_dir = PathBuf::from(v);
        }

        let source = kv.take("data", "source").unwrap_or_else(|| "blobs".into());
        cfg.data.source = match source.as_str() {
            "blobs" => {
                let (mut classes, mut dim, mut per_class, mut spread) = (4usize, 64usize, 500usize, 0.1f64);
                kv.set("data", "classes", &mut classes)?;
                kv.set("data", "dim", &mut dim)?;
                kv.set("data", "per_class", &mut per_class)?;
                kv.set("data", "spread", &mut spread)?;
                DataSource::Blobs { classes, dim, per_class, spread }
            }
            "idx" => {
                let images = kv.take("data", "images").filter(|s| !s.is_empty());
                let labels = kv.take("data", "labels").filter(|s| !s.is_empty());
                let (Some(images), Some(labels)) = (images, labels) else {
                    return Err(Error::Config("idx data needs `images` and `labels` paths".into()));
                };
                let path = |s: Option<String>| s.filter(|s| !s.is_empty()).map(PathBuf::from);
                DataSource::Idx {
                    images: images.into(),
                    labels: labels.into(),
                    test_images: path(kv.take("data", "test_images")),
                    test_labels: path(kv.take("data", "test_labels")),
                }
            }
            other => return Err(Error::Config(format!("unknown data source `{other}`"))),
        };
        kv.set("data", "subset", &mut cfg.data.subset)?;
        kv.set("data", "test_fraction", &mut cfg.data.test_fraction)?;
        if let Some(v) = kv.take("data", "range") {
            cfg.data.range = DataRange::parse(&v)?;
        }
        kv.set_bool("data", "disjoint_gan_split", &mut cfg.data.disjoint_gan_split)?;

        let a = &mut cfg.arch;
        for (name, hidden, act) in [
            ("teacher", &mut a.teacher_hidden, &mut a.teacher_activation),
            ("student", &mut a.student_hidden, &mut a.student_activation),
            ("generator", &mut a.generator_hidden, &mut a.generator_activation),
            ("discriminator", &mut a.discriminator_hidden, &mut a.discriminator_activation),
        ] {
            kv.set_list(name, "hidden", hidden)?;
            if let Some(v) = kv.take(name, "activation") {
                *act = Activation::parse(&v)?;
            }
        }
        kv.set("teacher", "epochs", &mut cfg.teacher.epochs)?;
        kv.set("teacher", "batch_size", &mut cfg.teacher.batch_size)?;
        kv.optimizer("teacher", "", &mut cfg.teacher.optimizer)?;

        let g = &mut cfg.gan;
        if let Some(v) = kv.take("gan", "variant") {
            g.gan.variant = GanVariant::parse(&v)?;
        }
        kv.set("gan", "epochs", &mut g.gan.epochs)?;
        kv.set("gan", "batch_size", &mut g.gan.batch_size)?;
        kv.set("gan", "k", &mut g.gan.d_steps)?;
        kv.set("gan", "gp_lambda", &mut g.gan.gp_lambda)?;
        if let Some(v) = kv.take("gan", "generator_loss") {
            g.gan.generator_loss = GeneratorLossMode::parse(&v)?;
        }
        if let Some(v) = kv.take("gan", "prior") {
            g.prior = NoiseKind::parse(&v)?;
        }
        kv.set_list("gan", "snapshots", &mut g.snapshots)?;
        kv.set("gan", "fid_samples", &mut g.fid_samples)?;
        kv.optimizer("gan", "g_", &mut g.gan.opt_g)?;
        kv.optimizer("gan", "d_", &mut g.gan.opt_d)?;

        let c = &mut cfg.distill;
        let mut p = c.norm.order();
        kv.set("distill", "p_norm", &mut p)?;
        c.norm = Norm::from_order(p)?;
        kv.set("distill", "alpha", &mut c.alpha)?;
        kv.set("distill", "beta", &mut c.beta)?;
        kv.set("distill", "tau", &mut c.tau)?;
        kv.set("distill", "kd_tau", &mut cfg.kd_tau)?;
        kv.set("distill", "gen_temperature", &mut c.gen_temperature)?;
        if let Some(v) = kv.take("distill", "gen_input") {
            c.gen_input = GeneratorInput::parse(&v)?;
        }
        kv.set("distill", "epochs", &mut c.epochs)?;
        kv.set("distill", "batch_size", &mut c.batch_size)?;
        kv.set_bool("distill", "cache_teacher", &mut c.cache_teacher)?;
        let mut aug = AugmentFlags::default();
        kv.set_bool("distill", "hflip", &mut aug.hflip)?;
        kv.set("distill", "crop_pad", &mut aug.crop_pad)?;
        c.augment = aug;
        kv.optimizer("distill", "", &mut c.optimizer)?;

        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Blobs { classes, .. } = self.data.source {
            if classes < 2 {
                return Err(Error::Config("at least two classes are required".into()));
            }
        }
        if !(0.0..1.0).contains(&self.data.test_fraction) {
            return Err(Error::Config("test_fraction must lie in [0, 1)".into()));
        }
        if !(self.kd_tau > 0.0 && self.kd_tau.is_finite()) {
            return Err(Error::Config("kd_tau must be positive".into()));
        }
        if self.gan.snapshots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("snapshots must be strictly increasing".into()));
        }
        self.teacher.validate()?;
        self.gan.gan.validate()?;
        self.distill.validate()
    }

    pub fn teacher_spec(&self, dim: usize, classes: usize) -> NetworkSpec {
        NetworkSpec {
            activation: self.arch.teacher_activation,
            ..NetworkSpec::classifier(dim, classes, self.arch.teacher_hidden.clone())
        }
    }

    pub fn student_spec(&self, dim: usize, classes: usize) -> NetworkSpec {
        NetworkSpec {
            activation: self.arch.student_activation,
            ..NetworkSpec::classifier(dim, classes, self.arch.student_hidden.clone())
        }
    }

    pub fn generator_spec(&self, classes: usize, dim: usize) -> NetworkSpec {
        NetworkSpec {
            activation: self.arch.generator_activation,
            range: self.data.range,
            ..NetworkSpec::generator(classes, dim, self.arch.generator_hidden.clone())
        }
    }

    pub fn discriminator_spec(&self, dim: usize, classes: usize) -> NetworkSpec {
        NetworkSpec {
            activation: self.arch.discriminator_activation,
            ..NetworkSpec::discriminator(dim, classes, self.arch.discriminator_hidden.clone())
        }
    }

    /// Distillation settings of the KD baseline: no distance term, `kd_tau`.
    pub fn kd_config(&self) -> DistillConfig {
        DistillConfig { alpha: 0.0, tau: self.kd_tau, ..self.distill.clone() }
    }
}

/// Parsed `(section, key) → value` pairs; consumed field by field so that
/// leftover keys can be reported as unknown.
struct Entries {
    map: BTreeMap<(String, String), (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {line_no}: unterminated section header")))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            if section.is_empty() {
                return Err(Error::Config(format!("line {line_no}: key outside any section")));
            }
            let key = (section.clone(), k.trim().to_string());
            if map.insert(key.clone(), (line_no, v.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {line_no}: duplicate key {}.{}", key.0, key.1)));
            }
        }
        Ok(Self { map })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.map.remove(&(section.to_string(), key.to_string())).map(|(_, v)| v)
    }

    fn set<T: std::str::FromStr>(&mut self, section: &str, key: &str, dst: &mut T) -> Result<()> {
        if let Some(v) = self.take(section, key) {
            *dst = v.parse().map_err(|_| Error::Config(format!("{section}.{key}: cannot parse `{v}`")))?;
        }
        Ok(())
    }

    fn set_bool(&mut self, section: &str, key: &str, dst: &mut bool) -> Result<()> {
        if let Some(v) = self.take(section, key) {
            *dst = match v.as_str() {
                "true" | "yes" | "1" | "on" => true,
                "false" | "no" | "0" | "off" => false,
                _ => return Err(Error::Config(format!("{section}.{key}: expected a boolean, got `{v}`"))),
            };
        }
        Ok(())
    }

    fn set_list<T: std::str::FromStr>(&mut self, section: &str, key: &str, dst: &mut Vec<T>) -> Result<()> {
        if let Some(v) = self.take(section, key) {
            *dst = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|_| Error::Config(format!("{section}.{key}: cannot parse `{s}`"))))
                .collect::<Result<_>>()?;
        }
        Ok(())
    }

    fn optimizer(&mut self, section: &str, prefix: &str, o: &mut OptimizerSettings) -> Result<()> {
        self.set(section, &format!("{prefix}lr"), &mut o.lr)?;
        self.set(section, &format!("{prefix}momentum"), &mut o.momentum)?;
        self.set_list(section, &format!("{prefix}milestones"), &mut o.milestones)?;
        self.set(section, &format!("{prefix}gamma"), &mut o.gamma)?;
        if let Some(v) = self.take(section, &format!("{prefix}clip_norm")) {
            o.clip_norm = if v.is_empty() {
                None
            } else {
                Some(v.parse().map_err(|_| Error::Config(format!("{section}.{prefix}clip_norm: cannot parse `{v}`")))?)
            };
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some(((s, k), (line, _))) => Err(Error::Config(format!("line {line}: unknown key {s}.{k}"))),
        }
    }
}
