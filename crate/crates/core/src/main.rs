use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mekd::autodiff::gradcheck;
use mekd::distill::Norm;
use mekd::harness::pipeline::{
    self, generator_fid, load_generator, load_network, load_teacher, prior_for, student_ckpt_name, GENERATOR_CKPT,
};
use mekd::harness::{load_data, Method, RunConfig};
use mekd::metrics::{self, record_logit_gradients, GradientProfile, LossEvaluator};
use mekd::nets::Network;
use mekd::{Error, Result};

/// Maximum relative error accepted by `gradcheck`.
const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "mekd", version, about = "Mapping-emulation knowledge distillation experiments")]
struct Cli {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the teacher with labels and checkpoint it.
    TrainTeacher,
    /// Train the emulator generator on unlabeled data.
    TrainGan,
    /// Distill a student from the teacher checkpoint.
    Distill {
        #[arg(long, default_value = "mekd")]
        method: String,
    },
    /// Distill one student per generator checkpoint, ordered by Fréchet distance.
    AblateFid,
    /// Report accuracies and generator quality of the stored checkpoints.
    Eval,
    /// Compare tape gradients with finite differences for every op.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
    /// Export logit-gradient profiles of a student under each loss.
    GradProfile {
        #[arg(long, default_value_t = 16)]
        samples: usize,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    if let Command::Gradcheck { cases } = cli.command {
        let reports = gradcheck::run_suite(cfg.seed, cases)?;
        let mut failed = Vec::new();
        println!("op,cases,max_rel_err");
        for r in &reports {
            println!("{},{},{:e}", r.op, r.cases, r.max_rel_err);
            if !(r.max_rel_err < GRADCHECK_TOLERANCE) {
                failed.push(r.op);
            }
        }
        return if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::Check(format!("gradients disagree for {}", failed.join(", "))))
        };
    }

    let data = load_data(&cfg)?;
    let out = cfg.out_dir.clone();
    match cli.command {
        Command::TrainTeacher => {
            let run = pipeline::run_train_teacher(&cfg, &data)?;
            println!("teacher train_acc={} test_acc={}", run.train_acc, run.test_acc);
        }
        Command::TrainGan => {
            let teacher = load_teacher(&cfg, &data)?;
            let run = pipeline::run_train_gan(&cfg, &data, &teacher)?;
            println!(
                "generator fid={} initial_fid={} teacher_output_fid={}",
                run.fid, run.initial_fid, run.teacher_output_fid
            );
        }
        Command::Distill { method } => {
            let method = Method::parse(&method)?;
            let teacher = load_teacher(&cfg, &data)?;
            let gen_path = out.join(GENERATOR_CKPT);
            let generator = match method {
                Method::Mekd if cfg.distill.alpha > 0.0 => Some(load_generator(&cfg, &data, &gen_path)?),
                _ => None,
            };
            let fid = match &generator {
                Some(g) => Some(generator_fid(g, data.gan.samples(), prior_for(&cfg, data.classes())?, data.gan.len(), cfg.seed)?),
                None => None,
            };
            let run = pipeline::run_distill(&cfg, &data, &teacher, generator.as_ref().zip(fid), method)?;
            println!("{}", pipeline::ResultsTable::HEADER);
            println!("{}", run.row.csv());
        }
        Command::AblateFid => {
            let teacher = load_teacher(&cfg, &data)?;
            let checkpoints = pipeline::generator_checkpoints(&out)?;
            let table = pipeline::run_ablation_fid(&cfg, &data, &teacher, &checkpoints)?;
            print!("{}", table.to_csv());
        }
        Command::Eval => {
            let teacher = load_teacher(&cfg, &data)?;
            println!("teacher test_acc={}", metrics::accuracy(&teacher, &data.test)?);
            for method in [Method::Mekd, Method::Kd] {
                let path = out.join(student_ckpt_name(method));
                if path.exists() {
                    let s = load_network(cfg.student_spec(data.dim(), data.classes()), "student", &path)?;
                    println!("student_{} test_acc={}", method.as_str(), metrics::accuracy(&s, &data.test)?);
                }
            }
            let prior = prior_for(&cfg, data.classes())?;
            for path in pipeline::generator_checkpoints(&out)? {
                let g = load_generator(&cfg, &data, &path)?;
                let fid = generator_fid(&g, data.gan.samples(), prior, data.gan.len(), cfg.seed)?;
                println!("{} fid={fid}", path.display());
            }
        }
        Command::GradProfile { samples } => {
            let teacher = load_teacher(&cfg, &data)?;
            let generator = load_generator(&cfg, &data, &out.join(GENERATOR_CKPT))?;
            let student_path = out.join(student_ckpt_name(Method::Mekd));
            let student = if student_path.exists() {
                load_network(cfg.student_spec(data.dim(), data.classes()), "student", &student_path)?
            } else {
                Network::build(cfg.student_spec(data.dim(), data.classes()), "student", cfg.seed)?
            };
            let blind = mekd::distill::BlindTeacher::new(teacher)?;
            let labels = data.test.labels();
            let d = &cfg.distill;
            let mut csv = GradientProfile::csv_header(data.classes());
            csv.push('\n');
            for i in 0..samples.min(data.test.len()) {
                let x = data.test.sample(i);
                let p = blind.classify(x)?;
                let evaluators = [
                    LossEvaluator::SupervisedCe,
                    LossEvaluator::BaselineKd { teacher: &p, tau: cfg.kd_tau },
                    LossEvaluator::Mekd { teacher: &p, generator: &generator, norm: Norm::L1, alpha: d.alpha, beta: d.beta, tau: d.tau },
                    LossEvaluator::Mekd { teacher: &p, generator: &generator, norm: Norm::L2, alpha: d.alpha, beta: d.beta, tau: d.tau },
                ];
                for ev in &evaluators {
                    let prof = record_logit_gradients(&student, ev, x, labels[i])?;
                    csv.push_str(&prof.csv_row(ev.label(), i));
                    csv.push('\n');
                }
            }
            std::fs::create_dir_all(&out)?;
            let path = out.join("grad_profile.csv");
            mekd::autodiff::checkpoint::write_atomic(&path, csv.as_bytes())?;
            println!("wrote {}", path.display());
        }
        Command::Gradcheck { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let level = std::env::var("MEKD_LOG_LEVEL").unwrap_or_else(|_| "info".into());
    env_logger::Builder::new().parse_filters(&level).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
