use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mekd::harness::pipeline::{
    distill_student, generator_checkpoints, load_data, run_ablation_fid, run_train_gan, run_train_teacher, Method,
    ResultsTable, ABLATION_RESULTS, GAN_FID, GENERATOR_CKPT, RESULTS, TEACHER_CKPT,
};
use mekd::harness::RunConfig;
use mekd::Error;

const TINY: &str = "\
[run]
seed = 3

[data]
classes = 2
dim = 4
per_class = 40

[teacher]
hidden = 8
epochs = 10
batch_size = 16

[student]
hidden = 4

[generator]
hidden = 8

[discriminator]
hidden = 8

[gan]
epochs = 3
batch_size = 16
snapshots = 1

[distill]
epochs = 3
batch_size = 16
milestones =
";

fn tiny(out: &Path) -> RunConfig {
    RunConfig { out_dir: out.to_path_buf(), ..RunConfig::parse(TINY).unwrap() }
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.ini");
    fs::write(&p, text).unwrap();
    p
}

fn mekd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mekd")).args(args).env("MEKD_LOG_LEVEL", "error").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn cli_runs_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let base = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let run = |extra: &[&str]| {
        let args: Vec<&str> = base.iter().copied().chain(extra.iter().copied()).collect();
        let o = mekd(&args);
        assert_eq!(code(&o), 0, "{extra:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    run(&["train-teacher"]);
    run(&["train-gan"]);
    run(&["distill", "--method", "mekd"]);
    run(&["distill", "--method", "kd"]);
    let ablation = run(&["ablate-fid"]);
    assert_eq!(ablation.lines().count(), 3, "header plus two checkpoints:\n{ablation}");
    let eval = run(&["eval"]);
    assert!(eval.contains("student_kd test_acc="));
    run(&["grad-profile", "--samples", "3"]);
    assert!(out.join("grad_profile.csv").exists());

    let table = ResultsTable::load(&out.join(RESULTS)).unwrap();
    assert_eq!(table.rows.iter().map(|r| r.method).collect::<Vec<_>>(), vec![Method::Mekd, Method::Kd]);
    assert!(table.rows[0].gen_fid.is_some() && table.rows[1].gen_fid.is_none());
    let hash = table.rows[0].config_hash.clone();
    assert_eq!(hash.len(), 16);
    for file in [RESULTS, ABLATION_RESULTS, GAN_FID] {
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert!(text.lines().skip(1).all(|l| l.ends_with(&hash)), "{file} rows lack the config hash");
    }
    let leftovers: Vec<_> = fs::read_dir(&out).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().contains(".tmp")).collect();
    assert!(leftovers.is_empty());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let o = mekd(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "9", "train-teacher"]);
    assert_eq!(code(&o), 0);
    let written = RunConfig::parse(&fs::read_to_string(out.join("config.ini")).unwrap()).unwrap();
    assert_eq!(written.seed, 9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mekd(&["train-teacher"])), 1, "missing --config");
    assert_eq!(code(&mekd(&["no-such-command"])), 1);
    let bad = write_config(dir.path(), "[distill]\nfavourite_colour = blue\n");
    assert_eq!(code(&mekd(&["--config", bad.to_str().unwrap(), "train-teacher"])), 1);

    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("empty");
    let o = mekd(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "distill"]);
    assert_eq!(code(&o), 1, "a missing prerequisite checkpoint is a usage error");
    let blocker = dir.path().join("not_a_dir");
    fs::write(&blocker, "").unwrap();
    let o = mekd(&["--config", cfg.to_str().unwrap(), "--out", blocker.to_str().unwrap(), "train-teacher"]);
    assert_eq!(code(&o), 2, "an unwritable output directory is a runtime failure");
    let o = mekd(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "distill", "--method", "svm"]);
    assert_eq!(code(&o), 1);
    let o = mekd(&["--config", cfg.to_str().unwrap(), "gradcheck", "--cases", "2"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("op,cases,max_rel_err"));
}

#[test]
fn zero_alpha_mekd_matches_kd() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    cfg.distill.alpha = 0.0;
    cfg.distill.tau = cfg.kd_tau;
    let data = load_data(&cfg).unwrap();
    let teacher = run_train_teacher(&cfg, &data).unwrap().teacher;
    let m = distill_student(&cfg, &data, &teacher, None, Method::Mekd).unwrap();
    let k = distill_student(&cfg, &data, &teacher, None, Method::Kd).unwrap();
    assert_eq!(m.student, k.student);
    assert_eq!(m.row.student_acc, k.row.student_acc);
    assert_eq!(m.log, k.log);
}

#[test]
fn kd_needs_no_generator_but_mekd_does() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let data = load_data(&cfg).unwrap();
    let teacher = run_train_teacher(&cfg, &data).unwrap().teacher;
    assert!(distill_student(&cfg, &data, &teacher, None, Method::Kd).is_ok());
    assert!(matches!(distill_student(&cfg, &data, &teacher, None, Method::Mekd), Err(Error::Config(_))));
}

#[test]
fn ablation_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let data = load_data(&cfg).unwrap();
    let teacher = run_train_teacher(&cfg, &data).unwrap().teacher;
    run_train_gan(&cfg, &data, &teacher).unwrap();
    let fin = dir.path().join(GENERATOR_CKPT);
    assert!(matches!(run_ablation_fid(&cfg, &data, &teacher, std::slice::from_ref(&fin)), Err(Error::Config(_))));

    let twin = dir.path().join("twin.ckpt");
    fs::copy(&fin, &twin).unwrap();
    let same = run_ablation_fid(&cfg, &data, &teacher, &[fin.clone(), twin]).unwrap();
    assert_eq!(same.rows[0].student_acc, same.rows[1].student_acc);

    let table = run_ablation_fid(&cfg, &data, &teacher, &generator_checkpoints(dir.path()).unwrap()).unwrap();
    let fids: Vec<f64> = table.rows.iter().map(|r| r.gen_fid.unwrap()).collect();
    assert!(fids.windows(2).all(|w| w[0] <= w[1]), "{fids:?}");
}

#[test]
fn mismatched_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let data = load_data(&cfg).unwrap();
    run_train_teacher(&cfg, &data).unwrap();
    let mut wider = cfg.clone();
    wider.arch.teacher_hidden = vec![9];
    let err = mekd::harness::pipeline::load_teacher(&wider, &data).unwrap_err();
    assert!(err.is_validation(), "{err}");
    assert!(dir.path().join(TEACHER_CKPT).exists());
}
