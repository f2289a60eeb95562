//! Properties that only hold for trained models. One full-length GAN run on
//! the default blobs setup is shared by the checks below.

use std::sync::OnceLock;

use mekd::data::{class_centroids, synth_blobs};
use mekd::harness::pipeline::{load_data, run_train_gan, run_train_teacher, GanRun, Splits, TeacherRun};
use mekd::harness::RunConfig;
use mekd::nets::{Network, NetworkSpec};
use mekd::train::{train_classifier, TrainSettings};

/// Teacher-output images may be at most this many times further (Fréchet)
/// from the real set than noise-generated images.
const TEACHER_OUTPUT_FID_FACTOR: f64 = 2.0;
/// Mass on the target class of a one-hot-like generator input.
const ONE_HOT_MASS: f64 = 0.97;

struct Trained {
    data: Splits,
    teacher: TeacherRun,
    gan: GanRun,
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        let cfg = RunConfig { out_dir: dir, ..RunConfig::default() };
        let data = load_data(&cfg).unwrap();
        let teacher = run_train_teacher(&cfg, &data).unwrap();
        let gan = run_train_gan(&cfg, &data, &teacher.teacher).unwrap();
        Trained { data, teacher, gan }
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[test]
fn two_class_teacher_classifies_its_centroids() {
    let ds = synth_blobs(2, 16, 200, 0.1, 7).unwrap();
    let mut teacher = Network::build(NetworkSpec::classifier(16, 2, vec![16]), "teacher", 0).unwrap();
    let settings = TrainSettings { epochs: 10, ..TrainSettings::default() };
    train_classifier(&mut teacher, &ds, None, &settings, 1).unwrap();
    for (k, c) in class_centroids(&ds).iter().enumerate() {
        assert_eq!(teacher.classify(c).unwrap().argmax(), k);
    }
}

#[test]
fn trained_generator_beats_initialization() {
    let t = trained();
    assert!(t.teacher.test_acc >= 0.99);
    assert!(t.gan.fid < t.gan.initial_fid, "fid {} vs initial {}", t.gan.fid, t.gan.initial_fid);
}

#[test]
fn teacher_outputs_map_near_the_data() {
    let t = trained();
    let bound = TEACHER_OUTPUT_FID_FACTOR * t.gan.fid;
    assert!(
        t.gan.teacher_output_fid <= bound,
        "teacher-output fid {:.4} exceeds {TEACHER_OUTPUT_FID_FACTOR} x noise fid {:.4} (ratio {:.2})",
        t.gan.teacher_output_fid,
        t.gan.fid,
        t.gan.teacher_output_fid / t.gan.fid
    );
}

#[test]
fn one_hot_inputs_land_nearest_their_class() {
    let t = trained();
    let centroids = class_centroids(&t.data.gan);
    let c = centroids.len();
    let mut nearest = Vec::with_capacity(c);
    for k in 0..c {
        let y: Vec<f64> = (0..c).map(|j| if j == k { ONE_HOT_MASS } else { (1.0 - ONE_HOT_MASS) / (c - 1) as f64 }).collect();
        let img = t.gan.generator.generate(&y).unwrap();
        let best = (0..c).min_by(|&a, &b| sq_dist(img.values(), &centroids[a]).total_cmp(&sq_dist(img.values(), &centroids[b]))).unwrap();
        nearest.push(best);
    }
    assert_eq!(nearest, (0..c).collect::<Vec<_>>(), "nearest centroid per one-hot input");
}
