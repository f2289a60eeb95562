use mekd::autodiff::checkpoint;
use mekd::data::{synth_blobs, Dataset};
use mekd::gan::{train_gan, GanConfig, GanLog, GanTrainer, GanVariant, GeneratorLossMode, NoiseKind, NoisePrior};
use mekd::nets::{Network, NetworkSpec};
use mekd::{Error, Graph, Tensor};

fn blobs() -> Dataset {
    synth_blobs(3, 6, 40, 0.1, 5).unwrap()
}

fn nets(seed: u64) -> (Network, Network) {
    let g = Network::build(NetworkSpec::generator(3, 6, vec![8]), "generator", seed).unwrap();
    let d = Network::build(NetworkSpec::discriminator(6, 3, vec![8]), "discriminator", seed + 1).unwrap();
    (g, d)
}

fn cfg(variant: GanVariant, mode: GeneratorLossMode) -> GanConfig {
    GanConfig { batch_size: 16, epochs: 2, variant, generator_loss: mode, ..GanConfig::default() }
}

fn restore(net: &Network, bytes: &[u8]) -> Network {
    let mut n = net.clone();
    n.load_params(&checkpoint::decode(bytes).unwrap()).unwrap();
    n
}

/// Replays every logged step from checkpointed parameters: the D loss at
/// the parameters before the iteration, the G loss with the discriminator
/// as it stood after its update.
fn replay(variant: GanVariant, mode: GeneratorLossMode) {
    let ds = blobs();
    let (g, d) = nets(0);
    let c = cfg(variant, mode);
    let prior = NoisePrior::gaussian(3);
    let mut tr = GanTrainer::new(g.clone(), d.clone(), c.clone(), prior, 11).unwrap();
    let mut replayer = GanTrainer::new(g, d, c.clone(), prior, 11).unwrap();
    let mut log = GanLog::default();
    let mut checks = 0;
    for epoch in 0..c.epochs {
        let plan = tr.epoch_plan(&ds, epoch).unwrap();
        for it in 0..tr.iterations(plan.len()) {
            let g0 = checkpoint::encode(&tr.generator.export_params()).unwrap();
            let d0 = checkpoint::encode(&tr.discriminator.export_params()).unwrap();
            let row = tr.iteration(&ds, &plan, epoch, it).unwrap();
            let d1 = checkpoint::encode(&tr.discriminator.export_params()).unwrap();
            log.rows.push(row);

            replayer.generator = restore(&replayer.generator, &g0);
            replayer.discriminator = restore(&replayer.discriminator, &d0);
            let d_loss = replayer.d_step_loss(&ds, epoch, it, 0).unwrap();
            replayer.discriminator = restore(&replayer.discriminator, &d1);
            let g_loss = replayer.g_step_loss(epoch, it).unwrap();

            let logged = log.rows.last().unwrap();
            assert!((logged.loss_d - d_loss.loss).abs() < 1e-10, "{} vs {}", logged.loss_d, d_loss.loss);
            assert!((logged.loss_g - g_loss).abs() < 1e-10, "{} vs {}", logged.loss_g, g_loss);
            if let (Some(a), Some(b)) = (logged.gp, d_loss.gp) {
                assert!((a - b).abs() < 1e-10);
            }
            checks += 1;
        }
    }
    assert!(checks > 0);

    // The CSV carries the same numbers.
    let csv = log.to_csv();
    for (line, row) in csv.lines().skip(1).zip(&log.rows) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[2].parse::<f64>().unwrap(), row.loss_d);
        assert_eq!(f[3].parse::<f64>().unwrap(), row.loss_g);
    }
}

#[test]
fn logged_losses_replay_from_checkpoints_vanilla() {
    replay(GanVariant::Vanilla, GeneratorLossMode::NonSaturating);
    replay(GanVariant::Vanilla, GeneratorLossMode::MinimizeLog1m);
}

#[test]
fn logged_losses_replay_from_checkpoints_wgan() {
    replay(GanVariant::WganGp, GeneratorLossMode::NonSaturating);
}

#[test]
fn trained_generator_takes_no_gradient() {
    let ds = blobs();
    let (g, d) = nets(1);
    let out = train_gan(g, d, &ds, &cfg(GanVariant::WganGp, GeneratorLossMode::NonSaturating), NoisePrior::gaussian(3), 2).unwrap();
    let gen = out.generator;
    assert!(gen.is_frozen());
    let mut graph = Graph::new();
    let y = graph.input("y", Tensor::matrix(2, 3, vec![0.2, 0.3, 0.5, 0.9, 0.05, 0.05]).unwrap()).unwrap();
    let img = gen.forward(&mut graph, y).unwrap();
    let loss = graph.sum(img).unwrap();
    let grads = graph.backward(loss).unwrap();
    assert!(grads.is_empty(), "frozen generator exported {} gradients", grads.len());
    let gy = graph.grad(y).expect("input gradient");
    assert!(gy.iter().any(|v| *v != 0.0));
}

#[test]
fn latent_dimension_must_match_classes() {
    let mut spec = NetworkSpec::generator(3, 6, vec![8]);
    spec.input_dim = 5;
    assert!(matches!(Network::build(spec, "generator", 0), Err(Error::Contract(_))));

    let (g, d) = nets(0);
    let prior = NoisePrior::new(NoiseKind::Gaussian, 4).unwrap();
    let r = GanTrainer::new(g, d, GanConfig::default(), prior, 0);
    assert!(matches!(r, Err(Error::Contract(_))));
}

#[test]
fn same_seed_same_generator() {
    let ds = blobs();
    let c = cfg(GanVariant::Vanilla, GeneratorLossMode::NonSaturating);
    let run = || {
        let (g, d) = nets(3);
        train_gan(g, d, &ds, &c, NoisePrior::gaussian(3), 4).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.generator, b.generator);
    assert_eq!(a.log, b.log);
}

#[test]
fn gan_never_reads_labels() {
    let ds = blobs();
    let (g, d) = nets(0);
    train_gan(g, d, &ds, &cfg(GanVariant::WganGp, GeneratorLossMode::NonSaturating), NoisePrior::gaussian(3), 0).unwrap();
    assert_eq!(ds.label_reads(), 0);
}
