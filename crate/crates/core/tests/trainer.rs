use lff_core::eval::compute_eer;
use lff_core::experiment::{run_toy_experiment, score_heldout, SyntheticSetSpec, ToyFrontend, ToySpec};
use lff_core::trainer::{train, Dataset, FrontendSpec, TrainConfig, TrainHistory, TrainedModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_set(seed: u64) -> Dataset {
    SyntheticSetSpec {
        n_speakers: 3,
        utterances_per_speaker: 2,
        utterance_s: 2.5,
        heldout_per_speaker: 2,
        ..SyntheticSetSpec::default()
    }
    .generate(seed)
    .unwrap()
    .train
}

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch: 4,
        seed: 11,
        hidden: 16,
        embedding_dim: 8,
        ..TrainConfig::default()
    }
}

fn spec(name: &str, n_filters: usize) -> FrontendSpec {
    FrontendSpec {
        n_filters,
        ..FrontendSpec::named(name).unwrap()
    }
}

fn history_bits(h: &TrainHistory) -> Vec<u64> {
    let mut bits: Vec<u64> = h.initial_alphas.iter().chain(&h.initial_betas).map(|v| v.to_bits()).collect();
    for e in &h.epochs {
        bits.push(e.epoch as u64);
        bits.push(e.loss.to_bits());
        bits.extend(e.alphas.iter().chain(&e.betas).map(|v| v.to_bits()));
    }
    bits
}

#[test]
fn same_seed_gives_bitwise_identical_history_and_model() {
    let data = small_set(3);
    for name in ["lff-t", "lff-b", "sinc"] {
        let s = spec(name, 16);
        let (m1, h1) = train(&data, &s, &small_config(2)).unwrap();
        let (m2, h2) = train(&data, &s, &small_config(2)).unwrap();
        assert_eq!(history_bits(&h1), history_bits(&h2), "{name}");
        assert_eq!(m1.to_bytes(), m2.to_bytes(), "{name}");
    }
    let (_, other) = train(&data, &spec("lff-t", 16), &TrainConfig { seed: 12, ..small_config(2) }).unwrap();
    let (_, base) = train(&data, &spec("lff-t", 16), &small_config(2)).unwrap();
    assert_ne!(history_bits(&other), history_bits(&base));
}

#[test]
fn mel_frozen_snapshots_never_move() {
    let (_, h) = train(&small_set(4), &spec("mel", 16), &small_config(3)).unwrap();
    assert_eq!(h.epochs.len(), 3);
    for e in &h.epochs {
        assert_eq!(e.alphas, h.initial_alphas);
        assert_eq!(e.betas, h.initial_betas);
    }
    assert_eq!(h.mean_abs_delta_beta(), 0.0);
}

#[test]
fn lff_filters_move_during_training() {
    let (_, h) = train(&small_set(5), &spec("lff-t", 16), &small_config(3)).unwrap();
    assert!(h.mean_abs_delta_beta() > 0.0);
    assert!(h.epochs.iter().all(|e| e.loss.is_finite()));
}

/// One full-batch step, lr halved from 1e-2 until the loss does not increase; must succeed by 1e-6.
fn assert_small_step_descends(model: &TrainedModel, data: &Dataset, config: &TrainConfig) {
    let inputs: Vec<_> = data.utterances.iter().map(|u| model.prepare(&u.audio).unwrap()).collect();
    let labels: Vec<_> = data.utterances.iter().map(|u| u.label).collect();
    let (loss0, grads) = model
        .batch_loss_and_grads(&inputs, &labels, config.loss_scale, config.loss_margin)
        .unwrap();
    let mut lr = 1e-2;
    while lr >= 1e-6 {
        let mut stepped = model.clone();
        stepped.apply_gradient_step(&grads, lr);
        let loss1 = stepped
            .batch_loss(&inputs, &labels, config.loss_scale, config.loss_margin)
            .unwrap();
        if loss1 <= loss0 {
            return;
        }
        lr /= 2.0;
    }
    panic!("no descent step down to lr 1e-6 (loss {loss0})");
}

#[test]
fn tiny_full_batch_step_does_not_increase_loss() {
    let data = small_set(6);
    let config = small_config(1);
    let sr = data.sample_rate().unwrap();
    for (name, lambda) in [("lff-t", 0.0), ("lff-b", 0.0), ("lff-t", 0.25), ("mel", 0.0), ("sinc", 0.0), ("gabor", 0.0)] {
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frontend = spec(name, 12).build(sr, lambda, &mut rng).unwrap();
            let model = TrainedModel::init(frontend, data.n_classes(), sr, &config, &mut rng);
            assert_small_step_descends(&model, &data, &config);
        }
    }
}

#[test]
fn hybrid_branch_trains_and_round_trips() {
    let data = small_set(7);
    let config = TrainConfig {
        lambda_mix: 0.1,
        ..small_config(2)
    };
    let (model, h) = train(&data, &spec("lff-t", 64), &config).unwrap();
    // 58 LFF channels + 6 CNN channels.
    assert_eq!(model.frontend.n_features(), 64);
    assert_eq!(model.frontend.filter_params().unwrap().n_filters(), 58);
    assert_eq!(model.frontend.conv_branch().unwrap().channels, 6);
    assert!(h.epochs.iter().all(|e| e.loss.is_finite()));
    let back = TrainedModel::from_bytes(&model.to_bytes()).unwrap();
    assert_eq!(back.to_bytes(), model.to_bytes());

    let time_domain = TrainConfig {
        lambda_mix: 0.1,
        ..small_config(1)
    };
    assert!(train(&data, &spec("sinc", 16), &time_domain).is_err());
}

/// The easy set has no per-utterance pitch shift and no noise, so speakers separate for every front-end.
#[test]
fn easy_set_every_frontend_below_five_percent_eer() {
    let spec = ToySpec {
        seed: 1,
        data: SyntheticSetSpec {
            f0_spread: 0.0,
            noise_rms: 0.0,
            ..SyntheticSetSpec::default()
        },
        frontends: ["mel", "lff-t", "lff-b", "sinc", "gabor"]
            .iter()
            .map(|n| ToyFrontend {
                name: n.to_string(),
                n_filters: None,
                lambda_mix: None,
            })
            .collect(),
        ..ToySpec::default()
    };
    let outcome = run_toy_experiment(&spec, "easy").unwrap();
    let heldout = spec.data.generate(spec.seed).unwrap().heldout;
    for (m, run) in outcome.metrics.frontends.iter().zip(&outcome.runs) {
        assert!(m.eer < 0.05, "{}: EER {}", m.name, m.eer);
        assert!(m.final_loss < m.initial_loss, "{}", m.name);
        // Metrics agree with rescoring the returned model.
        let eer = compute_eer(&score_heldout(&run.model, &heldout).unwrap()).unwrap().eer;
        assert_eq!(eer, m.eer);
    }
}
