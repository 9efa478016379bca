//! Two-stage training behavior: loss descent, freezing, determinism, the
//! step-order trace, and the loss-decomposition identity.

use sctc_core::corpus::{Corpus, CorpusConfig};
use sctc_core::kb::KbConfig;
use sctc_core::link::{ChannelKind, LinkConfig};
use sctc_core::synth::SynthConfig;
use sctc_core::train::{total_loss, train_stage1, train_stage2, TrainConfig};

fn tiny_corpus(seed: u64, utterances: usize) -> Corpus {
    Corpus::generate(CorpusConfig {
        seed,
        speakers: 4,
        utterances,
        ..CorpusConfig::default()
    })
    .unwrap()
}

fn quick_train_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        stage1_steps: 150,
        stage2_epochs: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn total_loss_examples() {
    assert_eq!(total_loss(1.0, 2.0, 3.5), 6.5);
    assert_eq!(total_loss(0.0, 0.0, 0.0), 0.0);
    let (a, b, c) = (0.125, 7.25, 0.5);
    assert_eq!(total_loss(a, b, c), a + b + c);
}

#[test]
fn stage1_loss_decreases_and_is_deterministic() {
    let corpus = tiny_corpus(5, 48);
    let cfg = quick_train_cfg(11);
    let kb_cfg = KbConfig::default();

    let descent_cfg = TrainConfig {
        stage1_steps: 600,
        ..cfg.clone()
    };
    let (_, history) = train_stage1(&corpus, kb_cfg.clone(), &descent_cfg).unwrap();
    assert!(history.iter().all(|l| l.is_finite()));
    let head: f64 = history[..15].iter().sum::<f64>() / 15.0;
    let tail: f64 = history[history.len() - 15..].iter().sum::<f64>() / 15.0;
    assert!(tail < head, "loss did not descend: {head} -> {tail}");

    let (_, history2) = train_stage1(&corpus, kb_cfg, &descent_cfg).unwrap();
    assert_eq!(history, history2, "identical seed, identical history");
}

#[test]
fn stage1_overfits_when_codebook_covers_corpus() {
    // M >= corpus size with a single stage: every source vector gets its own
    // code, so reconstruction error goes to the autoencoder floor
    let corpus = tiny_corpus(7, 48);
    let cfg = TrainConfig {
        seed: 13,
        stage1_steps: 1200,
        ..TrainConfig::default()
    };
    let kb_cfg = KbConfig {
        stages: 1,
        codebook_size: 64,
        ..KbConfig::default()
    };
    let (kb, _) = train_stage1(&corpus, kb_cfg, &cfg).unwrap();

    let mut rel = 0.0;
    for u in &corpus.utterances {
        let enc = kb.encode(&u.feature).unwrap();
        let recon = kb.decode(&enc.indices).unwrap();
        let err = sctc_core::numkit::squared_distance(&u.feature, &recon);
        let scale = sctc_core::numkit::dot(&u.feature, &u.feature);
        rel += err / scale;
    }
    rel /= corpus.utterances.len() as f64;
    assert!(rel < 0.05, "memorization failed: relative mse {rel}");
}

#[test]
fn stage2_freezes_kb_and_is_deterministic() {
    let corpus = tiny_corpus(9, 32);
    let cfg = quick_train_cfg(17);
    let (kb, _) = train_stage1(&corpus, KbConfig::default(), &cfg).unwrap();
    let kb_before = kb.to_bytes();

    let link_cfg = LinkConfig::default();
    let synth_cfg = SynthConfig::default();
    let (model, history) = train_stage2(
        &corpus,
        kb.clone(),
        &link_cfg,
        &synth_cfg,
        ChannelKind::Awgn,
        &cfg,
    )
    .unwrap();
    assert_eq!(
        model.kb.to_bytes(),
        kb_before,
        "knowledge base must be bit-identical after stage two"
    );
    assert!(history.iter().all(|l| l.is_finite()));

    let (model2, history2) = train_stage2(
        &corpus,
        kb,
        &link_cfg,
        &synth_cfg,
        ChannelKind::Awgn,
        &cfg,
    )
    .unwrap();
    assert_eq!(history, history2);
    assert_eq!(model.nets, model2.nets, "identical seed, identical nets");
}

#[test]
fn stage2_step_trace_follows_algorithm_order() {
    let corpus = tiny_corpus(21, 24);
    let cfg = quick_train_cfg(23);
    let (kb, _) = train_stage1(&corpus, KbConfig::default(), &cfg).unwrap();
    let (model, _) = train_stage2(
        &corpus,
        kb,
        &LinkConfig::default(),
        &SynthConfig::default(),
        ChannelKind::Rayleigh,
        &cfg,
    )
    .unwrap();

    let mut rng = sctc_core::numkit::SeededRng::new(99);
    let mut grads = model.zero_grads();
    let mut trace = Vec::new();
    model
        .sample_step(
            &corpus.utterances[0],
            &model.encodings[0],
            5.0,
            &mut rng,
            &mut grads,
            Some(&mut trace),
        )
        .unwrap();
    assert_eq!(
        trace,
        vec![
            "tokenize",
            "transmitter_kb",
            "residual_encoder",
            "framing",
            "channel_encode",
            "channel",
            "channel_decode",
            "unframe",
            "receiver_kb",
            "prior_encoder",
            "diffusion",
            "total_loss",
            "sgd",
        ]
    );
}

#[test]
fn stage2_loss_parts_sum_exactly() {
    let corpus = tiny_corpus(25, 24);
    let cfg = quick_train_cfg(27);
    let (kb, _) = train_stage1(&corpus, KbConfig::default(), &cfg).unwrap();
    let (model, _) = train_stage2(
        &corpus,
        kb,
        &LinkConfig::default(),
        &SynthConfig::default(),
        ChannelKind::Awgn,
        &cfg,
    )
    .unwrap();

    let mut rng = sctc_core::numkit::SeededRng::new(123);
    for i in 0..8 {
        let mut grads = model.zero_grads();
        let losses = model
            .sample_step(
                &corpus.utterances[i],
                &model.encodings[i],
                2.0,
                &mut rng,
                &mut grads,
                None,
            )
            .unwrap();
        let summed = total_loss(losses.ed, losses.prior, losses.diffusion);
        assert!((losses.total() - summed).abs() < 1e-12);
        assert!(losses.ed >= 0.0 && losses.prior >= 0.0 && losses.diffusion >= 0.0);
    }
}

#[test]
fn stage2_training_reduces_total_loss_across_seeds() {
    // the raw step-loss history is heavy-tailed in the diffusion time draw,
    // so descent is asserted by scoring trained vs freshly initialized
    // models on identical evaluation draws
    let corpus = tiny_corpus(41, 32);
    let link_cfg = LinkConfig::default();
    let synth_cfg = SynthConfig::default();
    for seed in [3u64, 5, 7] {
        let cfg = TrainConfig {
            seed,
            stage1_steps: 300,
            stage2_epochs: 80,
            ..TrainConfig::default()
        };
        let (kb, _) = train_stage1(&corpus, KbConfig::default(), &cfg).unwrap();
        let (trained, _) = train_stage2(
            &corpus,
            kb.clone(),
            &link_cfg,
            &synth_cfg,
            ChannelKind::Awgn,
            &cfg,
        )
        .unwrap();

        let layout = trained.layout;
        let nets = sctc_core::train::init_stage2_nets(
            corpus.config.feature_dim,
            &layout,
            &link_cfg,
            &synth_cfg,
            corpus.config.frame_dim,
            ChannelKind::Awgn,
            cfg.seed,
        );
        let untrained = sctc_core::train::Stage2Model::prepare(
            &corpus,
            kb,
            nets,
            layout,
            &synth_cfg,
            ChannelKind::Awgn,
        )
        .unwrap();

        let eval = |model: &sctc_core::train::Stage2Model| -> f64 {
            let mut rng = sctc_core::numkit::SeededRng::new(987_654);
            let mut acc = 0.0;
            for i in 0..16 {
                let mut grads = model.zero_grads();
                let losses = model
                    .sample_step(
                        &corpus.utterances[i],
                        &model.encodings[i],
                        10.0,
                        &mut rng,
                        &mut grads,
                        None,
                    )
                    .unwrap();
                acc += losses.total();
            }
            acc
        };
        let before = eval(&untrained);
        let after = eval(&trained);
        assert!(
            after < before,
            "seed {seed}: training did not reduce the total loss ({before:.1} -> {after:.1})"
        );
    }
}

#[test]
fn checkpoint_serialization_round_trip() {
    use sctc_core::train::{Checkpoint, ChannelCheckpoint};

    let corpus = tiny_corpus(31, 24);
    let cfg = quick_train_cfg(33);
    let (kb, _) = train_stage1(&corpus, KbConfig::default(), &cfg).unwrap();
    let (model, _) = train_stage2(
        &corpus,
        kb.clone(),
        &LinkConfig::default(),
        &SynthConfig::default(),
        ChannelKind::Awgn,
        &cfg,
    )
    .unwrap();

    let ckpt = Checkpoint {
        kb,
        channels: vec![ChannelCheckpoint {
            kind: ChannelKind::Awgn,
            nets: model.nets.clone(),
            budget_codecs: Vec::new(),
        }],
    };
    let bytes = ckpt.to_bytes();
    let loaded = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(bytes, loaded.to_bytes(), "round trip is bit-identical");
    assert_eq!(loaded.channels[0].nets, model.nets);
    assert!(loaded.codec_for(ChannelKind::Awgn, 96).is_some());
    assert!(loaded.codec_for(ChannelKind::Awgn, 32).is_none());
    assert!(loaded.codec_for(ChannelKind::Rayleigh, 96).is_none());
}
