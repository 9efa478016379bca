//! File-level harness behavior: artifact round trips, missing-input errors,
//! sweep determinism, and worker-count independence.

use sctc_core::config::RunConfig;
use sctc_core::harness::{
    cmd_gen_corpus, cmd_sweep, cmd_train_stage1, cmd_train_stage2, LossHistory, OutPaths,
    TrialContext,
};
use sctc_core::Error;
use std::path::PathBuf;

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.corpus.utterances = 24;
    cfg.corpus.speakers = 4;
    cfg.train.stage1_steps = 150;
    cfg.train.stage2_epochs = 2;
    cfg.synth.infer_steps = 40;
    cfg.sweep.schemes = vec!["semantic_awgn".into(), "pcm_ldpc_awgn".into()];
    cfg.sweep.snr_grid_db = vec![0.0, 10.0];
    cfg.sweep.budget_bits = vec![1536];
    cfg.sweep.trials = 3;
    cfg
}

fn scratch_dir(name: &str) -> OutPaths {
    let dir = std::env::temp_dir().join(format!("sctc_harness_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    OutPaths::new(dir)
}

#[test]
fn corpus_generation_is_idempotent_and_manifested() {
    let cfg = small_config();
    let paths = scratch_dir("gen");
    cmd_gen_corpus(&cfg, &paths).unwrap();
    let first = std::fs::read(paths.corpus_bin()).unwrap();
    cmd_gen_corpus(&cfg, &paths).unwrap();
    let second = std::fs::read(paths.corpus_bin()).unwrap();
    assert_eq!(first, second, "regeneration must be byte-identical");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(paths.corpus_manifest()).unwrap()).unwrap();
    assert_eq!(manifest["utterances"], 24);
    assert_eq!(manifest["speakers"], 4);
}

#[test]
fn corrupted_corpus_magic_is_a_clean_error() {
    let cfg = small_config();
    let paths = scratch_dir("magic");
    cmd_gen_corpus(&cfg, &paths).unwrap();
    let mut bytes = std::fs::read(paths.corpus_bin()).unwrap();
    bytes[0] ^= 0xFF;
    std::fs::write(paths.corpus_bin(), &bytes).unwrap();
    match sctc_core::harness::load_corpus(&paths) {
        Err(Error::Decode(msg)) => assert!(msg.contains("magic")),
        other => panic!("expected a decode error, got {other:?}"),
    }
}

#[test]
fn stage2_without_stage1_is_a_config_error() {
    let cfg = small_config();
    let paths = scratch_dir("nostage1");
    cmd_gen_corpus(&cfg, &paths).unwrap();
    match cmd_train_stage2(&cfg, &paths, None) {
        Err(Error::Config(msg)) => assert!(msg.contains("stage-1")),
        other => panic!("expected a config error, got {other:?}"),
    }

    // explicit bogus path is the same class of error
    let bogus = PathBuf::from("/nonexistent/kb.bin");
    assert!(matches!(
        cmd_train_stage2(&cfg, &paths, Some(&bogus)),
        Err(Error::Config(_))
    ));
}

#[test]
fn training_artifacts_and_sweep_are_deterministic() {
    let cfg = small_config();
    let paths = scratch_dir("full");
    cmd_gen_corpus(&cfg, &paths).unwrap();

    cmd_train_stage1(&cfg, &paths).unwrap();
    let kb_first = std::fs::read(paths.kb_file()).unwrap();
    let hist: Vec<LossHistory> =
        serde_json::from_str(&std::fs::read_to_string(paths.stage1_history()).unwrap()).unwrap();
    assert_eq!(hist[0].stage, 1);
    assert_eq!(hist[0].losses.len(), cfg.train.stage1_steps);

    cmd_train_stage2(&cfg, &paths, None).unwrap();
    let ckpt_first = std::fs::read(paths.checkpoint_file()).unwrap();
    let hist2: Vec<LossHistory> =
        serde_json::from_str(&std::fs::read_to_string(paths.stage2_history()).unwrap()).unwrap();
    let steps_per_epoch = cfg.corpus.utterances.div_ceil(cfg.train.batch);
    assert_eq!(
        hist2[0].losses.len(),
        cfg.train.stage2_epochs * steps_per_epoch
    );

    // retrain from scratch: identical bytes
    cmd_train_stage1(&cfg, &paths).unwrap();
    cmd_train_stage2(&cfg, &paths, None).unwrap();
    assert_eq!(kb_first, std::fs::read(paths.kb_file()).unwrap());
    assert_eq!(ckpt_first, std::fs::read(paths.checkpoint_file()).unwrap());

    // sweep: row count, determinism, worker-count independence
    let (results, summary) = cmd_sweep(&cfg, &paths, Some(1)).unwrap();
    let first = std::fs::read_to_string(&results).unwrap();
    let rows = first.lines().count() - 1;
    // schemes(2) x snrs(2) x budgets(1) x trials(3)
    assert_eq!(rows, 12);
    assert!(first.starts_with(
        "scheme,snr_db,budget_bits,seed,trial,wer_token,wer_synth,spk,outage\n"
    ));

    let (results2, _) = cmd_sweep(&cfg, &paths, Some(2)).unwrap();
    let second = std::fs::read_to_string(&results2).unwrap();
    assert_eq!(first, second, "jobs=2 must write identical bytes");
    assert!(std::fs::read_to_string(summary).unwrap().lines().count() > 1);
}

#[test]
fn single_trial_is_reproducible_and_records_outages() {
    let cfg = small_config();
    let paths = scratch_dir("trial");
    cmd_gen_corpus(&cfg, &paths).unwrap();
    cmd_train_stage1(&cfg, &paths).unwrap();
    cmd_train_stage2(&cfg, &paths, None).unwrap();

    let ctx = TrialContext::load(&cfg, &paths).unwrap();
    let a = ctx.run_trial("semantic_awgn", 5.0, 1536, 0).unwrap();
    let b = ctx.run_trial("semantic_awgn", 5.0, 1536, 0).unwrap();
    assert_eq!(a, b);
    assert!(a.wer_token >= 0.0 && a.wer_synth >= 0.0);
    assert!((-1.0..=1.0).contains(&a.spk));
    assert!(!a.outage);
    assert_eq!(a.h, (1.0, 0.0), "awgn has unit channel");

    // unknown scheme and untrained budget fail loudly
    assert!(ctx.run_trial("morse_awgn", 5.0, 1536, 0).is_err());
    assert!(ctx.run_trial("semantic_awgn", 5.0, 512, 0).is_err());

    // an infeasible baseline budget is flagged, not dropped
    let rec = ctx.run_trial("pcm_ldpc_awgn", 5.0, 256, 0).unwrap();
    assert!(rec.outage);
    assert_eq!(rec.wer_token, 1.0);
    assert_eq!(rec.spk, -1.0);
}
