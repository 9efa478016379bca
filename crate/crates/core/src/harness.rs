//! Operational harness behind the CLI subcommands: corpus generation,
//! two-stage training, single trials, deterministic sweeps, and the
//! self-check battery. Everything here is a pure function of the run
//! configuration, so reruns produce byte-identical artifacts.

use crate::baseline::{
    baseline_transmit, coded_ber, ldpc_build, pcm_decode, pcm_encode, q_function,
    BaselinePayload, LdpcCode,
};
use crate::config::{parse_scheme, RunConfig, SchemeFamily};
use crate::corpus::{de_embed_tokens, Corpus, FrameSeq};
use crate::error::{Error, Result};
use crate::kb::{nearest_code, Codebook, KnowledgeBase};
use crate::link::{
    apply_channel, equalize, frame_packet, symbol_power, unframe_packet, ChannelCodec,
    ChannelKind, ChannelRealization, PacketLayout,
};
use crate::metrics::{
    records_to_csv, sort_records, spk, summarize, wer, TrialRecord,
};
use crate::numkit::{
    finite_difference_grad, grad_rel_err, sample_gaussian, squared_distance, Activation, Mat64,
    Mlp, SeededRng, Vec64,
};
use crate::synth::{backward_solve, forward_diffuse, DiffusionSchedule, ScoreNet};
use crate::train::{
    train_codec_for_budget, train_stage1, train_stage2, Checkpoint, ChannelCheckpoint,
    Stage2Model,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// Artifact locations under one output directory.
#[derive(Debug, Clone)]
pub struct OutPaths {
    pub dir: PathBuf,
}

impl OutPaths {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OutPaths { dir: dir.into() }
    }

    pub fn corpus_bin(&self) -> PathBuf {
        self.dir.join("corpus.bin")
    }

    pub fn corpus_manifest(&self) -> PathBuf {
        self.dir.join("corpus.json")
    }

    pub fn kb_file(&self) -> PathBuf {
        self.dir.join("kb.bin")
    }

    pub fn stage1_history(&self) -> PathBuf {
        self.dir.join("stage1_loss.json")
    }

    pub fn checkpoint_file(&self) -> PathBuf {
        self.dir.join("checkpoint.bin")
    }

    pub fn stage2_history(&self) -> PathBuf {
        self.dir.join("stage2_loss.json")
    }

    pub fn results_csv(&self) -> PathBuf {
        self.dir.join("results.csv")
    }

    pub fn summary_csv(&self) -> PathBuf {
        self.dir.join("summary.csv")
    }
}

/// Loss-history sidecar entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossHistory {
    pub stage: u8,
    /// Channel tag, with `/dx<len>` appended for budget-codec runs.
    pub channel: Option<String>,
    pub losses: Vec<f64>,
}

/// Generates the corpus and writes the binary plus its JSON manifest.
/// Idempotent: identical config writes identical bytes.
pub fn cmd_gen_corpus(cfg: &RunConfig, paths: &OutPaths) -> Result<Corpus> {
    cfg.validate()?;
    let corpus = Corpus::generate(cfg.corpus.clone())?;
    std::fs::create_dir_all(&paths.dir)?;
    std::fs::write(paths.corpus_bin(), corpus.to_bytes())?;
    let manifest = serde_json::to_string_pretty(&corpus.manifest())?;
    std::fs::write(paths.corpus_manifest(), manifest)?;
    Ok(corpus)
}

pub fn load_corpus(paths: &OutPaths) -> Result<Corpus> {
    let bytes = std::fs::read(paths.corpus_bin())
        .map_err(|e| Error::Config(format!("missing corpus at {:?}: {e}", paths.corpus_bin())))?;
    Corpus::from_bytes(&bytes)
}

/// Stage one: trains the knowledge bases and writes SCKB plus the loss
/// history sidecar.
pub fn cmd_train_stage1(cfg: &RunConfig, paths: &OutPaths) -> Result<()> {
    cfg.validate()?;
    let corpus = load_corpus(paths)?;
    let (kb, losses) = train_stage1(&corpus, cfg.kb.clone(), &cfg.train)?;
    std::fs::write(paths.kb_file(), kb.to_bytes())?;
    let history = LossHistory {
        stage: 1,
        channel: None,
        losses,
    };
    std::fs::write(
        paths.stage1_history(),
        serde_json::to_string(&vec![history])?,
    )?;
    Ok(())
}

/// Channels any configured scheme needs.
fn channels_in_sweep(cfg: &RunConfig) -> Result<Vec<ChannelKind>> {
    let mut kinds = BTreeSet::new();
    for tag in &cfg.sweep.schemes {
        let (_, kind) = parse_scheme(tag)?;
        kinds.insert(kind.tag());
    }
    Ok(kinds
        .into_iter()
        .map(|t| match t {
            "awgn" => ChannelKind::Awgn,
            _ => ChannelKind::Rayleigh,
        })
        .collect())
}

/// Stage two: end-to-end training per channel model plus codec-only runs
/// for every reduced budget in the sweep grid. Requires the stage-one file.
pub fn cmd_train_stage2(cfg: &RunConfig, paths: &OutPaths, kb_path: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    let corpus = load_corpus(paths)?;
    let kb_file = kb_path.map(Path::to_path_buf).unwrap_or(paths.kb_file());
    let kb_bytes = std::fs::read(&kb_file).map_err(|e| {
        Error::Config(format!(
            "stage 2 requires the stage-1 knowledge base at {kb_file:?}: {e}"
        ))
    })?;
    let kb = KnowledgeBase::from_bytes(&kb_bytes)?;

    let mut histories = Vec::new();
    let mut channels = Vec::new();
    for kind in channels_in_sweep(cfg)? {
        let (model, losses) = train_stage2(
            &corpus,
            kb.clone(),
            &cfg.link,
            &cfg.synth,
            kind,
            &cfg.train,
        )?;
        histories.push(LossHistory {
            stage: 2,
            channel: Some(kind.tag().into()),
            losses,
        });

        let mut budget_codecs: Vec<ChannelCodec> = Vec::new();
        for &budget in &cfg.sweep.budget_bits {
            let signal_len = cfg.signal_len_for_budget(budget)?;
            if signal_len == cfg.link.signal_len
                || budget_codecs.iter().any(|c| c.signal_len == signal_len)
            {
                continue;
            }
            let (codec, losses) =
                train_codec_for_budget(&corpus, &model, signal_len, cfg.link.hidden, &cfg.train)?;
            histories.push(LossHistory {
                stage: 2,
                channel: Some(format!("{}/dx{}", kind.tag(), signal_len)),
                losses,
            });
            budget_codecs.push(codec);
        }
        channels.push(ChannelCheckpoint {
            kind,
            nets: model.nets,
            budget_codecs,
        });
    }

    let ckpt = Checkpoint { kb, channels };
    std::fs::write(paths.checkpoint_file(), ckpt.to_bytes())?;
    std::fs::write(paths.stage2_history(), serde_json::to_string(&histories)?)?;
    Ok(())
}

/// Everything a trial needs, loaded once and shared read-only.
pub struct TrialContext {
    pub config: RunConfig,
    pub corpus: Corpus,
    pub checkpoint: Checkpoint,
    pub ldpc: LdpcCode,
}

impl TrialContext {
    pub fn load(cfg: &RunConfig, paths: &OutPaths) -> Result<Self> {
        cfg.validate()?;
        let corpus = load_corpus(paths)?;
        let bytes = std::fs::read(paths.checkpoint_file()).map_err(|e| {
            Error::Config(format!(
                "missing checkpoint at {:?}: {e}",
                paths.checkpoint_file()
            ))
        })?;
        let checkpoint = Checkpoint::from_bytes(&bytes)?;
        let ldpc = ldpc_build(&cfg.baseline.ldpc)?;
        Ok(TrialContext {
            config: cfg.clone(),
            corpus,
            checkpoint,
            ldpc,
        })
    }

    fn layout(&self) -> PacketLayout {
        PacketLayout {
            token_len: self.config.corpus.token_dim,
            residual_len: self.config.link.residual_dim,
            index_count: self.config.kb.stages,
            codebook_size: self.config.kb.codebook_size,
        }
    }

    /// Runs one trial, fully determined by (master seed, scheme, snr,
    /// budget, trial index). The utterance pick, fading draw, noise
    /// directions, and synthesis start are keyed by trial but not by SNR,
    /// so points along the SNR axis are paired (common random numbers) and
    /// the grid stays extensible without reshuffling existing rows.
    pub fn run_trial(
        &self,
        scheme: &str,
        snr_db: f64,
        budget_bits: u64,
        trial: u64,
    ) -> Result<TrialRecord> {
        let (family, kind) = parse_scheme(scheme)?;
        let root = SeededRng::new(self.config.master_seed);
        let mut rng = root.child(&format!("trial|{scheme}|{budget_bits}|{trial}"));
        let mut pick_rng = root.child(&format!("trial_pick|{trial}"));
        let utt = &self.corpus.utterances[pick_rng.below(self.corpus.utterances.len())];

        let ch = self.checkpoint.channel(kind).ok_or_else(|| {
            Error::Config(format!("checkpoint has no nets for channel {}", kind.tag()))
        })?;

        let (token_hyp_scalars, feature_rx, residual_rx, outage, h) = match family {
            SchemeFamily::Semantic => {
                let signal_len = self.config.signal_len_for_budget(budget_bits)?;
                let codec = self.checkpoint.codec_for(kind, signal_len).ok_or_else(|| {
                    Error::Config(format!(
                        "checkpoint has no codec for signal dimension {signal_len}; retrain with this budget in the sweep grid"
                    ))
                })?;
                let enc = self.checkpoint.kb.encode(&utt.feature)?;
                let r_in = Stage2Model::residual_input(utt, &enc);
                let residual = ch.nets.residual_net.forward(&r_in)?;
                let f_e = frame_packet(
                    &self.layout(),
                    &utt.tokens.embedded,
                    &residual,
                    &enc.indices,
                )?;
                let x = codec.encode(&f_e)?;
                let real = ChannelRealization::realize(kind, snr_db, &mut rng);
                let y = apply_channel(&x, &real, &mut rng);
                let eq = equalize(&y, &real);
                let f_d = codec.decode(&eq.signal)?;
                let (token_rx, residual_rx, indices_rx) = unframe_packet(&self.layout(), &f_d)?;
                let feature_rx = self.checkpoint.kb.decode(&indices_rx)?;
                (
                    token_rx,
                    feature_rx,
                    residual_rx,
                    eq.outage,
                    (real.h_re, real.h_im),
                )
            }
            SchemeFamily::PcmLdpc => {
                let payload = BaselinePayload {
                    token: utt.tokens.embedded.clone(),
                    feature: utt.feature.clone(),
                };
                let real = ChannelRealization::realize(kind, snr_db, &mut rng);
                let rx = baseline_transmit(
                    &payload,
                    budget_bits,
                    &real,
                    &self.ldpc,
                    &self.config.baseline.pcm,
                    &mut rng,
                )?;
                let outage = rx.outage || rx.infeasible;
                (
                    rx.token,
                    rx.feature,
                    vec![0.0; self.config.link.residual_dim],
                    outage,
                    (real.h_re, real.h_im),
                )
            }
        };

        // channel-only damage: decode the token field alone. The receiver
        // knows the configured utterance length bound, so decoded sequences
        // are capped there; channel noise cannot inflate the token count
        // past what the protocol allows.
        let mut token_hyp = de_embed_tokens(&token_hyp_scalars, self.config.corpus.vocab);
        token_hyp.truncate(self.config.corpus.max_tokens);
        let wer_token = wer(&utt.tokens.ids, &token_hyp)?;

        // synthesis damage: regenerate frames and run the oracles
        let (wer_synth, spk_value) = if token_hyp.is_empty() {
            (1.0, -1.0)
        } else {
            let frames = synthesize_frames(
                &ch.nets.prior,
                &ch.nets.score,
                &self.config.synth.schedule(),
                self.config.synth.infer_steps,
                &token_hyp_scalars[..token_hyp.len()],
                &feature_rx,
                &residual_rx,
                &mut rng,
            )?;
            let hyp = self.corpus.recognize(&frames);
            let ws = wer(&utt.tokens.ids, &hyp)?;
            let (sp, _) = spk(&self.corpus, &frames, &utt.speaker.factors);
            (ws, sp)
        };

        Ok(TrialRecord {
            scheme: scheme.to_string(),
            snr_db,
            budget_bits,
            seed: self.config.master_seed,
            trial,
            wer_token,
            wer_synth,
            spk: spk_value,
            outage,
            h,
        })
    }
}

/// Prior inference plus reverse-ODE synthesis from a standard-normal start.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_frames(
    prior: &crate::synth::PriorEncoder,
    score: &ScoreNet,
    schedule: &DiffusionSchedule,
    infer_steps: usize,
    token_scalars: &[f64],
    feature: &[f64],
    residual: &[f64],
    rng: &mut SeededRng,
) -> Result<FrameSeq> {
    let out = prior.infer(token_scalars, feature, residual)?;
    let frames = out.mu.frames;
    let dim = out.mu.dim;
    let start = sample_gaussian(rng, frames * dim, 0.0, 1.0)?;
    let mu = out.mu;
    let mut score_fn = |s: &[f64], t: f64| -> Vec64 {
        score
            .score_flat(s, t, &mu, feature, residual, schedule)
            .expect("score dimensions fixed by construction")
    };
    let solved = backward_solve(&start, &mut score_fn, schedule, infer_steps);
    Ok(FrameSeq::from_flat(frames, dim, solved))
}

/// Runs the full sweep grid and writes results and summary CSVs. Trials are
/// independently seeded, so the worker count never changes the output.
pub fn cmd_sweep(cfg: &RunConfig, paths: &OutPaths, jobs_override: Option<usize>) -> Result<(PathBuf, PathBuf)> {
    let ctx = TrialContext::load(cfg, paths)?;
    let mut tasks = Vec::new();
    for scheme in &cfg.sweep.schemes {
        for &snr in &cfg.sweep.snr_grid_db {
            for &budget in &cfg.sweep.budget_bits {
                for trial in 0..cfg.sweep.trials {
                    tasks.push((scheme.clone(), snr, budget, trial));
                }
            }
        }
    }

    let jobs = jobs_override.unwrap_or(cfg.sweep.jobs).max(1);
    let mut records = run_tasks(&ctx, &tasks, jobs)?;
    sort_records(&mut records);

    std::fs::create_dir_all(&paths.dir)?;
    let results = paths.results_csv();
    let summary = paths.summary_csv();
    std::fs::write(&results, records_to_csv(&records))?;
    std::fs::write(&summary, summarize(&records))?;
    Ok((results, summary))
}

fn run_tasks(
    ctx: &TrialContext,
    tasks: &[(String, f64, u64, u64)],
    jobs: usize,
) -> Result<Vec<TrialRecord>> {
    if jobs <= 1 || tasks.len() < 2 {
        return tasks
            .iter()
            .map(|(s, snr, b, t)| ctx.run_trial(s, *snr, *b, *t))
            .collect();
    }
    let chunk = tasks.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = tasks
            .chunks(chunk)
            .map(|slice| {
                scope.spawn(move || {
                    slice
                        .iter()
                        .map(|(s, snr, b, t)| ctx.run_trial(s, *snr, *b, *t))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        let mut all = Vec::with_capacity(tasks.len());
        for h in handles {
            all.extend(h.join().expect("sweep worker panicked")?);
        }
        Ok(all)
    })
}

/// Faults the verify battery can inject to prove its checks bite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Simulate the channel with doubled noise power.
    ChannelSigmaScale,
    /// Flip the sign of the oracle score in the reverse-ODE check.
    ScoreSign,
}

pub fn parse_fault(name: &str) -> Result<Fault> {
    match name {
        "channel_sigma_scale" => Ok(Fault::ChannelSigmaScale),
        "score_sign" => Ok(Fault::ScoreSign),
        other => Err(Error::Config(format!(
            "unknown fault '{other}' (expected channel_sigma_scale or score_sign)"
        ))),
    }
}

/// Headless self-check battery: gradient checks, quantizer oracle, channel
/// calibration, SDE moments and reversal, coding gain, corpus oracles,
/// framing, and the PCM bound. Each check appears exactly once.
pub fn cmd_verify(cfg: &RunConfig, fault: Option<Fault>) -> Result<Vec<(&'static str, bool)>> {
    cfg.validate()?;
    let report = vec![
        ("mlp_gradient_check", verify_gradients()),
        ("quantizer_nearest_oracle", verify_nearest()),
        (
            "channel_snr_calibration",
            verify_channel(fault == Some(Fault::ChannelSigmaScale)),
        ),
        ("sde_forward_moments", verify_sde_forward(cfg)),
        (
            "sde_backward_oracle",
            verify_sde_backward(cfg, fault == Some(Fault::ScoreSign)),
        ),
        ("ldpc_coding_gain", verify_ldpc(cfg)),
        ("corpus_oracle_identity", verify_corpus(cfg)?),
        ("framing_bijection", verify_framing(cfg)),
        ("pcm_round_trip_bound", verify_pcm(cfg)),
    ];

    Ok(report)
}

fn verify_gradients() -> bool {
    let mut meta = SeededRng::new(404);
    for i in 0..5 {
        let mut rng = SeededRng::new(500 + i);
        let net = Mlp::new(
            &[3, 5, 2],
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        );
        let x: Vec64 = (0..3).map(|_| meta.uniform(-1.0, 1.0)).collect();
        let (y, cache) = net.forward_cached(&x).expect("dims fixed");
        let (grads, _) = net.backward(&cache, &y).expect("dims fixed");
        let analytic = net.grads_flat(&grads);
        let mut probe = net.clone();
        let mut f = |p: &[f64]| {
            probe.set_params_flat(p);
            let out = probe.forward(&x).expect("dims fixed");
            0.5 * out.iter().map(|v| v * v).sum::<f64>()
        };
        let numeric = finite_difference_grad(&mut f, &net.params_flat(), 1e-5);
        if grad_rel_err(&analytic, &numeric) >= 1e-4 {
            return false;
        }
    }
    true
}

fn verify_nearest() -> bool {
    let mut rng = SeededRng::new(606);
    for _ in 0..500 {
        let cb = Codebook {
            codes: Mat64::from_fn(64, 8, |_, _| rng.uniform(-1.0, 1.0)),
        };
        let z: Vec64 = (0..8).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let Ok((_, got)) = nearest_code(&cb, &z) else {
            return false;
        };
        let mut want = 0;
        let mut best = f64::INFINITY;
        for m in 0..64 {
            let d = squared_distance(cb.codes.row(m), &z);
            if d < best {
                best = d;
                want = m;
            }
        }
        if got != want {
            return false;
        }
    }
    true
}

fn verify_channel(fault: bool) -> bool {
    let mut rng = SeededRng::new(707);
    let dim = 96;
    let packets = 2000;
    let x = vec![0.0; dim];
    for snr in [-5.0, 0.0, 5.0, 10.0, 15.0] {
        let want = 10f64.powf(-snr / 10.0);
        let mut acc = 0.0;
        for _ in 0..packets {
            let mut real = ChannelRealization::realize(ChannelKind::Awgn, snr, &mut rng);
            if fault {
                real.noise_power *= 2.0;
            }
            acc += symbol_power(&apply_channel(&x, &real, &mut rng));
        }
        let measured = acc / packets as f64;
        let tol = 4.0 * want * (2.0 / (dim as f64 / 2.0 * packets as f64)).sqrt();
        if (measured - want).abs() > tol {
            return false;
        }
    }
    true
}

fn verify_sde_forward(cfg: &RunConfig) -> bool {
    let sched = cfg.synth.schedule();
    let mut rng = SeededRng::new(808);
    let s0 = [1.25];
    for t in [0.1, 0.5, 1.0] {
        let n = 5000;
        let samples: Vec64 = (0..n)
            .map(|_| forward_diffuse(&s0, t, &sched, &mut rng)[0])
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let want_mean = sched.mean_scale(t) * s0[0];
        let want_var = sched.variance(t);
        let tol_mean = 1e-9 + 4.0 * (want_var / n as f64).sqrt();
        let tol_var = 1e-9 + 4.0 * want_var * (2.0 / n as f64).sqrt();
        if (mean - want_mean).abs() > tol_mean || (var - want_var).abs() > tol_var {
            return false;
        }
    }
    true
}

fn verify_sde_backward(cfg: &RunConfig, fault: bool) -> bool {
    let sched = cfg.synth.schedule();
    let (m, v) = (0.9, 0.64);
    let sign = if fault { -1.0 } else { 1.0 };
    let mut rng = SeededRng::new(909);
    let n = 2000;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n {
        let start = vec![rng.normal()];
        let mut score = |s: &[f64], t: f64| {
            let ms = sched.mean_scale(t);
            let var = ms * ms * v + sched.variance(t);
            vec![sign * (-(s[0] - ms * m) / var)]
        };
        let out = backward_solve(&start, &mut score, &sched, 400);
        sum += out[0];
        sumsq += out[0] * out[0];
    }
    let mean = sum / n as f64;
    let var_est = sumsq / n as f64 - mean * mean;
    (mean - m).abs() < 0.05 * (1.0 + m.abs()) && (var_est - v).abs() < 0.10 * v
}

fn verify_ldpc(cfg: &RunConfig) -> bool {
    let Ok(code) = ldpc_build(&cfg.baseline.ldpc) else {
        return false;
    };
    let mut rng = SeededRng::new(1010);
    let coded = coded_ber(&code, 4.0, 20_000, &mut rng);
    let uncoded = q_function((2.0 * 10f64.powf(0.4)).sqrt());
    coded <= 0.3 * uncoded
}

fn verify_corpus(cfg: &RunConfig) -> Result<bool> {
    let corpus = Corpus::generate(crate::corpus::CorpusConfig {
        utterances: 32,
        speakers: 4,
        ..cfg.corpus.clone()
    })?;
    for u in &corpus.utterances {
        if corpus.recognize(&u.truth.frames) != u.tokens.ids {
            return Ok(false);
        }
        let embed = corpus.speaker_embed(&u.truth.frames);
        for (a, b) in embed.iter().zip(u.speaker.factors.iter()) {
            if (a - b).abs() > 1e-9 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn verify_framing(cfg: &RunConfig) -> bool {
    let layout = PacketLayout {
        token_len: cfg.corpus.token_dim,
        residual_len: cfg.link.residual_dim,
        index_count: cfg.kb.stages,
        codebook_size: cfg.kb.codebook_size,
    };
    let mut rng = SeededRng::new(1111);
    for _ in 0..200 {
        let token: Vec64 = (0..layout.token_len).map(|_| rng.uniform(0.0, 1.0)).collect();
        let residual: Vec64 = (0..layout.residual_len)
            .map(|_| rng.uniform(-2.0, 2.0))
            .collect();
        let indices: Vec<usize> = (0..layout.index_count)
            .map(|_| rng.below(layout.codebook_size))
            .collect();
        let Ok(frame) = frame_packet(&layout, &token, &residual, &indices) else {
            return false;
        };
        let Ok((t, r, idx)) = unframe_packet(&layout, &frame) else {
            return false;
        };
        if t != token || r != residual || idx != indices {
            return false;
        }
    }
    true
}

fn verify_pcm(cfg: &RunConfig) -> bool {
    let step = 2.0 / 2000.0;
    let bound = 2f64.powi(-(cfg.baseline.pcm.bits as i32));
    for i in 0..2000 {
        let v = (-1.0 + i as f64 * step).min(1.0 - 1e-12);
        let bits = pcm_encode(&[v], &cfg.baseline.pcm);
        let Ok(back) = pcm_decode(&bits, &cfg.baseline.pcm) else {
            return false;
        };
        if (v - back[0]).abs() > bound + 1e-15 {
            return false;
        }
    }
    true
}

/// Renders the verify report; one line per check.
pub fn format_verify_report(report: &[(&'static str, bool)]) -> String {
    let mut out = String::new();
    for (name, ok) in report {
        out.push_str(&format!(
            "{:<28} {}\n",
            name,
            if *ok { "PASS" } else { "FAIL" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_battery_passes_on_defaults() {
        let report = cmd_verify(&RunConfig::default(), None).unwrap();
        assert_eq!(report.len(), 9);
        for (name, ok) in &report {
            assert!(ok, "check {name} failed");
        }
        // every check appears exactly once
        let mut names: Vec<_> = report.iter().map(|(n, _)| n).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), report.len());
    }

    #[test]
    fn injected_faults_fail_their_named_checks() {
        let report = cmd_verify(&RunConfig::default(), Some(Fault::ChannelSigmaScale)).unwrap();
        let get = |name: &str| report.iter().find(|(n, _)| *n == name).unwrap().1;
        assert!(!get("channel_snr_calibration"));
        assert!(get("sde_backward_oracle"));

        let report = cmd_verify(&RunConfig::default(), Some(Fault::ScoreSign)).unwrap();
        let get = |name: &str| report.iter().find(|(n, _)| *n == name).unwrap().1;
        assert!(!get("sde_backward_oracle"));
        assert!(get("channel_snr_calibration"));
    }

    #[test]
    fn fault_names_parse() {
        assert_eq!(
            parse_fault("channel_sigma_scale").unwrap(),
            Fault::ChannelSigmaScale
        );
        assert_eq!(parse_fault("score_sign").unwrap(), Fault::ScoreSign);
        assert!(parse_fault("gremlin").is_err());
    }
}
