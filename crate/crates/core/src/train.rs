//! Two-stage training.
//!
//! Stage one trains the knowledge bases alone on a channel-free path,
//! seeding codebooks k-means++ style and refreshing codes that go unused.
//! Stage two freezes the knowledge bases and trains the residual encoder,
//! channel codec, prior encoder, and score network end to end through the
//! channel, resampling the fading and the SNR (uniform over the configured
//! range) every step. Gradients for the prior and diffusion losses travel
//! the full differentiable path back through the channel decoder, channel,
//! and channel encoder to reach the residual encoder; code indices cross
//! the channel through a rounding step that passes no gradient, and the
//! conditioning sequence is treated as constant inside the diffusion loss.
//!
//! Checkpoints serialize every parameter set; loading reproduces forward
//! passes bit-identically.

use crate::bytesio::{Reader, Writer};
use crate::corpus::{Corpus, Utterance};
use crate::error::{Error, Result};
use crate::kb::{KbConfig, KbEncoding, KnowledgeBase};
use crate::link::{
    apply_channel, complex_scale, ed_loss, equalize, frame_packet, norm_loss_and_grad,
    unframe_packet, ChannelCodec, ChannelKind, ChannelRealization, LinkConfig, PacketLayout,
};
use crate::numkit::{Activation, Mlp, MlpGrads, SeededRng, Vec64};
use crate::synth::{
    diffusion_loss_and_grads, forward_diffuse, prior_loss_and_upstream, DiffusionSchedule,
    PriorEncoder, PriorGrads, ScoreNet, SynthConfig,
};
use serde::{Deserialize, Serialize};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SCCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub batch: usize,
    /// Stage-one SGD steps over the knowledge-base loss.
    pub stage1_steps: usize,
    /// Stage-two epochs J; steps = J * ceil(corpus / batch).
    pub stage2_epochs: usize,
    pub lr_kb: f64,
    /// Codebooks track the moving encoder outputs with their own rate.
    pub lr_codebook: f64,
    pub lr_codec: f64,
    pub lr_residual: f64,
    pub lr_prior: f64,
    pub lr_score: f64,
    /// Training SNR is uniform over this range, redrawn every step.
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    /// Abort when a batch loss exceeds this.
    pub divergence_threshold: f64,
    /// Global gradient-norm cap for the stage-two step (0 disables).
    pub grad_clip: f64,
    /// Per-sample cap on the score-loss backward factor mean_scale/variance,
    /// which explodes near the t sampling floor. Keeps one small-t draw from
    /// dominating a batch; the loss value is never reweighted.
    pub score_grad_cap: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 1,
            batch: 16,
            stage1_steps: 2000,
            stage2_epochs: 300,
            lr_kb: 1e-3,
            lr_codebook: 1e-2,
            lr_codec: 2e-3,
            lr_residual: 1e-3,
            lr_prior: 1e-3,
            lr_score: 1e-3,
            snr_min_db: -5.0,
            snr_max_db: 15.0,
            divergence_threshold: 1e6,
            grad_clip: 5.0,
            score_grad_cap: 10.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.stage1_steps == 0 || self.stage2_epochs == 0 {
            return Err(Error::Config("train sizes must be positive".into()));
        }
        for lr in [
            self.lr_kb,
            self.lr_codebook,
            self.lr_codec,
            self.lr_residual,
            self.lr_prior,
            self.lr_score,
        ] {
            if lr <= 0.0 {
                return Err(Error::Config("learning rates must be positive".into()));
            }
        }
        if self.snr_min_db > self.snr_max_db {
            return Err(Error::Config("snr range inverted".into()));
        }
        if self.grad_clip < 0.0 || self.score_grad_cap <= 0.0 {
            return Err(Error::Config(
                "grad_clip must be nonnegative and score_grad_cap positive".into(),
            ));
        }
        Ok(())
    }
}

/// Total second-stage loss: plain sum of the three parts.
pub fn total_loss(ed: f64, prior: f64, diffusion: f64) -> f64 {
    ed + prior + diffusion
}

/// Stage one: train the knowledge bases channel-free. Returns the trained
/// knowledge base and the per-step loss history.
pub fn train_stage1(
    corpus: &Corpus,
    kb_config: KbConfig,
    cfg: &TrainConfig,
) -> Result<(KnowledgeBase, Vec<f64>)> {
    cfg.validate()?;
    if corpus.utterances.is_empty() {
        return Err(Error::contract("stage one needs a nonempty corpus"));
    }
    let root = SeededRng::new(cfg.seed);
    let mut kb = KnowledgeBase::new(kb_config, &root)?;

    // seed codebooks from the leading slice of the corpus; one batch of 16
    // cannot seed 64 codes, so the init batch is everything up front
    let features: Vec<Vec64> = corpus
        .utterances
        .iter()
        .map(|u| u.feature.clone())
        .collect();
    kb.init_codebooks_kmeanspp(&features, &root.child("stage1.init"))?;

    let stages = kb.config.stages;
    let m = kb.config.codebook_size;
    let mut last_used: Vec<Vec<u64>> = vec![vec![0; m]; stages];
    let mut history = Vec::with_capacity(cfg.stage1_steps);

    for step in 0..cfg.stage1_steps {
        let mut rng = root.child(&format!("stage1.step{step}"));
        let mut grads = kb.zero_grads();
        let mut batch_loss = 0.0;
        let mut residual_pool: Vec<Vec<Vec64>> = vec![Vec::new(); stages];
        for _ in 0..cfg.batch {
            let u = &corpus.utterances[rng.below(corpus.utterances.len())];
            let (parts, enc) = kb.loss_and_grads(&u.feature, &mut grads)?;
            batch_loss += parts.total(&kb.config);
            for (i, &idx) in enc.indices.iter().enumerate() {
                last_used[i][idx] = step as u64 + 1;
                residual_pool[i].push(enc.pre_quant[i].clone());
            }
        }
        batch_loss /= cfg.batch as f64;
        if !batch_loss.is_finite() || batch_loss > cfg.divergence_threshold {
            return Err(Error::Diverged {
                step,
                loss: batch_loss,
            });
        }
        grads.scale(1.0 / cfg.batch as f64);
        kb.apply_grads(&grads, cfg.lr_kb, cfg.lr_codebook);

        // dead-code refresh: reseed codes unused for too long to a random
        // pre-quantization vector from this batch
        if kb.config.dead_code_steps > 0 {
            #[allow(clippy::needless_range_loop)]
            for i in 0..stages {
                for code in 0..m {
                    let idle = step as u64 + 1 - last_used[i][code];
                    if idle >= kb.config.dead_code_steps as u64 && !residual_pool[i].is_empty() {
                        let pick = rng.below(residual_pool[i].len());
                        let v = residual_pool[i][pick].clone();
                        kb.reseed_code(i, code, &v);
                        last_used[i][code] = step as u64 + 1;
                    }
                }
            }
        }
        history.push(batch_loss);
    }
    Ok((kb, history))
}

/// Everything stage two trains, for one channel model.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Nets {
    pub residual_net: Mlp,
    pub codec: ChannelCodec,
    pub prior: PriorEncoder,
    pub score: ScoreNet,
}

/// Gradient buffers for one stage-two step. There are deliberately no
/// knowledge-base buffers here: stage two cannot reach them.
pub struct Stage2Grads {
    pub residual_net: MlpGrads,
    pub encoder: MlpGrads,
    pub decoder: MlpGrads,
    pub prior: PriorGrads,
    pub score: MlpGrads,
}

/// Loss parts of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub ed: f64,
    pub prior: f64,
    pub diffusion: f64,
}

impl StepLosses {
    pub fn total(&self) -> f64 {
        total_loss(self.ed, self.prior, self.diffusion)
    }
}

/// The frozen and trainable pieces stage two runs with.
pub struct Stage2Model {
    pub kb: KnowledgeBase,
    pub encodings: Vec<KbEncoding>,
    pub nets: Stage2Nets,
    pub layout: PacketLayout,
    pub schedule: DiffusionSchedule,
    pub t_min: f64,
    pub kind: ChannelKind,
    /// Backward-factor cap for the score loss (see `TrainConfig`).
    pub score_grad_cap: f64,
}

impl Stage2Model {
    /// Precomputes the frozen transmitter-side encodings (the feature codes
    /// and indices are fixed once the knowledge bases are trained).
    pub fn prepare(
        corpus: &Corpus,
        kb: KnowledgeBase,
        nets: Stage2Nets,
        layout: PacketLayout,
        synth_cfg: &SynthConfig,
        kind: ChannelKind,
    ) -> Result<Self> {
        let encodings = corpus
            .utterances
            .iter()
            .map(|u| kb.encode(&u.feature))
            .collect::<Result<Vec<_>>>()?;
        Ok(Stage2Model {
            kb,
            encodings,
            nets,
            layout,
            schedule: synth_cfg.schedule(),
            t_min: synth_cfg.t_min,
            kind,
            score_grad_cap: f64::INFINITY,
        })
    }

    /// Residual-encoder input: the demonstration feature next to the sum of
    /// the selected feature codes.
    pub fn residual_input(utt: &Utterance, enc: &KbEncoding) -> Vec64 {
        let mut input = Vec::with_capacity(utt.feature.len() * 2);
        input.extend_from_slice(&utt.feature);
        input.extend_from_slice(&enc.code_sum());
        input
    }

    /// One training sample, forward and backward, gradients accumulated.
    /// Follows the second-stage step order exactly; `trace` records the
    /// operation sequence when provided.
    pub fn sample_step(
        &self,
        utt: &Utterance,
        enc: &KbEncoding,
        snr_db: f64,
        rng: &mut SeededRng,
        grads: &mut Stage2Grads,
        mut trace: Option<&mut Vec<&'static str>>,
    ) -> Result<StepLosses> {
        let mut mark = |op: &'static str| {
            if let Some(t) = trace.as_deref_mut() {
                t.push(op);
            }
        };

        mark("tokenize");
        let token_count = utt.tokens.ids.len();

        mark("transmitter_kb");
        // enc is precomputed from the frozen knowledge base

        mark("residual_encoder");
        let r_in = Self::residual_input(utt, enc);
        let (residual, r_cache) = self.nets.residual_net.forward_cached(&r_in)?;

        mark("framing");
        let f_e = frame_packet(&self.layout, &utt.tokens.embedded, &residual, &enc.indices)?;

        mark("channel_encode");
        let (x, e_cache) = self.nets.codec.encode_cached(&f_e)?;

        mark("channel");
        let real = ChannelRealization::realize(self.kind, snr_db, rng);
        let y = apply_channel(&x, &real, rng);

        mark("channel_decode");
        let eq = equalize(&y, &real);
        let (f_d, d_cache) = self.nets.codec.decode_cached(&eq.signal)?;

        mark("unframe");
        let (token_rx, residual_rx, indices_rx) = unframe_packet(&self.layout, &f_d)?;

        mark("receiver_kb");
        let feature_rx = self.kb.decode(&indices_rx)?;

        mark("prior_encoder");
        let (prior_out, prior_cache) = self.nets.prior.forward_teacher(
            &token_rx[..token_count],
            &feature_rx,
            &residual_rx,
            &utt.truth.durations,
        )?;
        let (l_prior, g_dur, g_pitch, g_mu) = prior_loss_and_upstream(
            &prior_out,
            &utt.truth.durations,
            &utt.truth.pitch,
            &utt.truth.frames,
        )?;

        mark("diffusion");
        let t = rng.uniform(self.t_min, self.schedule.t_max);
        let s_t = forward_diffuse(&utt.truth.frames.data, t, &self.schedule, rng);
        let (l_diff, g_r_diff) = diffusion_loss_and_grads(
            &self.nets.score,
            &self.schedule,
            &utt.truth.frames,
            &s_t,
            t,
            &prior_out.mu,
            &feature_rx,
            &residual_rx,
            self.score_grad_cap,
            &mut grads.score,
        )?;

        mark("total_loss");
        let l_ed = ed_loss(&f_e, &f_d)?;
        let losses = StepLosses {
            ed: l_ed,
            prior: l_prior,
            diffusion: l_diff,
        };

        // ---- backward ----
        // Each loss updates only the parameters it is attributed to: the
        // codec loss moves the channel encoder/decoder; the prior and
        // diffusion losses move the prior, score network, and residual
        // encoder. The second pair still backpropagates through the codec
        // and channel to reach the residual encoder, but treats them as a
        // frozen conduit (no accumulation), so the much larger synthesis
        // gradients cannot swamp the link-level training signal.
        let back_through_channel = |g_eq: Vec64| -> Vec64 {
            let g_y = match self.kind {
                ChannelKind::Awgn => g_eq,
                ChannelKind::Rayleigh => {
                    if eq.outage {
                        g_eq
                    } else {
                        let mag2 = real.h_re * real.h_re + real.h_im * real.h_im;
                        complex_scale(&g_eq, real.h_re / mag2, real.h_im / mag2)
                    }
                }
            };
            complex_scale(&g_y, real.h_re, -real.h_im)
        };

        // codec loss pass
        let diff: Vec64 = f_e.iter().zip(f_d.iter()).map(|(a, b)| a - b).collect();
        let (_, g_norm) = norm_loss_and_grad(&diff);
        let g_fd_ed: Vec64 = g_norm.iter().map(|g| -g).collect();
        let g_eq = self
            .nets
            .codec
            .decoder
            .backward_into(&d_cache, &g_fd_ed, &mut grads.decoder)?;
        let g_x = back_through_channel(g_eq);
        self.nets
            .codec
            .encoder_backward(&e_cache, &g_x, &mut grads.encoder)?;

        // prior + diffusion pass: gradients transit the frozen conduit and
        // land on the residual encoder
        let (_, g_r_prior) = self.nets.prior.backward(
            &prior_out,
            &prior_cache,
            &g_dur,
            &g_pitch,
            &g_mu,
            &mut grads.prior,
        )?;
        let r_off = self.layout.residual_offset();
        let mut g_fd_synth = vec![0.0; f_d.len()];
        for (i, g) in g_r_prior.iter().enumerate() {
            g_fd_synth[r_off + i] += g;
        }
        for (i, g) in g_r_diff.iter().enumerate() {
            g_fd_synth[r_off + i] += g;
        }
        let mut sink_dec = self.nets.codec.decoder.zero_grads();
        let g_eq = self
            .nets
            .codec
            .decoder
            .backward_into(&d_cache, &g_fd_synth, &mut sink_dec)?;
        let g_x = back_through_channel(g_eq);
        let mut sink_enc = self.nets.codec.encoder.zero_grads();
        let g_fe = self
            .nets
            .codec
            .encoder_backward(&e_cache, &g_x, &mut sink_enc)?;
        let g_r_slot = &g_fe[r_off..r_off + self.layout.residual_len];
        self.nets
            .residual_net
            .backward_into(&r_cache, g_r_slot, &mut grads.residual_net)?;

        mark("sgd");
        Ok(losses)
    }

    pub fn zero_grads(&self) -> Stage2Grads {
        Stage2Grads {
            residual_net: self.nets.residual_net.zero_grads(),
            encoder: self.nets.codec.encoder.zero_grads(),
            decoder: self.nets.codec.decoder.zero_grads(),
            prior: self.nets.prior.zero_grads(),
            score: self.nets.score.net.zero_grads(),
        }
    }

    pub fn apply_grads(&mut self, grads: &mut Stage2Grads, cfg: &TrainConfig, scale: f64) {
        grads.residual_net.scale(scale);
        grads.encoder.scale(scale);
        grads.decoder.scale(scale);
        grads.prior.scale(scale);
        grads.score.scale(scale);
        if cfg.grad_clip > 0.0 {
            let norm = (grads.residual_net.norm_squared()
                + grads.encoder.norm_squared()
                + grads.decoder.norm_squared()
                + grads.prior.token_net.norm_squared()
                + grads.prior.pitch_net.norm_squared()
                + grads.prior.proj.norm_squared()
                + grads.score.norm_squared())
            .sqrt();
            if norm > cfg.grad_clip {
                let s = cfg.grad_clip / norm;
                grads.residual_net.scale(s);
                grads.encoder.scale(s);
                grads.decoder.scale(s);
                grads.prior.scale(s);
                grads.score.scale(s);
            }
        }
        self.nets.residual_net.sgd(&grads.residual_net, cfg.lr_residual);
        self.nets.codec.encoder.sgd(&grads.encoder, cfg.lr_codec);
        self.nets.codec.decoder.sgd(&grads.decoder, cfg.lr_codec);
        self.nets.prior.sgd(&grads.prior, cfg.lr_prior);
        self.nets.score.net.sgd(&grads.score, cfg.lr_score);
    }
}

/// Fresh stage-two networks from labeled sub-seeds.
pub fn init_stage2_nets(
    corpus_feature_dim: usize,
    layout: &PacketLayout,
    link_cfg: &LinkConfig,
    synth_cfg: &SynthConfig,
    frame_dim: usize,
    kind: ChannelKind,
    seed: u64,
) -> Stage2Nets {
    let root = SeededRng::new(seed).child(&format!("stage2.{}", kind.tag()));
    let mut r_rng = root.child("residual");
    // tanh output keeps the residual field in the same (-1, 1) range as the
    // index embedding; without the bound the synthesis losses inflate the
    // residual amplitude until it starves the token field of transmit power
    let residual_net = Mlp::new(
        &[2 * corpus_feature_dim, link_cfg.hidden, link_cfg.residual_dim],
        &[Activation::Tanh, Activation::Tanh],
        &mut r_rng,
    );
    let mut c_rng = root.child("codec");
    let codec = ChannelCodec::new(
        layout.frame_len(),
        link_cfg.signal_len,
        link_cfg.hidden,
        &mut c_rng,
    );
    let mut p_rng = root.child("prior");
    let prior = PriorEncoder::new(
        synth_cfg.hidden_seq,
        synth_cfg.net_hidden,
        frame_dim,
        corpus_feature_dim,
        link_cfg.residual_dim,
        &mut p_rng,
    );
    let mut s_rng = root.child("score");
    let score = ScoreNet::new(
        frame_dim,
        corpus_feature_dim,
        link_cfg.residual_dim,
        synth_cfg.net_hidden,
        &mut s_rng,
    );
    Stage2Nets {
        residual_net,
        codec,
        prior,
        score,
    }
}

/// Stage two: Algorithm-ordered end-to-end training with the knowledge base
/// frozen. Returns the trained model and per-step total-loss history.
pub fn train_stage2(
    corpus: &Corpus,
    kb: KnowledgeBase,
    link_cfg: &LinkConfig,
    synth_cfg: &SynthConfig,
    kind: ChannelKind,
    cfg: &TrainConfig,
) -> Result<(Stage2Model, Vec<f64>)> {
    cfg.validate()?;
    synth_cfg.validate()?;
    let layout = PacketLayout {
        token_len: corpus.config.token_dim,
        residual_len: link_cfg.residual_dim,
        index_count: kb.config.stages,
        codebook_size: kb.config.codebook_size,
    };
    let nets = init_stage2_nets(
        corpus.config.feature_dim,
        &layout,
        link_cfg,
        synth_cfg,
        corpus.config.frame_dim,
        kind,
        cfg.seed,
    );
    let mut model = Stage2Model::prepare(corpus, kb, nets, layout, synth_cfg, kind)?;
    model.score_grad_cap = cfg.score_grad_cap;

    let steps_per_epoch = corpus.utterances.len().div_ceil(cfg.batch);
    let total_steps = cfg.stage2_epochs * steps_per_epoch;
    let root = SeededRng::new(cfg.seed).child(&format!("stage2.{}", kind.tag()));
    let mut history = Vec::with_capacity(total_steps);

    for step in 0..total_steps {
        let mut rng = root.child(&format!("step{step}"));
        let mut grads = model.zero_grads();
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch {
            let pick = rng.below(corpus.utterances.len());
            let snr_db = rng.uniform(cfg.snr_min_db, cfg.snr_max_db);
            let losses = model.sample_step(
                &corpus.utterances[pick],
                &model.encodings[pick],
                snr_db,
                &mut rng,
                &mut grads,
                None,
            )?;
            batch_loss += losses.total();
        }
        batch_loss /= cfg.batch as f64;
        if !batch_loss.is_finite() || batch_loss > cfg.divergence_threshold {
            return Err(Error::Diverged {
                step,
                loss: batch_loss,
            });
        }
        model.apply_grads(&mut grads, cfg, 1.0 / cfg.batch as f64);
        history.push(batch_loss);
    }
    Ok((model, history))
}

/// Trains a codec pair alone (end-to-end loss only) at a reduced signal
/// dimension for the communication-budget sweep. The residual encoder is
/// frozen shared state from the parity-budget run.
pub fn train_codec_for_budget(
    corpus: &Corpus,
    model: &Stage2Model,
    signal_len: usize,
    link_hidden: usize,
    cfg: &TrainConfig,
) -> Result<(ChannelCodec, Vec<f64>)> {
    let root = SeededRng::new(cfg.seed).child(&format!(
        "budget_codec.{}.{}",
        model.kind.tag(),
        signal_len
    ));
    let mut codec = ChannelCodec::new(
        model.layout.frame_len(),
        signal_len,
        link_hidden,
        &mut root.child("init"),
    );

    // codec-only steps skip the synthesis stack and cost a tenth of a full
    // stage-two step, so the reduced-budget codecs train twice as long
    let steps_per_epoch = corpus.utterances.len().div_ceil(cfg.batch);
    let total_steps = 2 * cfg.stage2_epochs * steps_per_epoch;
    let mut history = Vec::with_capacity(total_steps);
    for step in 0..total_steps {
        let mut rng = root.child(&format!("step{step}"));
        let mut g_enc = codec.encoder.zero_grads();
        let mut g_dec = codec.decoder.zero_grads();
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch {
            let pick = rng.below(corpus.utterances.len());
            let utt = &corpus.utterances[pick];
            let enc = &model.encodings[pick];
            let snr_db = rng.uniform(cfg.snr_min_db, cfg.snr_max_db);

            let r_in = Stage2Model::residual_input(utt, enc);
            let residual = model.nets.residual_net.forward(&r_in)?;
            let f_e = frame_packet(&model.layout, &utt.tokens.embedded, &residual, &enc.indices)?;
            let (x, e_cache) = codec.encode_cached(&f_e)?;
            let real = ChannelRealization::realize(model.kind, snr_db, &mut rng);
            let y = apply_channel(&x, &real, &mut rng);
            let eq = equalize(&y, &real);
            let (f_d, d_cache) = codec.decode_cached(&eq.signal)?;

            let diff: Vec64 = f_e.iter().zip(f_d.iter()).map(|(a, b)| a - b).collect();
            let (l, g_norm) = norm_loss_and_grad(&diff);
            batch_loss += l;
            let g_fd: Vec64 = g_norm.iter().map(|g| -g).collect();
            let g_eq = codec.decoder.backward_into(&d_cache, &g_fd, &mut g_dec)?;
            let g_y = match model.kind {
                ChannelKind::Awgn => g_eq,
                ChannelKind::Rayleigh => {
                    if eq.outage {
                        g_eq
                    } else {
                        let mag2 = real.h_re * real.h_re + real.h_im * real.h_im;
                        complex_scale(&g_eq, real.h_re / mag2, real.h_im / mag2)
                    }
                }
            };
            let g_x = complex_scale(&g_y, real.h_re, -real.h_im);
            codec.encoder_backward(&e_cache, &g_x, &mut g_enc)?;
            // the direct dL/df_e term stops here: nothing upstream trains
        }
        batch_loss /= cfg.batch as f64;
        if !batch_loss.is_finite() || batch_loss > cfg.divergence_threshold {
            return Err(Error::Diverged {
                step,
                loss: batch_loss,
            });
        }
        g_enc.scale(1.0 / cfg.batch as f64);
        g_dec.scale(1.0 / cfg.batch as f64);
        codec.encoder.sgd(&g_enc, cfg.lr_codec);
        codec.decoder.sgd(&g_dec, cfg.lr_codec);
        history.push(batch_loss);
    }
    Ok((codec, history))
}

/// Trained artifacts for one channel model.
pub struct ChannelCheckpoint {
    pub kind: ChannelKind,
    pub nets: Stage2Nets,
    /// Additional codecs for reduced budgets, keyed by signal length.
    pub budget_codecs: Vec<ChannelCodec>,
}

/// Full training output: the shared knowledge base plus per-channel nets.
pub struct Checkpoint {
    pub kb: KnowledgeBase,
    pub channels: Vec<ChannelCheckpoint>,
}

impl Checkpoint {
    pub fn channel(&self, kind: ChannelKind) -> Option<&ChannelCheckpoint> {
        self.channels.iter().find(|c| c.kind == kind)
    }

    /// Codec for a signal length: the main codec or a budget-trained one.
    pub fn codec_for(&self, kind: ChannelKind, signal_len: usize) -> Option<&ChannelCodec> {
        let ch = self.channel(kind)?;
        if ch.nets.codec.signal_len == signal_len {
            return Some(&ch.nets.codec);
        }
        ch.budget_codecs
            .iter()
            .find(|c| c.signal_len == signal_len)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
        let kb_bytes = self.kb.to_bytes();
        w.usize(kb_bytes.len());
        w.bytes(&kb_bytes);
        w.usize(self.channels.len());
        for ch in &self.channels {
            w.u16(match ch.kind {
                ChannelKind::Awgn => 0,
                ChannelKind::Rayleigh => 1,
            });
            write_mlp(&mut w, &ch.nets.residual_net);
            write_codec(&mut w, &ch.nets.codec);
            // the semantic-decoder parameters travel in their own container
            let synth_bytes = crate::synth::synth_to_bytes(&ch.nets.prior, &ch.nets.score);
            w.usize(synth_bytes.len());
            w.bytes(&synth_bytes);
            w.usize(ch.budget_codecs.len());
            for c in &ch.budget_codecs {
                write_codec(&mut w, c);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader::open(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let kb_len = r.usize()?;
        let kb_bytes = r.take_bytes(kb_len)?;
        let kb = KnowledgeBase::from_bytes(kb_bytes)?;
        let count = r.usize()?;
        let mut channels = Vec::with_capacity(count);
        for _ in 0..count {
            let kind = match r.u16()? {
                0 => ChannelKind::Awgn,
                1 => ChannelKind::Rayleigh,
                other => return Err(Error::Decode(format!("unknown channel tag {other}"))),
            };
            let residual_net = read_mlp(&mut r)?;
            let codec = read_codec(&mut r)?;
            let synth_len = r.usize()?;
            let (prior, score) = crate::synth::synth_from_bytes(r.take_bytes(synth_len)?)?;
            let n_budget = r.usize()?;
            let mut budget_codecs = Vec::with_capacity(n_budget);
            for _ in 0..n_budget {
                budget_codecs.push(read_codec(&mut r)?);
            }
            channels.push(ChannelCheckpoint {
                kind,
                nets: Stage2Nets {
                    residual_net,
                    codec,
                    prior,
                    score,
                },
                budget_codecs,
            });
        }
        r.done()?;
        Ok(Checkpoint { kb, channels })
    }
}

fn write_mlp(w: &mut Writer, net: &Mlp) {
    w.usize_slice(net.layer_sizes());
    let acts: Vec<usize> = net
        .activations()
        .iter()
        .map(|a| match a {
            Activation::Tanh => 0,
            Activation::Identity => 1,
        })
        .collect();
    w.usize_slice(&acts);
    w.f64_slice(&net.params_flat());
}

fn read_mlp(r: &mut Reader) -> Result<Mlp> {
    let sizes = r.usize_vec()?;
    let acts = r
        .usize_vec()?
        .iter()
        .map(|&a| match a {
            0 => Ok(Activation::Tanh),
            1 => Ok(Activation::Identity),
            other => Err(Error::Decode(format!("unknown activation tag {other}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let params = r.f64_vec()?;
    let mut net = Mlp::new(&sizes, &acts, &mut SeededRng::new(0));
    if params.len() != net.param_count() {
        return Err(Error::decode("mlp parameter count mismatch"));
    }
    net.set_params_flat(&params);
    Ok(net)
}

fn write_codec(w: &mut Writer, codec: &ChannelCodec) {
    w.usize(codec.frame_len);
    w.usize(codec.signal_len);
    write_mlp(w, &codec.encoder);
    write_mlp(w, &codec.decoder);
}

fn read_codec(r: &mut Reader) -> Result<ChannelCodec> {
    let frame_len = r.usize()?;
    let signal_len = r.usize()?;
    let encoder = read_mlp(r)?;
    let decoder = read_mlp(r)?;
    Ok(ChannelCodec {
        encoder,
        decoder,
        frame_len,
        signal_len,
    })
}
