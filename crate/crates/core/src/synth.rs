//! Semantic decoder: prior encoder, score-based diffusion over the frame
//! features, and a fixed linear vocoder surrogate.
//!
//! The prior encoder turns the decoded token scalars plus the reconstructed
//! feature and residual vectors into conditional information: a per-token
//! hidden row and duration, expanded to frame level, plus a per-frame pitch
//! scalar, summed into the conditioning sequence `mu`. The diffusion model
//! is the variance-preserving SDE with linear schedule `beta_t`; its
//! marginals are `N(e^{-B(t)/2} s_0, (1 - e^{-B(t)}) I)` with
//! `B(t) = ∫ beta`, sampled in closed form. Inference integrates the
//! deterministic probability-flow ODE `ds = -1/2 beta_t (s + score) dt`
//! backward from `t = T` with an Euler scheme. The score network predicts
//! the clean frame as an offset from `mu`, scaled by `e^{-B(t)/2}` to give
//! the marginal mean estimate.

use crate::bytesio::{Reader, Writer};
use crate::corpus::FrameSeq;
use crate::error::{Error, Result};
use crate::link::norm_loss_and_grad;
use crate::numkit::{Activation, Mat64, Mlp, MlpCache, MlpGrads, SeededRng, Vec64};
use serde::{Deserialize, Serialize};

pub const SYNTH_MAGIC: &[u8; 4] = b"SCSY";
pub const SYNTH_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Per-token hidden row width d_h.
    pub hidden_seq: usize,
    /// Hidden width of the prior and score networks.
    pub net_hidden: usize,
    /// Diffusion schedule: beta_t = beta0 + t (beta1 - beta0) on [0, t_max].
    pub beta0: f64,
    pub beta1: f64,
    pub t_max: f64,
    /// Training draws t uniformly from [t_min, t_max]; t = 0 has zero
    /// marginal variance and is excluded.
    pub t_min: f64,
    /// Euler steps for inference.
    pub infer_steps: usize,
    /// Audio samples per frame emitted by the vocoder surrogate.
    pub audio_dim: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            hidden_seq: 32,
            net_hidden: 128,
            beta0: 0.05,
            beta1: 20.0,
            t_max: 1.0,
            t_min: 1e-3,
            infer_steps: 200,
            audio_dim: 96,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_seq == 0 || self.net_hidden == 0 || self.infer_steps == 0 {
            return Err(Error::Config("synth dims must be positive".into()));
        }
        if self.beta0 <= 0.0 || self.beta1 < self.beta0 {
            return Err(Error::Config("schedule requires 0 < beta0 <= beta1".into()));
        }
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max <= 1.0) {
            return Err(Error::Config("require 0 < t_min < t_max <= 1".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> DiffusionSchedule {
        DiffusionSchedule {
            beta0: self.beta0,
            beta1: self.beta1,
            t_max: self.t_max,
        }
    }
}

/// Linear noise schedule with closed-form integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionSchedule {
    pub beta0: f64,
    pub beta1: f64,
    pub t_max: f64,
}

impl DiffusionSchedule {
    pub fn beta(&self, t: f64) -> f64 {
        self.beta0 + t * (self.beta1 - self.beta0)
    }

    /// B(t) = ∫_0^t beta_s ds, monotone increasing.
    pub fn b_int(&self, t: f64) -> f64 {
        self.beta0 * t + 0.5 * (self.beta1 - self.beta0) * t * t
    }

    /// e^{-B(t)/2}: the mean contraction of the forward marginal.
    pub fn mean_scale(&self, t: f64) -> f64 {
        (-0.5 * self.b_int(t)).exp()
    }

    /// sigma_t = 1 - e^{-B(t)}: the marginal variance.
    pub fn variance(&self, t: f64) -> f64 {
        1.0 - (-self.b_int(t)).exp()
    }
}

/// Exact sample of the forward marginal `N(e^{-B/2} s_0, (1-e^{-B}) I)`.
pub fn forward_diffuse(
    s0: &[f64],
    t: f64,
    schedule: &DiffusionSchedule,
    rng: &mut SeededRng,
) -> Vec64 {
    let ms = schedule.mean_scale(t);
    let std = schedule.variance(t).max(0.0).sqrt();
    s0.iter().map(|&v| ms * v + std * rng.normal()).collect()
}

/// Conditional score of the forward marginal: `(rho_t(s_0) - s_t) / sigma_t`
/// with `sigma_t` the variance. Errors when the variance vanishes.
pub fn score_target(
    s0: &[f64],
    s_t: &[f64],
    t: f64,
    schedule: &DiffusionSchedule,
) -> Result<Vec64> {
    let var = schedule.variance(t);
    if var <= 0.0 {
        return Err(Error::contract(
            "score target undefined at zero marginal variance; sample t >= t_min",
        ));
    }
    let ms = schedule.mean_scale(t);
    Ok(s0
        .iter()
        .zip(s_t.iter())
        .map(|(&a, &b)| (ms * a - b) / var)
        .collect())
}

/// Deterministic probability-flow integration of the reverse dynamics,
/// `K` uniform Euler steps from `t = t_max` down to 0.
pub fn backward_solve(
    s_start: &[f64],
    score_fn: &mut dyn FnMut(&[f64], f64) -> Vec64,
    schedule: &DiffusionSchedule,
    steps: usize,
) -> Vec64 {
    assert!(steps >= 1, "backward_solve needs at least one step");
    let dt = schedule.t_max / steps as f64;
    let mut s: Vec64 = s_start.to_vec();
    for k in 0..steps {
        let t = schedule.t_max - k as f64 * dt;
        let beta = schedule.beta(t);
        let score = score_fn(&s, t);
        for (si, sc) in s.iter_mut().zip(score.iter()) {
            *si += dt * 0.5 * beta * (*si + sc);
        }
    }
    s
}

/// Sinusoidal 4-dimensional time embedding.
pub fn time_embedding(t: f64) -> [f64; 4] {
    let a = std::f64::consts::TAU * t;
    [a.sin(), a.cos(), (4.0 * a).sin(), (4.0 * a).cos()]
}

/// Width of the fixed token featurization fed to the text encoder.
pub const TOKEN_FEATURE_DIM: usize = 17;

/// Fixed Fourier featurization of one decoded token scalar. Discriminating
/// 32 vocabulary ids from a single analog value is hard for a small tanh
/// network; these features make the id classes nearly linearly separable
/// while degrading smoothly under channel noise.
pub fn token_features(v: f64) -> [f64; TOKEN_FEATURE_DIM] {
    let mut out = [0.0; TOKEN_FEATURE_DIM];
    out[0] = v;
    let a = std::f64::consts::TAU * v;
    for k in 0..8 {
        let f = (k + 1) as f64;
        out[1 + 2 * k] = (f * a).sin();
        out[2 + 2 * k] = (f * a).cos();
    }
    out
}

/// Derivative of `token_features` w.r.t. its scalar input.
fn token_features_grad(v: f64) -> [f64; TOKEN_FEATURE_DIM] {
    let mut out = [0.0; TOKEN_FEATURE_DIM];
    out[0] = 1.0;
    let tau = std::f64::consts::TAU;
    let a = tau * v;
    for k in 0..8 {
        let f = (k + 1) as f64;
        out[1 + 2 * k] = f * tau * (f * a).cos();
        out[2 + 2 * k] = -f * tau * (f * a).sin();
    }
    out
}

/// Prior encoder: text encoder (per-token), frame expansion, pitch
/// predictor, and the projection that folds pitch and hidden rows into the
/// conditional information.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorEncoder {
    /// [token scalar | w | r] -> [hidden row | raw duration]
    pub token_net: Mlp,
    /// [hidden frame row | w | r] -> pitch scalar
    pub pitch_net: Mlp,
    /// hidden row -> frame feature space (linear)
    pub proj: Mlp,
    pub hidden_seq: usize,
    pub frame_dim: usize,
    pub feature_dim: usize,
    pub residual_dim: usize,
}

/// Everything the prior produces for one utterance.
#[derive(Debug, Clone)]
pub struct PriorOutputs {
    /// Phoneme-level hidden rows, one per token.
    pub hidden_tokens: Vec<Vec64>,
    /// Predicted durations d_1, each in (1, 4).
    pub durations: Vec64,
    raw_durations: Vec64,
    /// Frame-level hidden rows after expansion.
    pub hidden_frames: Vec<Vec64>,
    /// Predicted pitch p_1 per frame.
    pub pitch: Vec64,
    /// Conditional information mu, one row per frame.
    pub mu: FrameSeq,
}

/// Forward caches for the training backward pass.
pub struct PriorCache {
    token_caches: Vec<MlpCache>,
    token_scalars: Vec<f64>,
    pitch_caches: Vec<MlpCache>,
    proj_caches: Vec<MlpCache>,
    /// frame index -> token index (expansion bookkeeping)
    frame_token: Vec<usize>,
}

/// Prior parameter gradients.
#[derive(Debug, Clone)]
pub struct PriorGrads {
    pub token_net: MlpGrads,
    pub pitch_net: MlpGrads,
    pub proj: MlpGrads,
}

impl PriorGrads {
    pub fn scale(&mut self, s: f64) {
        self.token_net.scale(s);
        self.pitch_net.scale(s);
        self.proj.scale(s);
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Repeats row `l` of the token-level sequence `durations[l]` times.
pub fn expand_frames(rows: &[Vec64], durations: &[usize]) -> Vec<Vec64> {
    let mut out = Vec::with_capacity(durations.iter().sum());
    for (row, &d) in rows.iter().zip(durations.iter()) {
        for _ in 0..d {
            out.push(row.clone());
        }
    }
    out
}

/// Predicted real durations rounded to whole frames, at least one each.
pub fn round_durations(durations: &[f64]) -> Vec<usize> {
    durations
        .iter()
        .map(|&d| (d.round() as usize).max(1))
        .collect()
}

impl PriorEncoder {
    pub fn new(
        hidden_seq: usize,
        net_hidden: usize,
        frame_dim: usize,
        feature_dim: usize,
        residual_dim: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let token_in = TOKEN_FEATURE_DIM + feature_dim + residual_dim;
        let frame_in = hidden_seq + feature_dim + residual_dim;
        PriorEncoder {
            token_net: Mlp::new(
                &[token_in, net_hidden, hidden_seq + 1],
                &[Activation::Tanh, Activation::Identity],
                rng,
            ),
            pitch_net: Mlp::new(
                &[frame_in, net_hidden, 1],
                &[Activation::Tanh, Activation::Identity],
                rng,
            ),
            proj: Mlp::new(&[hidden_seq, frame_dim], &[Activation::Identity], rng),
            hidden_seq,
            frame_dim,
            feature_dim,
            residual_dim,
        }
    }

    fn check_cond(&self, w: &[f64], r: &[f64]) -> Result<()> {
        if w.len() != self.feature_dim || r.len() != self.residual_dim {
            return Err(Error::contract("prior conditioning dimension mismatch"));
        }
        Ok(())
    }

    /// Text-encoder half: per-token hidden rows and durations in (1, 4).
    pub fn encode_tokens(
        &self,
        token_scalars: &[f64],
        w: &[f64],
        r: &[f64],
    ) -> Result<(Vec<Vec64>, Vec64)> {
        self.check_cond(w, r)?;
        let mut rows = Vec::with_capacity(token_scalars.len());
        let mut durations = Vec::with_capacity(token_scalars.len());
        let mut input = vec![0.0; TOKEN_FEATURE_DIM + w.len() + r.len()];
        for &tv in token_scalars {
            input[..TOKEN_FEATURE_DIM].copy_from_slice(&token_features(tv));
            input[TOKEN_FEATURE_DIM..TOKEN_FEATURE_DIM + w.len()].copy_from_slice(w);
            input[TOKEN_FEATURE_DIM + w.len()..].copy_from_slice(r);
            let out = self.token_net.forward(&input)?;
            durations.push(1.0 + 3.0 * sigmoid(out[self.hidden_seq]));
            let mut row = out;
            row.truncate(self.hidden_seq);
            rows.push(row);
        }
        Ok((rows, durations))
    }

    /// Pitch predictor over frame rows.
    pub fn predict_pitch(&self, hidden_frames: &[Vec64], w: &[f64], r: &[f64]) -> Result<Vec64> {
        self.check_cond(w, r)?;
        let mut pitch = Vec::with_capacity(hidden_frames.len());
        for row in hidden_frames {
            let mut input = Vec::with_capacity(row.len() + w.len() + r.len());
            input.extend_from_slice(row);
            input.extend_from_slice(w);
            input.extend_from_slice(r);
            pitch.push(self.pitch_net.forward(&input)?[0]);
        }
        Ok(pitch)
    }

    /// mu[f] = proj(h_f[f]) + p_1[f] broadcast over the frame dimension.
    pub fn condition(&self, hidden_frames: &[Vec64], pitch: &[f64]) -> Result<FrameSeq> {
        let mut mu = FrameSeq::zeros(hidden_frames.len(), self.frame_dim);
        for (f, row) in hidden_frames.iter().enumerate() {
            let proj = self.proj.forward(row)?;
            let out = mu.row_mut(f);
            for (o, p) in out.iter_mut().zip(proj.iter()) {
                *o = p + pitch[f];
            }
        }
        Ok(mu)
    }

    /// Inference path: predicted durations drive the expansion.
    pub fn infer(&self, token_scalars: &[f64], w: &[f64], r: &[f64]) -> Result<PriorOutputs> {
        let (rows, durations) = self.encode_tokens(token_scalars, w, r)?;
        let frames = expand_frames(&rows, &round_durations(&durations));
        let pitch = self.predict_pitch(&frames, w, r)?;
        let mu = self.condition(&frames, &pitch)?;
        Ok(PriorOutputs {
            hidden_tokens: rows,
            raw_durations: Vec::new(),
            durations,
            hidden_frames: frames,
            pitch,
            mu,
        })
    }

    /// Training path: ground-truth durations drive the expansion (teacher
    /// forcing), and every activation is cached for the backward pass.
    pub fn forward_teacher(
        &self,
        token_scalars: &[f64],
        w: &[f64],
        r: &[f64],
        true_durations: &[usize],
    ) -> Result<(PriorOutputs, PriorCache)> {
        self.check_cond(w, r)?;
        if token_scalars.len() != true_durations.len() {
            return Err(Error::contract(
                "teacher forcing needs one duration per token",
            ));
        }
        let count = token_scalars.len();
        let mut rows = Vec::with_capacity(count);
        let mut raw_durations = Vec::with_capacity(count);
        let mut durations = Vec::with_capacity(count);
        let mut token_caches = Vec::with_capacity(count);
        let mut input = vec![0.0; TOKEN_FEATURE_DIM + w.len() + r.len()];
        for &tv in token_scalars {
            input[..TOKEN_FEATURE_DIM].copy_from_slice(&token_features(tv));
            input[TOKEN_FEATURE_DIM..TOKEN_FEATURE_DIM + w.len()].copy_from_slice(w);
            input[TOKEN_FEATURE_DIM + w.len()..].copy_from_slice(r);
            let (out, cache) = self.token_net.forward_cached(&input)?;
            raw_durations.push(out[self.hidden_seq]);
            durations.push(1.0 + 3.0 * sigmoid(out[self.hidden_seq]));
            let mut row = out;
            row.truncate(self.hidden_seq);
            rows.push(row);
            token_caches.push(cache);
        }

        let mut frame_token = Vec::new();
        for (l, &d) in true_durations.iter().enumerate() {
            for _ in 0..d {
                frame_token.push(l);
            }
        }
        let hidden_frames: Vec<Vec64> = frame_token.iter().map(|&l| rows[l].clone()).collect();

        let mut pitch = Vec::with_capacity(hidden_frames.len());
        let mut pitch_caches = Vec::with_capacity(hidden_frames.len());
        let mut proj_caches = Vec::with_capacity(hidden_frames.len());
        let mut mu = FrameSeq::zeros(hidden_frames.len(), self.frame_dim);
        for (f, row) in hidden_frames.iter().enumerate() {
            let mut pin = Vec::with_capacity(row.len() + w.len() + r.len());
            pin.extend_from_slice(row);
            pin.extend_from_slice(w);
            pin.extend_from_slice(r);
            let (p, pcache) = self.pitch_net.forward_cached(&pin)?;
            pitch.push(p[0]);
            pitch_caches.push(pcache);
            let (proj, jcache) = self.proj.forward_cached(row)?;
            proj_caches.push(jcache);
            let out = mu.row_mut(f);
            for (o, pr) in out.iter_mut().zip(proj.iter()) {
                *o = pr + p[0];
            }
        }

        Ok((
            PriorOutputs {
                hidden_tokens: rows,
                raw_durations,
                durations,
                hidden_frames,
                pitch,
                mu,
            },
            PriorCache {
                token_caches,
                token_scalars: token_scalars.to_vec(),
                pitch_caches,
                proj_caches,
                frame_token,
            },
        ))
    }

    /// Backpropagates upstream gradients on (d_1, p_1, mu) to the prior
    /// parameters; returns gradients w.r.t. the token scalars and the
    /// residual vector (the paths that continue toward the channel codec).
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        outputs: &PriorOutputs,
        cache: &PriorCache,
        g_durations: &[f64],
        g_pitch: &[f64],
        g_mu: &FrameSeq,
        grads: &mut PriorGrads,
    ) -> Result<(Vec64, Vec64)> {
        let frames = cache.frame_token.len();
        let tokens = cache.token_caches.len();
        let mut g_hidden_tokens: Vec<Vec64> = vec![vec![0.0; self.hidden_seq]; tokens];
        let mut g_token_scalars = vec![0.0; tokens];
        let mut g_residual = vec![0.0; self.residual_dim];

        for (f, &g_p) in g_pitch.iter().enumerate().take(frames) {
            // mu[f] = proj(h_f) + p1[f]: broadcast adjoint sums over dims
            let gmu_row = g_mu.row(f);
            let g_p_total: f64 = g_p + gmu_row.iter().sum::<f64>();
            let g_hf_proj = self
                .proj
                .backward_into(&cache.proj_caches[f], gmu_row, &mut grads.proj)?;
            let g_in = self.pitch_net.backward_into(
                &cache.pitch_caches[f],
                &[g_p_total],
                &mut grads.pitch_net,
            )?;
            let l = cache.frame_token[f];
            let g_row = &mut g_hidden_tokens[l];
            for i in 0..self.hidden_seq {
                g_row[i] += g_hf_proj[i] + g_in[i];
            }
            for (gr, gi) in g_residual
                .iter_mut()
                .zip(g_in[self.hidden_seq + self.feature_dim..].iter())
            {
                *gr += gi;
            }
        }

        for l in 0..tokens {
            let mut upstream = g_hidden_tokens[l].clone();
            // d_1 = 1 + 3 sigmoid(raw): chain through the squashing
            let s = sigmoid(outputs.raw_durations[l]);
            upstream.push(g_durations[l] * 3.0 * s * (1.0 - s));
            let g_in =
                self.token_net
                    .backward_into(&cache.token_caches[l], &upstream, &mut grads.token_net)?;
            let dfeat = token_features_grad(cache.token_scalars[l]);
            g_token_scalars[l] = g_in[..TOKEN_FEATURE_DIM]
                .iter()
                .zip(dfeat.iter())
                .map(|(a, b)| a * b)
                .sum();
            for (gr, gi) in g_residual
                .iter_mut()
                .zip(g_in[TOKEN_FEATURE_DIM + self.feature_dim..].iter())
            {
                *gr += gi;
            }
        }

        Ok((g_token_scalars, g_residual))
    }

    pub fn zero_grads(&self) -> PriorGrads {
        PriorGrads {
            token_net: self.token_net.zero_grads(),
            pitch_net: self.pitch_net.zero_grads(),
            proj: self.proj.zero_grads(),
        }
    }

    pub fn sgd(&mut self, grads: &PriorGrads, lr: f64) {
        self.token_net.sgd(&grads.token_net, lr);
        self.pitch_net.sgd(&grads.pitch_net, lr);
        self.proj.sgd(&grads.proj, lr);
    }

    pub fn params_flat(&self) -> Vec64 {
        let mut v = self.token_net.params_flat();
        v.extend(self.pitch_net.params_flat());
        v.extend(self.proj.params_flat());
        v
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let a = self.token_net.param_count();
        let b = self.pitch_net.param_count();
        self.token_net.set_params_flat(&flat[..a]);
        self.pitch_net.set_params_flat(&flat[a..a + b]);
        self.proj.set_params_flat(&flat[a + b..]);
    }
}

/// Prior training loss: `||d_1 - d_0|| + ||p_1 - p_0|| + ||mu - s_0^g||`,
/// each norm guarded at zero. Returns the value and the upstream gradients
/// for `PriorEncoder::backward`.
pub fn prior_loss_and_upstream(
    outputs: &PriorOutputs,
    true_durations: &[usize],
    true_pitch: &[f64],
    true_frames: &FrameSeq,
) -> Result<(f64, Vec64, Vec64, FrameSeq)> {
    if outputs.durations.len() != true_durations.len()
        || outputs.pitch.len() != true_pitch.len()
        || outputs.mu.data.len() != true_frames.data.len()
    {
        return Err(Error::contract("prior loss length mismatch"));
    }
    let d_diff: Vec64 = outputs
        .durations
        .iter()
        .zip(true_durations.iter())
        .map(|(a, &b)| a - b as f64)
        .collect();
    let p_diff: Vec64 = outputs
        .pitch
        .iter()
        .zip(true_pitch.iter())
        .map(|(a, b)| a - b)
        .collect();
    let m_diff: Vec64 = outputs
        .mu
        .data
        .iter()
        .zip(true_frames.data.iter())
        .map(|(a, b)| a - b)
        .collect();
    let (ld, gd) = norm_loss_and_grad(&d_diff);
    let (lp, gp) = norm_loss_and_grad(&p_diff);
    let (lm, gm) = norm_loss_and_grad(&m_diff);
    Ok((
        ld + lp + lm,
        gd,
        gp,
        FrameSeq::from_flat(true_frames.frames, true_frames.dim, gm),
    ))
}

/// Score network: per frame, consumes the noisy frame, the time embedding,
/// the conditioning row, and the reconstructed feature/residual vectors, and
/// predicts the clean frame as an offset from the conditioning row.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNet {
    pub net: Mlp,
    pub frame_dim: usize,
    pub feature_dim: usize,
    pub residual_dim: usize,
}

impl ScoreNet {
    pub fn new(
        frame_dim: usize,
        feature_dim: usize,
        residual_dim: usize,
        net_hidden: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let input = frame_dim + 4 + frame_dim + feature_dim + residual_dim;
        ScoreNet {
            net: Mlp::new(
                &[input, net_hidden, net_hidden, frame_dim],
                &[Activation::Tanh, Activation::Tanh, Activation::Identity],
                rng,
            ),
            frame_dim,
            feature_dim,
            residual_dim,
        }
    }

    fn frame_input(&self, s_frame: &[f64], t: f64, mu_row: &[f64], w: &[f64], r: &[f64]) -> Vec64 {
        let mut input =
            Vec::with_capacity(self.frame_dim * 2 + 4 + self.feature_dim + self.residual_dim);
        input.extend_from_slice(s_frame);
        input.extend_from_slice(&time_embedding(t));
        input.extend_from_slice(mu_row);
        input.extend_from_slice(w);
        input.extend_from_slice(r);
        input
    }

    /// Clean-frame estimate for one frame: `mu + net(...)`.
    pub fn predict_clean_frame(
        &self,
        s_frame: &[f64],
        t: f64,
        mu_row: &[f64],
        w: &[f64],
        r: &[f64],
    ) -> Result<Vec64> {
        let out = self.net.forward(&self.frame_input(s_frame, t, mu_row, w, r))?;
        Ok(out
            .iter()
            .zip(mu_row.iter())
            .map(|(o, m)| o + m)
            .collect())
    }

    /// Model score of the flattened state: `(e^{-B/2} s0_hat - s_t)/sigma_t`.
    pub fn score_flat(
        &self,
        s_flat: &[f64],
        t: f64,
        mu: &FrameSeq,
        w: &[f64],
        r: &[f64],
        schedule: &DiffusionSchedule,
    ) -> Result<Vec64> {
        let var = schedule.variance(t).max(1e-12);
        let ms = schedule.mean_scale(t);
        let d = self.frame_dim;
        let mut score = vec![0.0; s_flat.len()];
        for f in 0..mu.frames {
            let s_frame = &s_flat[f * d..(f + 1) * d];
            let clean = self.predict_clean_frame(s_frame, t, mu.row(f), w, r)?;
            for (i, sc) in score[f * d..(f + 1) * d].iter_mut().enumerate() {
                *sc = (ms * clean[i] - s_frame[i]) / var;
            }
        }
        Ok(score)
    }
}

/// Score-matching loss for one utterance at one time draw: the Euclidean
/// norm of (model score - conditional score target) over all frames.
/// Gradients flow to the score network and to the residual vector input;
/// the conditioning `mu` is treated as constant here (its parameters train
/// through the prior loss).
///
/// The backward pass scales by `mean_scale/variance`, which explodes as t
/// approaches the sampling floor; `grad_scale_cap` bounds that factor so a
/// single small-t draw cannot dominate a batch. The loss value itself is
/// never reweighted. Pass infinity for the exact gradient.
#[allow(clippy::too_many_arguments)]
pub fn diffusion_loss_and_grads(
    score: &ScoreNet,
    schedule: &DiffusionSchedule,
    s0: &FrameSeq,
    s_t: &[f64],
    t: f64,
    mu: &FrameSeq,
    w: &[f64],
    r: &[f64],
    grad_scale_cap: f64,
    grads: &mut MlpGrads,
) -> Result<(f64, Vec64)> {
    let var = schedule.variance(t);
    if var <= 0.0 {
        return Err(Error::contract("diffusion loss needs positive variance"));
    }
    let ms = schedule.mean_scale(t);
    let d = score.frame_dim;
    let frames = s0.frames;

    let mut caches = Vec::with_capacity(frames);
    let mut diff = vec![0.0; frames * d];
    for f in 0..frames {
        let s_frame = &s_t[f * d..(f + 1) * d];
        let input = score.frame_input(s_frame, t, mu.row(f), w, r);
        let (out, cache) = score.net.forward_cached(&input)?;
        caches.push(cache);
        for i in 0..d {
            let clean = out[i] + mu.row(f)[i];
            let model_score = (ms * clean - s_frame[i]) / var;
            let target = (ms * s0.row(f)[i] - s_frame[i]) / var;
            diff[f * d + i] = model_score - target;
        }
    }
    let (loss, g_diff) = norm_loss_and_grad(&diff);

    let mut g_residual = vec![0.0; score.residual_dim];
    let r_off = d + 4 + d + score.feature_dim;
    let scale = (ms / var).min(grad_scale_cap);
    for (f, cache) in caches.iter().enumerate() {
        // d model_score / d net_out = ms / var, bounded by the cap
        let upstream: Vec64 = g_diff[f * d..(f + 1) * d]
            .iter()
            .map(|g| g * scale)
            .collect();
        let g_in = score.net.backward_into(cache, &upstream, grads)?;
        for (gr, gi) in g_residual.iter_mut().zip(g_in[r_off..].iter()) {
            *gr += gi;
        }
    }
    Ok((loss, g_residual))
}

/// Fixed full-rank linear vocoder surrogate: frames to waveform samples and
/// exactly back via the left pseudo-inverse.
#[derive(Debug, Clone)]
pub struct Vocoder {
    pub map: Mat64,
    pinv: Mat64,
}

impl Vocoder {
    pub fn new(frame_dim: usize, audio_dim: usize, rng: &SeededRng) -> Result<Self> {
        if audio_dim < frame_dim {
            return Err(Error::contract(
                "vocoder needs audio_dim >= frame_dim for exact inversion",
            ));
        }
        for attempt in 0..8 {
            let mut draw = rng.child(&format!("vocoder.{attempt}"));
            let map = Mat64::from_fn(audio_dim, frame_dim, |_, _| 0.3 * draw.normal());
            let Ok(pinv) = map.left_pinv() else { continue };
            let check = pinv.matmul(&map);
            let mut worst: f64 = 0.0;
            for i in 0..frame_dim {
                for j in 0..frame_dim {
                    let want = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((check.get(i, j) - want).abs());
                }
            }
            if worst < 1e-10 {
                return Ok(Vocoder { map, pinv });
            }
        }
        Err(Error::Construction("could not draw a vocoder map".into()))
    }

    /// Concatenated per-frame waveform samples.
    pub fn vocode(&self, frames: &FrameSeq) -> Vec64 {
        let mut out = Vec::with_capacity(frames.frames * self.map.rows());
        for f in 0..frames.frames {
            out.extend(self.map.matvec(frames.row(f)));
        }
        out
    }

    /// Recovers the frame features from the waveform (test oracle).
    pub fn un_vocode(&self, audio: &[f64], frame_dim: usize) -> FrameSeq {
        let per = self.map.rows();
        let frames = audio.len() / per;
        let mut out = FrameSeq::zeros(frames, frame_dim);
        for f in 0..frames {
            let rec = self.pinv.matvec(&audio[f * per..(f + 1) * per]);
            out.row_mut(f).copy_from_slice(&rec);
        }
        out
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

/// Serializes the semantic-decoder parameters (prior encoder and score
/// network) into their own versioned container.
pub fn synth_to_bytes(prior: &PriorEncoder, score: &ScoreNet) -> Vec<u8> {
    let mut w = Writer::new(SYNTH_MAGIC, SYNTH_VERSION);
    write_mlp(&mut w, &prior.token_net);
    write_mlp(&mut w, &prior.pitch_net);
    write_mlp(&mut w, &prior.proj);
    for v in [
        prior.hidden_seq,
        prior.frame_dim,
        prior.feature_dim,
        prior.residual_dim,
    ] {
        w.usize(v);
    }
    write_mlp(&mut w, &score.net);
    for v in [score.frame_dim, score.feature_dim, score.residual_dim] {
        w.usize(v);
    }
    w.finish()
}

pub fn synth_from_bytes(bytes: &[u8]) -> Result<(PriorEncoder, ScoreNet)> {
    let mut r = Reader::open(bytes, SYNTH_MAGIC, SYNTH_VERSION)?;
    let token_net = read_mlp(&mut r)?;
    let pitch_net = read_mlp(&mut r)?;
    let proj = read_mlp(&mut r)?;
    let prior = PriorEncoder {
        token_net,
        pitch_net,
        proj,
        hidden_seq: r.usize()?,
        frame_dim: r.usize()?,
        feature_dim: r.usize()?,
        residual_dim: r.usize()?,
    };
    let net = read_mlp(&mut r)?;
    let score = ScoreNet {
        net,
        frame_dim: r.usize()?,
        feature_dim: r.usize()?,
        residual_dim: r.usize()?,
    };
    r.done()?;
    Ok((prior, score))
}
