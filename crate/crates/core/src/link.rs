//! Packet framing, the trainable analog channel codec, and the wireless
//! channel `y = h·x + n`.
//!
//! A packet concatenates three zero-padded fields of equal stride: the
//! embedded token vector, the residual vector, and the code indices mapped
//! affinely onto `[-1, 1]`. The channel encoder is an MLP whose output is
//! normalized to unit average complex-symbol power; real vectors pair up as
//! complex symbols `(x[2k], x[2k+1])`. Fading is block fading: one complex
//! coefficient per packet, receiver has perfect channel state information
//! and equalizes by division unless the fade is too deep, which is flagged
//! as an outage instead of dividing.

use crate::error::{Error, Result};
use crate::numkit::{dot, Activation, Mlp, MlpCache, MlpGrads, SeededRng, Vec64};
use serde::{Deserialize, Serialize};

/// Link-side dimensions and network width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    /// Residual vector dimension d_r.
    pub residual_dim: usize,
    /// Transmit signal dimension d_x at budget parity (must be even).
    pub signal_len: usize,
    /// Hidden width of the codec and residual-encoder networks.
    pub hidden: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            residual_dim: 16,
            signal_len: 96,
            hidden: 128,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.residual_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("link dims must be positive".into()));
        }
        if self.signal_len == 0 || !self.signal_len.is_multiple_of(2) {
            return Err(Error::Config(
                "signal_len must be positive and even (complex symbol pairs)".into(),
            ));
        }
        Ok(())
    }
}

/// Field placement inside a packet. Identical at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketLayout {
    /// Token field length d_t.
    pub token_len: usize,
    /// Residual field length d_r.
    pub residual_len: usize,
    /// Number of code indices N.
    pub index_count: usize,
    /// Codebook size M (fixes the index embedding grid).
    pub codebook_size: usize,
}

impl PacketLayout {
    /// All three fields are padded to the widest one.
    pub fn field_stride(&self) -> usize {
        self.token_len.max(self.residual_len).max(self.index_count)
    }

    pub fn frame_len(&self) -> usize {
        3 * self.field_stride()
    }

    pub fn token_offset(&self) -> usize {
        0
    }

    pub fn residual_offset(&self) -> usize {
        self.field_stride()
    }

    pub fn index_offset(&self) -> usize {
        2 * self.field_stride()
    }
}

/// Maps index `m` onto the grid `2m/(M-1) - 1` in `[-1, 1]`.
pub fn embed_index(m: usize, codebook_size: usize) -> f64 {
    2.0 * m as f64 / (codebook_size - 1) as f64 - 1.0
}

/// Rounds an embedded (possibly corrupted) value back to an index, clamped
/// into range so damage degrades instead of crashing.
pub fn recover_index(v: f64, codebook_size: usize) -> usize {
    let m = ((v + 1.0) * (codebook_size - 1) as f64 / 2.0).round();
    m.clamp(0.0, (codebook_size - 1) as f64) as usize
}

/// Concatenates `[pad(t) | pad(r) | embed(indices)]` per the layout.
pub fn frame_packet(
    layout: &PacketLayout,
    token: &[f64],
    residual: &[f64],
    indices: &[usize],
) -> Result<Vec64> {
    if token.len() != layout.token_len {
        return Err(Error::Contract(format!(
            "token field length {} != {}",
            token.len(),
            layout.token_len
        )));
    }
    if residual.len() != layout.residual_len {
        return Err(Error::Contract(format!(
            "residual field length {} != {}",
            residual.len(),
            layout.residual_len
        )));
    }
    if indices.len() != layout.index_count {
        return Err(Error::Contract(format!(
            "index count {} != {}",
            indices.len(),
            layout.index_count
        )));
    }
    if let Some(&bad) = indices.iter().find(|&&m| m >= layout.codebook_size) {
        return Err(Error::Contract(format!(
            "index {bad} out of range 0..{}",
            layout.codebook_size
        )));
    }
    let mut f = vec![0.0; layout.frame_len()];
    f[..token.len()].copy_from_slice(token);
    f[layout.residual_offset()..layout.residual_offset() + residual.len()]
        .copy_from_slice(residual);
    for (k, &m) in indices.iter().enumerate() {
        f[layout.index_offset() + k] = embed_index(m, layout.codebook_size);
    }
    Ok(f)
}

/// Slices a decoded frame back into fields; indices recover by rounding.
pub fn unframe_packet(layout: &PacketLayout, frame: &[f64]) -> Result<(Vec64, Vec64, Vec<usize>)> {
    if frame.len() != layout.frame_len() {
        return Err(Error::Contract(format!(
            "frame length {} != {}",
            frame.len(),
            layout.frame_len()
        )));
    }
    let token = frame[..layout.token_len].to_vec();
    let residual =
        frame[layout.residual_offset()..layout.residual_offset() + layout.residual_len].to_vec();
    let indices = (0..layout.index_count)
        .map(|k| recover_index(frame[layout.index_offset() + k], layout.codebook_size))
        .collect();
    Ok((token, residual, indices))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

impl ChannelKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Rayleigh => "rayleigh",
        }
    }
}

/// One packet's channel draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub kind: ChannelKind,
    pub h_re: f64,
    pub h_im: f64,
    /// Noise power per complex dimension.
    pub noise_power: f64,
    pub receiver_csi: bool,
}

impl ChannelRealization {
    /// Draws a realization at the given SNR: `sigma^2 = 10^(-snr/10)` for
    /// unit signal power. AWGN fixes `h = 1`; Rayleigh draws `h ~ CN(0,1)`.
    pub fn realize(kind: ChannelKind, snr_db: f64, rng: &mut SeededRng) -> Self {
        let noise_power = 10f64.powf(-snr_db / 10.0);
        let (h_re, h_im) = match kind {
            ChannelKind::Awgn => (1.0, 0.0),
            ChannelKind::Rayleigh => {
                let s = 0.5f64.sqrt();
                (s * rng.normal(), s * rng.normal())
            }
        };
        ChannelRealization {
            kind,
            h_re,
            h_im,
            noise_power,
            receiver_csi: true,
        }
    }

    pub fn h_abs(&self) -> f64 {
        (self.h_re * self.h_re + self.h_im * self.h_im).sqrt()
    }
}

/// Multiplies a real-paired complex vector by `h`.
pub fn complex_scale(x: &[f64], h_re: f64, h_im: f64) -> Vec64 {
    debug_assert!(x.len().is_multiple_of(2));
    let mut y = vec![0.0; x.len()];
    for k in 0..x.len() / 2 {
        let (re, im) = (x[2 * k], x[2 * k + 1]);
        y[2 * k] = h_re * re - h_im * im;
        y[2 * k + 1] = h_re * im + h_im * re;
    }
    y
}

/// `y = h x + n` with i.i.d. circularly symmetric complex Gaussian noise of
/// power `sigma^2` per complex dimension.
pub fn apply_channel(x: &[f64], real: &ChannelRealization, rng: &mut SeededRng) -> Vec64 {
    let mut y = complex_scale(x, real.h_re, real.h_im);
    let std = (real.noise_power / 2.0).sqrt();
    for v in y.iter_mut() {
        *v += std * rng.normal();
    }
    y
}

/// Threshold below which a fade is an outage rather than equalized.
pub const OUTAGE_THRESHOLD: f64 = 1e-6;

/// Equalization result; on outage the signal passes through unequalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub signal: Vec64,
    pub outage: bool,
}

/// Coherent equalization `y / h` when the receiver knows the channel.
pub fn equalize(y: &[f64], real: &ChannelRealization) -> Equalized {
    match real.kind {
        ChannelKind::Awgn => Equalized {
            signal: y.to_vec(),
            outage: false,
        },
        ChannelKind::Rayleigh => {
            if !real.receiver_csi {
                return Equalized {
                    signal: y.to_vec(),
                    outage: false,
                };
            }
            let mag2 = real.h_re * real.h_re + real.h_im * real.h_im;
            if mag2.sqrt() < OUTAGE_THRESHOLD {
                return Equalized {
                    signal: y.to_vec(),
                    outage: true,
                };
            }
            Equalized {
                signal: complex_scale(y, real.h_re / mag2, -real.h_im / mag2),
                outage: false,
            }
        }
    }
}

const POWER_EPS: f64 = 1e-12;

/// Scales a vector to unit average complex-symbol power; degenerate
/// near-zero vectors get an epsilon added under the square root instead of
/// dividing by zero.
pub fn normalize_power(u: &[f64]) -> (Vec64, f64) {
    let half = (u.len() / 2).max(1) as f64;
    let p = dot(u, u) / half;
    let scale = 1.0 / p.max(POWER_EPS).sqrt();
    (u.iter().map(|v| v * scale).collect(), scale)
}

/// Average power per complex symbol of a real-paired vector.
pub fn symbol_power(x: &[f64]) -> f64 {
    dot(x, x) / (x.len() / 2).max(1) as f64
}

/// Trainable channel encoder/decoder pair. At budget parity (signal and
/// frame dimensions equal) the encoder adds an identity skip before power
/// normalization, so the map starts near a scaled identity and the network
/// only learns the correction.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCodec {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub frame_len: usize,
    pub signal_len: usize,
}

/// Cache for one encode pass (MLP activations + normalization state).
pub struct EncoderCache {
    mlp: MlpCache,
    raw: Vec64,
    power: f64,
    scale: f64,
}

impl ChannelCodec {
    fn skip(&self) -> bool {
        self.frame_len == self.signal_len
    }

    pub fn new(frame_len: usize, signal_len: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        assert!(
            signal_len.is_multiple_of(2),
            "signal length must pair into complex symbols"
        );
        let encoder = Mlp::new(
            &[frame_len, hidden, signal_len],
            &[Activation::Tanh, Activation::Identity],
            rng,
        );
        let decoder = Mlp::new(
            &[signal_len, hidden, frame_len],
            &[Activation::Tanh, Activation::Identity],
            rng,
        );
        ChannelCodec {
            encoder,
            decoder,
            frame_len,
            signal_len,
        }
    }

    /// Power-normalized transmit signal.
    pub fn encode(&self, frame: &[f64]) -> Result<Vec64> {
        let mut raw = self.encoder.forward(frame)?;
        if self.skip() {
            for (r, f) in raw.iter_mut().zip(frame.iter()) {
                *r += f;
            }
        }
        Ok(normalize_power(&raw).0)
    }

    pub fn encode_cached(&self, frame: &[f64]) -> Result<(Vec64, EncoderCache)> {
        let (mut raw, mlp) = self.encoder.forward_cached(frame)?;
        if self.skip() {
            for (r, f) in raw.iter_mut().zip(frame.iter()) {
                *r += f;
            }
        }
        let half = (raw.len() / 2).max(1) as f64;
        let power = dot(&raw, &raw) / half;
        let scale = 1.0 / power.max(POWER_EPS).sqrt();
        let x = raw.iter().map(|v| v * scale).collect();
        Ok((
            x,
            EncoderCache {
                mlp,
                raw,
                power,
                scale,
            },
        ))
    }

    /// Backpropagates through normalization and the encoder MLP.
    pub fn encoder_backward(
        &self,
        cache: &EncoderCache,
        g_signal: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<Vec64> {
        let half = (cache.raw.len() / 2).max(1) as f64;
        let mut g_raw: Vec64 = g_signal.iter().map(|g| g * cache.scale).collect();
        if cache.power > POWER_EPS {
            // d scale / d raw_j = -power^{-3/2} raw_j / half
            let gu = dot(g_signal, &cache.raw);
            let coef = gu * cache.power.powf(-1.5) / half;
            for (g, r) in g_raw.iter_mut().zip(cache.raw.iter()) {
                *g -= coef * r;
            }
        }
        let mut g_frame = self.encoder.backward_into(&cache.mlp, &g_raw, grads)?;
        if self.skip() {
            for (g, r) in g_frame.iter_mut().zip(g_raw.iter()) {
                *g += r;
            }
        }
        Ok(g_frame)
    }

    pub fn decode(&self, signal: &[f64]) -> Result<Vec64> {
        self.decoder.forward(signal)
    }

    pub fn decode_cached(&self, signal: &[f64]) -> Result<(Vec64, MlpCache)> {
        self.decoder.forward_cached(signal)
    }
}

/// End-to-end codec loss: the plain Euclidean norm of the difference.
pub fn ed_loss(f_e: &[f64], f_d: &[f64]) -> Result<f64> {
    if f_e.len() != f_d.len() {
        return Err(Error::contract("ed_loss dimension mismatch"));
    }
    Ok(crate::numkit::norm(&crate::numkit::sub(f_e, f_d)))
}

/// Loss `L = ||diff||` and its gradient w.r.t. `diff`, guarded at zero so the
/// square-root chain rule never divides by zero.
pub fn norm_loss_and_grad(diff: &[f64]) -> (f64, Vec64) {
    let l = crate::numkit::norm(diff);
    let inv = 1.0 / l.max(1e-12);
    (l, diff.iter().map(|d| d * inv).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{finite_difference_grad, grad_rel_err};

    fn layout() -> PacketLayout {
        PacketLayout {
            token_len: 32,
            residual_len: 16,
            index_count: 4,
            codebook_size: 64,
        }
    }

    #[test]
    fn index_embedding_examples() {
        assert_eq!(embed_index(0, 64), -1.0);
        assert_eq!(embed_index(63, 64), 1.0);
        let v = embed_index(31, 64);
        assert!((v - (2.0 * 31.0 / 63.0 - 1.0)).abs() < 1e-15);
        assert!((v + 1.0 / 63.0).abs() < 1e-12);
    }

    #[test]
    fn layout_offsets_match_contract() {
        let l = layout();
        assert_eq!(l.field_stride(), 32);
        assert_eq!(l.frame_len(), 96);
        assert_eq!(l.index_offset(), 64);
    }

    #[test]
    fn frame_unframe_round_trip() {
        let l = layout();
        let mut rng = SeededRng::new(3);
        for _ in 0..50 {
            let token: Vec64 = (0..32).map(|_| rng.uniform(0.0, 1.0)).collect();
            let residual: Vec64 = (0..16).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let indices: Vec<usize> = (0..4).map(|_| rng.below(64)).collect();
            let f = frame_packet(&l, &token, &residual, &indices).unwrap();
            let (t, r, idx) = unframe_packet(&l, &f).unwrap();
            assert_eq!(t, token);
            assert_eq!(r, residual);
            assert_eq!(idx, indices);
        }
    }

    #[test]
    fn index_rounding_margin_and_clamp() {
        let l = layout();
        let f = frame_packet(&l, &[0.0; 32], &[0.0; 16], &[10, 20, 30, 40]).unwrap();
        // perturb each embedded index by just under half the grid step
        let mut damaged = f.clone();
        for k in 0..4 {
            damaged[l.index_offset() + k] += 0.9 / 63.0;
        }
        let (_, _, idx) = unframe_packet(&l, &damaged).unwrap();
        assert_eq!(idx, vec![10, 20, 30, 40]);

        // corrupt value beyond the grid clamps to the last index
        damaged[l.index_offset()] = 1.7;
        let (_, _, idx) = unframe_packet(&l, &damaged).unwrap();
        assert_eq!(idx[0], 63);
        damaged[l.index_offset()] = -3.0;
        let (_, _, idx) = unframe_packet(&l, &damaged).unwrap();
        assert_eq!(idx[0], 0);
    }

    #[test]
    fn frame_rejects_bad_fields() {
        let l = layout();
        assert!(frame_packet(&l, &[0.0; 31], &[0.0; 16], &[0, 0, 0, 0]).is_err());
        assert!(frame_packet(&l, &[0.0; 32], &[0.0; 16], &[0, 0, 0]).is_err());
        assert!(frame_packet(&l, &[0.0; 32], &[0.0; 16], &[0, 0, 0, 64]).is_err());
        assert!(unframe_packet(&l, &[0.0; 95]).is_err());
    }

    #[test]
    fn encoder_output_power_is_unit() {
        let mut rng = SeededRng::new(5);
        let codec = ChannelCodec::new(12, 8, 16, &mut rng);
        for _ in 0..50 {
            let f: Vec64 = (0..12).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let x = codec.encode(&f).unwrap();
            assert!((symbol_power(&x) - 1.0).abs() < 1e-12);
        }
        // determinism
        let f: Vec64 = (0..12).map(|_| rng.uniform(-1.0, 1.0)).collect();
        assert_eq!(codec.encode(&f).unwrap(), codec.encode(&f).unwrap());
    }

    #[test]
    fn encoder_gradient_through_normalization() {
        let mut rng = SeededRng::new(7);
        let codec = ChannelCodec::new(6, 4, 8, &mut rng);
        let f: Vec64 = (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let target: Vec64 = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();

        let (x, cache) = codec.encode_cached(&f).unwrap();
        let upstream: Vec64 = x.iter().zip(target.iter()).map(|(a, b)| a - b).collect();
        let mut grads = codec.encoder.zero_grads();
        codec.encoder_backward(&cache, &upstream, &mut grads).unwrap();
        let analytic = codec.encoder.grads_flat(&grads);

        let mut probe = codec.clone();
        let mut loss = |p: &[f64]| {
            probe.encoder.set_params_flat(p);
            let out = probe.encode(&f).unwrap();
            0.5 * out
                .iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        };
        let numeric = finite_difference_grad(&mut loss, &codec.encoder.params_flat(), 1e-5);
        assert!(grad_rel_err(&analytic, &numeric) < 1e-4);
    }

    #[test]
    fn channel_noiseless_and_rotation() {
        let mut rng = SeededRng::new(9);
        let x: Vec64 = (0..8).map(|_| rng.uniform(-1.0, 1.0)).collect();

        let ideal = ChannelRealization {
            kind: ChannelKind::Awgn,
            h_re: 1.0,
            h_im: 0.0,
            noise_power: 0.0,
            receiver_csi: true,
        };
        assert_eq!(apply_channel(&x, &ideal, &mut rng), x);

        // h = i is a pure rotation; equalization undoes it exactly
        let rot = ChannelRealization {
            kind: ChannelKind::Rayleigh,
            h_re: 0.0,
            h_im: 1.0,
            noise_power: 0.0,
            receiver_csi: true,
        };
        let y = apply_channel(&x, &rot, &mut rng);
        assert_ne!(y, x);
        let eq = equalize(&y, &rot);
        assert!(!eq.outage);
        for (a, b) in eq.signal.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn deep_fade_flags_outage() {
        let real = ChannelRealization {
            kind: ChannelKind::Rayleigh,
            h_re: 0.0,
            h_im: 0.0,
            noise_power: 0.1,
            receiver_csi: true,
        };
        let y = vec![0.5, -0.5, 0.25, 0.0];
        let eq = equalize(&y, &real);
        assert!(eq.outage);
        assert_eq!(eq.signal, y);
    }

    #[test]
    fn measured_noise_power_matches_snr() {
        // SNR = 10 dB => noise power 0.1 per complex dimension
        let mut rng = SeededRng::new(11);
        let dim = 96;
        let packets = 10_000;
        let x = vec![0.0; dim];
        let mut acc = 0.0;
        for _ in 0..packets {
            let real = ChannelRealization::realize(ChannelKind::Awgn, 10.0, &mut rng);
            let y = apply_channel(&x, &real, &mut rng);
            acc += symbol_power(&y);
        }
        let measured = acc / packets as f64;
        // MC std of the mean ~ sigma^2 * sqrt(2/(dim*packets))
        let tol = 3.0 * 0.1 * (2.0 / (dim as f64 * packets as f64 / 2.0)).sqrt();
        assert!(
            (measured - 0.1).abs() < tol,
            "measured {measured}, tol {tol}"
        );
    }

    #[test]
    fn equalization_exactness_with_accurate_codec() {
        // the invariant is conditional on an epsilon-accurate codec; a
        // hand-built inverse pair provides one on fixed-power packets, and
        // the full chain encode -> fade -> equalize -> decode -> unframe
        // must then recover the indices exactly
        let l = layout();
        let mut rng = SeededRng::new(17);
        let target_norm2 = 12.0;
        for _ in 0..20 {
            let ids: Vec<usize> = (0..6).map(|_| 1 + rng.below(31)).collect();
            let mut token = vec![0.0; 32];
            for (slot, &id) in token.iter_mut().zip(ids.iter()) {
                *slot = id as f64 / 31.0;
            }
            let indices: Vec<usize> = (0..4).map(|_| rng.below(64)).collect();
            // scale the residual field so every packet has the same norm
            let mut residual: Vec64 = (0..16).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let fixed: f64 = token.iter().map(|v| v * v).sum::<f64>()
                + indices
                    .iter()
                    .map(|&m| embed_index(m, 64).powi(2))
                    .sum::<f64>();
            assert!(fixed < target_norm2);
            let r_norm = crate::numkit::norm(&residual);
            let alpha = ((target_norm2 - fixed) / (r_norm * r_norm)).sqrt();
            for v in residual.iter_mut() {
                *v *= alpha;
            }

            let f_e = frame_packet(&l, &token, &residual, &indices).unwrap();
            assert!((dot(&f_e, &f_e) - target_norm2).abs() < 1e-9);

            // identity encoder (skip doubles it; normalization rescales),
            // decoder undoes the known fixed-power scale
            let mut codec = ChannelCodec {
                encoder: Mlp::identity(96),
                decoder: Mlp::identity(96),
                frame_len: 96,
                signal_len: 96,
            };
            let dec_scale = (target_norm2 / 48.0).sqrt();
            for w in codec.decoder.weights_mut()[0].as_mut_slice().iter_mut() {
                *w *= dec_scale;
            }

            let x = codec.encode(&f_e).unwrap();
            assert!((symbol_power(&x) - 1.0).abs() < 1e-12);
            let real = ChannelRealization {
                kind: ChannelKind::Rayleigh,
                h_re: 0.3,
                h_im: 0.4,
                noise_power: 0.0,
                receiver_csi: true,
            };
            let y = apply_channel(&x, &real, &mut rng);
            let eq = equalize(&y, &real);
            assert!(!eq.outage);
            let f_d = codec.decode(&eq.signal).unwrap();

            let err: f64 = f_e
                .iter()
                .zip(f_d.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "codec accuracy {err}");
            let (t_rx, r_rx, idx_rx) = unframe_packet(&l, &f_d).unwrap();
            assert_eq!(idx_rx, indices, "indices recover exactly");
            for (a, b) in t_rx.iter().zip(token.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in r_rx.iter().zip(residual.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ed_loss_examples() {
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(ed_loss(&a, &a).unwrap(), 0.0);

        let f_e = vec![3.0, 4.0, 0.0, 0.0];
        let f_d = vec![0.0, 0.0, 0.0, 0.0];
        assert!((ed_loss(&f_e, &f_d).unwrap() - 5.0).abs() < 1e-15);

        let mut rng = SeededRng::new(13);
        for _ in 0..20 {
            let u: Vec64 = (0..5).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let v: Vec64 = (0..5).map(|_| rng.uniform(-3.0, 3.0)).collect();
            assert!(ed_loss(&u, &v).unwrap() >= 0.0);
        }
        assert!(ed_loss(&a, &[1.0]).is_err());
    }
}
