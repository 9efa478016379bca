//! Synthetic speech corpus with analytic evaluation oracles.
//!
//! Speakers carry a latent factor vector (pitch/timbre/loudness roles) in
//! `[-1, 1]^{d_s}`. An utterance pairs a speaker with a token sequence and
//! deterministically fixes per-token frame durations, a per-frame pitch
//! contour, the ground-truth frame-feature matrix, and the demonstration
//! feature `w`. Frame features are a fixed linear mix
//! `G · [one_hot(token) | pitch | factors]` with `G` full column rank, so
//! token identity and speaker factors are exactly recoverable from clean
//! frames by least squares. That makes WER and speaker similarity computable
//! without trained recognizers; all oracle logic stays in this module so the
//! source model can be swapped.
//!
//! Generated token ids avoid 0 (reserved as padding in the embedded token
//! vector) and never repeat adjacently, so collapsing consecutive duplicate
//! frame labels exactly inverts frame expansion.

use crate::bytesio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::numkit::{Mat64, SeededRng, Vec64};
use serde::{Deserialize, Serialize};

pub const CORPUS_MAGIC: &[u8; 4] = b"SCTC";
pub const CORPUS_VERSION: u16 = 1;

/// Dimensions and sizes of the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub seed: u64,
    pub speakers: usize,
    pub utterances: usize,
    /// Vocabulary size V; id 0 is reserved as padding.
    pub vocab: usize,
    /// Token vector dimension d_t.
    pub token_dim: usize,
    /// Speaker factor dimension d_s.
    pub speaker_dim: usize,
    /// Frame feature dimension d_ss. Must be at least `vocab + 1 +
    /// speaker_dim` so the mixing matrix can be full column rank.
    pub frame_dim: usize,
    /// Demonstration feature dimension d_w.
    pub feature_dim: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Per-token durations are drawn from `1..=max_duration` frames.
    pub max_duration: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            seed: 1,
            speakers: 20,
            utterances: 200,
            vocab: 32,
            token_dim: 32,
            speaker_dim: 8,
            frame_dim: 48,
            feature_dim: 64,
            min_tokens: 4,
            max_tokens: 10,
            max_duration: 4,
        }
    }
}

impl CorpusConfig {
    pub fn mix_input_dim(&self) -> usize {
        self.vocab + 1 + self.speaker_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab < 2 || self.speaker_dim == 0 || self.feature_dim == 0 {
            return Err(Error::Config("corpus dims must be positive".into()));
        }
        if self.max_tokens > self.token_dim {
            return Err(Error::Config("max_tokens must not exceed token_dim".into()));
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return Err(Error::Config("bad token length range".into()));
        }
        if self.frame_dim < self.mix_input_dim() {
            return Err(Error::Config(format!(
                "frame_dim {} < vocab+1+speaker_dim = {}; mixing matrix cannot be full column rank",
                self.frame_dim,
                self.mix_input_dim()
            )));
        }
        if self.max_duration == 0 {
            return Err(Error::Config("max_duration must be at least 1".into()));
        }
        Ok(())
    }
}

/// A speaker's latent factors, deterministic in (corpus seed, speaker id).
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerProfile {
    pub speaker_id: u64,
    /// v_spk, entries i.i.d. uniform in [-1, 1].
    pub factors: Vec64,
}

/// Token id sequence and its fixed-dimension real embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenVector {
    pub ids: Vec<usize>,
    /// ids normalized to `id/(V-1)`, zero-padded to `token_dim`.
    pub embedded: Vec64,
}

/// Row-major frame-feature matrix (F frames of dimension d_ss).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeq {
    pub frames: usize,
    pub dim: usize,
    pub data: Vec64,
}

impl FrameSeq {
    pub fn zeros(frames: usize, dim: usize) -> Self {
        FrameSeq {
            frames,
            dim,
            data: vec![0.0; frames * dim],
        }
    }

    pub fn from_flat(frames: usize, dim: usize, data: Vec64) -> Self {
        assert_eq!(data.len(), frames * dim);
        FrameSeq { frames, dim, data }
    }

    pub fn row(&self, f: usize) -> &[f64] {
        &self.data[f * self.dim..(f + 1) * self.dim]
    }

    pub fn row_mut(&mut self, f: usize) -> &mut [f64] {
        &mut self.data[f * self.dim..(f + 1) * self.dim]
    }

    pub fn mean_row(&self) -> Vec64 {
        let mut m = vec![0.0; self.dim];
        for f in 0..self.frames {
            for (mi, xi) in m.iter_mut().zip(self.row(f).iter()) {
                *mi += xi;
            }
        }
        if self.frames > 0 {
            let s = 1.0 / self.frames as f64;
            for mi in m.iter_mut() {
                *mi *= s;
            }
        }
        m
    }
}

/// Ground-truth synthesis targets for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// d_0: per-token frame durations (positive).
    pub durations: Vec<usize>,
    /// p_0: per-frame pitch contour; length equals total frames.
    pub pitch: Vec64,
    /// s_0^g: ground-truth frame features.
    pub frames: FrameSeq,
}

impl GroundTruth {
    pub fn total_frames(&self) -> usize {
        self.durations.iter().sum()
    }
}

/// One (speech demonstration, text) pair at the transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub speaker: SpeakerProfile,
    pub tokens: TokenVector,
    /// The demonstration feature w, a fixed linear map of the mean frame.
    pub feature: Vec64,
    pub truth: GroundTruth,
}

/// The corpus plus its fixed mixing/feature maps and oracle inverses.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub config: CorpusConfig,
    /// G: frame_dim × (vocab + 1 + speaker_dim), full column rank.
    pub mixer: Mat64,
    /// Left pseudo-inverse of G, used by the oracles.
    mixer_pinv: Mat64,
    /// Frozen feature extractor surrogate: feature_dim × frame_dim.
    pub feature_map: Mat64,
    pub utterances: Vec<Utterance>,
}

/// Embeds a token id on the `[0, 1]` grid with spacing `1/(V-1)`.
pub fn embed_token(id: usize, vocab: usize) -> f64 {
    id as f64 / (vocab - 1) as f64
}

/// Nearest grid id for an embedded (possibly noisy) token value.
pub fn nearest_token(v: f64, vocab: usize) -> usize {
    let id = (v * (vocab - 1) as f64).round();
    id.clamp(0.0, (vocab - 1) as f64) as usize
}

/// Embeds a raw id list into a fixed-dimension token vector.
pub fn tokenize(ids: &[usize], vocab: usize, token_dim: usize) -> Result<TokenVector> {
    if ids.len() > token_dim {
        return Err(Error::Contract(format!(
            "token sequence length {} exceeds token_dim {}",
            ids.len(),
            token_dim
        )));
    }
    if let Some(&bad) = ids.iter().find(|&&id| id >= vocab) {
        return Err(Error::Contract(format!(
            "token id {bad} out of vocabulary {vocab}"
        )));
    }
    let mut embedded = vec![0.0; token_dim];
    for (slot, &id) in embedded.iter_mut().zip(ids.iter()) {
        *slot = embed_token(id, vocab);
    }
    Ok(TokenVector {
        ids: ids.to_vec(),
        embedded,
    })
}

/// Recovers a token id list from an embedded vector by nearest-grid rounding,
/// then trims trailing padding (id 0). Interior zeros cannot occur in
/// generated utterances because id 0 is reserved.
pub fn de_embed_tokens(embedded: &[f64], vocab: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = embedded.iter().map(|&v| nearest_token(v, vocab)).collect();
    while ids.last() == Some(&0) {
        ids.pop();
    }
    ids
}

/// Collapses consecutive duplicate ids (frame labels -> token sequence).
pub fn collapse_consecutive(ids: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    for &id in ids {
        if out.last() != Some(&id) {
            out.push(id);
        }
    }
    out
}

/// Deterministic speaker profile from (corpus seed, speaker id).
pub fn generate_speaker(corpus_seed: u64, speaker_id: u64, speaker_dim: usize) -> SpeakerProfile {
    let mut rng = SeededRng::new(corpus_seed).child(&format!("speaker.{speaker_id}"));
    let factors = (0..speaker_dim).map(|_| rng.uniform(-1.0, 1.0)).collect();
    SpeakerProfile {
        speaker_id,
        factors,
    }
}

/// Per-token duration, deterministic in (corpus seed, token id) only, so two
/// speakers reading the same tokens share durations.
pub fn token_duration(corpus_seed: u64, token_id: usize, max_duration: usize) -> usize {
    let mut rng = SeededRng::new(corpus_seed).child(&format!("duration.{token_id}"));
    1 + rng.below(max_duration)
}

fn token_pitch_offset(id: usize, vocab: usize) -> f64 {
    0.5 * (embed_token(id, vocab) - 0.5)
}

/// Builds the ground truth and demonstration feature for (speaker, tokens).
/// Fully deterministic; the corpus seed fixes durations and the mixing maps.
pub fn synthesize_utterance(
    config: &CorpusConfig,
    mixer: &Mat64,
    feature_map: &Mat64,
    speaker: &SpeakerProfile,
    tokens: &TokenVector,
) -> Utterance {
    let durations: Vec<usize> = tokens
        .ids
        .iter()
        .map(|&id| token_duration(config.seed, id, config.max_duration))
        .collect();
    let total: usize = durations.iter().sum();

    let mut pitch = Vec::with_capacity(total);
    let mut frames = FrameSeq::zeros(total, config.frame_dim);
    let base_pitch = speaker.factors[0];
    let mut f = 0;
    let mut mix_in = vec![0.0; config.mix_input_dim()];
    for (l, &id) in tokens.ids.iter().enumerate() {
        let p = base_pitch + token_pitch_offset(id, config.vocab);
        for _ in 0..durations[l] {
            mix_in.fill(0.0);
            mix_in[id] = 1.0;
            mix_in[config.vocab] = p;
            mix_in[config.vocab + 1..].copy_from_slice(&speaker.factors);
            let row = mixer.matvec(&mix_in);
            frames.row_mut(f).copy_from_slice(&row);
            pitch.push(p);
            f += 1;
        }
    }

    let feature = feature_map.matvec(&frames.mean_row());
    Utterance {
        speaker: speaker.clone(),
        tokens: tokens.clone(),
        feature,
        truth: GroundTruth {
            durations,
            pitch,
            frames,
        },
    }
}

impl Corpus {
    /// Generates the full corpus from its configuration. Bit-identical for
    /// identical configs.
    pub fn generate(config: CorpusConfig) -> Result<Corpus> {
        config.validate()?;
        let root = SeededRng::new(config.seed);

        let (mixer, mixer_pinv) = draw_mixer(&config, &root)?;
        let mut fm_rng = root.child("corpus.feature_map");
        let bound = 0.5 / (config.frame_dim as f64).sqrt();
        let feature_map = Mat64::from_fn(config.feature_dim, config.frame_dim, |_, _| {
            fm_rng.uniform(-bound, bound)
        });

        let speakers: Vec<SpeakerProfile> = (0..config.speakers)
            .map(|id| generate_speaker(config.seed, id as u64, config.speaker_dim))
            .collect();

        let mut utterances = Vec::with_capacity(config.utterances);
        for u in 0..config.utterances {
            let mut rng = root.child(&format!("utterance.{u}"));
            let len = config.min_tokens + rng.below(config.max_tokens - config.min_tokens + 1);
            // ids in 1..V, no adjacent repeats
            let mut ids = Vec::with_capacity(len);
            let mut prev = 0usize;
            for _ in 0..len {
                let mut id = 1 + rng.below(config.vocab - 1);
                while id == prev {
                    id = 1 + rng.below(config.vocab - 1);
                }
                ids.push(id);
                prev = id;
            }
            let tokens = tokenize(&ids, config.vocab, config.token_dim)?;
            let speaker = &speakers[u % config.speakers];
            utterances.push(synthesize_utterance(
                &config,
                &mixer,
                &feature_map,
                speaker,
                &tokens,
            ));
        }

        Ok(Corpus {
            config,
            mixer,
            mixer_pinv,
            feature_map,
            utterances,
        })
    }

    /// Per-frame token ids recovered by least-squares inversion through the
    /// mixing matrix, consecutive duplicates collapsed. Argmax ties resolve
    /// to the lowest id; an all-zero frame therefore maps to id 0.
    pub fn recognize(&self, frames: &FrameSeq) -> Vec<usize> {
        let per_frame = self.recognize_frames(frames);
        collapse_consecutive(&per_frame)
    }

    /// Raw per-frame ids before duplicate collapse.
    pub fn recognize_frames(&self, frames: &FrameSeq) -> Vec<usize> {
        let v = self.config.vocab;
        (0..frames.frames)
            .map(|f| {
                let u = self.mixer_pinv.matvec(frames.row(f));
                let mut best = 0usize;
                let mut best_v = u[0];
                for (id, &x) in u.iter().enumerate().take(v).skip(1) {
                    if x > best_v {
                        best_v = x;
                        best = id;
                    }
                }
                best
            })
            .collect()
    }

    /// Frame-mean estimate of the speaker factor block.
    pub fn speaker_embed(&self, frames: &FrameSeq) -> Vec64 {
        let v = self.config.vocab;
        let d = self.config.speaker_dim;
        let mut acc = vec![0.0; d];
        for f in 0..frames.frames {
            let u = self.mixer_pinv.matvec(frames.row(f));
            for (a, &x) in acc.iter_mut().zip(u[v + 1..v + 1 + d].iter()) {
                *a += x;
            }
        }
        if frames.frames > 0 {
            let s = 1.0 / frames.frames as f64;
            for a in acc.iter_mut() {
                *a *= s;
            }
        }
        acc
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut w = Writer::new(CORPUS_MAGIC, CORPUS_VERSION);
        w.u64(c.seed);
        for v in [
            c.speakers,
            c.utterances,
            c.vocab,
            c.token_dim,
            c.speaker_dim,
            c.frame_dim,
            c.feature_dim,
            c.min_tokens,
            c.max_tokens,
            c.max_duration,
        ] {
            w.usize(v);
        }
        w.f64_slice(self.mixer.as_slice());
        w.f64_slice(self.feature_map.as_slice());
        w.usize(self.utterances.len());
        for u in &self.utterances {
            w.u64(u.speaker.speaker_id);
            w.f64_slice(&u.speaker.factors);
            w.usize_slice(&u.tokens.ids);
            w.f64_slice(&u.feature);
            w.usize_slice(&u.truth.durations);
            w.f64_slice(&u.truth.pitch);
            w.usize(u.truth.frames.frames);
            w.f64_slice(&u.truth.frames.data);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Corpus> {
        let mut r = Reader::open(bytes, CORPUS_MAGIC, CORPUS_VERSION)?;
        let seed = r.u64()?;
        let mut dims = [0usize; 10];
        for d in dims.iter_mut() {
            *d = r.usize()?;
        }
        let config = CorpusConfig {
            seed,
            speakers: dims[0],
            utterances: dims[1],
            vocab: dims[2],
            token_dim: dims[3],
            speaker_dim: dims[4],
            frame_dim: dims[5],
            feature_dim: dims[6],
            min_tokens: dims[7],
            max_tokens: dims[8],
            max_duration: dims[9],
        };
        config.validate()?;
        let mixer = Mat64::from_flat(config.frame_dim, config.mix_input_dim(), r.f64_vec()?);
        let feature_map = Mat64::from_flat(config.feature_dim, config.frame_dim, r.f64_vec()?);
        let count = r.usize()?;
        let mut utterances = Vec::with_capacity(count);
        for _ in 0..count {
            let speaker_id = r.u64()?;
            let factors = r.f64_vec()?;
            let ids = r.usize_vec()?;
            let feature = r.f64_vec()?;
            let durations = r.usize_vec()?;
            let pitch = r.f64_vec()?;
            let frames = r.usize()?;
            let data = r.f64_vec()?;
            if data.len() != frames * config.frame_dim {
                return Err(Error::decode("frame data length mismatch"));
            }
            utterances.push(Utterance {
                speaker: SpeakerProfile {
                    speaker_id,
                    factors,
                },
                tokens: tokenize(&ids, config.vocab, config.token_dim)?,
                feature,
                truth: GroundTruth {
                    durations,
                    pitch,
                    frames: FrameSeq::from_flat(frames, config.frame_dim, data),
                },
            });
        }
        r.done()?;
        let mixer_pinv = mixer.left_pinv()?;
        Ok(Corpus {
            config,
            mixer,
            mixer_pinv,
            feature_map,
            utterances,
        })
    }

    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest {
            format: String::from_utf8_lossy(CORPUS_MAGIC).into_owned(),
            version: CORPUS_VERSION,
            seed: self.config.seed,
            speakers: self.config.speakers,
            utterances: self.utterances.len(),
            vocab: self.config.vocab,
            token_dim: self.config.token_dim,
            speaker_dim: self.config.speaker_dim,
            frame_dim: self.config.frame_dim,
            feature_dim: self.config.feature_dim,
            total_frames: self.utterances.iter().map(|u| u.truth.frames.frames).sum(),
        }
    }
}

/// Draws the mixing matrix, verifying the oracle inverse actually inverts it
/// to 1e-9 (the working definition of "full column rank, well conditioned").
/// Redraws with a fresh labeled stream on failure, bounded retries.
fn draw_mixer(config: &CorpusConfig, root: &SeededRng) -> Result<(Mat64, Mat64)> {
    for attempt in 0..8 {
        let mut rng = root.child(&format!("corpus.mixer.{attempt}"));
        let g = Mat64::from_fn(config.frame_dim, config.mix_input_dim(), |_, _| {
            0.5 * rng.normal()
        });
        let pinv = match g.left_pinv() {
            Ok(p) => p,
            Err(_) => continue,
        };
        let check = pinv.matmul(&g);
        let mut worst: f64 = 0.0;
        for r in 0..check.rows() {
            for c in 0..check.cols() {
                let want = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((check.get(r, c) - want).abs());
            }
        }
        if worst < 1e-9 {
            return Ok((g, pinv));
        }
    }
    Err(Error::Construction(
        "could not draw a well-conditioned mixing matrix".into(),
    ))
}

/// Human-readable sidecar describing a corpus file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format: String,
    pub version: u16,
    pub seed: u64,
    pub speakers: usize,
    pub utterances: usize,
    pub vocab: usize,
    pub token_dim: usize,
    pub speaker_dim: usize,
    pub frame_dim: usize,
    pub feature_dim: usize,
    pub total_frames: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> CorpusConfig {
        CorpusConfig {
            seed: 5,
            speakers: 4,
            utterances: 24,
            ..CorpusConfig::default()
        }
    }

    #[test]
    fn speaker_generation_contract() {
        let a = generate_speaker(9, 0, 3);
        let b = generate_speaker(9, 0, 3);
        assert_eq!(a, b);
        assert_eq!(a.factors.len(), 3);
        let c = generate_speaker(9, 1, 3);
        assert_ne!(a.factors, c.factors);
        assert!(a.factors.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn tokenize_examples() {
        let t = tokenize(&[0], 16, 8).unwrap();
        assert_eq!(t.embedded[0], 0.0);
        assert!(t.embedded[1..].iter().all(|&v| v == 0.0));

        let t = tokenize(&[15], 16, 8).unwrap();
        assert_eq!(t.embedded[0], 1.0);

        let t = tokenize(&[3, 7, 2], 16, 8).unwrap();
        assert_eq!(de_embed_tokens(&t.embedded, 16), vec![3, 7, 2]);

        assert!(tokenize(&[16], 16, 8).is_err());
        assert!(tokenize(&[1; 9], 16, 8).is_err());
    }

    #[test]
    fn utterance_determinism_and_structure() {
        let cfg = small_config();
        let a = Corpus::generate(cfg.clone()).unwrap();
        let b = Corpus::generate(cfg).unwrap();
        assert_eq!(a.utterances[0], b.utterances[0]);

        for u in &a.utterances {
            assert_eq!(u.truth.total_frames(), u.truth.frames.frames);
            assert_eq!(u.truth.pitch.len(), u.truth.frames.frames);
            assert!(u.truth.durations.iter().all(|&d| (1..=4).contains(&d)));
        }
    }

    #[test]
    fn same_tokens_same_durations_different_speakers() {
        let cfg = small_config();
        let corpus = Corpus::generate(cfg.clone()).unwrap();
        let s0 = generate_speaker(cfg.seed, 100, cfg.speaker_dim);
        let s1 = generate_speaker(cfg.seed, 101, cfg.speaker_dim);
        let tokens = tokenize(&[3, 9, 4, 3], cfg.vocab, cfg.token_dim).unwrap();
        let u0 = synthesize_utterance(&cfg, &corpus.mixer, &corpus.feature_map, &s0, &tokens);
        let u1 = synthesize_utterance(&cfg, &corpus.mixer, &corpus.feature_map, &s1, &tokens);
        assert_eq!(u0.truth.durations, u1.truth.durations);
        assert_ne!(u0.truth.pitch, u1.truth.pitch);
        assert_ne!(u0.truth.frames.data, u1.truth.frames.data);
    }

    #[test]
    fn recognize_inverts_synthesis_noiselessly() {
        let corpus = Corpus::generate(small_config()).unwrap();
        for u in &corpus.utterances {
            assert_eq!(corpus.recognize(&u.truth.frames), u.tokens.ids);
        }
    }

    #[test]
    fn recognize_survives_tiny_noise() {
        let corpus = Corpus::generate(small_config()).unwrap();
        let mut rng = SeededRng::new(77);
        for u in corpus.utterances.iter().take(8) {
            let mut noisy = u.truth.frames.clone();
            for v in noisy.data.iter_mut() {
                *v += 1e-6 * rng.normal();
            }
            assert_eq!(corpus.recognize(&noisy), u.tokens.ids);
        }
    }

    #[test]
    fn recognize_all_zero_frame_ties_to_lowest_id() {
        let corpus = Corpus::generate(small_config()).unwrap();
        let zero = FrameSeq::zeros(3, corpus.config.frame_dim);
        assert_eq!(corpus.recognize_frames(&zero), vec![0, 0, 0]);
        assert_eq!(corpus.recognize(&zero), vec![0]);
    }

    #[test]
    fn speaker_embedding_is_exact_on_clean_frames() {
        let corpus = Corpus::generate(small_config()).unwrap();
        for u in &corpus.utterances {
            let est = corpus.speaker_embed(&u.truth.frames);
            for (a, b) in est.iter().zip(u.speaker.factors.iter()) {
                assert!(
                    (a - b).abs() < 1e-9,
                    "speaker factor error {}",
                    (a - b).abs()
                );
            }
        }
    }

    #[test]
    fn same_speaker_embeddings_align_across_utterances() {
        let corpus = Corpus::generate(small_config()).unwrap();
        // utterances i and i+speakers share a speaker
        let k = corpus.config.speakers;
        for i in 0..k {
            let e0 = corpus.speaker_embed(&corpus.utterances[i].truth.frames);
            let e1 = corpus.speaker_embed(&corpus.utterances[i + k].truth.frames);
            let c = crate::numkit::cosine_similarity(&e0, &e1).unwrap();
            assert!(c > 0.999);
        }
    }

    #[test]
    fn random_speaker_pairs_rarely_align() {
        // Monte Carlo over 1000 pairs at d_s=8: at least 99% below |cos|=0.9.
        let mut below = 0;
        for pair in 0..1000u64 {
            let a = generate_speaker(123, 2 * pair, 8);
            let b = generate_speaker(123, 2 * pair + 1, 8);
            let c = crate::numkit::cosine_similarity(&a.factors, &b.factors).unwrap();
            if c.abs() < 0.9 {
                below += 1;
            }
        }
        assert!(below >= 990, "only {below}/1000 pairs below 0.9");
    }

    #[test]
    fn binary_round_trip_is_bit_identical() {
        let corpus = Corpus::generate(small_config()).unwrap();
        let bytes = corpus.to_bytes();
        let loaded = Corpus::from_bytes(&bytes).unwrap();
        assert_eq!(bytes, loaded.to_bytes());
        assert_eq!(corpus.utterances.len(), loaded.utterances.len());
        assert_eq!(corpus.utterances[3], loaded.utterances[3]);
    }

    #[test]
    fn invalid_frame_dim_is_rejected() {
        let cfg = CorpusConfig {
            frame_dim: 24,
            ..CorpusConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn generated_ids_avoid_padding_and_adjacent_repeats() {
        let corpus = Corpus::generate(small_config()).unwrap();
        for u in &corpus.utterances {
            assert!(u.tokens.ids.iter().all(|&id| id > 0));
            for w in u.tokens.ids.windows(2) {
                assert_ne!(w[0], w[1]);
            }
        }
    }
}
