//! Shared semantic knowledge bases: residual vector quantization of the
//! demonstration feature.
//!
//! The transmitter side maps the feature `w` through a source network into
//! `z_1`, then runs N quantization stages: each stage encoder refines the
//! current residual, the nearest codebook entry is selected, and the
//! residual `z_{i+1} = z_i^e - c*_i` moves to the next stage. The receiver
//! side looks the indices up in the same codebooks, runs each code through a
//! stage decoder, sums, and reconstructs `w̃` through an output network.
//! Transmitter and receiver share one codebook storage, so synchrony holds
//! by construction and serialization writes a single copy both ends load.
//!
//! Training gradients are routed VQ-VAE style: the reconstruction loss
//! reaches the encoder side through a straight-through estimator (identity
//! Jacobian across the nearest-code lookup), the embedding loss moves only
//! codebooks, and the commitment loss moves only encoder-side parameters.
//! The residual recurrence treats the selected code as a constant, so
//! reconstruction gradients also reach earlier stages through the chain.

use crate::bytesio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::numkit::{squared_distance, Mat64, MlpGrads, ResidualMlp, SeededRng, Vec64};
use serde::{Deserialize, Serialize};

pub const KB_MAGIC: &[u8; 4] = b"SCKB";
pub const KB_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KbConfig {
    /// Number of quantization stages N.
    pub stages: usize,
    /// Codes per codebook M.
    pub codebook_size: usize,
    /// Feature dimension d_w.
    pub feature_dim: usize,
    /// Hidden width of the stage and source/output networks.
    pub hidden: usize,
    /// Loss weights (reconstruction, embedding, commitment).
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    /// A code unused for this many consecutive steps is reseeded.
    pub dead_code_steps: usize,
}

impl Default for KbConfig {
    fn default() -> Self {
        KbConfig {
            stages: 4,
            codebook_size: 64,
            feature_dim: 64,
            hidden: 64,
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 0.25,
            dead_code_steps: 200,
        }
    }
}

impl KbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 || self.codebook_size == 0 || self.feature_dim == 0 || self.hidden == 0
        {
            return Err(Error::Config("kb dims must be positive".into()));
        }
        if self.alpha1 < 0.0 || self.alpha2 < 0.0 || self.alpha3 < 0.0 {
            return Err(Error::Config("kb loss weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One feature codebook: M codes of dimension d_w, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub codes: Mat64,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.codes.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.rows() == 0
    }

    pub fn code(&self, m: usize) -> &[f64] {
        self.codes.row(m)
    }
}

/// One quantization stage: encoder/decoder residual networks.
#[derive(Debug, Clone, PartialEq)]
pub struct RvqStage {
    pub encoder: ResidualMlp,
    pub decoder: ResidualMlp,
}

/// Transmitter-side encoding result.
#[derive(Debug, Clone, PartialEq)]
pub struct KbEncoding {
    /// Selected code index per stage, each in `0..M`.
    pub indices: Vec<usize>,
    /// Selected codes c*_i.
    pub codes: Vec<Vec64>,
    /// Source vector z_1.
    pub source: Vec64,
    /// Per-stage pre-quantization outputs z_i^e.
    pub pre_quant: Vec<Vec64>,
}

impl KbEncoding {
    /// Sum of the selected codes, the conditioning the residual encoder sees.
    pub fn code_sum(&self) -> Vec64 {
        let mut acc = vec![0.0; self.codes[0].len()];
        for c in &self.codes {
            for (a, b) in acc.iter_mut().zip(c.iter()) {
                *a += b;
            }
        }
        acc
    }
}

/// Nearest code by Euclidean distance; ties break to the lowest index.
pub fn nearest_code<'a>(codebook: &'a Codebook, z: &[f64]) -> Result<(&'a [f64], usize)> {
    if codebook.is_empty() {
        return Err(Error::contract("nearest_code on empty codebook"));
    }
    let mut best = 0usize;
    let mut best_d = squared_distance(codebook.code(0), z);
    for m in 1..codebook.len() {
        let d = squared_distance(codebook.code(m), z);
        if d < best_d {
            best_d = d;
            best = m;
        }
    }
    Ok((codebook.code(best), best))
}

/// The two knowledge bases. Encode walks the transmitter half, decode the
/// receiver half; the codebooks in the middle are shared storage.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub config: KbConfig,
    /// φ_t: converts w into the source vector z_1.
    pub source_net: ResidualMlp,
    /// φ_r: reconstructs w̃ from the summed decoder outputs.
    pub output_net: ResidualMlp,
    pub stages: Vec<RvqStage>,
    pub codebooks: Vec<Codebook>,
}

/// Gradients for every trainable piece of the knowledge base.
#[derive(Debug, Clone)]
pub struct KbGrads {
    pub source_net: MlpGrads,
    pub output_net: MlpGrads,
    pub encoders: Vec<MlpGrads>,
    pub decoders: Vec<MlpGrads>,
    pub codebooks: Vec<Mat64>,
}

impl KbGrads {
    pub fn scale(&mut self, s: f64) {
        self.source_net.scale(s);
        self.output_net.scale(s);
        for g in self.encoders.iter_mut().chain(self.decoders.iter_mut()) {
            g.scale(s);
        }
        for c in self.codebooks.iter_mut() {
            c.scale(s);
        }
    }
}

/// Loss components of one training example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KbLossParts {
    pub reconstruction: f64,
    pub embedding: f64,
    pub commitment: f64,
}

impl KbLossParts {
    pub fn total(&self, cfg: &KbConfig) -> f64 {
        cfg.alpha1 * self.reconstruction
            + cfg.alpha2 * self.embedding
            + cfg.alpha3 * self.commitment
    }
}

impl KnowledgeBase {
    /// Fresh knowledge base, initialized from the labeled sub-seed of this
    /// module's name.
    pub fn new(config: KbConfig, rng: &SeededRng) -> Result<Self> {
        config.validate()?;
        let mut init = rng.child("kb");
        let d = config.feature_dim;
        let h = config.hidden;
        let source_net = ResidualMlp::new(d, h, &mut init);
        let output_net = ResidualMlp::new(d, h, &mut init);
        let stages = (0..config.stages)
            .map(|_| RvqStage {
                encoder: ResidualMlp::new(d, h, &mut init),
                decoder: ResidualMlp::new(d, h, &mut init),
            })
            .collect();
        let mut cb_rng = init.child("codebooks");
        let codebooks = (0..config.stages)
            .map(|_| Codebook {
                codes: Mat64::from_fn(config.codebook_size, d, |_, _| cb_rng.uniform(-0.1, 0.1)),
            })
            .collect();
        Ok(KnowledgeBase {
            config,
            source_net,
            output_net,
            stages,
            codebooks,
        })
    }

    /// All networks exact identities; codebooks zeroed. Used by contract
    /// tests that need hand-placed codes.
    pub fn with_identity_nets(config: KbConfig) -> Result<Self> {
        config.validate()?;
        let d = config.feature_dim;
        let h = config.hidden;
        let stages = (0..config.stages)
            .map(|_| RvqStage {
                encoder: ResidualMlp::identity(d, h),
                decoder: ResidualMlp::identity(d, h),
            })
            .collect();
        let codebooks = (0..config.stages)
            .map(|_| Codebook {
                codes: Mat64::zeros(config.codebook_size, d),
            })
            .collect();
        Ok(KnowledgeBase {
            source_net: ResidualMlp::identity(d, h),
            output_net: ResidualMlp::identity(d, h),
            config,
            stages,
            codebooks,
        })
    }

    /// z_1 = φ_t(w).
    pub fn source_vector(&self, w: &[f64]) -> Result<Vec64> {
        self.check_feature(w)?;
        self.source_net.forward(w)
    }

    fn check_feature(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.config.feature_dim {
            return Err(Error::Contract(format!(
                "feature dimension {} != configured {}",
                w.len(),
                self.config.feature_dim
            )));
        }
        Ok(())
    }

    /// Transmitter-side pass: w -> indices, codes, residual chain.
    pub fn encode(&self, w: &[f64]) -> Result<KbEncoding> {
        let source = self.source_vector(w)?;
        let mut indices = Vec::with_capacity(self.config.stages);
        let mut codes = Vec::with_capacity(self.config.stages);
        let mut pre_quant = Vec::with_capacity(self.config.stages);
        let mut z = source.clone();
        for (stage, codebook) in self.stages.iter().zip(self.codebooks.iter()) {
            let ze = stage.encoder.forward(&z)?;
            let (code, m) = nearest_code(codebook, &ze)?;
            z = crate::numkit::sub(&ze, code);
            indices.push(m);
            codes.push(code.to_vec());
            pre_quant.push(ze);
        }
        Ok(KbEncoding {
            indices,
            codes,
            source,
            pre_quant,
        })
    }

    /// Receiver-side pass: indices -> w̃. An out-of-range index is a decode
    /// error (a corrupted index field upstream).
    pub fn decode(&self, indices: &[usize]) -> Result<Vec64> {
        if indices.len() != self.config.stages {
            return Err(Error::Decode(format!(
                "expected {} indices, got {}",
                self.config.stages,
                indices.len()
            )));
        }
        let mut sum = vec![0.0; self.config.feature_dim];
        for (i, &m) in indices.iter().enumerate() {
            if m >= self.config.codebook_size {
                return Err(Error::Decode(format!(
                    "code index {m} out of range 0..{}",
                    self.config.codebook_size
                )));
            }
            let d = self.stages[i].decoder.forward(self.codebooks[i].code(m))?;
            for (a, b) in sum.iter_mut().zip(d.iter()) {
                *a += b;
            }
        }
        self.output_net.forward(&sum)
    }

    /// Forward + loss + gradients for one training example, accumulated into
    /// `grads`. Returns the loss parts and the encoding.
    pub fn loss_and_grads(
        &self,
        w: &[f64],
        grads: &mut KbGrads,
    ) -> Result<(KbLossParts, KbEncoding)> {
        self.check_feature(w)?;
        let n = self.config.stages;
        let (a1, a2, a3) = (self.config.alpha1, self.config.alpha2, self.config.alpha3);

        // transmitter half with caches
        let (source, source_cache) = self.source_net.forward_cached(w)?;
        let mut z = source.clone();
        let mut enc_caches = Vec::with_capacity(n);
        let mut pre_quant = Vec::with_capacity(n);
        let mut codes: Vec<Vec64> = Vec::with_capacity(n);
        let mut indices = Vec::with_capacity(n);
        for (stage, codebook) in self.stages.iter().zip(self.codebooks.iter()) {
            let (ze, cache) = stage.encoder.forward_cached(&z)?;
            let (code, m) = nearest_code(codebook, &ze)?;
            z = crate::numkit::sub(&ze, code);
            enc_caches.push(cache);
            codes.push(code.to_vec());
            indices.push(m);
            pre_quant.push(ze);
        }

        // receiver half with caches (channel-free: decode the selected codes)
        let mut dec_caches = Vec::with_capacity(n);
        let mut sum = vec![0.0; self.config.feature_dim];
        for (i, code) in codes.iter().enumerate() {
            let (d, cache) = self.stages[i].decoder.forward_cached(code)?;
            for (a, b) in sum.iter_mut().zip(d.iter()) {
                *a += b;
            }
            dec_caches.push(cache);
        }
        let (recon, output_cache) = self.output_net.forward_cached(&sum)?;

        // loss parts
        let reconstruction = squared_distance(w, &recon);
        let mut embedding = 0.0;
        for (ze, c) in pre_quant.iter().zip(codes.iter()) {
            embedding += squared_distance(ze, c);
        }
        let commitment = embedding; // same value, different gradient routing

        // --- backward ---
        // reconstruction loss through the receiver half
        let g_recon: Vec64 = recon
            .iter()
            .zip(w.iter())
            .map(|(r, t)| 2.0 * a1 * (r - t))
            .collect();
        let g_sum = self
            .output_net
            .backward_into(&output_cache, &g_recon, &mut grads.output_net)?;

        // per-stage gradient w.r.t. z_i^e: straight-through from the decode
        // path plus the commitment pull toward the selected code
        let mut g_ze: Vec<Vec64> = Vec::with_capacity(n);
        for i in 0..n {
            let g_code =
                self.stages[i]
                    .decoder
                    .backward_into(&dec_caches[i], &g_sum, &mut grads.decoders[i])?;
            let mut g = g_code; // straight-through: d c*_i / d z_i^e = I
            for ((gi, ze), c) in g.iter_mut().zip(pre_quant[i].iter()).zip(codes[i].iter()) {
                *gi += 2.0 * a3 * (ze - c);
            }
            g_ze.push(g);
        }

        // embedding loss moves only the selected codebook rows
        for i in 0..n {
            let row = grads.codebooks[i].row_mut(indices[i]);
            for ((g, c), ze) in row.iter_mut().zip(codes[i].iter()).zip(pre_quant[i].iter()) {
                *g += 2.0 * a2 * (c - ze);
            }
        }

        // walk the encoder chain backward; the residual recurrence
        // z_{i+1} = z_i^e - ng[c*_i] passes gradients through unchanged
        let mut g_down: Vec64 = vec![0.0; self.config.feature_dim];
        for i in (0..n).rev() {
            let mut upstream = g_ze[i].clone();
            for (u, d) in upstream.iter_mut().zip(g_down.iter()) {
                *u += d;
            }
            g_down =
                self.stages[i]
                    .encoder
                    .backward_into(&enc_caches[i], &upstream, &mut grads.encoders[i])?;
        }
        self.source_net
            .backward_into(&source_cache, &g_down, &mut grads.source_net)?;

        Ok((
            KbLossParts {
                reconstruction,
                embedding,
                commitment,
            },
            KbEncoding {
                indices,
                codes,
                source,
                pre_quant,
            },
        ))
    }

    /// Loss parts evaluated with the code selection pinned to `indices`.
    /// Smooth in every parameter, so finite differences of this function are
    /// the oracle for the differentiable parts of the training gradients.
    pub fn loss_given_indices(&self, w: &[f64], indices: &[usize]) -> Result<KbLossParts> {
        self.check_feature(w)?;
        let mut z = self.source_net.forward(w)?;
        let mut embedding = 0.0;
        let mut sum = vec![0.0; self.config.feature_dim];
        for (i, &m) in indices.iter().enumerate() {
            let ze = self.stages[i].encoder.forward(&z)?;
            let code = self.codebooks[i].code(m);
            embedding += squared_distance(&ze, code);
            z = crate::numkit::sub(&ze, code);
            let d = self.stages[i].decoder.forward(code)?;
            for (a, b) in sum.iter_mut().zip(d.iter()) {
                *a += b;
            }
        }
        let recon = self.output_net.forward(&sum)?;
        Ok(KbLossParts {
            reconstruction: squared_distance(w, &recon),
            embedding,
            commitment: embedding,
        })
    }

    pub fn zero_grads(&self) -> KbGrads {
        KbGrads {
            source_net: self.source_net.zero_grads(),
            output_net: self.output_net.zero_grads(),
            encoders: self.stages.iter().map(|s| s.encoder.zero_grads()).collect(),
            decoders: self.stages.iter().map(|s| s.decoder.zero_grads()).collect(),
            codebooks: self
                .codebooks
                .iter()
                .map(|c| Mat64::zeros(c.codes.rows(), c.codes.cols()))
                .collect(),
        }
    }

    /// One SGD step over every knowledge-base parameter. Codebooks take
    /// their own rate so they track the moving encoder outputs.
    pub fn apply_grads(&mut self, grads: &KbGrads, lr_nets: f64, lr_codebook: f64) {
        self.source_net.sgd(&grads.source_net, lr_nets);
        self.output_net.sgd(&grads.output_net, lr_nets);
        for (stage, (ge, gd)) in self
            .stages
            .iter_mut()
            .zip(grads.encoders.iter().zip(grads.decoders.iter()))
        {
            stage.encoder.sgd(ge, lr_nets);
            stage.decoder.sgd(gd, lr_nets);
        }
        for (cb, g) in self.codebooks.iter_mut().zip(grads.codebooks.iter()) {
            crate::numkit::sgd_step(cb.codes.as_mut_slice(), g.as_slice(), lr_codebook);
        }
    }

    /// Replaces one code, used by the dead-code refresh.
    pub fn reseed_code(&mut self, stage: usize, index: usize, value: &[f64]) {
        self.codebooks[stage]
            .codes
            .row_mut(index)
            .copy_from_slice(value);
    }

    /// Seeds every codebook k-means++ style from a batch of features:
    /// stage by stage, residuals are computed with the current networks and
    /// codebook i is seeded from the stage-i residual cloud.
    pub fn init_codebooks_kmeanspp(&mut self, features: &[Vec64], rng: &SeededRng) -> Result<()> {
        if features.is_empty() {
            return Err(Error::contract("k-means++ init needs a nonempty batch"));
        }
        let mut cloud: Vec<Vec64> = features
            .iter()
            .map(|w| self.source_net.forward(w))
            .collect::<Result<_>>()?;
        for i in 0..self.config.stages {
            let ze: Vec<Vec64> = cloud
                .iter()
                .map(|z| self.stages[i].encoder.forward(z))
                .collect::<Result<_>>()?;
            let mut seed_rng = rng.child(&format!("kb.init.stage{i}"));
            let seeds = kmeans_pp(&ze, self.config.codebook_size, &mut seed_rng);
            for (m, s) in seeds.iter().enumerate() {
                self.codebooks[i].codes.row_mut(m).copy_from_slice(s);
            }
            // next stage sees the residuals under the fresh codebook
            cloud = ze
                .iter()
                .map(|z| {
                    let (code, _) = nearest_code(&self.codebooks[i], z)?;
                    Ok(crate::numkit::sub(z, code))
                })
                .collect::<Result<_>>()?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut w = Writer::new(KB_MAGIC, KB_VERSION);
        w.u32(c.stages as u32);
        w.u32(c.codebook_size as u32);
        w.u32(c.feature_dim as u32);
        w.u32(c.hidden as u32);
        w.f64(c.alpha1);
        w.f64(c.alpha2);
        w.f64(c.alpha3);
        w.u32(c.dead_code_steps as u32);
        for cb in &self.codebooks {
            w.f64_slice(cb.codes.as_slice());
        }
        for stage in &self.stages {
            w.f64_slice(&stage.encoder.params_flat());
            w.f64_slice(&stage.decoder.params_flat());
        }
        w.f64_slice(&self.source_net.params_flat());
        w.f64_slice(&self.output_net.params_flat());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<KnowledgeBase> {
        let mut r = Reader::open(bytes, KB_MAGIC, KB_VERSION)?;
        let config = KbConfig {
            stages: r.u32()? as usize,
            codebook_size: r.u32()? as usize,
            feature_dim: r.u32()? as usize,
            hidden: r.u32()? as usize,
            alpha1: r.f64()?,
            alpha2: r.f64()?,
            alpha3: r.f64()?,
            dead_code_steps: r.u32()? as usize,
        };
        let mut kb = KnowledgeBase::with_identity_nets(config.clone())?;
        for i in 0..config.stages {
            let flat = r.f64_vec()?;
            if flat.len() != config.codebook_size * config.feature_dim {
                return Err(Error::decode("codebook size mismatch"));
            }
            kb.codebooks[i].codes =
                Mat64::from_flat(config.codebook_size, config.feature_dim, flat);
        }
        for i in 0..config.stages {
            kb.stages[i].encoder.set_params_flat(&r.f64_vec()?);
            kb.stages[i].decoder.set_params_flat(&r.f64_vec()?);
        }
        kb.source_net.set_params_flat(&r.f64_vec()?);
        kb.output_net.set_params_flat(&r.f64_vec()?);
        r.done()?;
        Ok(kb)
    }
}

/// k-means++ seeding: first seed uniform, then distance-squared weighted.
/// If the cloud is smaller than k, remaining seeds are jittered copies.
fn kmeans_pp(points: &[Vec64], k: usize, rng: &mut SeededRng) -> Vec<Vec64> {
    let mut seeds: Vec<Vec64> = Vec::with_capacity(k);
    seeds.push(points[rng.below(points.len())].clone());
    let mut dist2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &seeds[0]))
        .collect();
    while seeds.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total <= 1e-30 {
            // cloud exhausted; jitter an existing seed
            let base = seeds[rng.below(seeds.len())].clone();
            base.iter().map(|v| v + 1e-3 * rng.normal()).collect()
        } else {
            let mut target = rng.next_f64() * total;
            let mut pick = points.len() - 1;
            for (i, d) in dist2.iter().enumerate() {
                if target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            points[pick].clone()
        };
        for (d, p) in dist2.iter_mut().zip(points.iter()) {
            *d = d.min(squared_distance(p, &next));
        }
        seeds.push(next);
    }
    seeds
}
