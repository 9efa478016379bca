//! Run configuration: one TOML file drives corpus generation, training,
//! and the sweep harness. Unknown keys are rejected so a config diff is a
//! complete description of an experiment.

use crate::baseline::{LdpcConfig, PcmConfig};
use crate::corpus::CorpusConfig;
use crate::error::{Error, Result};
use crate::kb::KbConfig;
use crate::link::{ChannelKind, LinkConfig};
use crate::metrics::BITS_PER_REAL;
use crate::synth::SynthConfig;
use crate::train::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub pcm: PcmConfig,
    pub ldpc: LdpcConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Scheme tags: `{semantic|pcm_ldpc}_{awgn|rayleigh}`.
    pub schemes: Vec<String>,
    pub snr_grid_db: Vec<f64>,
    pub budget_bits: Vec<u64>,
    pub trials: u64,
    /// Worker threads for trials; output is independent of this.
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            schemes: vec![
                "semantic_awgn".into(),
                "semantic_rayleigh".into(),
                "pcm_ldpc_awgn".into(),
                "pcm_ldpc_rayleigh".into(),
            ],
            snr_grid_db: vec![-5.0, 0.0, 5.0, 10.0, 15.0],
            budget_bits: vec![1536],
            trials: 100,
            jobs: 1,
        }
    }
}

/// Scheme family: the learned analog stack or the classical digital chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeFamily {
    Semantic,
    PcmLdpc,
}

/// Splits a scheme tag into family and channel.
pub fn parse_scheme(tag: &str) -> Result<(SchemeFamily, ChannelKind)> {
    let (family, channel) = if let Some(rest) = tag.strip_prefix("semantic_") {
        (SchemeFamily::Semantic, rest)
    } else if let Some(rest) = tag.strip_prefix("pcm_ldpc_") {
        (SchemeFamily::PcmLdpc, rest)
    } else {
        return Err(Error::Config(format!("unknown scheme '{tag}'")));
    };
    let kind = match channel {
        "awgn" => ChannelKind::Awgn,
        "rayleigh" => ChannelKind::Rayleigh,
        other => return Err(Error::Config(format!("unknown channel '{other}' in '{tag}'"))),
    };
    Ok((family, kind))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Output directory for corpus, checkpoints, and sweep CSVs.
    pub out_dir: String,
    pub corpus: CorpusConfig,
    pub kb: KbConfig,
    pub link: LinkConfig,
    pub baseline: BaselineConfig,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            master_seed: 7,
            out_dir: "runs".into(),
            corpus: CorpusConfig::default(),
            kb: KbConfig::default(),
            link: LinkConfig::default(),
            baseline: BaselineConfig::default(),
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Signal dimension a budget buys under the analog accounting rule.
    pub fn signal_len_for_budget(&self, budget_bits: u64) -> Result<usize> {
        if !budget_bits.is_multiple_of(BITS_PER_REAL) {
            return Err(Error::Config(format!(
                "budget {budget_bits} is not a multiple of {BITS_PER_REAL} bits per real dimension"
            )));
        }
        let d = (budget_bits / BITS_PER_REAL) as usize;
        if d == 0 || !d.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "budget {budget_bits} maps to signal dimension {d}, which must be positive and even"
            )));
        }
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.kb.validate()?;
        self.link.validate()?;
        self.synth.validate()?;
        self.train.validate()?;
        if self.corpus.feature_dim != self.kb.feature_dim {
            return Err(Error::Config(format!(
                "corpus feature_dim {} must equal kb feature_dim {}",
                self.corpus.feature_dim, self.kb.feature_dim
            )));
        }
        if self.baseline.ldpc.k >= self.baseline.ldpc.n || self.baseline.ldpc.k == 0 {
            return Err(Error::Config("ldpc requires 0 < k < n".into()));
        }
        if self.baseline.pcm.bits == 0 || self.baseline.pcm.bits > 32 {
            return Err(Error::Config("pcm bits must be in 1..=32".into()));
        }
        if self.sweep.trials == 0 || self.sweep.jobs == 0 {
            return Err(Error::Config("sweep trials and jobs must be positive".into()));
        }
        if self.sweep.schemes.is_empty() {
            return Err(Error::Config("sweep needs at least one scheme".into()));
        }
        for tag in &self.sweep.schemes {
            parse_scheme(tag)?;
        }
        for &b in &self.sweep.budget_bits {
            let d = self.signal_len_for_budget(b)?;
            if d > self.link.signal_len {
                return Err(Error::Config(format!(
                    "budget {b} maps to signal dimension {d} above the parity dimension {}",
                    self.link.signal_len
                )));
            }
        }
        if !self
            .sweep
            .snr_grid_db
            .iter()
            .all(|s| s.is_finite())
        {
            return Err(Error::Config("snr grid must be finite".into()));
        }
        Ok(())
    }
}

/// The commented reference configuration `--print-defaults` emits. Parsing
/// it yields exactly `RunConfig::default()` (asserted in tests).
pub const DEFAULT_CONFIG_TOML: &str = r#"# Reference configuration. Every key is shown with its default; unknown
# keys are rejected on load. A run is a pure function of this file.

master_seed = 7
out_dir = "runs"

[corpus]
seed = 1
speakers = 20
utterances = 200
vocab = 32          # token vocabulary V (id 0 reserved as padding)
token_dim = 32      # d_t
speaker_dim = 8     # d_s
frame_dim = 48      # d_ss (>= vocab + 1 + speaker_dim for exact oracles)
feature_dim = 64    # d_w
min_tokens = 4
max_tokens = 10
max_duration = 4    # frames per token, drawn from 1..=4

[kb]
stages = 4          # quantization stages N
codebook_size = 64  # codes per stage M
feature_dim = 64    # d_w, must match corpus.feature_dim
hidden = 64
alpha1 = 1.0        # reconstruction weight
alpha2 = 1.0        # embedding weight
alpha3 = 0.25       # commitment weight
dead_code_steps = 200

[link]
residual_dim = 16   # d_r
signal_len = 96     # d_x at budget parity (even)
hidden = 128

[baseline.pcm]
bits = 8

[baseline.ldpc]
seed = 7
n = 128
k = 64
col_weight = 3
max_iterations = 50
min_sum = false

[synth]
hidden_seq = 32     # d_h
net_hidden = 128
beta0 = 0.05
beta1 = 20.0
t_max = 1.0
t_min = 0.001
infer_steps = 200   # reverse-ODE Euler steps
audio_dim = 96      # vocoder samples per frame

[train]
seed = 1
batch = 16
stage1_steps = 2000
stage2_epochs = 300
lr_kb = 0.001
lr_codebook = 0.01
lr_codec = 0.002
lr_residual = 0.001
lr_prior = 0.001
lr_score = 0.001
snr_min_db = -5.0
snr_max_db = 15.0
divergence_threshold = 1000000.0
grad_clip = 5.0
score_grad_cap = 10.0

[sweep]
schemes = ["semantic_awgn", "semantic_rayleigh", "pcm_ldpc_awgn", "pcm_ldpc_rayleigh"]
snr_grid_db = [-5.0, 0.0, 5.0, 10.0, 15.0]
budget_bits = [1536]
trials = 100
jobs = 1
"#;
