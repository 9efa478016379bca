//! Deterministic desk-scale simulator of a generative semantic communication
//! system for text-to-speech synthesis.
//!
//! The transmitter compresses a speech demonstration feature through residual
//! vector quantization against a learned knowledge base, packs the token
//! vector, a learned residual vector, and the code indices into one packet,
//! and sends it through a trainable analog channel codec over an AWGN or
//! Rayleigh block-fading channel. The receiver reconstructs the feature from
//! the shared knowledge base and regenerates the speech feature trajectory
//! with a score-based diffusion decoder. A classical PCM + LDPC + BPSK chain
//! provides the syntactic baseline, and everything is scored with WER and
//! speaker-similarity metrics over SNR and communication-budget sweeps.
//!
//! Every run is a pure function of its configuration and master seed: RNG
//! streams are counter-based and derived by labeled sub-seeding, so corpus
//! files, checkpoints, and sweep CSVs are byte-identical across reruns.

pub mod baseline;
pub mod bytesio;
pub mod config;
pub mod corpus;
pub mod error;
pub mod harness;
pub mod kb;
pub mod link;
pub mod metrics;
pub mod numkit;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
