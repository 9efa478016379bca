//! Evaluation metrics and trial records.
//!
//! WER is token-level Levenshtein distance normalized by reference length,
//! reported twice per trial: on the decoded token vector (channel damage
//! only) and on the recognized synthesized frames (channel + synthesis
//! damage). SPK is the cosine similarity between the speaker embedding of
//! the synthesized frames and the true speaker factors. Budget accounting
//! is a fixed convention: analog schemes spend 16 bits per real signal
//! dimension, the digital baseline spends exact channel bits including the
//! code-rate expansion.

use crate::corpus::{Corpus, FrameSeq};
use crate::error::{Error, Result};
use crate::numkit::cosine_similarity;

/// Token-level Levenshtein distance with unit costs.
pub fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    let (n, m) = (a.len(), b.len());
    if n == 0 {
        return m;
    }
    if m == 0 {
        return n;
    }
    let mut prev: Vec<usize> = (0..=m).collect();
    let mut cur = vec![0usize; m + 1];
    for i in 1..=n {
        cur[0] = i;
        for j in 1..=m {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Word error rate: edit distance over reference length. Errors on an empty
/// reference.
pub fn wer(reference: &[usize], hypothesis: &[usize]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::contract("wer needs a nonempty reference"));
    }
    Ok(levenshtein(reference, hypothesis) as f64 / reference.len() as f64)
}

/// Speaker similarity of synthesized frames against the true factors.
/// A zero embedding is recorded as -1 with the degeneracy flag set.
pub fn spk(corpus: &Corpus, frames: &FrameSeq, true_factors: &[f64]) -> (f64, bool) {
    if frames.frames == 0 {
        return (-1.0, true);
    }
    let embed = corpus.speaker_embed(frames);
    match cosine_similarity(&embed, true_factors) {
        Ok(c) => (c, false),
        Err(_) => (-1.0, true),
    }
}

/// Bits per real signal dimension charged to analog schemes.
pub const BITS_PER_REAL: u64 = 16;

/// Budget charge for an analog packet of `signal_len` real dimensions.
pub fn bits_used_analog(signal_len: usize) -> u64 {
    signal_len as u64 * BITS_PER_REAL
}

/// Budget charge for a digital transmission: source bits padded up to
/// codeword multiples, times the n/k expansion.
pub fn bits_used_digital(source_bits: usize, n: usize, k: usize) -> u64 {
    (source_bits.div_ceil(k) * n) as u64
}

/// One simulated transmission. Immutable once written.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub scheme: String,
    pub snr_db: f64,
    pub budget_bits: u64,
    pub seed: u64,
    pub trial: u64,
    pub wer_token: f64,
    pub wer_synth: f64,
    pub spk: f64,
    pub outage: bool,
    /// Fading realization behind this trial (not part of the CSV schema).
    pub h: (f64, f64),
}

/// Exactly the schema the sweep harness writes.
pub const CSV_HEADER: &str = "scheme,snr_db,budget_bits,seed,trial,wer_token,wer_synth,spk,outage";

/// Canonical row order: (scheme, snr_db, budget_bits, seed, trial).
pub fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.snr_db.partial_cmp(&b.snr_db).expect("snr is finite"))
            .then(a.budget_bits.cmp(&b.budget_bits))
            .then(a.seed.cmp(&b.seed))
            .then(a.trial.cmp(&b.trial))
    });
}

/// Renders records (already sorted) into CSV bytes, header included.
pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{}\n",
            r.scheme,
            r.snr_db,
            r.budget_bits,
            r.seed,
            r.trial,
            r.wer_token,
            r.wer_synth,
            r.spk,
            u8::from(r.outage)
        ));
    }
    out
}

/// Per-point means appended next to the raw rows.
pub const SUMMARY_HEADER: &str =
    "scheme,snr_db,budget_bits,trials,mean_wer_token,mean_wer_synth,mean_spk,outages";

/// Aggregates sorted records into one summary row per (scheme, snr, budget).
pub fn summarize(records: &[TrialRecord]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    let mut i = 0;
    while i < records.len() {
        let key = (
            records[i].scheme.clone(),
            records[i].snr_db,
            records[i].budget_bits,
        );
        let mut j = i;
        let (mut wt, mut ws, mut sp, mut outages) = (0.0, 0.0, 0.0, 0u64);
        while j < records.len()
            && records[j].scheme == key.0
            && records[j].snr_db == key.1
            && records[j].budget_bits == key.2
        {
            wt += records[j].wer_token;
            ws += records[j].wer_synth;
            sp += records[j].spk;
            outages += u64::from(records[j].outage);
            j += 1;
        }
        let n = (j - i) as f64;
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{}\n",
            key.0,
            key.1,
            key.2,
            j - i,
            wt / n,
            ws / n,
            sp / n,
            outages
        ));
        i = j;
    }
    out
}
