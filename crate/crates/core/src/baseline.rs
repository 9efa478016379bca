//! Syntactic baseline: uniform PCM source coding, a regular LDPC code
//! decoded by sum-product belief propagation, and BPSK over the same
//! `y = h·x + n` channel the semantic scheme uses. Two coded bits ride each
//! complex symbol (I and Q at amplitude 1/sqrt(2)) so the transmit power
//! matches the analog scheme's unit-power convention.

use crate::error::{Error, Result};
use crate::link::{apply_channel, equalize, ChannelRealization};
use crate::numkit::{SeededRng, Vec64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcmConfig {
    /// Bits per sample over the range [-1, 1).
    pub bits: u32,
}

impl Default for PcmConfig {
    fn default() -> Self {
        PcmConfig { bits: 8 }
    }
}

/// Uniform quantization of `[-1, 1)` to `bits`-wide codes, big-endian bits
/// per sample. Inputs are clamped into range first.
pub fn pcm_encode(v: &[f64], cfg: &PcmConfig) -> Vec<u8> {
    let levels = 1u64 << cfg.bits;
    let mut bits = Vec::with_capacity(v.len() * cfg.bits as usize);
    for &x in v {
        let clamped = x.clamp(-1.0, 1.0);
        let q = (((clamped + 1.0) / 2.0) * levels as f64).floor() as u64;
        let q = q.min(levels - 1);
        for b in (0..cfg.bits).rev() {
            bits.push(((q >> b) & 1) as u8);
        }
    }
    bits
}

/// Reconstruction at the bin center: `(q + 0.5)/2^b * 2 - 1`.
pub fn pcm_decode(bits: &[u8], cfg: &PcmConfig) -> Result<Vec64> {
    let b = cfg.bits as usize;
    if !bits.len().is_multiple_of(b) {
        return Err(Error::decode("pcm bitstream length not a multiple of bits per sample"));
    }
    let levels = (1u64 << cfg.bits) as f64;
    let mut out = Vec::with_capacity(bits.len() / b);
    for chunk in bits.chunks(b) {
        let mut q = 0u64;
        for &bit in chunk {
            q = (q << 1) | bit as u64;
        }
        out.push((q as f64 + 0.5) / levels * 2.0 - 1.0);
    }
    Ok(out)
}

/// BPSK mapping: bit 0 -> +1, bit 1 -> -1.
pub fn bpsk_modulate(bits: &[u8]) -> Vec64 {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

/// Per-sample LLR for unit-amplitude BPSK in real noise of variance `sigma2`.
pub fn bpsk_llr(y: &[f64], sigma2: f64) -> Result<Vec64> {
    if sigma2 <= 0.0 {
        return Err(Error::contract("bpsk_llr requires positive noise variance"));
    }
    Ok(y.iter().map(|&v| 2.0 * v / sigma2).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdpcConfig {
    pub seed: u64,
    /// Codeword length n.
    pub n: usize,
    /// Information bits per codeword k.
    pub k: usize,
    /// Ones per column of the parity-check matrix.
    pub col_weight: usize,
    pub max_iterations: usize,
    /// Min-sum check update instead of exact sum-product.
    pub min_sum: bool,
}

impl Default for LdpcConfig {
    fn default() -> Self {
        LdpcConfig {
            seed: 7,
            n: 128,
            k: 64,
            col_weight: 3,
            max_iterations: 50,
            min_sum: false,
        }
    }
}

/// Regular LDPC code with a systematic-equivalent encoder derived from the
/// parity-check matrix by GF(2) elimination.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    pub config: LdpcConfig,
    /// check -> variable adjacency
    pub rows: Vec<Vec<usize>>,
    /// variable -> check adjacency
    pub cols: Vec<Vec<usize>>,
    /// Reduced rows of H (bitmask form) used by the encoder: each reduced
    /// row holds one pivot position plus information positions.
    reduced: Vec<BitRow>,
    pivot_of_row: Vec<usize>,
    /// The k variable positions carrying information bits.
    pub info_positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct BitRow {
    words: Vec<u64>,
}

impl BitRow {
    fn zero(n: usize) -> Self {
        BitRow {
            words: vec![0; n.div_ceil(64)],
        }
    }

    fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn xor_assign(&mut self, other: &BitRow) {
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a ^= b;
        }
    }
}

/// Builds a column-regular parity-check matrix (default weight 3, row weight
/// balanced to 2·col_weight at rate 1/2), runs a 4-cycle reduction pass, and
/// derives the encoder. Rank-deficient draws retry with a fresh labeled
/// stream; persistent failure is a construction error.
pub fn ldpc_build(config: &LdpcConfig) -> Result<LdpcCode> {
    if config.k >= config.n || config.k == 0 {
        return Err(Error::contract("ldpc requires 0 < k < n"));
    }
    if config.col_weight < 2 || config.col_weight > config.n - config.k {
        return Err(Error::contract("ldpc column weight out of range"));
    }
    let root = SeededRng::new(config.seed);
    for attempt in 0..16 {
        let mut rng = root.child(&format!("ldpc.build.{attempt}"));
        if let Some(code) = try_build(config, &mut rng) {
            return Ok(code);
        }
    }
    Err(Error::Construction(
        "ldpc construction failed after bounded retries".into(),
    ))
}

fn try_build(config: &LdpcConfig, rng: &mut SeededRng) -> Option<LdpcCode> {
    let (n, m, wc) = (config.n, config.n - config.k, config.col_weight);

    // place each column's ones on the currently least-loaded rows,
    // breaking ties with the seeded stream
    let mut row_weight = vec![0usize; m];
    let mut cols: Vec<Vec<usize>> = vec![Vec::with_capacity(wc); n];
    for col in cols.iter_mut() {
        let mut order: Vec<usize> = (0..m).collect();
        let keys: Vec<u64> = (0..m).map(|_| rng.next_u64()).collect();
        order.sort_by_key(|&r| (row_weight[r], keys[r]));
        for &r in order.iter().take(wc) {
            col.push(r);
            row_weight[r] += 1;
        }
        col.sort_unstable();
    }

    // 4-cycle reduction: if two columns share two checks, move one edge
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (v, col) in cols.iter().enumerate() {
        for &r in col {
            rows[r].push(v);
        }
    }
    for _pass in 0..4 {
        let mut moved = false;
        for v in 0..n {
            for u in 0..v {
                let shared: Vec<usize> = cols[v]
                    .iter()
                    .copied()
                    .filter(|r| cols[u].contains(r))
                    .collect();
                if shared.len() < 2 {
                    continue;
                }
                // relocate one of v's shared edges to a light row not in v
                let from = shared[rng.below(shared.len())];
                let mut candidates: Vec<usize> =
                    (0..m).filter(|r| !cols[v].contains(r)).collect();
                if candidates.is_empty() {
                    continue;
                }
                let keys: Vec<u64> = (0..m).map(|_| rng.next_u64()).collect();
                candidates.sort_by_key(|&r| (row_weight[r], keys[r]));
                let to = candidates[0];
                cols[v].retain(|&r| r != from);
                cols[v].push(to);
                cols[v].sort_unstable();
                rows[from].retain(|&x| x != v);
                rows[to].push(v);
                row_weight[from] -= 1;
                row_weight[to] += 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    for row in rows.iter_mut() {
        row.sort_unstable();
    }
    if rows.iter().any(|r| r.len() < 2) {
        return None;
    }

    // GF(2) elimination to reduced row echelon form for the encoder
    let mut reduced: Vec<BitRow> = rows
        .iter()
        .map(|r| {
            let mut b = BitRow::zero(n);
            for &v in r {
                b.set(v);
            }
            b
        })
        .collect();
    let mut pivot_of_row = Vec::with_capacity(m);
    let mut is_pivot = vec![false; n];
    let mut rank = 0usize;
    for col in (0..n).rev() {
        // prefer late columns as pivots so early positions stay informational
        let Some(pr) = (rank..m).find(|&r| reduced[r].get(col)) else {
            continue;
        };
        reduced.swap(rank, pr);
        let pivot_row = reduced[rank].clone();
        for (r, row) in reduced.iter_mut().enumerate() {
            if r != rank && row.get(col) {
                row.xor_assign(&pivot_row);
            }
        }
        pivot_of_row.push(col);
        is_pivot[col] = true;
        rank += 1;
        if rank == m {
            break;
        }
    }
    if rank != m {
        return None;
    }
    reduced.truncate(m);
    let info_positions: Vec<usize> = (0..n).filter(|&v| !is_pivot[v]).collect();
    debug_assert_eq!(info_positions.len(), config.k);

    Some(LdpcCode {
        config: config.clone(),
        rows,
        cols,
        reduced,
        pivot_of_row,
        info_positions,
    })
}

impl LdpcCode {
    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    /// Encodes k information bits into an n-bit codeword with `H c = 0`.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.config.k {
            return Err(Error::Contract(format!(
                "expected {} info bits, got {}",
                self.config.k,
                info.len()
            )));
        }
        let mut c = vec![0u8; self.config.n];
        for (&pos, &bit) in self.info_positions.iter().zip(info.iter()) {
            c[pos] = bit & 1;
        }
        // each reduced row: pivot bit = xor of its information positions
        for (row, &pivot) in self.reduced.iter().zip(self.pivot_of_row.iter()) {
            let mut acc = 0u8;
            for &pos in &self.info_positions {
                if row.get(pos) {
                    acc ^= c[pos];
                }
            }
            c[pivot] = acc;
        }
        Ok(c)
    }

    /// Syndrome over the original parity-check matrix.
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        self.rows
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &v| acc ^ (bits[v] & 1)) == 0)
    }

    /// Sum-product (or min-sum) belief propagation. Returns hard decisions
    /// and whether the syndrome reached zero within the iteration cap.
    pub fn decode(&self, llr: &[f64]) -> Result<(Vec<u8>, bool)> {
        if llr.len() != self.config.n {
            return Err(Error::Contract(format!(
                "expected {} llrs, got {}",
                self.config.n,
                llr.len()
            )));
        }
        let mut total: Vec64 = llr.to_vec();
        let mut check_msgs: Vec<Vec64> = self.rows.iter().map(|r| vec![0.0; r.len()]).collect();

        let hard = |total: &[f64]| -> Vec<u8> {
            total.iter().map(|&l| if l < 0.0 { 1 } else { 0 }).collect()
        };

        let mut bits = hard(&total);
        if self.syndrome_ok(&bits) {
            return Ok((bits, true));
        }

        for _iter in 0..self.config.max_iterations {
            for (c, row) in self.rows.iter().enumerate() {
                // variable-to-check extrinsic values
                let q: Vec64 = row
                    .iter()
                    .zip(check_msgs[c].iter())
                    .map(|(&v, &r)| (total[v] - r).clamp(-40.0, 40.0))
                    .collect();
                if self.config.min_sum {
                    let mut sign = 1.0;
                    let mut min1 = f64::INFINITY;
                    let mut min2 = f64::INFINITY;
                    let mut argmin = 0usize;
                    for (j, &x) in q.iter().enumerate() {
                        if x < 0.0 {
                            sign = -sign;
                        }
                        let a = x.abs();
                        if a < min1 {
                            min2 = min1;
                            min1 = a;
                            argmin = j;
                        } else if a < min2 {
                            min2 = a;
                        }
                    }
                    for (j, msg) in check_msgs[c].iter_mut().enumerate() {
                        let excl_min = if j == argmin { min2 } else { min1 };
                        let excl_sign = sign * if q[j] < 0.0 { -1.0 } else { 1.0 };
                        let new = excl_sign * excl_min;
                        total[row[j]] += new - *msg;
                        *msg = new;
                    }
                } else {
                    let t: Vec64 = q.iter().map(|&x| (x / 2.0).tanh()).collect();
                    let mut zero_count = 0;
                    let mut prod_nz = 1.0;
                    for &x in &t {
                        if x == 0.0 {
                            zero_count += 1;
                        } else {
                            prod_nz *= x;
                        }
                    }
                    for (j, msg) in check_msgs[c].iter_mut().enumerate() {
                        let excl = if zero_count > 1 {
                            0.0
                        } else if zero_count == 1 {
                            if t[j] == 0.0 {
                                prod_nz
                            } else {
                                0.0
                            }
                        } else {
                            prod_nz / t[j]
                        };
                        let new = 2.0 * excl.clamp(-0.999_999_999_999_999, 0.999_999_999_999_999).atanh();
                        total[row[j]] += new - *msg;
                        *msg = new;
                    }
                }
            }
            bits = hard(&total);
            if self.syndrome_ok(&bits) {
                return Ok((bits, true));
            }
        }
        Ok((bits, false))
    }
}

/// Gaussian right-tail probability, used as the closed-form uncoded BPSK
/// reference `BER = Q(sqrt(2 Eb/N0))`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    // Numerical Recipes rational approximation, |error| < 1.2e-7
    let t = 1.0 / (1.0 + 0.5 * x.abs());
    let tau = t
        * (-x * x - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        tau
    } else {
        2.0 - tau
    }
}

/// Coded BER over an AWGN channel at the given information-bit Eb/N0,
/// simulating until at least `min_info_bits` have been transmitted.
pub fn coded_ber(code: &LdpcCode, ebn0_db: f64, min_info_bits: usize, rng: &mut SeededRng) -> f64 {
    let rate = code.k() as f64 / code.n() as f64;
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    let sigma2 = 1.0 / (2.0 * rate * ebn0);
    let std = sigma2.sqrt();
    let mut errors = 0usize;
    let mut bits = 0usize;
    while bits < min_info_bits {
        let info: Vec<u8> = (0..code.k()).map(|_| (rng.next_u64() & 1) as u8).collect();
        let cw = code.encode(&info).expect("encode");
        let symbols = bpsk_modulate(&cw);
        let y: Vec64 = symbols.iter().map(|&s| s + std * rng.normal()).collect();
        let llr = bpsk_llr(&y, sigma2).expect("llr");
        let (decoded, _) = code.decode(&llr).expect("decode");
        for (&pos, &b) in code.info_positions.iter().zip(info.iter()) {
            if decoded[pos] != b {
                errors += 1;
            }
        }
        bits += code.k();
    }
    errors as f64 / bits as f64
}

/// What the baseline transmits: the embedded token vector and the
/// demonstration feature, PCM coded in that order so budget truncation
/// sacrifices the feature tail first.
#[derive(Debug, Clone)]
pub struct BaselinePayload {
    pub token: Vec64,
    pub feature: Vec64,
}

/// Receiver-side result of one baseline transmission.
#[derive(Debug, Clone)]
pub struct BaselineReceived {
    pub token: Vec64,
    pub feature: Vec64,
    /// Budget could not carry even the token field.
    pub infeasible: bool,
    /// Channel bits actually used (codeword multiples).
    pub used_channel_bits: u64,
    /// Every codeword reached a zero syndrome.
    pub converged: bool,
    pub outage: bool,
}

/// PCM + LDPC + BPSK over the shared channel. Samples that do not fit the
/// budget are truncated at sample granularity (feature tail first) and
/// reconstructed as 0 at the receiver.
pub fn baseline_transmit(
    payload: &BaselinePayload,
    budget_bits: u64,
    realization: &ChannelRealization,
    code: &LdpcCode,
    pcm: &PcmConfig,
    rng: &mut SeededRng,
) -> Result<BaselineReceived> {
    let b = pcm.bits as usize;
    let token_len = payload.token.len();
    let feature_len = payload.feature.len();
    let total_samples = token_len + feature_len;

    let capacity_info_bits = (budget_bits as usize / code.n()) * code.k();
    if capacity_info_bits < token_len * b {
        return Ok(BaselineReceived {
            token: vec![0.0; token_len],
            feature: vec![0.0; feature_len],
            infeasible: true,
            used_channel_bits: 0,
            converged: false,
            outage: false,
        });
    }
    let keep_samples = total_samples.min(capacity_info_bits / b);

    let mut samples = Vec::with_capacity(total_samples);
    samples.extend_from_slice(&payload.token);
    samples.extend_from_slice(&payload.feature);
    let source_bits = pcm_encode(&samples[..keep_samples], pcm);

    let codewords = source_bits.len().div_ceil(code.k());
    let mut info = source_bits.clone();
    info.resize(codewords * code.k(), 0);

    // all codewords ride one packet: a single fading draw, 2 bits/symbol
    let mut coded = Vec::with_capacity(codewords * code.n());
    for cw in info.chunks(code.k()) {
        coded.extend(code.encode(cw)?);
    }
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let x: Vec64 = bpsk_modulate(&coded).iter().map(|s| s * amp).collect();
    let y = apply_channel(&x, realization, rng);
    let eq = equalize(&y, realization);

    // per-real-dimension noise variance after equalization and rescaling to
    // unit BPSK amplitude
    let h2 = match realization.kind {
        crate::link::ChannelKind::Awgn => 1.0,
        crate::link::ChannelKind::Rayleigh => {
            let m = realization.h_abs();
            if eq.outage {
                1.0
            } else {
                m * m
            }
        }
    };
    let sigma2 = (realization.noise_power / h2).max(1e-12);
    let scaled: Vec64 = eq.signal.iter().map(|v| v / amp).collect();
    let llr = bpsk_llr(&scaled, sigma2)?;

    let mut decoded_bits = Vec::with_capacity(source_bits.len());
    let mut converged = true;
    for cw_llr in llr.chunks(code.n()) {
        let (bits, ok) = code.decode(cw_llr)?;
        converged &= ok;
        for (&pos, _) in code.info_positions.iter().zip(0..code.k()) {
            decoded_bits.push(bits[pos]);
        }
    }
    decoded_bits.truncate(source_bits.len());

    let mut recovered = pcm_decode(&decoded_bits, pcm)?;
    recovered.resize(total_samples, 0.0);
    let feature = recovered.split_off(token_len);

    Ok(BaselineReceived {
        token: recovered,
        feature,
        infeasible: false,
        used_channel_bits: (codewords * code.n()) as u64,
        converged,
        outage: eq.outage,
    })
}
