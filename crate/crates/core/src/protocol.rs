//! The bit-flip histogram protocol: one-hot encoding, per-bit randomized
//! response, fabricated null reports, shuffling, and the de-bias/re-scale
//! analyzer.
//!
//! Each user reports `k + 1` messages: randomized response applied to their
//! one-hot string, plus `k` independent randomizations of the all-zero
//! string. The analyzer computes, per bin,
//! `z_j = (1/n) * sum_i (y_ij - q) / (1 - 2q)`.

use rand::Rng;
use rayon::prelude::*;

use crate::bits::BitMessage;
use crate::error::{Error, Result};
use crate::rng::{bernoulli_positions, fisher_yates, stream, StreamDomain};

/// One user's value: an item in `[1, d]`, representable as the one-hot
/// string with a single 1 at that position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OneHotInput {
    item: u32,
    d: usize,
}

impl OneHotInput {
    pub fn new(item: u32, d: usize) -> Result<Self> {
        if item == 0 || item as usize > d {
            return Err(Error::Domain(format!("item {item} out of range [1, {d}]")));
        }
        Ok(OneHotInput { item, d })
    }

    pub fn item(&self) -> u32 {
        self.item
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dense(&self) -> BitMessage {
        encode_one_hot(self.item, self.d).expect("validated on construction")
    }
}

/// The input vector: `n` items, each in `[1, d]`.
#[derive(Clone, Debug)]
pub struct Dataset {
    items: Vec<u32>,
    d: usize,
}

impl Dataset {
    pub fn new(items: Vec<u32>, d: usize) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Domain(
                "dataset must contain at least one item".into(),
            ));
        }
        if let Some(&bad) = items.iter().find(|&&x| x == 0 || x as usize > d) {
            return Err(Error::Domain(format!("item {bad} out of range [1, {d}]")));
        }
        Ok(Dataset { items, d })
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    /// Per-bin item counts (0-based bins).
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.d];
        for &x in &self.items {
            counts[(x - 1) as usize] += 1;
        }
        counts
    }

    /// The exact frequency vector `hist_j = count_j / n`.
    pub fn histogram(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.counts().into_iter().map(|c| c as f64 / n).collect()
    }
}

/// Protocol configuration: user count, dimension, privacy budget, fabricated
/// messages per user, and the bit-flip probability.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProtocolParams {
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    pub delta: f64,
    pub k: u32,
    pub q: f64,
}

impl ProtocolParams {
    pub fn new(n: usize, d: usize, eps: f64, delta: f64, k: u32, q: f64) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::Domain("n and d must be at least 1".into()));
        }
        if eps.is_nan() || eps <= 0.0 {
            return Err(Error::Domain("eps must be positive".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain("delta must lie in (0, 1)".into()));
        }
        if !(0.0..0.5).contains(&q) {
            return Err(Error::Domain(format!("q={q} must lie in [0, 1/2)")));
        }
        Ok(ProtocolParams {
            n,
            d,
            eps,
            delta,
            k,
            q,
        })
    }

    /// The de-bias scaling factor `1 / (1 - 2q)`.
    pub fn scale(&self) -> f64 {
        1.0 / (1.0 - 2.0 * self.q)
    }

    /// Total messages the shuffler emits: `n * (k + 1)`.
    pub fn message_count(&self) -> usize {
        self.n * (self.k as usize + 1)
    }
}

/// The shuffler's output: `n * (k + 1)` messages in uniformly permuted order.
#[derive(Clone, Debug)]
pub struct ShuffledBatch {
    d: usize,
    messages: Vec<BitMessage>,
}

impl ShuffledBatch {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn messages(&self) -> &[BitMessage] {
        &self.messages
    }
}

/// De-biased frequency estimates. Entries are not clamped to `[0, 1]`; the
/// analyzer's output is unbiased and may overshoot.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub z: Vec<f64>,
    pub params: ProtocolParams,
}

impl Estimate {
    /// Largest absolute deviation from a reference histogram.
    pub fn max_error(&self, hist: &[f64]) -> f64 {
        self.z
            .iter()
            .zip(hist)
            .map(|(z, h)| (z - h).abs())
            .fold(0.0, f64::max)
    }
}

/// Materialize the one-hot string `e_{item,d}` (1-based item).
pub fn encode_one_hot(item: u32, d: usize) -> Result<BitMessage> {
    if item == 0 || item as usize > d {
        return Err(Error::Domain(format!("item {item} out of range [1, {d}]")));
    }
    BitMessage::from_ones(d, &[item - 1])
}

/// Randomized response on a binary string: each bit flips independently with
/// probability `q`. Valid for any `q` in `[0, 1]`; the protocol itself uses
/// `q < 1/2`, but the audit tooling exercises the full range.
pub fn randomize_bits<R: Rng>(x: &BitMessage, q: f64, rng: &mut R) -> Result<BitMessage> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!(
            "flip probability {q} outside [0, 1]"
        )));
    }
    let mut flips = Vec::new();
    bernoulli_positions(x.d(), q, rng, &mut flips);
    let mut y = x.clone();
    for &j in &flips {
        y.toggle(j as usize);
    }
    Ok(y)
}

/// The user-side randomizer: randomized response on the user's one-hot
/// string, then `k` fresh randomizations of the all-zero string. The zero
/// strings play the role of fabricated users and are materialized here, per
/// real user, so every user owns exactly `k + 1` messages.
pub fn randomize_flip<R: Rng>(
    x: &OneHotInput,
    k: u32,
    q: f64,
    rng: &mut R,
) -> Result<Vec<BitMessage>> {
    let mut out = Vec::with_capacity(k as usize + 1);
    out.push(randomize_bits(&x.dense(), q, rng)?);
    let zero = BitMessage::zero(x.d());
    for _ in 0..k {
        out.push(randomize_bits(&zero, q, rng)?);
    }
    Ok(out)
}

/// Uniformly permute the concatenation of all users' messages.
pub fn shuffle<R: Rng>(batches: Vec<Vec<BitMessage>>, rng: &mut R) -> Result<ShuffledBatch> {
    let mut messages: Vec<BitMessage> = batches.into_iter().flatten().collect();
    let d = messages.first().map_or(0, |m| m.d());
    if let Some(bad) = messages.iter().find(|m| m.d() != d) {
        return Err(Error::Domain(format!(
            "dimension mismatch in batch: {} vs {}",
            bad.d(),
            d
        )));
    }
    fisher_yates(&mut messages, rng);
    Ok(ShuffledBatch { d, messages })
}

/// De-bias and re-scale per-bin bit counts:
/// `z_j = (count_j - M q) / (n (1 - 2q))` with `M = n (k + 1)`.
pub(crate) fn analyze_from_counts(counts: &[u64], n: usize, k: u32, q: f64) -> Vec<f64> {
    let m = (n as f64) * (k as f64 + 1.0);
    let denom = n as f64 * (1.0 - 2.0 * q);
    counts.iter().map(|&c| (c as f64 - m * q) / denom).collect()
}

/// The analyzer: sums each bit column and de-biases/re-scales the sums.
pub fn analyze_flip(batch: &ShuffledBatch, params: &ProtocolParams) -> Result<Estimate> {
    if batch.len() != params.message_count() {
        return Err(Error::Domain(format!(
            "batch holds {} messages, expected n(k+1) = {}",
            batch.len(),
            params.message_count()
        )));
    }
    if batch.d() != params.d {
        return Err(Error::Domain(format!(
            "batch dimension {} does not match params d={}",
            batch.d(),
            params.d
        )));
    }
    let mut counts = vec![0u64; params.d];
    for msg in batch.messages() {
        for (wi, &word) in msg.words().iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let tz = w.trailing_zeros() as usize;
                counts[wi * 64 + tz] += 1;
                w &= w - 1;
            }
        }
    }
    Ok(Estimate {
        z: analyze_from_counts(&counts, params.n, params.k, params.q),
        params: *params,
    })
}

fn check_run_inputs(data: &Dataset, params: &ProtocolParams) -> Result<()> {
    if data.n() != params.n || data.d() != params.d {
        return Err(Error::Domain(format!(
            "dataset shape ({}, {}) does not match params ({}, {})",
            data.n(),
            data.d(),
            params.n,
            params.d
        )));
    }
    Ok(())
}

/// Execute the protocol end to end on dense messages: randomize every user,
/// shuffle, analyze. Deterministic given `seed`; every message draws from its
/// own `(seed, user, message)` stream, so the result is independent of worker
/// scheduling.
pub fn run_protocol(data: &Dataset, params: &ProtocolParams, seed: u64) -> Result<Estimate> {
    check_run_inputs(data, params)?;
    let (k, q, d) = (params.k, params.q, params.d);
    let per_user: Vec<Vec<BitMessage>> = data
        .items()
        .par_iter()
        .enumerate()
        .map(|(u, &item)| {
            let x = OneHotInput::new(item, d).expect("dataset validated");
            (0..=k)
                .map(|r| {
                    let mut rng = stream(seed, StreamDomain::Flip, u as u64, r as u64);
                    let base = if r == 0 {
                        x.dense()
                    } else {
                        BitMessage::zero(d)
                    };
                    randomize_bits(&base, q, &mut rng).expect("q validated")
                })
                .collect()
        })
        .collect();
    let mut shuffle_rng = stream(seed, StreamDomain::Shuffle, 0, 0);
    let batch = shuffle(per_user, &mut shuffle_rng)?;
    analyze_flip(&batch, params)
}

/// Message ones for one randomized report, written into `out` in sparse
/// index form: the set of flipped positions, symmetric-differenced with the
/// encoded item (if any). Allocation-free once the buffers have grown.
pub(crate) fn flip_message_ones_into<R: Rng>(
    d: usize,
    q: f64,
    item_zero_based: Option<u32>,
    rng: &mut R,
    flips: &mut Vec<u32>,
    out: &mut Vec<u32>,
) {
    bernoulli_positions(d, q, rng, flips);
    out.clear();
    match item_zero_based {
        None => out.extend_from_slice(flips),
        Some(j) => {
            let mut placed = false;
            for &f in flips.iter() {
                if f == j {
                    // flip landed on the item's bit: 1 ^ 1 = 0
                    placed = true;
                    continue;
                }
                if !placed && f > j {
                    out.push(j);
                    placed = true;
                }
                out.push(f);
            }
            if !placed {
                out.push(j);
            }
        }
    }
}

/// Convenience wrapper returning a fresh vector.
pub(crate) fn flip_message_ones<R: Rng>(
    d: usize,
    q: f64,
    item_zero_based: Option<u32>,
    rng: &mut R,
    flips: &mut Vec<u32>,
) -> Vec<u32> {
    let mut out = Vec::new();
    flip_message_ones_into(d, q, item_zero_based, rng, flips, &mut out);
    out
}

/// All `n (k+1)` messages of one execution in compressed sparse form,
/// user-major. Equals the dense pipeline's messages message-for-message
/// under the same seed.
pub(crate) struct SparseBatch {
    offsets: Vec<u64>,
    ones: Vec<u32>,
}

impl SparseBatch {
    pub(crate) fn generate(data: &Dataset, params: &ProtocolParams, seed: u64) -> Self {
        const CHUNK: usize = 2048;
        let (k, q, d) = (params.k, params.q, params.d);
        let per_user = k as usize + 1;
        let chunks: Vec<(Vec<u32>, Vec<u32>)> = data
            .items()
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(ci, items)| {
                let mut lens = Vec::with_capacity(items.len() * per_user);
                let mut ones = Vec::new();
                let mut flips = Vec::new();
                let mut msg = Vec::new();
                for (du, &item) in items.iter().enumerate() {
                    let u = (ci * CHUNK + du) as u64;
                    for r in 0..=k {
                        let mut rng = stream(seed, StreamDomain::Flip, u, r as u64);
                        let item0 = if r == 0 { Some(item - 1) } else { None };
                        flip_message_ones_into(d, q, item0, &mut rng, &mut flips, &mut msg);
                        lens.push(msg.len() as u32);
                        ones.extend_from_slice(&msg);
                    }
                }
                (lens, ones)
            })
            .collect();
        let total_msgs: usize = chunks.iter().map(|(l, _)| l.len()).sum();
        let total_ones: usize = chunks.iter().map(|(_, o)| o.len()).sum();
        let mut offsets = Vec::with_capacity(total_msgs + 1);
        let mut ones = Vec::with_capacity(total_ones);
        offsets.push(0u64);
        for (lens, chunk_ones) in chunks {
            for len in lens {
                offsets.push(offsets.last().unwrap() + len as u64);
            }
            ones.extend_from_slice(&chunk_ones);
        }
        SparseBatch { offsets, ones }
    }

    pub(crate) fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub(crate) fn message(&self, i: usize) -> &[u32] {
        &self.ones[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    fn bin_counts(&self, d: usize) -> Vec<u64> {
        let mut counts = vec![0u64; d];
        for &j in &self.ones {
            counts[j as usize] += 1;
        }
        counts
    }
}

/// Execute the protocol with sparse (index-list) messages. Bit-for-bit
/// identical estimates to [`run_protocol`] under the same seed; memory scales
/// with the number of 1 bits instead of `n (k+1) d`.
pub fn run_protocol_sparse(data: &Dataset, params: &ProtocolParams, seed: u64) -> Result<Estimate> {
    check_run_inputs(data, params)?;
    let batch = SparseBatch::generate(data, params, seed);
    // The analyzer is symmetric, but the shuffle stays in the composition:
    // permute message slots exactly as the dense pipeline would.
    let mut order: Vec<u32> = (0..batch.len() as u32).collect();
    let mut shuffle_rng = stream(seed, StreamDomain::Shuffle, 0, 0);
    fisher_yates(&mut order, &mut shuffle_rng);
    let counts = batch.bin_counts(params.d);
    Ok(Estimate {
        z: analyze_from_counts(&counts, params.n, params.k, params.q),
        params: *params,
    })
}

/// Sample the per-bin 1-counts of a protocol execution directly, without
/// materializing messages. Bit flips are independent across positions, so
/// column `j` holds `Bin(c_j, 1-q) + Bin(M - c_j, q)` ones, independently
/// across bins, where `c_j` counts users holding item `j`. Same output law as
/// the message pipelines, at O(d) cost; used for sweeps whose message volume
/// exceeds memory.
pub fn sample_column_counts<R: Rng>(
    item_counts: &[u64],
    n: usize,
    k: u32,
    q: f64,
    rng: &mut R,
) -> Vec<u64> {
    use rand_distr::{Binomial, Distribution};
    let m = n as u64 * (k as u64 + 1);
    item_counts
        .iter()
        .map(|&c| {
            let hits = if c > 0 {
                Binomial::new(c, 1.0 - q).expect("valid p").sample(rng)
            } else {
                0
            };
            let noise = if m > c {
                Binomial::new(m - c, q).expect("valid p").sample(rng)
            } else {
                0
            };
            hits + noise
        })
        .collect()
}

/// Column-simulation protocol execution (see [`sample_column_counts`]).
pub fn run_protocol_columns(
    data: &Dataset,
    params: &ProtocolParams,
    seed: u64,
) -> Result<Estimate> {
    check_run_inputs(data, params)?;
    let mut rng = stream(seed, StreamDomain::Column, 0, 0);
    let counts = sample_column_counts(&data.counts(), params.n, params.k, params.q, &mut rng);
    Ok(Estimate {
        z: analyze_from_counts(&counts, params.n, params.k, params.q),
        params: *params,
    })
}
