//! Communication-reduced variants: index-list messages and the count-min
//! domain-hashing transformation with min-over-repetitions analysis.

use rand::Rng;

use crate::bits::BitMessage;
use crate::error::{Error, Result};
use crate::params;
use crate::protocol::{analyze_from_counts, flip_message_ones, Estimate, ProtocolParams};
use crate::rng::mix64;

/// A binary message as the list of its 1 positions, 1-based and strictly
/// increasing. Bijective with the dense representation of the same length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMessage {
    d: usize,
    ones: Vec<u32>,
}

impl SparseMessage {
    pub fn new(d: usize, ones: Vec<u32>) -> Result<Self> {
        for w in ones.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Domain("indices must be strictly increasing".into()));
            }
        }
        if let Some(&last) = ones.last() {
            if last as usize > d || ones[0] == 0 {
                return Err(Error::Domain(format!("indices must lie in [1, {d}]")));
            }
        }
        Ok(SparseMessage { d, ones })
    }

    /// From 0-based positions (the dense pipeline's internal convention).
    pub(crate) fn from_zero_based(d: usize, mut ones: Vec<u32>) -> Self {
        for j in &mut ones {
            *j += 1;
        }
        SparseMessage { d, ones }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// 1-based indices of set bits.
    pub fn ones(&self) -> &[u32] {
        &self.ones
    }

    pub fn weight(&self) -> usize {
        self.ones.len()
    }
}

/// Dense to sparse: list the 1-bit indices (1-based).
pub fn to_sparse(x: &BitMessage) -> SparseMessage {
    SparseMessage::from_zero_based(x.d(), x.ones())
}

/// Sparse back to dense. Exact inverse of [`to_sparse`].
pub fn to_dense(s: &SparseMessage) -> Result<BitMessage> {
    let zero_based: Vec<u32> = s.ones.iter().map(|&j| j - 1).collect();
    BitMessage::from_ones(s.d, &zero_based)
}

/// Expected bit length of an index-list message: `log2(d) * (1 + d q)`.
pub fn expected_sparse_bits(d: usize, q: f64) -> f64 {
    (d as f64).log2() * (1.0 + d as f64 * q)
}

/// Public-randomness hash functions `h^(v): [d] -> [d_hat]`, keyed by
/// `(seed, v)`. A uniformly random function stand-in: a 64-bit mixer reduced
/// to the target range.
#[derive(Clone, Copy, Debug)]
pub struct HashFamily {
    pub v_count: u32,
    pub d: usize,
    pub d_hat: usize,
    pub seed: u64,
}

impl HashFamily {
    pub fn new(v_count: u32, d: usize, d_hat: usize, seed: u64) -> Result<Self> {
        if v_count == 0 || d == 0 || d_hat == 0 {
            return Err(Error::Domain(
                "hash family needs v_count, d, d_hat >= 1".into(),
            ));
        }
        Ok(HashFamily {
            v_count,
            d,
            d_hat,
            seed,
        })
    }

    /// `h^(v)(item)`: both `v` and `item` 1-based; output in `[1, d_hat]`.
    #[inline]
    pub fn hash(&self, v: u32, item: u32) -> u32 {
        debug_assert!(v >= 1 && v <= self.v_count);
        debug_assert!(item >= 1 && item as usize <= self.d);
        let key = mix64(mix64(self.seed ^ 0x9e37_79b9_7f4a_7c15 ^ (v as u64) << 32) ^ item as u64);
        // multiply-shift reduction to [0, d_hat)
        let reduced = ((key as u128 * self.d_hat as u128) >> 64) as u32;
        reduced + 1
    }
}

/// Hashed dimension `ceil(n * (100 d)^(1/V))`; collisions per item then cost
/// at most `(1/100)^V / d` failure mass.
pub fn cm_dimensions(n: usize, d: usize, v_count: u32) -> usize {
    let base = (100.0 * d as f64).powf(1.0 / v_count as f64);
    (n as f64 * base).ceil() as usize
}

/// Per-repetition privacy budget whose advanced composition stays within the
/// target: `(eps / (4 sqrt(V ln(1/delta))), delta / (2V))`.
pub fn cm_privacy_budget(eps: f64, delta: f64, v_count: u32) -> Result<(f64, f64)> {
    if eps.is_nan() || eps <= 0.0 || !(delta > 0.0 && delta < 1.0) || v_count == 0 {
        return Err(Error::Domain(
            "budget needs eps > 0, delta in (0,1), V >= 1".into(),
        ));
    }
    let v = v_count as f64;
    Ok((
        eps / (4.0 * (v * (1.0 / delta).ln()).sqrt()),
        delta / (2.0 * v),
    ))
}

/// A repetition-labeled sparse message over the hashed domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledMessage {
    pub label: u32,
    pub message: SparseMessage,
}

/// Resolved count-min configuration: hashed dimension, per-repetition budget
/// and flip probability for a target `(eps, delta)`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct CountMinConfig {
    pub v_count: u32,
    pub d_hat: usize,
    pub eps_rep: f64,
    pub delta_rep: f64,
    pub k: u32,
    pub q: f64,
    pub scale: f64,
    /// Per-repetition confidence width at level `1/(10 d_hat V)`.
    pub width: f64,
}

/// Solve the count-min configuration for a total `(eps, delta)` budget. `V`
/// defaults to `ceil(log2 d)`; `k` defaults to the smallest feasible value
/// under the stricter count-min threshold (134/5).
pub fn cm_config(
    eps: f64,
    delta: f64,
    n: usize,
    d: usize,
    v_count: Option<u32>,
    k: Option<u32>,
) -> Result<CountMinConfig> {
    let v_count = v_count.unwrap_or_else(|| (d as f64).log2().ceil().max(1.0) as u32);
    let (eps_rep, delta_rep) = cm_privacy_budget(eps, delta, v_count)?;
    let d_hat = cm_dimensions(n, d, v_count);
    let effective_d = d_hat
        .checked_mul(v_count as usize)
        .ok_or_else(|| Error::Infeasible("d_hat * V overflows".into()))?;
    let mode = params::Mode::Maximum { d: effective_d };
    let k_min = params::min_k_with_threshold(
        eps_rep,
        delta_rep,
        n,
        mode,
        params::K_THRESHOLD_NUM_COUNT_MIN,
    )?;
    let k = match k {
        Some(k) if k >= k_min => k,
        Some(k) => {
            return Err(Error::Infeasible(format!(
                "k = {k} below the count-min threshold {k_min}"
            )))
        }
        None => k_min,
    };
    let sol = params::solve_q(eps_rep, delta_rep, n, k, mode)?;
    let width = params::confidence_width(n, k, sol.q, 0.1 / effective_d as f64)?;
    Ok(CountMinConfig {
        v_count,
        d_hat,
        eps_rep,
        delta_rep,
        k,
        q: sol.q,
        scale: sol.scale,
        width,
    })
}

/// The count-min randomizer: for each repetition `v`, run the index-list
/// randomizer on the hashed item at dimension `d_hat` and label every message
/// with `v`. Emits exactly `V (k + 1)` messages.
pub fn randomize_cm<R: Rng>(
    item: u32,
    family: &HashFamily,
    k: u32,
    q: f64,
    rng: &mut R,
) -> Result<Vec<LabeledMessage>> {
    if item == 0 || item as usize > family.d {
        return Err(Error::Domain(format!(
            "item {item} out of range [1, {}]",
            family.d
        )));
    }
    let mut out = Vec::with_capacity(family.v_count as usize * (k as usize + 1));
    let mut scratch = Vec::new();
    for v in 1..=family.v_count {
        let hashed = family.hash(v, item);
        for r in 0..=k {
            let item0 = if r == 0 { Some(hashed - 1) } else { None };
            let ones = flip_message_ones(family.d_hat, q, item0, rng, &mut scratch);
            out.push(LabeledMessage {
                label: v,
                message: SparseMessage::from_zero_based(family.d_hat, ones),
            });
        }
    }
    Ok(out)
}

/// Analyzer of a single repetition from its per-bin 1-counts.
pub fn analyze_repetition(counts: &[u64], n: usize, k: u32, q: f64) -> Vec<f64> {
    analyze_from_counts(counts, n, k, q)
}

/// Compose per-repetition hashed estimates into estimates over the original
/// domain: `z_j = min_v zhat^(v)[h^(v)(j)]`.
pub fn compose_min(family: &HashFamily, per_rep: &[Vec<f64>]) -> Vec<f64> {
    let mut z = vec![f64::INFINITY; family.d];
    for (vi, rep) in per_rep.iter().enumerate() {
        let v = vi as u32 + 1;
        for (j0, zj) in z.iter_mut().enumerate() {
            let hashed = family.hash(v, j0 as u32 + 1) as usize - 1;
            *zj = zj.min(rep[hashed]);
        }
    }
    z
}

/// The count-min analyzer: group messages by label, run the index-list
/// analyzer per repetition at dimension `d_hat`, and take per-bin minima.
/// Strict mode demands exactly `n (k + 1)` messages per label; the lenient
/// mode exists for attack experiments where corrupt users break that count.
pub fn analyze_cm(
    messages: &[LabeledMessage],
    family: &HashFamily,
    params: &ProtocolParams,
    strict: bool,
) -> Result<Estimate> {
    let expected = params.message_count();
    let mut counts = vec![vec![0u64; family.d_hat]; family.v_count as usize];
    let mut label_sizes = vec![0usize; family.v_count as usize];
    for lm in messages {
        if lm.label == 0 || lm.label > family.v_count {
            return Err(Error::Domain(format!(
                "label {} outside [1, {}]",
                lm.label, family.v_count
            )));
        }
        if lm.message.d() != family.d_hat {
            return Err(Error::Domain(
                "message dimension does not match d_hat".into(),
            ));
        }
        let vi = lm.label as usize - 1;
        label_sizes[vi] += 1;
        for &j in lm.message.ones() {
            counts[vi][j as usize - 1] += 1;
        }
    }
    if strict {
        if let Some((vi, &sz)) = label_sizes
            .iter()
            .enumerate()
            .find(|(_, &sz)| sz != expected)
        {
            return Err(Error::Domain(format!(
                "label {} carries {sz} messages, expected n(k+1) = {expected}",
                vi + 1
            )));
        }
    }
    let per_rep: Vec<Vec<f64>> = counts
        .iter()
        .map(|c| analyze_repetition(c, params.n, params.k, params.q))
        .collect();
    Ok(Estimate {
        z: compose_min(family, &per_rep),
        params: *params,
    })
}

/// Text form of a sparse message: `v:i1,i2,...`, label optional.
pub fn format_message(label: Option<u32>, msg: &SparseMessage) -> String {
    let body = msg
        .ones()
        .iter()
        .map(|j| j.to_string())
        .collect::<Vec<_>>()
        .join(",");
    match label {
        Some(v) => format!("{v}:{body}"),
        None => body,
    }
}

/// Parse the text form back into `(label, indices)`.
pub fn parse_message(line: &str, d: usize) -> Result<(Option<u32>, SparseMessage)> {
    let (label, body) = match line.split_once(':') {
        Some((l, rest)) => {
            let v: u32 = l
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad label {l:?}")))?;
            (Some(v), rest)
        }
        None => (None, line),
    };
    let mut ones = Vec::new();
    for tok in body.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let j: u32 = tok
            .parse()
            .map_err(|_| Error::Parse(format!("bad index {tok:?}")))?;
        ones.push(j);
    }
    Ok((label, SparseMessage::new(d, ones)?))
}
