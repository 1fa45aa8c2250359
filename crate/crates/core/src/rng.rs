//! Deterministic random-stream derivation.
//!
//! Every random decision in a run is drawn from a stream addressed by
//! `(master seed, domain, a, b)`. Streams are derived statelessly, so user
//! randomization can be farmed out to any number of workers and still produce
//! bit-identical results: worker scheduling never touches stream contents.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Namespaces for derived streams. Keeping domains disjoint means e.g. the
/// shuffle permutation can never alias a user's flip stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamDomain {
    /// Synthetic dataset generation.
    Data = 1,
    /// Per-message randomized response; `a` = user index, `b` = message index.
    Flip = 2,
    /// The shuffler's permutation.
    Shuffle = 3,
    /// Forged messages from corrupt users; `a` = user index, `b` = message index.
    Forge = 4,
    /// Per-trial master seeds in multi-trial experiments; `a` = trial index.
    Trial = 5,
    /// Monte Carlo sampling inside the privacy audit.
    Noise = 6,
    /// Hadamard-response encoding and blanket messages.
    Hadamard = 7,
    /// Per-repetition column simulation in the count-min fast path.
    Column = 8,
}

/// splitmix64 finalizer; good avalanche, zero state.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn lane(master: u64, salt: u64, domain: u64, a: u64, b: u64) -> u64 {
    let mut s = mix64(master ^ salt);
    s = mix64(s ^ domain);
    s = mix64(s ^ a);
    mix64(s ^ b)
}

/// Derive a 256-bit ChaCha seed from the addressing tuple. Two independent
/// 64-bit mixing lanes feed the key, so distinct tuples collide with
/// probability ~2^-128 rather than ~2^-64.
fn derive_seed(master: u64, domain: StreamDomain, a: u64, b: u64) -> [u8; 32] {
    let d = domain as u64;
    let words = [
        lane(master, 0x243f_6a88_85a3_08d3, d, a, b),
        lane(master, 0x1319_8a2e_0370_7344, d, a, b),
        lane(master, 0xa409_3822_299f_31d0, d, a, b),
        lane(master, 0x082e_fa98_ec4e_6c89, d, a, b),
    ];
    let mut seed = [0u8; 32];
    for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    seed
}

/// A fresh stream for `(master, domain, a, b)`.
pub fn stream(master: u64, domain: StreamDomain, a: u64, b: u64) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(derive_seed(master, domain, a, b))
}

/// Master seed for trial `t` of an experiment seeded with `master`.
pub fn trial_seed(master: u64, t: u64) -> u64 {
    lane(
        master,
        0x452a_f9ad_13b2_c1e7,
        StreamDomain::Trial as u64,
        t,
        0,
    )
}

/// Appends the positions in `[0, d)` of independent Bernoulli(`p`) successes,
/// in ascending order, via geometric gap sampling. This is the only Bernoulli
/// position sampler in the crate: the dense and sparse protocol pipelines
/// share it, so equal streams yield equal messages in both representations.
pub fn bernoulli_positions<R: Rng>(d: usize, p: f64, rng: &mut R, out: &mut Vec<u32>) {
    out.clear();
    if p <= 0.0 || d == 0 {
        return;
    }
    if p >= 1.0 {
        out.extend(0..d as u32);
        return;
    }
    let ln_fail = (1.0 - p).ln();
    let d = d as u64;
    let mut i: u64 = 0;
    while i < d {
        let u: f64 = rng.random();
        let gap = ((1.0 - u).ln() / ln_fail).floor();
        if gap >= (d - i) as f64 {
            break;
        }
        i += gap as u64;
        out.push(i as u32);
        i += 1;
    }
}

/// In-place Fisher-Yates; a uniformly random permutation given a uniform
/// stream.
pub fn fisher_yates<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = stream(7, StreamDomain::Flip, 3, 1);
        let mut a2 = stream(7, StreamDomain::Flip, 3, 1);
        let mut b = stream(7, StreamDomain::Flip, 3, 2);
        let xs: Vec<u64> = (0..4).map(|_| a.random()).collect();
        let xs2: Vec<u64> = (0..4).map(|_| a2.random()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.random()).collect();
        assert_eq!(xs, xs2);
        assert_ne!(xs, ys);
    }

    #[test]
    fn bernoulli_positions_edge_probabilities() {
        let mut rng = stream(1, StreamDomain::Flip, 0, 0);
        let mut out = Vec::new();
        bernoulli_positions(10, 0.0, &mut rng, &mut out);
        assert!(out.is_empty());
        bernoulli_positions(10, 1.0, &mut rng, &mut out);
        assert_eq!(out, (0..10).collect::<Vec<u32>>());
    }

    #[test]
    fn bernoulli_positions_marginal_rate() {
        let mut rng = stream(11, StreamDomain::Flip, 0, 0);
        let mut out = Vec::new();
        let (d, p, reps) = (64, 0.3, 20_000usize);
        let mut total = 0usize;
        for _ in 0..reps {
            bernoulli_positions(d, p, &mut rng, &mut out);
            assert!(out.windows(2).all(|w| w[0] < w[1]));
            total += out.len();
        }
        let n = (d * reps) as f64;
        let se = (p * (1.0 - p) / n).sqrt();
        let rate = total as f64 / n;
        assert!((rate - p).abs() < 4.0 * se, "rate {rate} vs p {p}");
    }

    #[test]
    fn fisher_yates_permutes() {
        let mut rng = stream(3, StreamDomain::Shuffle, 0, 0);
        let mut v: Vec<u32> = (0..100).collect();
        fisher_yates(&mut v, &mut rng);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<u32>>());
    }
}
