//! Manipulation-attack harness: corrupt coalitions forging messages against
//! the bit-flip protocol and against the Hadamard-response baseline.
//!
//! Attack runs are coupled: honest users' messages are drawn from the same
//! streams in the honest and corrupted executions, so the per-trial
//! difference `z_hon - z_cor` isolates exactly the coalition's contribution.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitMessage;
use crate::error::{Error, Result};
use crate::params::robustness_bound;
use crate::protocol::{Dataset, OneHotInput, ProtocolParams};
use crate::rng::{bernoulli_positions, stream, trial_seed, StreamDomain};

/// Message-forging strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Run the honest randomizer on the target item regardless of true data.
    HonestLie,
    /// Set the target bit in every message; keep all other bits at blanket
    /// noise so the batch looks honest elsewhere.
    FloodBit,
    /// Hadamard-response attack: sample every index from the target's
    /// positive set.
    HadFlood,
}

/// A coalition description: target bin, coalition size, strategy.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AttackSpec {
    pub target: u32,
    pub m: usize,
    pub strategy: Strategy,
}

impl AttackSpec {
    pub fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.target == 0 || self.target as usize > d {
            return Err(Error::Domain(format!(
                "target {} out of range [1, {d}]",
                self.target
            )));
        }
        if self.m > n {
            return Err(Error::Domain(format!(
                "coalition size {} exceeds n = {n}",
                self.m
            )));
        }
        Ok(())
    }
}

fn forged_ones<R: Rng>(
    strategy: Strategy,
    target: u32,
    params: &ProtocolParams,
    msg_index: u32,
    rng: &mut R,
    scratch: &mut Vec<u32>,
) -> Vec<u32> {
    let target0 = target - 1;
    match strategy {
        Strategy::HonestLie => {
            let item0 = if msg_index == 0 { Some(target0) } else { None };
            crate::protocol::flip_message_ones(params.d, params.q, item0, rng, scratch)
        }
        Strategy::FloodBit => {
            bernoulli_positions(params.d, params.q, rng, scratch);
            let mut ones = scratch.clone();
            if let Err(pos) = ones.binary_search(&target0) {
                ones.insert(pos, target0);
            }
            ones
        }
        Strategy::HadFlood => unreachable!("had-flood does not apply to the flip protocol"),
    }
}

/// Forged message sequences for every corrupt user. Each user emits exactly
/// `k + 1` messages, matching the per-user budget honest users obey.
pub fn forge_flip_messages(
    spec: &AttackSpec,
    params: &ProtocolParams,
    seed: u64,
) -> Result<Vec<Vec<BitMessage>>> {
    spec.validate(params.n, params.d)?;
    if spec.strategy == Strategy::HadFlood {
        return Err(Error::Domain(
            "had-flood targets the Hadamard protocol, not the flip protocol".into(),
        ));
    }
    let mut scratch = Vec::new();
    (0..spec.m)
        .map(|u| {
            (0..=params.k)
                .map(|r| {
                    let mut rng = stream(seed, StreamDomain::Forge, u as u64, r as u64);
                    let ones = forged_ones(
                        spec.strategy,
                        spec.target,
                        params,
                        r,
                        &mut rng,
                        &mut scratch,
                    );
                    BitMessage::from_ones(params.d, &ones)
                })
                .collect()
        })
        .collect()
}

/// One coupled honest/corrupted execution pair, reduced to the target bin.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AttackTrial {
    pub trial: u64,
    pub z_honest: f64,
    pub z_corrupt: f64,
    /// `z_corrupt - z_honest`.
    pub bias: f64,
}

/// Multi-trial attack outcome against the flip protocol.
#[derive(Clone, Debug, Serialize)]
pub struct FlipAttackReport {
    pub rows: Vec<AttackTrial>,
    /// The worst-case shift `(m/n)(k+1)/(1-2q)`.
    pub bound: f64,
}

impl FlipAttackReport {
    pub fn mean_bias(&self) -> f64 {
        self.rows.iter().map(|r| r.bias).sum::<f64>() / self.rows.len() as f64
    }

    pub fn max_abs_bias(&self) -> f64 {
        self.rows.iter().map(|r| r.bias.abs()).fold(0.0, f64::max)
    }
}

fn target_bit_count<R: Rng>(
    d: usize,
    q: f64,
    item0: Option<u32>,
    target0: u32,
    rng: &mut R,
    scratch: &mut Vec<u32>,
) -> u64 {
    // Sampling the full flip set keeps this path stream-identical to the
    // message pipeline; only the target bit is tallied.
    let ones = crate::protocol::flip_message_ones(d, q, item0, rng, scratch);
    ones.binary_search(&target0).is_ok() as u64
}

/// Run coupled honest/corrupted executions and report the per-trial target
/// estimates. Honest users share streams across the pair, so the difference
/// is the coalition's doing with probability 1.
pub fn run_attacked_flip(
    data: &Dataset,
    params: &ProtocolParams,
    spec: &AttackSpec,
    seed: u64,
    trials: u64,
) -> Result<FlipAttackReport> {
    spec.validate(params.n, params.d)?;
    if spec.strategy == Strategy::HadFlood {
        return Err(Error::Domain(
            "had-flood targets the Hadamard protocol, not the flip protocol".into(),
        ));
    }
    if data.n() != params.n || data.d() != params.d {
        return Err(Error::Domain("dataset shape does not match params".into()));
    }
    let bound = robustness_bound(params.n, params.k, params.q, spec.m)?;
    let target0 = spec.target - 1;
    let rows: Vec<AttackTrial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let master = trial_seed(seed, t);
            let mut scratch = Vec::new();
            let mut count_hon = 0u64;
            let mut count_cor = 0u64;
            for (u, &item) in data.items().iter().enumerate() {
                for r in 0..=params.k {
                    let mut rng = stream(master, StreamDomain::Flip, u as u64, r as u64);
                    let item0 = if r == 0 { Some(item - 1) } else { None };
                    let bit = target_bit_count(
                        params.d,
                        params.q,
                        item0,
                        target0,
                        &mut rng,
                        &mut scratch,
                    );
                    count_hon += bit;
                    if u >= spec.m {
                        count_cor += bit;
                    }
                }
            }
            for u in 0..spec.m {
                for r in 0..=params.k {
                    let mut rng = stream(master, StreamDomain::Forge, u as u64, r as u64);
                    let ones = forged_ones(
                        spec.strategy,
                        spec.target,
                        params,
                        r,
                        &mut rng,
                        &mut scratch,
                    );
                    count_cor += ones.binary_search(&target0).is_ok() as u64;
                }
            }
            let m_total = params.message_count() as f64;
            let denom = params.n as f64 * (1.0 - 2.0 * params.q);
            let z = |c: u64| (c as f64 - m_total * params.q) / denom;
            AttackTrial {
                trial: t,
                z_honest: z(count_hon),
                z_corrupt: z(count_cor),
                bias: z(count_cor) - z(count_hon),
            }
        })
        .collect();
    Ok(FlipAttackReport { rows, bound })
}

/// One coupled honest/corrupted execution pair with full estimate vectors,
/// for experiment pipelines that also need max-error and top-t metrics of
/// the corrupted output.
pub fn attacked_estimates(
    data: &Dataset,
    params: &ProtocolParams,
    spec: &AttackSpec,
    master: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate(params.n, params.d)?;
    if spec.strategy == Strategy::HadFlood {
        return Err(Error::Domain(
            "had-flood targets the Hadamard protocol, not the flip protocol".into(),
        ));
    }
    let mut scratch = Vec::new();
    let mut count_hon = vec![0u64; params.d];
    let mut count_cor = vec![0u64; params.d];
    for (u, &item) in data.items().iter().enumerate() {
        for r in 0..=params.k {
            let mut rng = stream(master, StreamDomain::Flip, u as u64, r as u64);
            let item0 = if r == 0 { Some(item - 1) } else { None };
            let ones = crate::protocol::flip_message_ones(
                params.d,
                params.q,
                item0,
                &mut rng,
                &mut scratch,
            );
            for &j in &ones {
                count_hon[j as usize] += 1;
                if u >= spec.m {
                    count_cor[j as usize] += 1;
                }
            }
        }
    }
    for u in 0..spec.m {
        for r in 0..=params.k {
            let mut rng = stream(master, StreamDomain::Forge, u as u64, r as u64);
            let ones = forged_ones(
                spec.strategy,
                spec.target,
                params,
                r,
                &mut rng,
                &mut scratch,
            );
            for &j in &ones {
                count_cor[j as usize] += 1;
            }
        }
    }
    let analyze = |c: &[u64]| crate::protocol::analyze_from_counts(c, params.n, params.k, params.q);
    Ok((analyze(&count_hon), analyze(&count_cor)))
}

/// Hadamard-response protocol parameters. The dimension is padded to
/// `D = 2 * next_pow2(d)` so a Sylvester-construction Hadamard matrix of that
/// order exists; bins beyond `d` are unused.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HadParams {
    pub d: usize,
    /// Padded dimension, a power of two.
    pub big_d: usize,
    /// Indices per message.
    pub tau: u32,
    /// Blanket messages per user.
    pub k: u32,
    pub n: usize,
}

/// Parameter schedule `k = ceil((1/eps^2) ln(1/(eps delta)))`,
/// `tau = ceil(log2 n)`, with the asymptotic leading constants fixed to 1.
/// The bias-comparison claims depend only on the scale of `k`, and the
/// convention is explicit so sensitivity sweeps can replace it.
pub fn had_params(eps: f64, delta: f64, n: usize, d: usize) -> Result<HadParams> {
    if eps.is_nan() || eps <= 0.0 || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain("need eps > 0 and delta in (0, 1)".into()));
    }
    if eps * delta >= 1.0 {
        return Err(Error::OutOfRegime(format!(
            "eps * delta = {} must be below 1",
            eps * delta
        )));
    }
    if n == 0 || d == 0 {
        return Err(Error::Domain("n and d must be at least 1".into()));
    }
    let k = (1.0 / (eps * eps) * (1.0 / (eps * delta)).ln()).ceil() as u32;
    let tau = (n as f64).log2().ceil().max(1.0) as u32;
    let big_d = 2 * d.next_power_of_two();
    Ok(HadParams {
        d,
        big_d,
        tau,
        k,
        n,
    })
}

/// A Hadamard-response message: `tau` indices in `[1, D]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HadMessage {
    pub indices: Vec<u32>,
}

/// Whether column `col` (1-based) carries +1 in row `j + 1` of the Sylvester
/// Hadamard matrix of order `big_d`: the parity of `popcount(j & (col - 1))`.
#[inline]
pub fn in_positive_set(j: u32, col: u32) -> bool {
    ((j as u64) & (col as u64 - 1))
        .count_ones()
        .is_multiple_of(2)
}

/// Columns where row `j + 1` of the order-`big_d` Sylvester matrix is +1.
/// Exactly `big_d / 2` columns for every `j >= 1`.
pub fn hadamard_row_positive_set(j: u32, big_d: usize) -> Result<Vec<u32>> {
    if !big_d.is_power_of_two() {
        return Err(Error::Domain(format!("D = {big_d} must be a power of two")));
    }
    if j == 0 || j as usize >= big_d {
        return Err(Error::Domain(format!(
            "row index {j} outside [1, {}]",
            big_d - 1
        )));
    }
    Ok((1..=big_d as u32)
        .filter(|&c| in_positive_set(j, c))
        .collect())
}

fn sample_positive<R: Rng>(j: u32, big_d: usize, rng: &mut R) -> u32 {
    loop {
        let c = rng.random_range(1..=big_d as u32);
        if in_positive_set(j, c) {
            return c;
        }
    }
}

/// The Hadamard-response randomizer: one encoding message whose indices are
/// uniform over the positive set of the item's row, then `k` blanket messages
/// of indices uniform over `[1, D]`.
pub fn randomize_had<R: Rng>(x: &OneHotInput, hp: &HadParams, rng: &mut R) -> Vec<HadMessage> {
    debug_assert_eq!(x.d(), hp.d);
    let mut out = Vec::with_capacity(hp.k as usize + 1);
    let encoding: Vec<u32> = (0..hp.tau)
        .map(|_| sample_positive(x.item(), hp.big_d, rng))
        .collect();
    out.push(HadMessage { indices: encoding });
    for _ in 0..hp.k {
        let blanket: Vec<u32> = (0..hp.tau)
            .map(|_| rng.random_range(1..=hp.big_d as u32))
            .collect();
        out.push(HadMessage { indices: blanket });
    }
    out
}

/// The Hadamard-response analyzer: count messages that land entirely inside
/// each bin's positive set, then de-bias and re-scale,
/// `z_j = (c_j - n(k+1) 2^-tau) / (n (1 - 2^-tau))`.
pub fn analyze_had(messages: &[HadMessage], hp: &HadParams) -> Result<Vec<f64>> {
    let expected = hp.n * (hp.k as usize + 1);
    if messages.len() != expected {
        return Err(Error::Domain(format!(
            "batch holds {} messages, expected n(k+1) = {expected}",
            messages.len()
        )));
    }
    let two_tau = (2f64).powi(-(hp.tau as i32));
    let denom = hp.n as f64 * (1.0 - two_tau);
    let shift = expected as f64 * two_tau;
    let mut z = vec![0.0; hp.d];
    for (j0, zj) in z.iter_mut().enumerate() {
        let j = j0 as u32 + 1;
        let mut c = 0u64;
        for msg in messages {
            if msg.indices.iter().all(|&a| in_positive_set(j, a)) {
                c += 1;
            }
        }
        *zj = (c as f64 - shift) / denom;
    }
    Ok(z)
}

/// Corrupt message sequences against the Hadamard protocol: each of the `m`
/// users emits `k + 1` messages of indices drawn i.i.d. from the target's
/// positive set, so every message increments the target's counter.
pub fn attack_had(target: u32, m: usize, hp: &HadParams, seed: u64) -> Vec<Vec<HadMessage>> {
    (0..m)
        .map(|u| {
            (0..=hp.k)
                .map(|r| {
                    let mut rng = stream(seed, StreamDomain::Forge, u as u64, r as u64);
                    let indices = (0..hp.tau)
                        .map(|_| sample_positive(target, hp.big_d, &mut rng))
                        .collect();
                    HadMessage { indices }
                })
                .collect()
        })
        .collect()
}

/// Multi-trial Hadamard attack outcome.
#[derive(Clone, Debug, Serialize)]
pub struct HadAttackReport {
    pub rows: Vec<AttackTrial>,
    /// The attack's expected bias `(m/n)(k+1)`.
    pub expected_bias: f64,
    /// Per-trial standard deviation of the corrupted estimate.
    pub trial_sd: f64,
}

/// Coupled honest/corrupted Hadamard runs reduced to the target bin.
pub fn run_attacked_had(
    data: &Dataset,
    hp: &HadParams,
    target: u32,
    m: usize,
    seed: u64,
    trials: u64,
) -> Result<HadAttackReport> {
    if target == 0 || target as usize > hp.d {
        return Err(Error::Domain(format!(
            "target {target} out of range [1, {}]",
            hp.d
        )));
    }
    if m > hp.n || data.n() != hp.n || data.d() != hp.d {
        return Err(Error::Domain("coalition or dataset shape mismatch".into()));
    }
    let qualifies =
        |msg: &HadMessage| msg.indices.iter().all(|&a| in_positive_set(target, a)) as u64;
    let two_tau = (2f64).powi(-(hp.tau as i32));
    let expected_messages = (hp.n * (hp.k as usize + 1)) as f64;
    let denom = hp.n as f64 * (1.0 - two_tau);
    let shift = expected_messages * two_tau;
    let rows: Vec<AttackTrial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let master = trial_seed(seed, t);
            let mut count_hon = 0u64;
            let mut count_cor = 0u64;
            for (u, &item) in data.items().iter().enumerate() {
                let x = OneHotInput::new(item, hp.d).expect("validated");
                let mut rng = stream(master, StreamDomain::Hadamard, u as u64, 0);
                for msg in randomize_had(&x, hp, &mut rng) {
                    let q = qualifies(&msg);
                    count_hon += q;
                    if u >= m {
                        count_cor += q;
                    }
                }
            }
            for user_msgs in attack_had(target, m, hp, master) {
                for msg in user_msgs {
                    count_cor += qualifies(&msg);
                }
            }
            let z = |c: u64| (c as f64 - shift) / denom;
            AttackTrial {
                trial: t,
                z_honest: z(count_hon),
                z_corrupt: z(count_cor),
                bias: z(count_cor) - z(count_hon),
            }
        })
        .collect();
    let expected_bias = m as f64 / hp.n as f64 * (hp.k as f64 + 1.0);
    let honest_msgs = ((hp.n - m) * (hp.k as usize + 1)) as f64;
    let trial_sd = (honest_msgs * two_tau * (1.0 - two_tau)).sqrt() / denom;
    Ok(HadAttackReport {
        rows,
        expected_bias,
        trial_sd,
    })
}

/// Full estimate vectors for a coupled honest/corrupted Hadamard execution.
pub fn had_attacked_estimates(
    data: &Dataset,
    hp: &HadParams,
    target: u32,
    m: usize,
    master: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if target == 0 || target as usize > hp.d {
        return Err(Error::Domain(format!(
            "target {target} out of range [1, {}]",
            hp.d
        )));
    }
    if m > hp.n || data.n() != hp.n || data.d() != hp.d {
        return Err(Error::Domain("coalition or dataset shape mismatch".into()));
    }
    let mut honest = Vec::with_capacity(hp.n * (hp.k as usize + 1));
    let mut corrupt = Vec::with_capacity(hp.n * (hp.k as usize + 1));
    for (u, &item) in data.items().iter().enumerate() {
        let x = OneHotInput::new(item, hp.d).expect("validated");
        let mut rng = stream(master, StreamDomain::Hadamard, u as u64, 0);
        let msgs = randomize_had(&x, hp, &mut rng);
        if u >= m {
            corrupt.extend(msgs.iter().cloned());
        }
        honest.extend(msgs);
    }
    for user_msgs in attack_had(target, m, hp, master) {
        corrupt.extend(user_msgs);
    }
    Ok((analyze_had(&honest, hp)?, analyze_had(&corrupt, hp)?))
}
