//! Exact privacy auditing of the two-bit reduced mechanism.
//!
//! The full protocol's privacy reduces to a four-counter mechanism: draw a
//! multinomial noise vector from `m` randomized-response copies of "00", then
//! add one increment at the cell selected by randomized response on the real
//! input. This module enumerates that mechanism's output law exactly and
//! reports tight hockey-stick divergences, plus numeric verification of the
//! concentration and pointwise-domination facts the privacy proof rests on.

use rand::Rng;

use crate::bits::BitMessage;
use crate::error::{Error, Result};
use crate::protocol::randomize_bits;

/// Default cap on `m` for exact enumeration; the support has O(m^3) outcomes.
pub const DEFAULT_ENUM_CAP: usize = 200;

/// The two neighboring inputs of the reduced mechanism: the one-hot strings
/// over two bins. `Item1` is the string "10", `Item2` is "01".
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OneHotPair {
    Item1,
    Item2,
}

impl OneHotPair {
    pub fn dense(self) -> BitMessage {
        match self {
            OneHotPair::Item1 => BitMessage::from_bit_str("10").unwrap(),
            OneHotPair::Item2 => BitMessage::from_bit_str("01").unwrap(),
        }
    }

    /// PMF over output cells (00, 01, 10, 11) of randomized response with
    /// flip probability `q` applied to this string.
    pub fn response_pmf(self, q: f64) -> [f64; 4] {
        let p = q * (1.0 - q);
        let stay = (1.0 - q) * (1.0 - q);
        let both = q * q;
        match self {
            OneHotPair::Item1 => [p, both, stay, p],
            OneHotPair::Item2 => [p, stay, both, p],
        }
    }
}

/// PMF of randomized response on "00": `((1-q)^2, q(1-q), q(1-q), q^2)`.
pub fn blank_response_pmf(q: f64) -> [f64; 4] {
    let p = q * (1.0 - q);
    [(1.0 - q) * (1.0 - q), p, p, q * q]
}

/// Histogram of the messages produced by `m` fabricated users: four counts,
/// for cells 00, 01, 10, 11, summing to `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseVec {
    pub counts: [u64; 4],
}

impl NoiseVec {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[inline]
fn flip_cell<R: Rng>(bit1: bool, bit2: bool, q: f64, rng: &mut R) -> usize {
    let b1 = bit1 ^ (rng.random::<f64>() < q);
    let b2 = bit2 ^ (rng.random::<f64>() < q);
    (b1 as usize) * 2 + b2 as usize
}

/// The multinomial noise generator: tally `m` randomized responses on "00".
pub fn sample_noise<R: Rng>(m: u64, q: f64, rng: &mut R) -> NoiseVec {
    let mut counts = [0u64; 4];
    for _ in 0..m {
        counts[flip_cell(false, false, q, rng)] += 1;
    }
    NoiseVec { counts }
}

/// The reduced mechanism: noise from the multinomial generator plus one
/// increment at the cell selected by randomized response on `x`.
pub fn mechanism_b<R: Rng>(x: OneHotPair, m: u64, q: f64, rng: &mut R) -> [u64; 4] {
    let mut counts = sample_noise(m, q, rng).counts;
    let (b1, b2) = match x {
        OneHotPair::Item1 => (true, false),
        OneHotPair::Item2 => (false, true),
    };
    counts[flip_cell(b1, b2, q, rng)] += 1;
    counts
}

/// Four-cell count histogram of the two-bin protocol path: randomized
/// response on the real input plus `m` fabricated all-zero inputs. Same law
/// as [`mechanism_b`]; goes through the protocol's own bit randomizer so the
/// reduction can be validated distributionally.
pub fn simulate_pair_counts<R: Rng>(x: OneHotPair, m: u64, q: f64, rng: &mut R) -> [u64; 4] {
    let mut counts = [0u64; 4];
    let add = |counts: &mut [u64; 4], y: &BitMessage| {
        counts[(y.get(0) as usize) * 2 + y.get(1) as usize] += 1;
    };
    let y = randomize_bits(&x.dense(), q, rng).expect("q validated by caller");
    add(&mut counts, &y);
    let zero = BitMessage::zero(2);
    for _ in 0..m {
        let y = randomize_bits(&zero, q, rng).expect("q validated by caller");
        add(&mut counts, &y);
    }
    counts
}

/// ln(i!) for i = 0..=n.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    lf
}

/// Block-wise summation in a fixed order, so audit statistics are bitwise
/// reproducible and accumulate less rounding than a naive running sum.
fn stable_sum(values: impl Iterator<Item = f64>) -> f64 {
    const BLOCK: usize = 4096;
    let mut blocks = Vec::new();
    let mut acc = 0.0;
    let mut in_block = 0;
    for v in values {
        acc += v;
        in_block += 1;
        if in_block == BLOCK {
            blocks.push(acc);
            acc = 0.0;
            in_block = 0;
        }
    }
    blocks.push(acc);
    blocks.into_iter().sum()
}

/// Exact output law of the reduced mechanism on one input: probabilities for
/// every four-tuple of counts summing to `m + 1`, enumerated in lexicographic
/// order of `(y1, y2, y3)`.
#[derive(Clone, Debug)]
pub struct OutputDistribution {
    pub input: OneHotPair,
    pub m: u64,
    probs: Vec<f64>,
}

/// Iterate all four-tuples of non-negative counts summing to `total`, in the
/// same lexicographic order the distributions are stored in.
pub fn support_tuples(total: u64) -> impl Iterator<Item = [u64; 4]> {
    (0..=total).flat_map(move |y1| {
        (0..=total - y1).flat_map(move |y2| {
            (0..=total - y1 - y2).map(move |y3| [y1, y2, y3, total - y1 - y2 - y3])
        })
    })
}

impl OutputDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = ([u64; 4], f64)> + '_ {
        support_tuples(self.m + 1).zip(self.probs.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        stable_sum(self.probs.iter().copied())
    }
}

fn check_enum_inputs(m: u64, q: f64, cap: usize) -> Result<()> {
    if m as usize > cap {
        return Err(Error::Resource(format!(
            "m = {m} exceeds the enumeration cap {cap}; raise the cap explicitly"
        )));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "q = {q} must lie in (0, 1) for enumeration"
        )));
    }
    Ok(())
}

/// Exact law of the reduced mechanism by convolving the multinomial noise PMF
/// with the four increment cases. Probabilities are computed in log space.
pub fn exact_output_distribution(x: OneHotPair, m: u64, q: f64) -> Result<OutputDistribution> {
    exact_output_distribution_with_cap(x, m, q, DEFAULT_ENUM_CAP)
}

pub fn exact_output_distribution_with_cap(
    x: OneHotPair,
    m: u64,
    q: f64,
    cap: usize,
) -> Result<OutputDistribution> {
    check_enum_inputs(m, q, cap)?;
    let pmf = x.response_pmf(q);
    let noise_lnp: [f64; 4] = {
        let p = blank_response_pmf(q);
        [p[0].ln(), p[1].ln(), p[2].ln(), p[3].ln()]
    };
    let lf = ln_factorials(m as usize + 1);
    let ln_m_fact = lf[m as usize];
    let log_mult = |f: [u64; 4]| -> f64 {
        let mut l = ln_m_fact;
        for (fi, lnp) in f.iter().zip(noise_lnp) {
            l += *fi as f64 * lnp - lf[*fi as usize];
        }
        l
    };
    let probs: Vec<f64> = support_tuples(m + 1)
        .map(|y| {
            let mut p = 0.0;
            for (j, pj) in pmf.iter().enumerate() {
                if y[j] >= 1 {
                    let mut f = y;
                    f[j] -= 1;
                    p += pj * log_mult(f).exp();
                }
            }
            p
        })
        .collect();
    let dist = OutputDistribution { input: x, m, probs };
    let mass = dist.total_mass();
    debug_assert!((mass - 1.0).abs() < 1e-9, "law mass {mass}");
    Ok(dist)
}

/// Tight additive privacy slack at multiplicative level `e^eps`:
/// `sum_y max(0, P(y) - e^eps Q(y))`.
pub fn hockey_stick_delta(p: &OutputDistribution, q: &OutputDistribution, eps: f64) -> Result<f64> {
    if p.m != q.m {
        return Err(Error::Domain(
            "distributions must share the same support family".into(),
        ));
    }
    let e = eps.exp();
    Ok(stable_sum(
        p.probs
            .iter()
            .zip(&q.probs)
            .map(|(&pp, &qq)| (pp - e * qq).max(0.0)),
    ))
}

/// Worst-direction tight additive slack of the reduced mechanism at level
/// `eps`: the larger hockey-stick divergence over both input orderings.
pub fn audit_b(m: u64, q: f64, eps: f64) -> Result<f64> {
    audit_b_with_cap(m, q, eps, DEFAULT_ENUM_CAP)
}

pub fn audit_b_with_cap(m: u64, q: f64, eps: f64, cap: usize) -> Result<f64> {
    let p01 = exact_output_distribution_with_cap(OneHotPair::Item2, m, q, cap)?;
    let p10 = exact_output_distribution_with_cap(OneHotPair::Item1, m, q, cap)?;
    let a = hockey_stick_delta(&p01, &p10, eps)?;
    let b = hockey_stick_delta(&p10, &p01, eps)?;
    Ok(a.max(b))
}

/// The concentration interval for the middle noise counts: membership means
/// both the 01 and 10 counts lie in `[L, U]`.
#[derive(Clone, Copy, Debug)]
pub struct ConcentrationSet {
    pub l: f64,
    pub u: f64,
    /// The drift correction added on both sides of the mean.
    pub delta_corr: f64,
    pub m: u64,
    pub q: f64,
    pub delta: f64,
}

impl ConcentrationSet {
    /// Build the interval from its defining formulas:
    /// `corr = sqrt(3 mu ln(4/delta)) * p/(1-p)` with `mu = m q (1-q)`,
    /// `U = mu + corr + sqrt(3 (mu + corr) ln(4/delta))`, `L` symmetric.
    pub fn new(m: u64, q: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain("delta must lie in (0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain("q must lie in [0, 1]".into()));
        }
        let p = q * (1.0 - q);
        let mu = m as f64 * p;
        let ln4d = (4.0 / delta).ln();
        let delta_corr = (3.0 * mu * ln4d).sqrt() * if p < 1.0 { p / (1.0 - p) } else { 0.0 };
        let tail = (3.0 * (mu + delta_corr) * ln4d).sqrt();
        Ok(ConcentrationSet {
            l: mu - delta_corr - tail,
            u: mu + delta_corr + tail,
            delta_corr,
            m,
            q,
            delta,
        })
    }

    pub fn contains(&self, f2: u64, f3: u64) -> bool {
        let in_range = |v: u64| (v as f64) >= self.l && (v as f64) <= self.u;
        in_range(f2) && in_range(f3)
    }

    /// Whether the concentration statement's hypothesis
    /// `m q (1-q) > (9/2) ln(4/delta)` holds.
    pub fn hypothesis_holds(&self) -> bool {
        self.m as f64 * self.q * (1.0 - self.q) > 4.5 * (4.0 / self.delta).ln()
    }

    /// The pointwise-domination hypothesis
    /// `m q (1-q) >= (33/5) ((e^eps+1)/(e^eps-1))^2 ln(4/delta)`.
    pub fn domination_hypothesis_holds(&self, eps: f64) -> bool {
        self.m as f64 * self.q * (1.0 - self.q)
            >= 33.0 / 5.0 * crate::params::eps_factor(eps).powi(2) * (4.0 / self.delta).ln()
    }
}

/// Exact probability that a noise vector leaves the concentration set,
/// computed by enumerating the joint trinomial law of the two middle counts.
pub fn check_noise_concentration(m: u64, q: f64, delta: f64) -> Result<(ConcentrationSet, f64)> {
    check_noise_concentration_with_cap(m, q, delta, DEFAULT_ENUM_CAP)
}

pub fn check_noise_concentration_with_cap(
    m: u64,
    q: f64,
    delta: f64,
    cap: usize,
) -> Result<(ConcentrationSet, f64)> {
    if m as usize > cap {
        return Err(Error::Resource(format!(
            "m = {m} exceeds the enumeration cap {cap}"
        )));
    }
    let set = ConcentrationSet::new(m, q, delta)?;
    let p = q * (1.0 - q);
    let lo = set.l.ceil().max(0.0) as u64;
    let hi = set.u.floor().min(m as f64) as u64;
    if set.l > set.u || set.l > m as f64 || set.u < 0.0 {
        return Ok((set, 1.0));
    }
    if p == 0.0 {
        // all mass at (f2, f3) = (0, 0)
        let outside = if set.contains(0, 0) { 0.0 } else { 1.0 };
        return Ok((set, outside));
    }
    let lf = ln_factorials(m as usize);
    let (lnp, ln_rest) = (p.ln(), (1.0 - 2.0 * p).ln());
    let mut inside_terms = Vec::new();
    for a in lo..=hi {
        for b in lo..=hi.min(m - a) {
            let rest = m - a - b;
            let l = lf[m as usize] - lf[a as usize] - lf[b as usize] - lf[rest as usize]
                + (a + b) as f64 * lnp
                + rest as f64 * ln_rest;
            inside_terms.push(l.exp());
        }
    }
    let inside = stable_sum(inside_terms.into_iter());
    Ok((set, (1.0 - inside).max(0.0)))
}

/// Result of the pointwise-domination audit.
#[derive(Clone, Copy, Debug)]
pub struct GoodNoiseReport {
    pub pass: bool,
    /// Largest observed in-set probability ratio across both directions.
    pub worst_ratio: f64,
    /// The analytical ceiling `(U + 1) / (L - 1)` (infinite when `L <= 1`).
    pub ratio_bound: f64,
    pub violations: u64,
}

/// Verify, over every outcome with components summing to `m + 1`, that
/// shifting one count between the two middle cells changes the noise
/// probability by at most `e^eps` whenever the source vector lies in the
/// concentration set. Probabilities reduce to the exact integer ratio of the
/// swapped cells, so the check is free of rounding beyond the ratio itself.
pub fn check_good_noise(m: u64, q: f64, eps: f64, delta: f64) -> Result<GoodNoiseReport> {
    check_good_noise_with_cap(m, q, eps, delta, DEFAULT_ENUM_CAP)
}

pub fn check_good_noise_with_cap(
    m: u64,
    q: f64,
    eps: f64,
    delta: f64,
    cap: usize,
) -> Result<GoodNoiseReport> {
    check_enum_inputs(m, q, cap)?;
    let set = ConcentrationSet::new(m, q, delta)?;
    let e = eps.exp();
    let mut worst: f64 = 0.0;
    let mut violations = 0u64;
    // Parametrize each outcome y (summing to m+1) by the in-set noise vector
    // f = y - e_cell; both directions reduce to comparing f against the
    // vector with one unit moved between cells 2 and 3. The multinomial
    // coefficients cancel to (f2 + 1) / f3 and (f3 + 1) / f2.
    for f in support_tuples(m) {
        if !set.contains(f[1], f[2]) {
            continue;
        }
        for (src, dst) in [(1usize, 2usize), (2, 1)] {
            if f[dst] == 0 {
                // the comparison vector has a negative component: its
                // probability is zero while ours is positive
                violations += 1;
                continue;
            }
            let ratio = (f[src] as f64 + 1.0) / f[dst] as f64;
            worst = worst.max(ratio);
            if ratio > e * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    let ratio_bound = if set.l > 1.0 {
        (set.u + 1.0) / (set.l - 1.0)
    } else {
        f64::INFINITY
    };
    Ok(GoodNoiseReport {
        pass: violations == 0,
        worst_ratio: worst,
        ratio_bound,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamDomain};

    fn test_rng(tag: u64) -> rand_chacha::ChaCha12Rng {
        stream(0x5EED, StreamDomain::Noise, tag, 0)
    }

    #[test]
    fn sample_noise_degenerate() {
        let mut rng = test_rng(0);
        assert_eq!(sample_noise(0, 0.3, &mut rng).counts, [0, 0, 0, 0]);
        assert_eq!(sample_noise(7, 0.0, &mut rng).counts, [7, 0, 0, 0]);
    }

    #[test]
    fn sample_noise_category_frequencies() {
        let mut rng = test_rng(1);
        let m = 100_000u64;
        let noise = sample_noise(m, 0.25, &mut rng);
        let expected = blank_response_pmf(0.25);
        assert_eq!(expected, [0.5625, 0.1875, 0.1875, 0.0625]);
        for (c, p) in noise.counts.iter().zip(expected) {
            let mean = m as f64 * p;
            let sd = (m as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - mean).abs() < 3.0 * sd);
        }
    }

    #[test]
    fn mechanism_b_no_noise() {
        let mut rng = test_rng(2);
        assert_eq!(
            mechanism_b(OneHotPair::Item2, 0, 0.0, &mut rng),
            [0, 1, 0, 0]
        );
        assert_eq!(
            mechanism_b(OneHotPair::Item2, 0, 1.0, &mut rng),
            [0, 0, 1, 0]
        );
    }

    #[test]
    fn mechanism_b_increment_cell_distribution() {
        // m = 0, q = 0.25, input "10": cell law (0.1875, 0.0625, 0.5625, 0.1875).
        let mut rng = test_rng(3);
        let trials = 400_000u64;
        let mut counts = [0u64; 4];
        for _ in 0..trials {
            let out = mechanism_b(OneHotPair::Item1, 0, 0.25, &mut rng);
            let cell = out.iter().position(|&c| c == 1).unwrap();
            counts[cell] += 1;
        }
        let expected = OneHotPair::Item1.response_pmf(0.25);
        assert_eq!(expected, [0.1875, 0.0625, 0.5625, 0.1875]);
        for (c, p) in counts.iter().zip(expected) {
            let mean = trials as f64 * p;
            let sd = (trials as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - mean).abs() < 3.0 * sd);
        }
    }

    #[test]
    fn exact_law_m0_matches_pmf() {
        let dist = exact_output_distribution(OneHotPair::Item2, 0, 0.25).unwrap();
        let pmf = OneHotPair::Item2.response_pmf(0.25);
        let mut seen = 0;
        for (y, p) in dist.iter() {
            if p > 0.0 {
                let cell = y.iter().position(|&c| c == 1).unwrap();
                assert!((p - pmf[cell]).abs() < 1e-15);
                seen += 1;
            }
        }
        assert_eq!(seen, 4);
    }

    #[test]
    fn exact_law_normalizes() {
        for &(m, q) in &[(5u64, 0.3), (5, 0.25), (40, 0.45), (0, 0.01)] {
            for x in [OneHotPair::Item1, OneHotPair::Item2] {
                let dist = exact_output_distribution(x, m, q).unwrap();
                assert!((dist.total_mass() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exact_law_rejects_over_cap() {
        assert!(matches!(
            exact_output_distribution(OneHotPair::Item1, 201, 0.3),
            Err(Error::Resource(_))
        ));
        assert!(exact_output_distribution_with_cap(OneHotPair::Item1, 201, 0.3, 250).is_ok());
    }

    #[test]
    fn exact_law_matches_monte_carlo() {
        // m = 2, q = 0.25, input "01": every atom of the enumerated law
        // within 3.5 sigma of a 10^7-sample Monte Carlo.
        let dist = exact_output_distribution(OneHotPair::Item2, 2, 0.25).unwrap();
        let mut rng = test_rng(4);
        let trials = 10_000_000u64;
        let mut observed = std::collections::HashMap::new();
        for _ in 0..trials {
            let out = mechanism_b(OneHotPair::Item2, 2, 0.25, &mut rng);
            *observed.entry(out).or_insert(0u64) += 1;
        }
        for (y, p) in dist.iter() {
            let o = *observed.get(&y).unwrap_or(&0) as f64;
            let mean = trials as f64 * p;
            let sd = (trials as f64 * p * (1.0 - p)).sqrt().max(1e-9);
            assert!((o - mean).abs() < 3.5 * sd, "atom {y:?}: {o} vs {mean}");
        }
    }

    #[test]
    fn hockey_stick_basics() {
        let p = exact_output_distribution(OneHotPair::Item2, 3, 0.3).unwrap();
        assert_eq!(hockey_stick_delta(&p, &p, 0.0).unwrap(), 0.0);
        assert_eq!(hockey_stick_delta(&p, &p, 1.0).unwrap(), 0.0);

        // eps = 0, m = 0, q = 0.25: total variation distance 1/2.
        let p01 = exact_output_distribution(OneHotPair::Item2, 0, 0.25).unwrap();
        let p10 = exact_output_distribution(OneHotPair::Item1, 0, 0.25).unwrap();
        let tv = hockey_stick_delta(&p01, &p10, 0.0).unwrap();
        assert!((tv - 0.5).abs() < 1e-12);

        // non-increasing in eps
        let mut last = f64::INFINITY;
        for i in 0..8 {
            let d = hockey_stick_delta(&p01, &p10, i as f64 * 0.5).unwrap();
            assert!(d <= last + 1e-15);
            last = d;
        }
    }

    #[test]
    fn audit_b_symmetric_and_monotone() {
        let p01 = exact_output_distribution(OneHotPair::Item2, 30, 0.3).unwrap();
        let p10 = exact_output_distribution(OneHotPair::Item1, 30, 0.3).unwrap();
        let a = hockey_stick_delta(&p01, &p10, 1.0).unwrap();
        let b = hockey_stick_delta(&p10, &p01, 1.0).unwrap();
        assert!(
            (a - b).abs() < 1e-12,
            "swapping cells 2/3 relabels the mechanism"
        );

        // worst-direction delta shrinks as m grows and as eps grows
        let d1 = audit_b(20, 0.3, 1.0).unwrap();
        let d2 = audit_b(60, 0.3, 1.0).unwrap();
        let d3 = audit_b(60, 0.3, 2.0).unwrap();
        assert!(d2 < d1);
        assert!(d3 < d2);
        // m = 0 has no noise: far from private at small delta
        assert!(audit_b(0, 0.25, 0.0).unwrap() >= 0.5 - 1e-12);
    }

    #[test]
    fn noise_concentration_on_its_hypothesis_grid() {
        // delta = 0.05 admits points with m <= 200
        let delta = 0.05;
        let mut checked = 0;
        for &q in &[0.2, 0.3, 0.4] {
            for m in (10..=200).step_by(10) {
                let (set, outside) = check_noise_concentration(m, q, delta).unwrap();
                if set.hypothesis_holds() {
                    checked += 1;
                    assert!(
                        outside <= delta,
                        "outside mass {outside} exceeds {delta} at m={m} q={q}"
                    );
                }
            }
        }
        assert!(checked > 10, "grid unexpectedly vacuous");
    }

    #[test]
    fn noise_concentration_degenerate_q() {
        let (set, outside) = check_noise_concentration(50, 0.0, 0.05).unwrap();
        assert!(!set.hypothesis_holds());
        // all mass at (0,0), which the degenerate interval [0,0] contains
        assert_eq!(outside, 0.0);
    }

    #[test]
    fn noise_concentration_outside_mass_shrinks_with_delta() {
        let mut last = f64::INFINITY;
        for &delta in &[0.5, 0.2, 0.05, 0.01] {
            let (_, outside) = check_noise_concentration(150, 0.4, delta).unwrap();
            assert!(outside <= last + 1e-15);
            last = outside;
        }
    }

    #[test]
    fn good_noise_ratio_dominated_by_bound() {
        let (m, q, eps, delta) = (180u64, 0.45, 2.0, 0.05);
        let report = check_good_noise(m, q, eps, delta).unwrap();
        assert!(report.worst_ratio <= report.ratio_bound);
    }

    #[test]
    fn good_noise_passes_on_domination_grid() {
        // pick (m, q, eps, delta) satisfying the 33/5 hypothesis
        let (m, q, eps, delta) = (280u64, 0.45, 2.0, 0.01);
        let set = ConcentrationSet::new(m, q, delta).unwrap();
        assert!(set.domination_hypothesis_holds(eps));
        let report = check_good_noise_with_cap(m, q, eps, delta, 300).unwrap();
        assert!(report.pass, "violations: {}", report.violations);
        assert!(report.worst_ratio <= eps.exp());
        assert!(report.ratio_bound <= eps.exp());
    }

    #[test]
    fn reduction_small_scale_agreement() {
        // The protocol-path simulation of the two-bin reduction matches the
        // enumerated law cell-count by cell-count at 3.5 sigma.
        let (m, q) = (2u64, 0.25);
        let dist = exact_output_distribution(OneHotPair::Item2, m, q).unwrap();
        let mut rng = test_rng(5);
        let trials = 200_000u64;
        let mut observed = std::collections::HashMap::new();
        for _ in 0..trials {
            let out = simulate_pair_counts(OneHotPair::Item2, m, q, &mut rng);
            *observed.entry(out).or_insert(0u64) += 1;
        }
        for (y, p) in dist.iter() {
            let o = *observed.get(&y).unwrap_or(&0) as f64;
            let mean = trials as f64 * p;
            let sd = (trials as f64 * p * (1.0 - p)).sqrt().max(1e-9);
            assert!((o - mean).abs() < 3.5 * sd, "atom {y:?}: {o} vs {mean}");
        }
    }
}
