//! Parameter selection and closed-form bounds.
//!
//! The privacy condition ties the flip probability `q` to the fabricated
//! message count `k` through the quadratic
//! `q (1 - q) = 33 / (5 n k) * ((e^eps + 1)/(e^eps - 1))^2 * ln(4/delta)`.
//! Accuracy requires a floor `q >= ln(2/beta) / (n (k + 1))`. This module
//! solves for `q`, evaluates the resulting error and robustness bounds, and
//! implements the amplification-based schedule for the `k = 0` variant.

use serde::Serialize;

use crate::error::{Error, Result};

/// Threshold numerator for the base `k` lower bound (132/5).
pub const K_THRESHOLD_NUM: f64 = 132.0 / 5.0;
/// Stricter threshold numerator used by the count-min transformation (134/5).
pub const K_THRESHOLD_NUM_COUNT_MIN: f64 = 134.0 / 5.0;

/// Which error criterion drives the concentration floor on `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Single-bin confidence at level `beta` (default 1/10).
    PerBin,
    /// Maximum error over all `d` bins (default `beta = 1/(10 d)`).
    Maximum { d: usize },
}

impl Mode {
    fn default_beta(&self) -> f64 {
        match self {
            Mode::PerBin => 0.1,
            Mode::Maximum { d } => 0.1 / *d as f64,
        }
    }
}

/// A solved protocol configuration.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ParamSolution {
    pub q: f64,
    pub k: u32,
    /// Smaller root of the privacy quadratic.
    pub q_hat: f64,
    /// Concentration floor `ln(2/beta) / (n (k + 1))`.
    pub q_tilde: f64,
    /// De-bias factor `1 / (1 - 2q)`.
    pub scale: f64,
    /// The 90%-confidence error bound for the chosen mode, printed constants.
    pub bound: f64,
    /// Confidence level the floor was computed at.
    pub beta: f64,
}

/// Amplification-based schedule for the `k = 0` variant.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AmplificationSolution {
    /// Local privacy parameter of the single randomized-response report.
    pub eps_local: f64,
    pub q: f64,
    /// Central privacy parameter after shuffling `n` local reports.
    pub eps_shuffle: f64,
    /// 90%-confidence maximum-error bound.
    pub bound: f64,
}

/// `(e^eps + 1) / (e^eps - 1)`, the sensitivity factor in every bound.
pub fn eps_factor(eps: f64) -> f64 {
    let e = eps.exp();
    (e + 1.0) / (e - 1.0)
}

fn check_privacy_inputs(eps: f64, delta: f64, n: usize) -> Result<()> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Domain("eps must be positive".into()));
    }
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::Domain("delta must be positive".into()));
    }
    // The analytical claims assume delta <= 1/100.
    if delta > 0.01 {
        return Err(Error::OutOfRegime(format!(
            "delta = {delta} exceeds 1/100; the privacy claims do not cover it"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    Ok(())
}

/// Right-hand side of the privacy quadratic for given `k`.
fn privacy_rhs(eps: f64, delta: f64, n: usize, k: u32) -> f64 {
    33.0 / (5.0 * n as f64 * k as f64) * eps_factor(eps).powi(2) * (4.0 / delta).ln()
}

/// Smallest integer `k` strictly above the mode's threshold.
pub fn min_k(eps: f64, delta: f64, n: usize, mode: Mode) -> Result<u32> {
    min_k_with_threshold(eps, delta, n, mode, K_THRESHOLD_NUM)
}

/// As [`min_k`] but with an explicit threshold numerator, so the count-min
/// transformation can use its stricter 134/5 constant.
pub fn min_k_with_threshold(
    eps: f64,
    delta: f64,
    n: usize,
    mode: Mode,
    threshold_num: f64,
) -> Result<u32> {
    check_privacy_inputs(eps, delta, n)?;
    let privacy = threshold_num / n as f64 * eps_factor(eps).powi(2) * (4.0 / delta).ln();
    let threshold = match mode {
        Mode::PerBin => privacy,
        Mode::Maximum { d } => privacy.max(2.0 / n as f64 * (20.0 * d as f64).ln() - 1.0),
    };
    // strictly greater than the threshold
    let k = threshold.floor() + 1.0;
    if k > u32::MAX as f64 {
        return Err(Error::Infeasible(format!(
            "k threshold {threshold:.3e} too large to represent"
        )));
    }
    Ok(k.max(1.0) as u32)
}

/// Solve for the flip probability: the smaller root of the privacy quadratic,
/// floored by the mode's concentration requirement.
pub fn solve_q(eps: f64, delta: f64, n: usize, k: u32, mode: Mode) -> Result<ParamSolution> {
    solve_q_with_beta(eps, delta, n, k, mode, None)
}

/// As [`solve_q`] with an explicit confidence level overriding the mode's
/// default (1/10 per-bin, 1/(10 d) maximum).
pub fn solve_q_with_beta(
    eps: f64,
    delta: f64,
    n: usize,
    k: u32,
    mode: Mode,
    beta: Option<f64>,
) -> Result<ParamSolution> {
    check_privacy_inputs(eps, delta, n)?;
    if k == 0 {
        return Err(Error::Infeasible(
            "k = 0 carries no fabricated noise; use the amplification schedule".into(),
        ));
    }
    let beta = beta.unwrap_or_else(|| mode.default_beta());
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta = {beta} must lie in (0, 1)")));
    }
    let c = privacy_rhs(eps, delta, n, k);
    if 4.0 * c >= 1.0 {
        return Err(Error::Infeasible(format!(
            "no root in (0, 1/2): q(1-q) = {c:.6} requires 4c < 1; raise k or n"
        )));
    }
    let q_hat = (1.0 - (1.0 - 4.0 * c).sqrt()) / 2.0;
    let q_tilde = (2.0 / beta).ln() / (n as f64 * (k as f64 + 1.0));
    let q = q_hat.max(q_tilde);
    if q >= 0.5 {
        return Err(Error::Infeasible(format!(
            "concentration floor q = {q:.6} reaches 1/2; raise n or k"
        )));
    }
    let scale = 1.0 / (1.0 - 2.0 * q);
    let bound = theorem_bound(eps, delta, n, mode, beta, scale);
    Ok(ParamSolution {
        q,
        k,
        q_hat,
        q_tilde,
        scale,
        bound,
        beta,
    })
}

/// The printed-constant theorem bound at 90% confidence:
/// per-bin uses `(1/n) ef sqrt(264/5 ln(4/delta) ln(2/beta)) * scale`; the
/// maximum-error form takes the max with `(2/n) ln(2/beta)`.
fn theorem_bound(eps: f64, delta: f64, n: usize, mode: Mode, beta: f64, scale: f64) -> f64 {
    let nf = n as f64;
    let ln2b = (2.0 / beta).ln();
    let lead = eps_factor(eps) / nf * (264.0 / 5.0 * (4.0 / delta).ln() * ln2b).sqrt();
    match mode {
        Mode::PerBin => lead * scale,
        Mode::Maximum { .. } => lead.max(2.0 / nf * ln2b) * scale,
    }
}

/// 90%-confidence per-bin error bound with the printed constants.
pub fn error_bound_per_bin(eps: f64, delta: f64, n: usize, k: u32) -> Result<f64> {
    Ok(solve_q(eps, delta, n, k, Mode::PerBin)?.bound)
}

/// Tighter per-bin bound: evaluates the realized confidence width at the
/// solved `q` instead of rounding `(k+1)/k` up to 2.
pub fn error_bound_per_bin_tight(eps: f64, delta: f64, n: usize, k: u32) -> Result<f64> {
    let sol = solve_q(eps, delta, n, k, Mode::PerBin)?;
    confidence_width(n, k, sol.q, sol.beta)
}

/// 90%-confidence maximum-error bound over `d` bins, printed constants.
pub fn error_bound_max(eps: f64, delta: f64, n: usize, k: u32, d: usize) -> Result<f64> {
    Ok(solve_q(eps, delta, n, k, Mode::Maximum { d })?.bound)
}

/// Width of the per-bin confidence interval at level `beta`:
/// `2 sqrt((k+1)/n * q(1-q) * ln(2/beta)) / (1 - 2q)`.
pub fn confidence_width(n: usize, k: u32, q: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta = {beta} must lie in (0, 1)")));
    }
    let floor = (2.0 / beta).ln() / (n as f64 * (k as f64 + 1.0));
    if q < floor {
        return Err(Error::Domain(format!(
            "q = {q} below the concentration floor {floor:.6}"
        )));
    }
    if q >= 0.5 {
        return Err(Error::Domain(format!("q = {q} must be below 1/2")));
    }
    let radicand = (k as f64 + 1.0) / n as f64 * q * (1.0 - q) * (2.0 / beta).ln();
    Ok(2.0 * radicand.sqrt() / (1.0 - 2.0 * q))
}

/// Worst-case estimate shift a coalition of `m` corrupt users can cause:
/// `(m/n) (k+1) / (1 - 2q)`.
pub fn robustness_bound(n: usize, k: u32, q: f64, m: usize) -> Result<f64> {
    if m > n {
        return Err(Error::Domain(format!("coalition size {m} exceeds n = {n}")));
    }
    Ok(m as f64 / n as f64 * (k as f64 + 1.0) / (1.0 - 2.0 * q))
}

/// Central privacy of `n` shuffled copies of an `eps_local`-private
/// randomizer, per the amplification lemma:
/// `eps_s = 8 (e^el - 1)/(e^el + 1) (sqrt(e^el ln(4/delta)/n) + e^el/n)`.
pub fn amplified_eps(eps_local: f64, n: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain("delta must lie in (0, 1)".into()));
    }
    if eps_local < 0.0 {
        return Err(Error::Domain("eps_local must be non-negative".into()));
    }
    let nf = n as f64;
    let limit = (nf / (16.0 * (2.0 / delta).ln())).ln();
    if eps_local > limit {
        return Err(Error::OutOfRegime(format!(
            "eps_local = {eps_local:.4} exceeds the lemma's limit {limit:.4} at n = {n}"
        )));
    }
    let e = eps_local.exp();
    Ok(8.0 * (e - 1.0) / (e + 1.0) * ((e * (4.0 / delta).ln() / nf).sqrt() + e / nf))
}

/// Full amplification schedule for the `k = 0` variant: pick the largest
/// admissible local parameter, derive `q`, and evaluate the maximum-error
/// bound.
pub fn amplification_params(
    eps: f64,
    delta: f64,
    n: usize,
    d: usize,
) -> Result<AmplificationSolution> {
    if eps.is_nan() || eps <= 0.0 || eps > 4.0 {
        return Err(Error::OutOfRegime(format!(
            "eps = {eps} must lie in (0, 4]"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain("delta must lie in (0, 1)".into()));
    }
    let nf = n as f64;
    let ln4d = (4.0 / delta).ln();
    let ln20d = (20.0 * d as f64).ln();
    let n_floor = (1024.0 / (eps * eps) * ln4d).max(6.0 * ln20d);
    if nf <= n_floor {
        return Err(Error::OutOfRegime(format!(
            "n = {n} must exceed {n_floor:.1} for the amplification schedule"
        )));
    }
    let eps_local = (eps * eps * nf / (256.0 * ln4d)).ln();
    let q = (1.0 / ((eps_local / 2.0).exp() + 1.0)).max(ln20d / nf);
    let eps_shuffle = amplified_eps(eps_local, n, delta)?;
    let bound = (24.0 / (nf.powf(0.75) * eps.sqrt()) * ln4d.powf(0.25) * ln20d.sqrt())
        .max(6.0 / nf * ln20d);
    Ok(AmplificationSolution {
        eps_local,
        q,
        eps_shuffle,
        bound,
    })
}

/// Composition of `reps` mechanisms that are each `(eps, delta)`-private:
/// `(eps (e^eps - 1) reps + eps sqrt(2 reps ln(1/(reps delta))), 2 reps delta)`.
pub fn advanced_composition(eps: f64, delta: f64, reps: u32) -> Result<(f64, f64)> {
    if eps.is_nan() || eps <= 0.0 || delta.is_nan() || delta <= 0.0 || reps == 0 {
        return Err(Error::Domain(
            "advanced composition needs eps > 0, delta > 0, reps >= 1".into(),
        ));
    }
    let r = reps as f64;
    if r * delta >= 1.0 {
        return Err(Error::Domain(format!(
            "reps * delta = {} must be below 1",
            r * delta
        )));
    }
    let eps_total = eps * (eps.exp() - 1.0) * r + eps * (2.0 * r * (1.0 / (r * delta)).ln()).sqrt();
    Ok((eps_total, 2.0 * r * delta))
}
