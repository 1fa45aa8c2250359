//! Top-t selection from approximate histograms and its quality metrics.

use crate::error::{Error, Result};

/// A size-`t` set of candidate bins (1-based, ascending).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateSet {
    items: Vec<u32>,
}

impl CandidateSet {
    pub fn new(mut items: Vec<u32>, d: usize) -> Result<Self> {
        items.sort_unstable();
        items.dedup();
        if items.iter().any(|&j| j == 0 || j as usize > d) {
            return Err(Error::Domain(format!("candidate outside [1, {d}]")));
        }
        Ok(CandidateSet { items })
    }

    pub fn t(&self) -> usize {
        self.items.len()
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn contains(&self, j: u32) -> bool {
        self.items.binary_search(&j).is_ok()
    }
}

/// The `t` bins of largest value; ties broken toward the smaller index so the
/// selection is deterministic.
pub fn top_t(values: &[f64], t: usize) -> Result<CandidateSet> {
    if t == 0 || t > values.len() {
        return Err(Error::Domain(format!(
            "t = {t} out of range [1, {}]",
            values.len()
        )));
    }
    let mut order: Vec<u32> = (0..values.len() as u32).collect();
    order.sort_by(|&a, &b| {
        values[b as usize]
            .partial_cmp(&values[a as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    let items: Vec<u32> = order[..t].iter().map(|&j| j + 1).collect();
    CandidateSet::new(items, values.len())
}

/// Frequency of the rank-`t` bin (the `t`-th largest histogram value).
pub fn rank_t_value(hist: &[f64], t: usize) -> f64 {
    let mut sorted = hist.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sorted[t - 1]
}

/// Smallest `alpha` such that every candidate's true frequency exceeds the
/// rank-`t` frequency minus `alpha`; 0 when the candidates are at least as
/// frequent as the true top-`t`.
pub fn alpha_gap(cands: &CandidateSet, hist: &[f64], t: usize) -> Result<f64> {
    if cands.t() != t {
        return Err(Error::Domain(format!(
            "candidate set has {} items, expected t = {t}",
            cands.t()
        )));
    }
    let worst = cands
        .items()
        .iter()
        .map(|&j| hist[j as usize - 1])
        .fold(f64::INFINITY, f64::min);
    Ok((rank_t_value(hist, t) - worst).max(0.0))
}

/// Fraction of candidates that belong to the tie-resolved true top-`t`. With
/// `|C| = t` precision equals recall equals F1.
pub fn f1_score(cands: &CandidateSet, hist: &[f64], t: usize) -> Result<f64> {
    if cands.t() != t {
        return Err(Error::Domain(format!(
            "candidate set has {} items, expected t = {t}",
            cands.t()
        )));
    }
    let truth = top_t(hist, t)?;
    let overlap = cands.items().iter().filter(|&&j| truth.contains(j)).count();
    Ok(overlap as f64 / t as f64)
}

/// The 90%-confidence approximation gap of report-top-t:
/// `alpha = 4 sqrt((k+1)/n * q(1-q) * ln(20 d)) / (1 - 2q)` -- twice the
/// maximum-error width, by the displacement argument.
pub fn alpha_bound(n: usize, k: u32, q: f64, d: usize) -> f64 {
    let radicand = (k as f64 + 1.0) / n as f64 * q * (1.0 - q) * (20.0 * d as f64).ln();
    4.0 * radicand.sqrt() / (1.0 - 2.0 * q)
}
