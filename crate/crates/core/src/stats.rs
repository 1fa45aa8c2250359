//! Small goodness-of-fit helpers shared by tests and the audit tooling.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square statistic against arbitrary expected probabilities.
/// Categories with expected count below 5 are pooled into one tail bucket.
/// Returns `(statistic, degrees_of_freedom)`.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> (f64, usize) {
    assert_eq!(observed.len(), expected_probs.len());
    let total: u64 = observed.iter().sum();
    let t = total as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        let e = t * p;
        if e < 5.0 {
            pooled_obs += o as f64;
            pooled_exp += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    (stat, cells.saturating_sub(1).max(1))
}

/// Chi-square statistic against the uniform law over the observed cells.
pub fn chi_square_uniform(observed: &[u64]) -> (f64, usize) {
    let p = 1.0 / observed.len() as f64;
    let probs = vec![p; observed.len()];
    chi_square_gof(observed, &probs)
}

/// Upper quantile of the chi-square law, e.g. `confidence = 0.99` for a test
/// at 1% significance.
pub fn chi_square_critical(dof: usize, confidence: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("dof >= 1")
        .inverse_cdf(confidence)
}

/// Median of a sample (averages the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_values_match_tables() {
        // classic table entries
        assert!((chi_square_critical(1, 0.99) - 6.635).abs() < 5e-3);
        assert!((chi_square_critical(5, 0.99) - 15.086).abs() < 5e-3);
        assert!((chi_square_critical(10, 0.95) - 18.307).abs() < 5e-3);
    }

    #[test]
    fn uniform_fit_accepts_uniform_counts() {
        let counts = vec![1000u64; 20];
        let (stat, dof) = chi_square_uniform(&counts);
        assert_eq!(dof, 19);
        assert!(stat < chi_square_critical(dof, 0.99));
    }

    #[test]
    fn gof_pools_small_cells() {
        // expected counts 992, 4, 4: the two small cells pool into one
        let observed = vec![990u64, 6, 4];
        let probs = vec![0.992, 0.004, 0.004];
        let (_, dof) = chi_square_gof(&observed, &probs);
        assert_eq!(dof, 1);
    }

    #[test]
    fn median_handles_both_parities() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
