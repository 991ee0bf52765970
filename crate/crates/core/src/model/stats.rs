use serde::{Deserialize, Serialize};

use super::spec::ModelSpec;

/// Fit summary reported alongside estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub n_free: usize,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub entropy: f64,
}

/// `(M−1) + (L−1)·M + (L−1)·P1 + (L−1)·P2 + Σ_k (S_k−1)·L`.
pub fn count_free_parameters(spec: &ModelSpec) -> usize {
    let l1 = spec.level1_classes - 1;
    (spec.level2_classes - 1)
        + l1 * spec.level2_classes
        + l1 * spec.level1_covariates
        + l1 * spec.level2_covariates
        + spec.n_crp_free()
}

/// `(AIC, BIC)` with the BIC sample size taken as the number of individuals.
pub fn information_criteria(loglik: f64, n_free: usize, n_individuals: usize) -> (f64, f64) {
    let p = n_free as f64;
    let deviance = -2.0 * loglik;
    (deviance + 2.0 * p, deviance + p * (n_individuals as f64).ln())
}

/// Relative entropy `1 − Σ_i Σ_c −p ln p / (N ln L)` of marginal level-1
/// posteriors. Returns 1 when `L < 2` or there are no rows.
pub fn relative_entropy<R: AsRef<[f64]>>(posteriors: &[R], n_classes: usize) -> f64 {
    if n_classes < 2 || posteriors.is_empty() {
        return 1.0;
    }
    let total: f64 = posteriors
        .iter()
        .flat_map(|row| row.as_ref().iter())
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    1.0 - total / (posteriors.len() as f64 * (n_classes as f64).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_parameter_counts() {
        let table2 = ModelSpec::binary(10, 3, 2, 4, 1).unwrap();
        assert_eq!(count_free_parameters(&table2), 45);
        let tiny = ModelSpec::binary(1, 2, 1, 0, 0).unwrap();
        assert_eq!(count_free_parameters(&tiny), 3);
        let sim = ModelSpec::binary(6, 3, 2, 1, 1).unwrap();
        assert_eq!(count_free_parameters(&sim), 27);
    }

    #[test]
    fn information_criteria_values() {
        let (aic, bic) = information_criteria(-25513.445, 45, 6580);
        assert!((aic - 51116.890).abs() < 5e-4);
        assert!((bic - 51422.521).abs() < 5e-4);
        assert_eq!(information_criteria(0.0, 1, 1), (2.0, 0.0));
        let (aic, bic) = information_criteria(-123.4, 7, 250);
        assert!((bic - aic - 7.0 * ((250f64).ln() - 2.0)).abs() < 1e-9);
    }

    #[test]
    fn entropy_bounds_and_hand_value() {
        assert_eq!(relative_entropy(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2), 1.0);
        assert!(relative_entropy(&[vec![0.5, 0.5], vec![0.5, 0.5]], 2).abs() < 1e-15);
        let e = relative_entropy(&[vec![0.9, 0.1], vec![0.5, 0.5]], 2);
        assert!((e - 0.2655).abs() < 5e-5, "{e}");
    }
}
