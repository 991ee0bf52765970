use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model dimensions.
///
/// `categories[k]` is the number of response categories `S_k` of indicator `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub categories: Vec<usize>,
    /// `L`, number of individual-level classes.
    pub level1_classes: usize,
    /// `M`, number of site-level classes.
    pub level2_classes: usize,
    /// `P1`, individual-level covariates.
    pub level1_covariates: usize,
    /// `P2`, site-level covariates.
    pub level2_covariates: usize,
}

impl ModelSpec {
    pub fn new(
        categories: Vec<usize>,
        level1_classes: usize,
        level2_classes: usize,
        level1_covariates: usize,
        level2_covariates: usize,
    ) -> Result<Self> {
        let spec = Self {
            categories,
            level1_classes,
            level2_classes,
            level1_covariates,
            level2_covariates,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `K` binary indicators.
    pub fn binary(
        n_indicators: usize,
        level1_classes: usize,
        level2_classes: usize,
        level1_covariates: usize,
        level2_covariates: usize,
    ) -> Result<Self> {
        Self::new(
            vec![2; n_indicators],
            level1_classes,
            level2_classes,
            level1_covariates,
            level2_covariates,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::InvalidSpec("at least one indicator is required".into()));
        }
        if let Some(k) = self.categories.iter().position(|&s| s < 2) {
            return Err(Error::InvalidSpec(format!(
                "indicator {} has {} categories (need at least 2)",
                k + 1,
                self.categories[k]
            )));
        }
        if self.level1_classes == 0 {
            return Err(Error::InvalidSpec("level-1 class count must be positive".into()));
        }
        if self.level2_classes == 0 {
            return Err(Error::InvalidSpec("level-2 class count must be positive".into()));
        }
        Ok(())
    }

    pub fn n_indicators(&self) -> usize {
        self.categories.len()
    }

    /// Total number of free CRP logits, `Σ_k (S_k − 1) · L`.
    pub fn n_crp_free(&self) -> usize {
        self.categories.iter().map(|s| s - 1).sum::<usize>() * self.level1_classes
    }

    /// Number of CRP rows `(k, s)` with `s ≥ 2`.
    pub fn n_crp_rows(&self) -> usize {
        self.categories.iter().map(|s| s - 1).sum()
    }
}
