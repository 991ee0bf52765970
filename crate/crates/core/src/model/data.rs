use serde::{Deserialize, Serialize};

use super::spec::ModelSpec;
use crate::error::{Error, Result};

/// One individual: indicator responses coded `1..=S_k` and level-1 covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub y: Vec<u16>,
    pub x: Vec<f64>,
}

/// One level-2 unit with its covariates and members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub z: Vec<f64>,
    pub rows: Vec<Individual>,
}

/// Generating memberships, zero-based. `level1` is flattened over sites in
/// dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub level1: Vec<usize>,
    pub level2: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub sites: Vec<Site>,
    pub truth: Option<Truth>,
}

impl Dataset {
    pub fn new(sites: Vec<Site>) -> Self {
        Self { sites, truth: None }
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_individuals(&self) -> usize {
        self.sites.iter().map(|s| s.rows.len()).sum()
    }

    /// Flattened index of the first individual of each site, plus the total.
    pub fn site_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.sites.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for s in &self.sites {
            acc += s.rows.len();
            offsets.push(acc);
        }
        offsets
    }

    pub fn individuals(&self) -> impl Iterator<Item = (&Site, &Individual)> {
        self.sites
            .iter()
            .flat_map(|s| s.rows.iter().map(move |r| (s, r)))
    }

    /// Largest category code observed per indicator, floored at 2.
    pub fn observed_categories(&self) -> Vec<usize> {
        let k = self
            .sites
            .iter()
            .flat_map(|s| s.rows.first())
            .map(|r| r.y.len())
            .next()
            .unwrap_or(0);
        let mut cats = vec![2usize; k];
        for (_, row) in self.individuals() {
            for (c, &v) in cats.iter_mut().zip(&row.y) {
                *c = (*c).max(v as usize);
            }
        }
        cats
    }

    /// Checks the dataset against `spec`. Truth labels are checked for length
    /// only, so a model with a different number of classes can still be fit.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.sites.is_empty() || self.n_individuals() == 0 {
            return Err(Error::EmptyDataset);
        }
        for site in &self.sites {
            if site.rows.is_empty() {
                return Err(Error::InvalidData(format!("site {} has no individuals", site.id)));
            }
            if site.z.len() != spec.level2_covariates {
                return Err(Error::Dimension {
                    what: "level-2 covariates",
                    expected: spec.level2_covariates,
                    found: site.z.len(),
                });
            }
            if site.z.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "site {} has a non-finite covariate",
                    site.id
                )));
            }
            for row in &site.rows {
                if row.y.len() != spec.n_indicators() {
                    return Err(Error::Dimension {
                        what: "indicators",
                        expected: spec.n_indicators(),
                        found: row.y.len(),
                    });
                }
                if row.x.len() != spec.level1_covariates {
                    return Err(Error::Dimension {
                        what: "level-1 covariates",
                        expected: spec.level1_covariates,
                        found: row.x.len(),
                    });
                }
                for (k, (&code, &s_k)) in row.y.iter().zip(&spec.categories).enumerate() {
                    if code == 0 || code as usize > s_k {
                        return Err(Error::Category {
                            indicator: k + 1,
                            code,
                            max: s_k,
                        });
                    }
                }
                if row.x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidData(format!(
                        "site {} has a non-finite individual covariate",
                        site.id
                    )));
                }
            }
        }
        if let Some(truth) = &self.truth {
            if truth.level1.len() != self.n_individuals() || truth.level2.len() != self.n_sites() {
                return Err(Error::InvalidData("truth length does not match data".into()));
            }
        }
        Ok(())
    }
}
