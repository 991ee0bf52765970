//! Simulation design: the 96-condition factor grid, generating parameters
//! and synthetic datasets with recorded memberships.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    class_membership_probs, Dataset, Individual, ModelSpec, Parameters, Site, Truth,
};

pub const INDICATOR_LEVELS: [usize; 2] = [6, 12];
pub const QUALITY_LEVELS: [f64; 3] = [0.7, 0.8, 0.9];
pub const SITE_COUNT_LEVELS: [usize; 2] = [50, 150];
pub const SITE_SIZE_LEVELS: [usize; 2] = [30, 60];
pub const EFFECT_LEVELS: [(f64, f64); 2] = [(1.0, 1.0), (1.5, 3.0)];

/// Intercept separations of level-1 classes 1 and 2 against class 3.
pub const CLASS_SEPARATION: (f64, f64) = (2.5, 1.5);

/// One cell of the simulation design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub n_indicators: usize,
    /// High endorsement probability `q`; the low one is `1 − q`.
    pub crp_quality: f64,
    pub n_sites: usize,
    pub site_size: usize,
    /// Odds ratios of the individual covariate for classes 1 and 2 vs 3.
    pub l1_effects: (f64, f64),
    /// Odds ratios of the site covariate for classes 1 and 2 vs 3.
    pub l2_effects: (f64, f64),
}

/// The six design factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Factor {
    Indicators,
    Quality,
    Sites,
    SiteSize,
    Level1Effect,
    CrossLevelEffect,
}

impl Factor {
    pub const ALL: [Factor; 6] = [
        Factor::Indicators,
        Factor::Quality,
        Factor::Sites,
        Factor::SiteSize,
        Factor::Level1Effect,
        Factor::CrossLevelEffect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Factor::Indicators => "n_indicators",
            Factor::Quality => "crp_quality",
            Factor::Sites => "n_sites",
            Factor::SiteSize => "site_size",
            Factor::Level1Effect => "l1_effects",
            Factor::CrossLevelEffect => "l2_effects",
        }
    }

    /// Zero-based level of `cond` on this factor.
    pub fn level(self, cond: &Condition) -> usize {
        let pos_f = |levels: &[f64], v: f64| levels.iter().position(|l| (l - v).abs() < 1e-9);
        let pos_pair = |v: (f64, f64)| {
            EFFECT_LEVELS
                .iter()
                .position(|l| (l.0 - v.0).abs() < 1e-9 && (l.1 - v.1).abs() < 1e-9)
        };
        match self {
            Factor::Indicators => INDICATOR_LEVELS.iter().position(|&v| v == cond.n_indicators),
            Factor::Quality => pos_f(&QUALITY_LEVELS, cond.crp_quality),
            Factor::Sites => SITE_COUNT_LEVELS.iter().position(|&v| v == cond.n_sites),
            Factor::SiteSize => SITE_SIZE_LEVELS.iter().position(|&v| v == cond.site_size),
            Factor::Level1Effect => pos_pair(cond.l1_effects),
            Factor::CrossLevelEffect => pos_pair(cond.l2_effects),
        }
        .unwrap_or(usize::MAX)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "K{} q{} J{} n{} x({},{}) z({},{})",
            self.n_indicators,
            self.crp_quality,
            self.n_sites,
            self.site_size,
            self.l1_effects.0,
            self.l1_effects.1,
            self.l2_effects.0,
            self.l2_effects.1
        )
    }
}

impl Condition {
    /// Checks every factor against the design levels.
    pub fn validate(&self) -> Result<()> {
        for factor in Factor::ALL {
            if factor.level(self) == usize::MAX {
                let value = match factor {
                    Factor::Indicators => self.n_indicators.to_string(),
                    Factor::Quality => self.crp_quality.to_string(),
                    Factor::Sites => self.n_sites.to_string(),
                    Factor::SiteSize => self.site_size.to_string(),
                    Factor::Level1Effect => format!("{:?}", self.l1_effects),
                    Factor::CrossLevelEffect => format!("{:?}", self.l2_effects),
                };
                return Err(Error::InvalidCondition {
                    factor: factor.name(),
                    value,
                });
            }
        }
        Ok(())
    }

    /// Position in [`condition_grid`].
    pub fn id(&self) -> Option<usize> {
        condition_grid().iter().position(|c| c == self)
    }

    pub fn n_individuals(&self) -> usize {
        self.n_sites * self.site_size
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec::binary(self.n_indicators, 3, 2, 1, 1).expect("valid design spec")
    }

    pub fn is_nuisance_l1(&self) -> bool {
        self.l1_effects == (1.0, 1.0)
    }

    pub fn is_nuisance_l2(&self) -> bool {
        self.l2_effects == (1.0, 1.0)
    }
}

/// All 96 design cells in lexicographic factor order: indicators, quality,
/// sites, site size, level-1 effects, cross-level effects.
pub fn condition_grid() -> Vec<Condition> {
    let mut grid = Vec::with_capacity(96);
    for &n_indicators in &INDICATOR_LEVELS {
        for &crp_quality in &QUALITY_LEVELS {
            for &n_sites in &SITE_COUNT_LEVELS {
                for &site_size in &SITE_SIZE_LEVELS {
                    for &l1_effects in &EFFECT_LEVELS {
                        for &l2_effects in &EFFECT_LEVELS {
                            grid.push(Condition {
                                n_indicators,
                                crp_quality,
                                n_sites,
                                site_size,
                                l1_effects,
                                l2_effects,
                            });
                        }
                    }
                }
            }
        }
    }
    grid
}

/// Endorsement probabilities `P(Y_k = 2 | C = c)`: class 1 high on every
/// indicator, class 2 high on the first half and low on the second, class 3
/// low everywhere.
pub fn true_crp(n_indicators: usize, quality: f64) -> Vec<Vec<f64>> {
    let low = 1.0 - quality;
    (0..n_indicators)
        .map(|k| {
            let mixed = if k < n_indicators / 2 { quality } else { low };
            vec![quality, mixed, low]
        })
        .collect()
}

/// Generating parameters of a design cell.
///
/// Site classes are equally likely. Site class 1 has intercepts
/// `(ln 2.5, ln 1.5, 0)` and site class 2 the mirrored `(−ln 2.5, −ln 1.5, 0)`.
/// Covariate slopes are the log odds ratios of the cell.
pub fn build_true_parameters(cond: &Condition) -> Result<Parameters> {
    cond.validate()?;
    let spec = cond.model_spec();
    let mut p = Parameters::zeros(&spec);
    let (a, b) = (CLASS_SEPARATION.0.ln(), CLASS_SEPARATION.1.ln());
    p.gamma0[0] = vec![a, -a];
    p.gamma0[1] = vec![b, -b];
    p.gamma1[0][0] = cond.l1_effects.0.ln();
    p.gamma1[1][0] = cond.l1_effects.1.ln();
    p.gamma2[0][0] = cond.l2_effects.0.ln();
    p.gamma2[1][0] = cond.l2_effects.1.ln();
    p.set_binary_crp(&true_crp(cond.n_indicators, cond.crp_quality))?;
    Ok(p)
}

fn draw_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Draws a grouped dataset from `params`. Individual covariates are
/// Bernoulli(0.5), site covariates standard normal.
pub fn generate_from_parameters(
    params: &Parameters,
    n_sites: usize,
    site_size: usize,
    seed: u64,
) -> Result<Dataset> {
    let spec = params.spec();
    params.validate(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = params.level2_probs();
    let crp: Vec<Vec<Vec<f64>>> = (0..spec.n_indicators())
        .map(|k| (0..spec.level1_classes).map(|c| params.crp(k, c)).collect())
        .collect();
    let mut sites = Vec::with_capacity(n_sites);
    let mut level1 = Vec::with_capacity(n_sites * site_size);
    let mut level2 = Vec::with_capacity(n_sites);
    for j in 0..n_sites {
        let w = draw_categorical(&pi, &mut rng);
        let z: Vec<f64> = (0..spec.level2_covariates)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let mut rows = Vec::with_capacity(site_size);
        for _ in 0..site_size {
            let x: Vec<f64> = (0..spec.level1_covariates)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
                .collect();
            let probs = class_membership_probs(params, w, &x, &z)?;
            let c = draw_categorical(&probs, &mut rng);
            let y = crp
                .iter()
                .map(|per_class| draw_categorical(&per_class[c], &mut rng) as u16 + 1)
                .collect();
            level1.push(c);
            rows.push(Individual { y, x });
        }
        level2.push(w);
        sites.push(Site {
            id: (j + 1).to_string(),
            z,
            rows,
        });
    }
    Ok(Dataset {
        sites,
        truth: Some(Truth { level1, level2 }),
    })
}

/// Dataset for a design cell, drawn from `params` (normally
/// [`build_true_parameters`] of the same cell).
pub fn generate_dataset(cond: &Condition, params: &Parameters, seed: u64) -> Result<Dataset> {
    cond.validate()?;
    generate_from_parameters(params, cond.n_sites, cond.site_size, seed)
}

/// Seed of replication `rep` of condition `condition` under `master`.
/// SplitMix64 finalizer over the packed triple, so substreams do not depend
/// on execution order.
pub fn replication_seed(master: u64, condition: usize, rep: usize) -> u64 {
    let mut z = master
        ^ (condition as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (rep as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
