use std::fmt;

use serde::{Deserialize, Serialize};

use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::math::softmax;

/// All parameters of the conditional model.
///
/// Reference cells are stored explicitly and are exactly zero:
/// `alpha[0]`, the last level-1 class row of every `gamma*` block, and the
/// first category of every `beta[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    /// Site-class logits, length `M`.
    pub alpha: Vec<f64>,
    /// Individual-class intercepts per site class, `L × M`.
    pub gamma0: Vec<Vec<f64>>,
    /// Individual covariate slopes, `L × P1`.
    pub gamma1: Vec<Vec<f64>>,
    /// Cross-level (site covariate) slopes, `L × P2`.
    pub gamma2: Vec<Vec<f64>>,
    /// Response logits, `K × S_k × L`.
    pub beta: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamBlock {
    Alpha,
    Gamma0,
    Gamma1,
    Gamma2,
    Beta,
}

/// Location of one free parameter. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLabel {
    pub block: ParamBlock,
    /// Level-1 class (level-2 class for `Alpha`).
    pub class: usize,
    /// Site class for `Gamma0`, covariate for `Gamma1`/`Gamma2`, indicator for `Beta`.
    pub index: usize,
    /// Response category for `Beta`.
    pub category: usize,
}

impl fmt::Display for ParamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.block {
            ParamBlock::Alpha => write!(f, "alpha[w{}]", self.class + 1),
            ParamBlock::Gamma0 => write!(f, "gamma0[c{},w{}]", self.class + 1, self.index + 1),
            ParamBlock::Gamma1 => write!(f, "gamma1[c{},x{}]", self.class + 1, self.index + 1),
            ParamBlock::Gamma2 => write!(f, "gamma2[c{},z{}]", self.class + 1, self.index + 1),
            ParamBlock::Beta => write!(
                f,
                "beta[y{}={}|c{}]",
                self.index + 1,
                self.category + 1,
                self.class + 1
            ),
        }
    }
}

impl Parameters {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let l = spec.level1_classes;
        Self {
            alpha: vec![0.0; spec.level2_classes],
            gamma0: vec![vec![0.0; spec.level2_classes]; l],
            gamma1: vec![vec![0.0; spec.level1_covariates]; l],
            gamma2: vec![vec![0.0; spec.level2_covariates]; l],
            beta: spec.categories.iter().map(|&s| vec![vec![0.0; l]; s]).collect(),
        }
    }

    /// Builds binary-indicator parameters from endorsement probabilities
    /// `crp[k][c] = P(Y_k = 2 | C = c)`.
    pub fn set_binary_crp(&mut self, crp: &[Vec<f64>]) -> Result<()> {
        if crp.len() != self.beta.len() {
            return Err(Error::Dimension {
                what: "CRP rows",
                expected: self.beta.len(),
                found: crp.len(),
            });
        }
        for (k, row) in crp.iter().enumerate() {
            if self.beta[k].len() != 2 {
                return Err(Error::InvalidParameters(format!(
                    "indicator {} is not binary",
                    k + 1
                )));
            }
            if row.len() != self.level1_classes() {
                return Err(Error::Dimension {
                    what: "CRP columns",
                    expected: self.level1_classes(),
                    found: row.len(),
                });
            }
            for (c, &p) in row.iter().enumerate() {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::InvalidParameters(format!(
                        "CRP[{},{}] = {p} is not in (0, 1)",
                        k + 1,
                        c + 1
                    )));
                }
                self.beta[k][0][c] = 0.0;
                self.beta[k][1][c] = (p / (1.0 - p)).ln();
            }
        }
        Ok(())
    }

    pub fn level1_classes(&self) -> usize {
        self.gamma0.len()
    }

    pub fn level2_classes(&self) -> usize {
        self.alpha.len()
    }

    /// Dimensions implied by the block shapes.
    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            categories: self.beta.iter().map(Vec::len).collect(),
            level1_classes: self.level1_classes(),
            level2_classes: self.level2_classes(),
            level1_covariates: self.gamma1.first().map_or(0, Vec::len),
            level2_covariates: self.gamma2.first().map_or(0, Vec::len),
        }
    }

    /// Checks shapes against `spec`, finiteness and zero reference cells.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let l = spec.level1_classes;
        let m = spec.level2_classes;
        let dim = |what, expected, found| {
            if expected == found {
                Ok(())
            } else {
                Err(Error::Dimension {
                    what,
                    expected,
                    found,
                })
            }
        };
        dim("alpha", m, self.alpha.len())?;
        dim("gamma0 rows", l, self.gamma0.len())?;
        dim("gamma1 rows", l, self.gamma1.len())?;
        dim("gamma2 rows", l, self.gamma2.len())?;
        dim("beta indicators", spec.n_indicators(), self.beta.len())?;
        for c in 0..l {
            dim("gamma0 columns", m, self.gamma0[c].len())?;
            dim("gamma1 columns", spec.level1_covariates, self.gamma1[c].len())?;
            dim("gamma2 columns", spec.level2_covariates, self.gamma2[c].len())?;
        }
        for (k, block) in self.beta.iter().enumerate() {
            dim("beta categories", spec.categories[k], block.len())?;
            for row in block {
                dim("beta classes", l, row.len())?;
            }
        }
        let free = self.to_free();
        if free.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters("non-finite entry".into()));
        }
        let reference_zero = self.alpha[0] == 0.0
            && self.gamma0[l - 1].iter().all(|v| *v == 0.0)
            && self.gamma1[l - 1].iter().all(|v| *v == 0.0)
            && self.gamma2[l - 1].iter().all(|v| *v == 0.0)
            && self.beta.iter().all(|b| b[0].iter().all(|v| *v == 0.0));
        if !reference_zero {
            return Err(Error::InvalidParameters("reference cell is not zero".into()));
        }
        Ok(())
    }

    /// Labels of the free parameters in [`Parameters::to_free`] order:
    /// alpha, gamma0, gamma1, gamma2, beta.
    pub fn free_labels(spec: &ModelSpec) -> Vec<ParamLabel> {
        let l = spec.level1_classes;
        let mut labels = Vec::new();
        let label = |block, class, index, category| ParamLabel {
            block,
            class,
            index,
            category,
        };
        for m in 1..spec.level2_classes {
            labels.push(label(ParamBlock::Alpha, m, 0, 0));
        }
        for c in 0..l.saturating_sub(1) {
            for m in 0..spec.level2_classes {
                labels.push(label(ParamBlock::Gamma0, c, m, 0));
            }
        }
        for c in 0..l.saturating_sub(1) {
            for p in 0..spec.level1_covariates {
                labels.push(label(ParamBlock::Gamma1, c, p, 0));
            }
        }
        for c in 0..l.saturating_sub(1) {
            for p in 0..spec.level2_covariates {
                labels.push(label(ParamBlock::Gamma2, c, p, 0));
            }
        }
        for (k, &s_k) in spec.categories.iter().enumerate() {
            for s in 1..s_k {
                for c in 0..l {
                    labels.push(label(ParamBlock::Beta, c, k, s));
                }
            }
        }
        labels
    }

    pub fn get(&self, label: &ParamLabel) -> f64 {
        match label.block {
            ParamBlock::Alpha => self.alpha[label.class],
            ParamBlock::Gamma0 => self.gamma0[label.class][label.index],
            ParamBlock::Gamma1 => self.gamma1[label.class][label.index],
            ParamBlock::Gamma2 => self.gamma2[label.class][label.index],
            ParamBlock::Beta => self.beta[label.index][label.category][label.class],
        }
    }

    fn slot(&mut self, label: &ParamLabel) -> &mut f64 {
        match label.block {
            ParamBlock::Alpha => &mut self.alpha[label.class],
            ParamBlock::Gamma0 => &mut self.gamma0[label.class][label.index],
            ParamBlock::Gamma1 => &mut self.gamma1[label.class][label.index],
            ParamBlock::Gamma2 => &mut self.gamma2[label.class][label.index],
            ParamBlock::Beta => &mut self.beta[label.index][label.category][label.class],
        }
    }

    pub fn to_free(&self) -> Vec<f64> {
        Self::free_labels(&self.spec())
            .iter()
            .map(|lab| self.get(lab))
            .collect()
    }

    pub fn from_free(spec: &ModelSpec, values: &[f64]) -> Result<Self> {
        let labels = Self::free_labels(spec);
        if labels.len() != values.len() {
            return Err(Error::Dimension {
                what: "free parameter vector",
                expected: labels.len(),
                found: values.len(),
            });
        }
        let mut params = Self::zeros(spec);
        for (lab, v) in labels.iter().zip(values) {
            *params.slot(lab) = *v;
        }
        Ok(params)
    }

    /// Site-class probabilities `softmax(alpha)`.
    pub fn level2_probs(&self) -> Vec<f64> {
        softmax(&self.alpha)
    }

    /// Response probabilities of indicator `k` for class `c`, over categories.
    pub fn crp(&self, k: usize, c: usize) -> Vec<f64> {
        let logits: Vec<f64> = self.beta[k].iter().map(|row| row[c]).collect();
        softmax(&logits)
    }

    /// CRP matrix with one row per non-reference category `(k, s ≥ 2)` and one
    /// column per level-1 class. For binary indicators row `k` holds
    /// `P(Y_k = 2 | C = c)`. Row-major flattening matches the beta block of
    /// [`Parameters::to_free`].
    pub fn crp_matrix(&self) -> Vec<Vec<f64>> {
        let l = self.level1_classes();
        let mut rows = Vec::new();
        for k in 0..self.beta.len() {
            let per_class: Vec<Vec<f64>> = (0..l).map(|c| self.crp(k, c)).collect();
            for s in 1..self.beta[k].len() {
                rows.push((0..l).map(|c| per_class[c][s]).collect());
            }
        }
        rows
    }

    /// Relabels classes. `perm1[c_new] = c_old` over level-1 classes and
    /// `perm2[m_new] = m_old` over level-2 classes. Logit blocks are
    /// re-expressed against the reference classes (last level-1 class, first
    /// level-2 class), which are therefore exactly zero afterwards.
    pub fn relabel(&self, perm1: &[usize], perm2: &[usize]) -> Self {
        let l = self.level1_classes();
        let ref1 = perm1[l - 1];
        let shift_rows = |block: &Vec<Vec<f64>>, cols: &dyn Fn(usize) -> usize| -> Vec<Vec<f64>> {
            let width = block.first().map_or(0, Vec::len);
            (0..l)
                .map(|c| {
                    if c == l - 1 {
                        vec![0.0; width]
                    } else {
                        (0..width)
                            .map(|j| block[perm1[c]][cols(j)] - block[ref1][cols(j)])
                            .collect()
                    }
                })
                .collect()
        };
        let identity = |j: usize| j;
        let by_perm2 = |j: usize| perm2[j];
        let alpha_ref = self.alpha[perm2[0]];
        let alpha = (0..self.alpha.len())
            .map(|m| {
                if m == 0 {
                    0.0
                } else {
                    self.alpha[perm2[m]] - alpha_ref
                }
            })
            .collect();
        let beta = self
            .beta
            .iter()
            .map(|block| {
                block
                    .iter()
                    .map(|row| perm1.iter().map(|&old| row[old]).collect())
                    .collect()
            })
            .collect();
        Self {
            alpha,
            gamma0: shift_rows(&self.gamma0, &by_perm2),
            gamma1: shift_rows(&self.gamma1, &identity),
            gamma2: shift_rows(&self.gamma2, &identity),
            beta,
        }
    }
}
