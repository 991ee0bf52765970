//! Score vector and observed information.
//!
//! The score uses the Fisher identity: the gradient of the observed
//! log-likelihood equals the gradient of the expected complete-data
//! log-likelihood at the posteriors of the same parameters. The observed
//! information is minus the central-difference Jacobian of that score.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::estep::e_step_indexed;
use super::index::DataIndex;
use super::mstep::{gamma_grad_hess_indexed, GammaStats};
use crate::error::Result;
use crate::model::{Dataset, Parameters};

const RELATIVE_STEP: f64 = 1e-4;
const ABSOLUTE_STEP: f64 = 1e-5;

/// Standard errors from the inverse observed information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    /// One entry per free parameter; `None` when unavailable.
    pub se: Vec<Option<f64>>,
    /// Full covariance of the free parameters, when the information is
    /// positive definite.
    pub covariance: Option<Vec<Vec<f64>>>,
    /// `max |H − Hᵀ| / max |H|` of the raw finite-difference Hessian.
    pub asymmetry: f64,
}

pub(crate) struct ScoreEvaluator {
    index: DataIndex,
}

impl ScoreEvaluator {
    pub fn new(data: &Dataset) -> Self {
        Self {
            index: DataIndex::new(data),
        }
    }

    pub fn from_index(index: DataIndex) -> Self {
        Self { index }
    }

    /// Log-likelihood and score in [`Parameters::to_free`] order.
    pub fn score(&self, params: &Parameters) -> (f64, Vec<f64>) {
        let index = &self.index;
        let (loglik, post) = e_step_indexed(index, params);
        let spec = params.spec();
        let l = spec.level1_classes;
        let m = spec.level2_classes;
        let mut out = Vec::with_capacity(Parameters::free_labels(&spec).len());

        let pi = params.level2_probs();
        let mut mass = vec![0.0; m];
        for row in post.site_rows() {
            for (acc, v) in mass.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let n_sites = index.n_sites() as f64;
        for mm in 1..m {
            out.push(mass[mm] - n_sites * pi[mm]);
        }

        if l > 1 {
            let stats = GammaStats::new(index, &post);
            let (g, _) = gamma_grad_hess_indexed(index, &stats, params, false);
            let width = m + spec.level1_covariates + spec.level2_covariates;
            for c in 0..l - 1 {
                out.extend_from_slice(&g[c * width..c * width + m]);
            }
            for c in 0..l - 1 {
                out.extend_from_slice(&g[c * width + m..c * width + m + spec.level1_covariates]);
            }
            for c in 0..l - 1 {
                out.extend_from_slice(&g[c * width + m + spec.level1_covariates..(c + 1) * width]);
            }
        }

        let mut by_pattern = vec![0.0; index.patterns.len() * l];
        for i in 0..index.n_individuals {
            let p = index.pattern_of[i];
            for (acc, v) in by_pattern[p * l..(p + 1) * l].iter_mut().zip(post.marginal(i)) {
                *acc += v;
            }
        }
        for (k, &s_k) in spec.categories.iter().enumerate() {
            let mut counts = vec![vec![0.0; l]; s_k];
            for (p, pattern) in index.patterns.iter().enumerate() {
                for c in 0..l {
                    counts[pattern[k]][c] += by_pattern[p * l + c];
                }
            }
            let probs: Vec<Vec<f64>> = (0..l).map(|c| params.crp(k, c)).collect();
            for s in 1..s_k {
                for c in 0..l {
                    let n_c: f64 = (0..s_k).map(|t| counts[t][c]).sum();
                    out.push(counts[s][c] - n_c * probs[c][s]);
                }
            }
        }
        (loglik, out)
    }

    /// Raw (unsymmetrized) central-difference Jacobian of the score.
    pub fn hessian(&self, params: &Parameters) -> DMatrix<f64> {
        let spec = params.spec();
        let theta = params.to_free();
        let n = theta.len();
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            let step = (RELATIVE_STEP * theta[j].abs()).max(ABSOLUTE_STEP);
            let mut plus = theta.clone();
            plus[j] += step;
            let mut minus = theta.clone();
            minus[j] -= step;
            let pp = Parameters::from_free(&spec, &plus).expect("same shape");
            let pm = Parameters::from_free(&spec, &minus).expect("same shape");
            let (_, gp) = self.score(&pp);
            let (_, gm) = self.score(&pm);
            let width = plus[j] - minus[j];
            for i in 0..n {
                h[(i, j)] = (gp[i] - gm[i]) / width;
            }
        }
        h
    }

    pub fn standard_errors(&self, params: &Parameters) -> StandardErrors {
        let h = self.hessian(params);
        let n = h.nrows();
        let asymmetry = hessian_asymmetry(&h);
        let sym = (&h + h.transpose()) * 0.5;
        let information = -sym;
        let unavailable = StandardErrors {
            se: vec![None; n],
            covariance: None,
            asymmetry,
        };
        if n == 0 || information.iter().any(|v| !v.is_finite()) {
            return unavailable;
        }
        let Some(chol) = information.cholesky() else {
            return unavailable;
        };
        let cov = chol.inverse();
        let se = (0..n)
            .map(|i| {
                let v = cov[(i, i)];
                (v > 0.0 && v.is_finite()).then(|| v.sqrt())
            })
            .collect();
        let covariance = Some((0..n).map(|i| (0..n).map(|j| cov[(i, j)]).collect()).collect());
        StandardErrors {
            se,
            covariance,
            asymmetry,
        }
    }
}

/// `max |H − Hᵀ| / max |H|`.
pub fn hessian_asymmetry(h: &DMatrix<f64>) -> f64 {
    let scale = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let diff = (&h.transpose() - h).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    diff / scale
}

/// Analytic score of the log-likelihood over the free parameters.
pub fn loglik_gradient(data: &Dataset, params: &Parameters) -> Result<Vec<f64>> {
    data.validate(&params.spec())?;
    Ok(ScoreEvaluator::new(data).score(params).1)
}

/// Central-difference Hessian of the log-likelihood (raw, not symmetrized).
pub fn numerical_hessian(data: &Dataset, params: &Parameters) -> Result<DMatrix<f64>> {
    data.validate(&params.spec())?;
    Ok(ScoreEvaluator::new(data).hessian(params))
}

/// Standard errors from the inverse of the negative numerical Hessian.
/// A Hessian that is not negative definite yields unavailable entries.
pub fn standard_errors(data: &Dataset, params: &Parameters) -> Result<StandardErrors> {
    data.validate(&params.spec())?;
    Ok(ScoreEvaluator::new(data).standard_errors(params))
}
