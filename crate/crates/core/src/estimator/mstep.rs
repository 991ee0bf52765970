//! Generalized M-step.
//!
//! Site-class logits and response logits have closed-form weighted MLEs.
//! The class-membership regression (intercepts per site class plus
//! individual and cross-level slopes) takes one damped Newton step on the
//! weighted multinomial-logit objective
//! `Σ_j Σ_m w[j,m] Σ_i Σ_c c_cond[i,m,c] ln P(c | m, x_ij, z_j)`.

use nalgebra::{DMatrix, DVector};

use super::estep::{group_log_membership, Posteriors};
use super::index::DataIndex;
use crate::error::{Error, Result};
use crate::model::{Dataset, Parameters};

const PROB_FLOOR: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct MStepInfo {
    pub newton_fallback: bool,
    pub gamma_step_rejected: bool,
}

/// Posterior mass per covariate group: targets `[g][m][c]`, weights `[g][m]`.
pub(crate) struct GammaStats {
    pub targets: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GammaStats {
    pub fn new(index: &DataIndex, post: &Posteriors) -> Self {
        let l = post.level1_classes;
        let m = post.level2_classes;
        let mut targets = vec![0.0; index.groups.len() * m * l];
        let mut weights = vec![0.0; index.groups.len() * m];
        for (g, group) in index.groups.iter().enumerate() {
            let t = &mut targets[g * m * l..(g + 1) * m * l];
            for &i in &group.members {
                for (acc, v) in t.iter_mut().zip(&post.c_cond[i * m * l..(i + 1) * m * l]) {
                    *acc += v;
                }
            }
            weights[g * m..(g + 1) * m].copy_from_slice(post.site(group.site));
        }
        Self { targets, weights }
    }
}

/// Number of regression coefficients per non-reference class.
fn gamma_width(params: &Parameters) -> usize {
    let spec = params.spec();
    spec.level2_classes + spec.level1_covariates + spec.level2_covariates
}

/// Regression coefficients in `[c][feature]` order, `c < L − 1`, features
/// `(site-class indicators, x, z)`.
pub(crate) fn gamma_coords(params: &Parameters) -> Vec<f64> {
    let l = params.level1_classes();
    let mut out = Vec::with_capacity((l - 1) * gamma_width(params));
    for c in 0..l - 1 {
        out.extend_from_slice(&params.gamma0[c]);
        out.extend_from_slice(&params.gamma1[c]);
        out.extend_from_slice(&params.gamma2[c]);
    }
    out
}

pub(crate) fn set_gamma_coords(params: &mut Parameters, coords: &[f64]) {
    let l = params.level1_classes();
    let m = params.level2_classes();
    let p1 = params.gamma1[0].len();
    let width = gamma_width(params);
    for c in 0..l - 1 {
        let row = &coords[c * width..(c + 1) * width];
        params.gamma0[c].copy_from_slice(&row[..m]);
        params.gamma1[c].copy_from_slice(&row[m..m + p1]);
        params.gamma2[c].copy_from_slice(&row[m + p1..]);
    }
}

fn features(m_count: usize, m: usize, x: &[f64], z: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend((0..m_count).map(|mm| if mm == m { 1.0 } else { 0.0 }));
    out.extend_from_slice(x);
    out.extend_from_slice(z);
}

pub(crate) fn gamma_objective_indexed(
    index: &DataIndex,
    stats: &GammaStats,
    params: &Parameters,
) -> f64 {
    let l = params.level1_classes();
    let m = params.level2_classes();
    let mut logp = vec![0.0; m * l];
    let mut total = 0.0;
    for (g, group) in index.groups.iter().enumerate() {
        group_log_membership(params, &group.x, &index.z[group.site], &mut logp);
        for mm in 0..m {
            let w = stats.weights[g * m + mm];
            if w == 0.0 {
                continue;
            }
            let t = &stats.targets[(g * m + mm) * l..(g * m + mm + 1) * l];
            let inner: f64 = t
                .iter()
                .zip(&logp[mm * l..(mm + 1) * l])
                .filter(|(r, _)| **r > 0.0)
                .map(|(r, lp)| r * lp)
                .sum();
            total += w * inner;
        }
    }
    total
}

/// Gradient and Hessian of the weighted objective in [`gamma_coords`] order.
pub(crate) fn gamma_grad_hess_indexed(
    index: &DataIndex,
    stats: &GammaStats,
    params: &Parameters,
    with_hessian: bool,
) -> (Vec<f64>, DMatrix<f64>) {
    let l = params.level1_classes();
    let m = params.level2_classes();
    let width = gamma_width(params);
    let dim = (l - 1) * width;
    let mut grad = vec![0.0; dim];
    let mut hess = DMatrix::zeros(if with_hessian { dim } else { 0 }, if with_hessian { dim } else { 0 });
    let mut logp = vec![0.0; m * l];
    let mut d = Vec::with_capacity(width);
    for (g, group) in index.groups.iter().enumerate() {
        let z = &index.z[group.site];
        group_log_membership(params, &group.x, z, &mut logp);
        for mm in 0..m {
            let w = stats.weights[g * m + mm];
            if w == 0.0 {
                continue;
            }
            let t = &stats.targets[(g * m + mm) * l..(g * m + mm + 1) * l];
            let n: f64 = t.iter().sum();
            let p: Vec<f64> = logp[mm * l..(mm + 1) * l].iter().map(|v| v.exp()).collect();
            features(m, mm, &group.x, z, &mut d);
            for c in 0..l - 1 {
                let resid = w * (t[c] - n * p[c]);
                for (f, df) in d.iter().enumerate() {
                    grad[c * width + f] += resid * df;
                }
            }
            if with_hessian {
                let wn = w * n;
                for c in 0..l - 1 {
                    for c2 in 0..l - 1 {
                        let cov = if c == c2 { p[c] - p[c] * p[c2] } else { -p[c] * p[c2] };
                        let coef = wn * cov;
                        if coef == 0.0 {
                            continue;
                        }
                        for (f, df) in d.iter().enumerate() {
                            if *df == 0.0 {
                                continue;
                            }
                            for (f2, df2) in d.iter().enumerate() {
                                hess[(c * width + f, c2 * width + f2)] -= coef * df * df2;
                            }
                        }
                    }
                }
            }
        }
    }
    (grad, hess)
}

fn update_gamma(index: &DataIndex, post: &Posteriors, params: &mut Parameters, info: &mut MStepInfo) {
    if params.level1_classes() < 2 {
        return;
    }
    let stats = GammaStats::new(index, post);
    let (grad, hess) = gamma_grad_hess_indexed(index, &stats, params, true);
    if grad.iter().all(|g| *g == 0.0) {
        return;
    }
    let dim = grad.len();
    let info_matrix = -hess;
    let g = DVector::from_vec(grad.clone());
    let newton = info_matrix
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&g))
        .filter(|step| step.iter().all(|v| v.is_finite()));
    let direction: Vec<f64> = match newton {
        Some(step) => step.iter().copied().collect(),
        None => {
            info.newton_fallback = true;
            let scale = (0..dim).map(|i| info_matrix[(i, i)].abs()).sum::<f64>().max(1e-8);
            grad.iter().map(|v| v / scale).collect()
        }
    };

    let base = gamma_coords(params);
    let q0 = gamma_objective_indexed(index, &stats, params);
    let mut trial = params.clone();
    let mut step = 1.0;
    for _ in 0..MAX_HALVINGS {
        let coords: Vec<f64> = base.iter().zip(&direction).map(|(b, d)| b + step * d).collect();
        set_gamma_coords(&mut trial, &coords);
        let q = gamma_objective_indexed(index, &stats, &trial);
        if q.is_finite() && q >= q0 {
            *params = trial;
            return;
        }
        step *= 0.5;
    }
    info.gamma_step_rejected = true;
}

fn update_alpha(post: &Posteriors, params: &mut Parameters) {
    let m = post.level2_classes;
    if m < 2 {
        return;
    }
    let mut mass = vec![0.0; m];
    for row in post.site_rows() {
        for (acc, v) in mass.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let total: f64 = mass.iter().sum();
    let log_p: Vec<f64> = mass.iter().map(|v| (v / total).max(PROB_FLOOR).ln()).collect();
    let candidate: Vec<f64> = log_p.iter().map(|v| v - log_p[0]).collect();
    let objective = |alpha: &[f64]| {
        let lse = crate::math::log_sum_exp(alpha);
        mass.iter().zip(alpha).map(|(w, a)| w * (a - lse)).sum::<f64>()
    };
    if objective(&candidate) >= objective(&params.alpha) {
        params.alpha = candidate;
    }
}

fn update_beta(index: &DataIndex, post: &Posteriors, params: &mut Parameters) {
    let l = post.level1_classes;
    let mut by_pattern = vec![0.0; index.patterns.len() * l];
    for i in 0..index.n_individuals {
        let p = index.pattern_of[i];
        for (acc, v) in by_pattern[p * l..(p + 1) * l].iter_mut().zip(post.marginal(i)) {
            *acc += v;
        }
    }
    for (k, block) in params.beta.iter_mut().enumerate() {
        let s_k = block.len();
        let mut counts = vec![vec![0.0; l]; s_k];
        for (p, pattern) in index.patterns.iter().enumerate() {
            let s = pattern[k];
            for c in 0..l {
                counts[s][c] += by_pattern[p * l + c];
            }
        }
        for c in 0..l {
            let n: f64 = (0..s_k).map(|s| counts[s][c]).sum();
            if !(n > 0.0) {
                continue;
            }
            let log_p: Vec<f64> = (0..s_k).map(|s| (counts[s][c] / n).max(PROB_FLOOR).ln()).collect();
            let candidate: Vec<f64> = log_p.iter().map(|v| v - log_p[0]).collect();
            let current: Vec<f64> = (0..s_k).map(|s| block[s][c]).collect();
            let objective = |logits: &[f64]| {
                let lse = crate::math::log_sum_exp(logits);
                (0..s_k).map(|s| counts[s][c] * (logits[s] - lse)).sum::<f64>()
            };
            if objective(&candidate) >= objective(&current) {
                for s in 0..s_k {
                    block[s][c] = candidate[s];
                }
            }
        }
    }
}

pub(crate) fn m_step_indexed(
    index: &DataIndex,
    post: &Posteriors,
    params: &Parameters,
) -> (Parameters, MStepInfo) {
    let mut next = params.clone();
    let mut info = MStepInfo::default();
    update_alpha(post, &mut next);
    update_beta(index, post, &mut next);
    update_gamma(index, post, &mut next, &mut info);
    (next, info)
}

fn check_posteriors(data: &Dataset, post: &Posteriors, params: &Parameters) -> Result<()> {
    if post.level1_classes != params.level1_classes()
        || post.level2_classes != params.level2_classes()
        || post.n_sites() != data.n_sites()
        || post.n_individuals() != data.n_individuals()
        || post.c_cond.len() != data.n_individuals() * post.level1_classes * post.level2_classes
    {
        return Err(Error::InvalidData("posteriors do not match data and parameters".into()));
    }
    Ok(())
}

/// One generalized M-step from posteriors computed at `params`.
pub fn m_step(data: &Dataset, post: &Posteriors, params: &Parameters) -> Result<Parameters> {
    data.validate(&params.spec())?;
    check_posteriors(data, post, params)?;
    Ok(m_step_indexed(&DataIndex::new(data), post, params).0)
}

/// Weighted multinomial-logit objective of the class-membership regression.
pub fn weighted_logit_objective(data: &Dataset, post: &Posteriors, params: &Parameters) -> Result<f64> {
    check_posteriors(data, post, params)?;
    let index = DataIndex::new(data);
    let stats = GammaStats::new(&index, post);
    Ok(gamma_objective_indexed(&index, &stats, params))
}

/// Analytic gradient of [`weighted_logit_objective`], ordered as the gamma
/// entries of [`Parameters::to_free`] grouped by class: for each non-reference
/// class `c`, its `M` intercepts, then `P1` slopes, then `P2` slopes.
pub fn weighted_logit_gradient(data: &Dataset, post: &Posteriors, params: &Parameters) -> Result<Vec<f64>> {
    check_posteriors(data, post, params)?;
    if params.level1_classes() < 2 {
        return Ok(Vec::new());
    }
    let index = DataIndex::new(data);
    let stats = GammaStats::new(&index, post);
    Ok(gamma_grad_hess_indexed(&index, &stats, params, false).0)
}

/// Reads the regression coefficients in [`weighted_logit_gradient`] order.
pub fn regression_coefficients(params: &Parameters) -> Vec<f64> {
    if params.level1_classes() < 2 {
        return Vec::new();
    }
    gamma_coords(params)
}

/// Writes regression coefficients given in [`weighted_logit_gradient`] order.
pub fn with_regression_coefficients(params: &Parameters, coords: &[f64]) -> Result<Parameters> {
    let expected = regression_coefficients(params).len();
    if coords.len() != expected {
        return Err(Error::Dimension {
            what: "regression coefficients",
            expected,
            found: coords.len(),
        });
    }
    let mut out = params.clone();
    if expected > 0 {
        set_gamma_coords(&mut out, coords);
    }
    Ok(out)
}
