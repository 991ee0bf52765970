use serde::{Deserialize, Serialize};

use super::index::DataIndex;
use crate::error::Result;
use crate::math::{log_softmax_in_place, log_sum_exp};
use crate::model::{Dataset, Parameters};

/// E-step output.
///
/// `w_post` is `J × M`, `c_cond` is `N × M × L` and `c_marg` is `N × L`,
/// all row-major with individuals flattened over sites in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posteriors {
    pub level1_classes: usize,
    pub level2_classes: usize,
    pub w_post: Vec<f64>,
    pub c_cond: Vec<f64>,
    pub c_marg: Vec<f64>,
}

impl Posteriors {
    pub fn n_sites(&self) -> usize {
        self.w_post.len() / self.level2_classes
    }

    pub fn n_individuals(&self) -> usize {
        self.c_marg.len() / self.level1_classes
    }

    /// `P(W_j = m | data)` over `m`.
    pub fn site(&self, j: usize) -> &[f64] {
        let m = self.level2_classes;
        &self.w_post[j * m..(j + 1) * m]
    }

    /// `P(C_i = c | W = m, data)` over `c`.
    pub fn conditional(&self, i: usize, m: usize) -> &[f64] {
        let l = self.level1_classes;
        let start = (i * self.level2_classes + m) * l;
        &self.c_cond[start..start + l]
    }

    /// `P(C_i = c | data)` over `c`.
    pub fn marginal(&self, i: usize) -> &[f64] {
        let l = self.level1_classes;
        &self.c_marg[i * l..(i + 1) * l]
    }

    pub fn marginal_rows(&self) -> Vec<&[f64]> {
        self.c_marg.chunks(self.level1_classes).collect()
    }

    pub fn site_rows(&self) -> Vec<&[f64]> {
        self.w_post.chunks(self.level2_classes).collect()
    }

    /// Permutes class columns; `perm[new] = old` at each level.
    pub fn relabel(&self, perm1: &[usize], perm2: &[usize]) -> Self {
        let l = self.level1_classes;
        let m = self.level2_classes;
        let w_post = self
            .w_post
            .chunks(m)
            .flat_map(|row| perm2.iter().map(move |&old| row[old]))
            .collect();
        let c_marg = self
            .c_marg
            .chunks(l)
            .flat_map(|row| perm1.iter().map(move |&old| row[old]))
            .collect();
        let c_cond = self
            .c_cond
            .chunks(m * l)
            .flat_map(|block| {
                perm2.iter().flat_map(move |&mo| {
                    perm1.iter().map(move |&co| block[mo * l + co])
                })
            })
            .collect();
        Self {
            level1_classes: l,
            level2_classes: m,
            w_post,
            c_cond,
            c_marg,
        }
    }
}

/// Parameters pre-evaluated on the distinct patterns and covariate groups of
/// a [`DataIndex`].
pub(crate) struct Compiled {
    pub l: usize,
    pub m: usize,
    pub log_pi: Vec<f64>,
    /// `P(c | m, x, z)` per group, `[g][m][c]`.
    pub memb: Vec<f64>,
    pub log_memb: Vec<f64>,
    /// Response log-likelihood per pattern, `[p][c]`.
    pub lr: Vec<f64>,
    pub lr_max: Vec<f64>,
    /// `exp(lr − lr_max)`.
    pub elr: Vec<f64>,
}

/// Membership log-probabilities `[m][c]` for one covariate group.
pub(crate) fn group_log_membership(
    params: &Parameters,
    x: &[f64],
    z: &[f64],
    out: &mut [f64],
) {
    let l = params.level1_classes();
    let m_count = params.level2_classes();
    let mut slope = vec![0.0; l];
    for (c, s) in slope.iter_mut().enumerate() {
        *s = params.gamma1[c].iter().zip(x).map(|(g, v)| g * v).sum::<f64>()
            + params.gamma2[c].iter().zip(z).map(|(g, v)| g * v).sum::<f64>();
    }
    for m in 0..m_count {
        let row = &mut out[m * l..(m + 1) * l];
        for c in 0..l {
            row[c] = params.gamma0[c][m] + slope[c];
        }
        log_softmax_in_place(row);
    }
}

impl Compiled {
    pub fn new(index: &DataIndex, params: &Parameters) -> Self {
        let l = params.level1_classes();
        let m = params.level2_classes();
        let mut log_pi = params.alpha.clone();
        log_softmax_in_place(&mut log_pi);

        let mut log_memb = vec![0.0; index.groups.len() * m * l];
        for (g, group) in index.groups.iter().enumerate() {
            group_log_membership(
                params,
                &group.x,
                &index.z[group.site],
                &mut log_memb[g * m * l..(g + 1) * m * l],
            );
        }
        let memb = log_memb.iter().map(|v| v.exp()).collect();

        let log_crp: Vec<Vec<Vec<f64>>> = params
            .beta
            .iter()
            .map(|block| {
                (0..l)
                    .map(|c| {
                        let mut col: Vec<f64> = block.iter().map(|row| row[c]).collect();
                        log_softmax_in_place(&mut col);
                        col
                    })
                    .collect()
            })
            .collect();
        let mut lr = vec![0.0; index.patterns.len() * l];
        let mut lr_max = vec![0.0; index.patterns.len()];
        let mut elr = vec![0.0; index.patterns.len() * l];
        for (p, pattern) in index.patterns.iter().enumerate() {
            let row = &mut lr[p * l..(p + 1) * l];
            for (k, &s) in pattern.iter().enumerate() {
                for c in 0..l {
                    row[c] += log_crp[k][c][s];
                }
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            lr_max[p] = max;
            for c in 0..l {
                elr[p * l + c] = (row[c] - max).exp();
            }
        }
        Self {
            l,
            m,
            log_pi,
            memb,
            log_memb,
            lr,
            lr_max,
            elr,
        }
    }
}

const UNDERFLOW_GUARD: f64 = 1e-250;

/// Fused E-step: log-likelihood and posteriors in one pass.
pub(crate) fn e_step_indexed(index: &DataIndex, params: &Parameters) -> (f64, Posteriors) {
    let cp = Compiled::new(index, params);
    let (l, m) = (cp.l, cp.m);
    let n = index.n_individuals;
    let mut c_cond = vec![0.0; n * m * l];
    let mut c_marg = vec![0.0; n * l];
    let mut w_post = vec![0.0; index.n_sites() * m];
    let mut loglik = 0.0;
    let mut site_terms = vec![0.0; m];
    let mut scratch = vec![0.0; l];

    for (j, groups) in index.site_groups.iter().enumerate() {
        site_terms.copy_from_slice(&cp.log_pi);
        for g in groups.clone() {
            let memb = &cp.memb[g * m * l..(g + 1) * m * l];
            let log_memb = &cp.log_memb[g * m * l..(g + 1) * m * l];
            for &i in &index.groups[g].members {
                let p = index.pattern_of[i];
                let e = &cp.elr[p * l..(p + 1) * l];
                for mm in 0..m {
                    let out = &mut c_cond[(i * m + mm) * l..(i * m + mm + 1) * l];
                    let pm = &memb[mm * l..(mm + 1) * l];
                    let mut s = 0.0;
                    for c in 0..l {
                        out[c] = pm[c] * e[c];
                        s += out[c];
                    }
                    if s > UNDERFLOW_GUARD {
                        site_terms[mm] += s.ln() + cp.lr_max[p];
                        let inv = 1.0 / s;
                        out.iter_mut().for_each(|v| *v *= inv);
                    } else {
                        let lp = &log_memb[mm * l..(mm + 1) * l];
                        for c in 0..l {
                            scratch[c] = lp[c] + cp.lr[p * l + c];
                        }
                        let li = log_sum_exp(&scratch);
                        site_terms[mm] += li;
                        for c in 0..l {
                            out[c] = (scratch[c] - li).exp();
                        }
                    }
                }
            }
        }
        let site_ll = log_sum_exp(&site_terms);
        loglik += site_ll;
        let w = &mut w_post[j * m..(j + 1) * m];
        for mm in 0..m {
            w[mm] = (site_terms[mm] - site_ll).exp();
        }
        for i in index.site_offsets[j]..index.site_offsets[j + 1] {
            let marg = &mut c_marg[i * l..(i + 1) * l];
            for mm in 0..m {
                let cond = &c_cond[(i * m + mm) * l..(i * m + mm + 1) * l];
                for c in 0..l {
                    marg[c] += w[mm] * cond[c];
                }
            }
        }
    }
    (
        loglik,
        Posteriors {
            level1_classes: l,
            level2_classes: m,
            w_post,
            c_cond,
            c_marg,
        },
    )
}

/// Posterior class probabilities at both levels.
pub fn e_step(data: &Dataset, params: &Parameters) -> Result<Posteriors> {
    params.validate(&params.spec())?;
    data.validate(&params.spec())?;
    Ok(e_step_indexed(&DataIndex::new(data), params).1)
}

/// Log-likelihood through the fused kernel; agrees with
/// [`crate::model::total_loglik`] to rounding.
pub fn fast_loglik(data: &Dataset, params: &Parameters) -> Result<f64> {
    data.validate(&params.spec())?;
    Ok(e_step_indexed(&DataIndex::new(data), params).0)
}
