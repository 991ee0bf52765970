//! Post-hoc label alignment of a fit against known generating parameters.
//!
//! Permutations use the convention `perm[new] = old`.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{FitOrigin, FitResult};
use crate::model::{class_membership_probs, Dataset, Parameters};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relabeling {
    pub perm1: Vec<usize>,
    pub perm2: Vec<usize>,
    pub switched: bool,
}

impl Relabeling {
    pub fn new(perm1: Vec<usize>, perm2: Vec<usize>) -> Result<Self> {
        for (name, p) in [("level-1", &perm1), ("level-2", &perm2)] {
            if !is_permutation(p) {
                return Err(Error::InvalidParameters(format!(
                    "{name} relabeling {p:?} is not a permutation"
                )));
            }
        }
        let switched = !is_identity(&perm1) || !is_identity(&perm2);
        Ok(Self {
            perm1,
            perm2,
            switched,
        })
    }

    pub fn identity(l: usize, m: usize) -> Self {
        Self {
            perm1: (0..l).collect(),
            perm2: (0..m).collect(),
            switched: false,
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            perm1: invert(&self.perm1),
            perm2: invert(&self.perm2),
            switched: self.switched,
        }
    }

    /// Relabeling equal to applying `self` and then `next`.
    pub fn then(&self, next: &Relabeling) -> Self {
        let perm1 = compose(&self.perm1, &next.perm1);
        let perm2 = compose(&self.perm2, &next.perm2);
        let switched = !is_identity(&perm1) || !is_identity(&perm2);
        Self {
            perm1,
            perm2,
            switched,
        }
    }
}

/// A fit relabeled to match the truth.
#[derive(Debug, Clone)]
pub struct Aligned {
    pub result: FitResult,
    pub relabeling: Relabeling,
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&i| i < p.len() && !std::mem::replace(&mut seen[i], true))
}

fn is_identity(p: &[usize]) -> bool {
    p.iter().enumerate().all(|(i, &v)| i == v)
}

pub fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (new, &old) in p.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

// relabel by `first` then by `second`: new[c] = old[first[second[c]]]
fn compose(first: &[usize], second: &[usize]) -> Vec<usize> {
    second.iter().map(|&c| first[c]).collect()
}

fn best_permutation(n: usize, cost: impl Fn(&[usize]) -> f64) -> Vec<usize> {
    // permutations come in lexicographic order; strict improvement keeps the
    // smallest on ties
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let d = cost(&perm);
        if best.as_ref().is_none_or(|(b, _)| d < *b) {
            best = Some((d, perm));
        }
    }
    best.map_or_else(Vec::new, |(_, p)| p)
}

/// Level-1 permutation `σ` minimizing `Σ (est[r][σ(c)] − truth[r][c])²`
/// over CRP rows `r`. Rows are as in [`Parameters::crp_matrix`].
pub fn find_level1_permutation(est_crp: &[Vec<f64>], true_crp: &[Vec<f64>]) -> Result<Vec<usize>> {
    let l = true_crp.first().map_or(0, Vec::len);
    if est_crp.len() != true_crp.len() || est_crp.iter().any(|r| r.len() != l) {
        return Err(Error::Dimension {
            what: "CRP matrix",
            expected: true_crp.len() * l,
            found: est_crp.iter().map(Vec::len).sum(),
        });
    }
    Ok(best_permutation(l, |perm| {
        est_crp
            .iter()
            .zip(true_crp)
            .map(|(e, t)| (0..l).map(|c| (e[perm[c]] - t[c]).powi(2)).sum::<f64>())
            .sum()
    }))
}

/// Mean model-implied level-1 composition per level-2 class over the
/// covariates of `data`.
pub fn implied_composition(params: &Parameters, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    let (l, m) = (params.level1_classes(), params.level2_classes());
    let mut comp = vec![vec![0.0; l]; m];
    let n = data.n_individuals().max(1) as f64;
    for (site, ind) in data.individuals() {
        for (w, row) in comp.iter_mut().enumerate() {
            let probs = class_membership_probs(params, w, &ind.x, &site.z)?;
            for (acc, p) in row.iter_mut().zip(probs) {
                *acc += p / n;
            }
        }
    }
    Ok(comp)
}

/// Mean level-1 posterior of the individuals in sites modally assigned to
/// each level-2 class. A class without sites falls back to its
/// model-implied composition.
pub fn estimated_composition(fit: &FitResult, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    let (l, m) = (fit.params.level1_classes(), fit.params.level2_classes());
    let mut sums = vec![vec![0.0; l]; m];
    let mut counts = vec![0usize; m];
    let offsets = data.site_offsets();
    for (j, &w) in fit.modal2.iter().enumerate() {
        for i in offsets[j]..offsets[j + 1] {
            for (acc, p) in sums[w].iter_mut().zip(fit.posteriors.marginal(i)) {
                *acc += p;
            }
            counts[w] += 1;
        }
    }
    let mut implied = None;
    for w in 0..m {
        if counts[w] == 0 {
            if implied.is_none() {
                implied = Some(implied_composition(&fit.params, data)?);
            }
            sums[w].clone_from(&implied.as_ref().unwrap()[w]);
        } else {
            for v in sums[w].iter_mut() {
                *v /= counts[w] as f64;
            }
        }
    }
    Ok(sums)
}

/// Level-2 permutation matching estimated site-class compositions to the
/// generating ones. `fit` must already be aligned at level 1.
pub fn find_level2_permutation(fit: &FitResult, truth: &Parameters, data: &Dataset) -> Result<Vec<usize>> {
    let est = estimated_composition(fit, data)?;
    let tru = implied_composition(truth, data)?;
    Ok(composition_permutation(&est, &tru))
}

/// Permutation minimizing the squared distance between compositions.
pub fn composition_permutation(est: &[Vec<f64>], truth: &[Vec<f64>]) -> Vec<usize> {
    best_permutation(truth.len(), |perm| composition_distance(est, truth, perm))
}

pub fn composition_distance(est: &[Vec<f64>], truth: &[Vec<f64>], perm: &[usize]) -> f64 {
    truth
        .iter()
        .enumerate()
        .map(|(w, t)| {
            t.iter()
                .zip(&est[perm[w]])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Linear map of free parameters induced by a relabeling.
fn free_jacobian(fit: &FitResult, r: &Relabeling) -> Vec<Vec<f64>> {
    let spec = fit.params.spec();
    let n = fit.se.len();
    let mut a = vec![vec![0.0; n]; n];
    let mut unit = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        let col = Parameters::from_free(&spec, &unit)
            .expect("free vector length matches spec")
            .relabel(&r.perm1, &r.perm2)
            .to_free();
        for (i, v) in col.into_iter().enumerate() {
            a[i][j] = v;
        }
        unit[j] = 0.0;
    }
    a
}

fn apply(base: &FitResult, r: &Relabeling) -> FitResult {
    let inv1 = invert(&r.perm1);
    let inv2 = invert(&r.perm2);
    let a = free_jacobian(base, r);
    let n = a.len();
    let covariance = base.covariance.as_ref().map(|cov| {
        let ac: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|k| (0..n).map(|j| a[i][j] * cov[j][k]).sum()).collect())
            .collect();
        (0..n)
            .map(|i| (0..n).map(|k| (0..n).map(|j| ac[i][j] * a[k][j]).sum()).collect())
            .collect::<Vec<Vec<f64>>>()
    });
    let se = match &covariance {
        Some(cov) => (0..n)
            .map(|i| {
                let v = cov[i][i];
                (v.is_finite() && v > 0.0).then(|| v.sqrt())
            })
            .collect(),
        // without a covariance only coordinates that are pure copies carry over
        None => a
            .iter()
            .map(|row| {
                let nz: Vec<usize> = (0..n).filter(|&j| row[j] != 0.0).collect();
                match nz.as_slice() {
                    [j] if row[*j].abs() == 1.0 => base.se[*j],
                    _ => None,
                }
            })
            .collect(),
    };
    FitResult {
        params: base.params.relabel(&r.perm1, &r.perm2),
        loglik: base.loglik,
        se,
        covariance,
        posteriors: base.posteriors.relabel(&r.perm1, &r.perm2),
        converged: base.converged,
        iterations: base.iterations,
        n_starts_used: base.n_starts_used,
        modal1: base.modal1.iter().map(|&c| inv1[c]).collect(),
        modal2: base.modal2.iter().map(|&w| inv2[w]).collect(),
        fit_stats: base.fit_stats.clone(),
        diagnostics: base.diagnostics,
        trace: base.trace.clone(),
        origin: None,
    }
}

/// Relabels every class-indexed part of a fit: parameters, posteriors,
/// modal assignments, SEs and covariance. Successive relabelings compose
/// exactly, so undoing one restores the original fit bit for bit.
pub fn relabel(fit: &FitResult, r: &Relabeling) -> FitResult {
    let (base, applied) = match &fit.origin {
        Some(o) => (&o.fit, Relabeling::new(o.perm1.clone(), o.perm2.clone()).expect("stored permutation")),
        None => (fit, Relabeling::identity(r.perm1.len(), r.perm2.len())),
    };
    let total = applied.then(r);
    if !total.switched {
        return base.clone();
    }
    let mut out = apply(base, &total);
    out.origin = Some(Box::new(FitOrigin {
        fit: base.clone(),
        perm1: total.perm1,
        perm2: total.perm2,
    }));
    out
}

/// Aligns `fit` to the generating parameters: level 1 by CRP matching,
/// then level 2 by composition matching.
pub fn align(fit: &FitResult, truth: &Parameters, data: &Dataset) -> Result<Aligned> {
    let m = fit.params.level2_classes();
    let perm1 = find_level1_permutation(&fit.params.crp_matrix(), &truth.crp_matrix())?;
    let identity2: Vec<usize> = (0..m).collect();
    let step1 = relabel(fit, &Relabeling::new(perm1.clone(), identity2)?);
    let perm2 = find_level2_permutation(&step1, truth, data)?;
    let relabeling = Relabeling::new(perm1, perm2)?;
    Ok(Aligned {
        result: relabel(fit, &relabeling),
        relabeling,
    })
}
