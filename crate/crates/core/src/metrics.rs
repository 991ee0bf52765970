//! Aggregation of aligned replications into recovery, power, classification
//! and effect-size summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::normal_upper_quantile;
use crate::model::{Parameters, ModelSpec};
use crate::simulator::{Condition, Factor};

/// One fitted, aligned replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub condition: usize,
    pub rep: usize,
    pub seed: u64,
    /// Aligned free parameters in [`Parameters::to_free`] order.
    pub estimates: Vec<f64>,
    /// Aligned logit-scale SEs; `None` where the Hessian was unusable.
    pub se: Vec<Option<f64>>,
    /// Aligned CRPs, rows as in [`Parameters::crp_matrix`].
    pub crp: Vec<Vec<f64>>,
    /// Delta-method SEs of `crp`.
    pub crp_se: Vec<Vec<Option<f64>>>,
    pub converged: bool,
    pub switched: bool,
    pub perm1: Vec<usize>,
    pub perm2: Vec<usize>,
    pub error1: f64,
    pub error2: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub newton_fallbacks: usize,
    pub hessian_asymmetry: f64,
}

impl ReplicationRecord {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |e: f64| (0.0..=1.0).contains(&e);
        if !in_unit(self.error1) || !in_unit(self.error2) {
            return Err(Error::InvalidData(format!(
                "record ({}, {}): classification error outside [0, 1]",
                self.condition, self.rep
            )));
        }
        if self.converged && self.estimates.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "record ({}, {}): non-finite estimate",
                self.condition, self.rep
            )));
        }
        Ok(())
    }
}

/// Which records contribute SEs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SePolicy {
    /// Every converged record, SEs carried through the relabeling.
    #[default]
    AllConverged,
    /// Converged records whose labels were not switched.
    NonSwitched,
}

impl SePolicy {
    fn admits(self, r: &ReplicationRecord) -> bool {
        r.converged && (self == SePolicy::AllConverged || !r.switched)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Probability,
    Logit,
}

/// Rejection counts with both denominators.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RejectionRate {
    pub rejected: usize,
    /// Records with a usable SE.
    pub with_se: usize,
    /// All records, including non-converged ones.
    pub total: usize,
}

impl RejectionRate {
    pub fn rate(&self) -> Option<f64> {
        (self.with_se > 0).then(|| self.rejected as f64 / self.with_se as f64)
    }

    pub fn rate_over_all(&self) -> Option<f64> {
        (self.total > 0).then(|| self.rejected as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub scale: Scale,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub sd: f64,
    pub mean_se: Option<f64>,
    /// Mean SE over non-switched records only.
    pub mean_se_non_switched: Option<f64>,
    pub se_sd_ratio: Option<f64>,
    pub rejection: RejectionRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub n_records: usize,
    pub n_converged: usize,
    pub n_switched: usize,
    /// CRPs on the probability scale, row-major over `crp_matrix` rows.
    pub crp: Vec<ParameterSummary>,
    /// Free parameters on the logit scale.
    pub free: Vec<ParameterSummary>,
    pub n_crp_classes: usize,
}

/// Per-class averages over indicators of the CRP recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCrpSummary {
    pub class: usize,
    pub mean_abs_bias: f64,
    pub mean_bias: f64,
    pub mean_se: Option<f64>,
    pub mean_sd: f64,
    pub mean_ratio: Option<f64>,
}

/// Shifted by the first value so that constant input gives that value exactly.
fn mean(v: &[f64]) -> f64 {
    let Some(&x0) = v.first() else {
        return f64::NAN;
    };
    x0 + v.iter().map(|x| x - x0).sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two values.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn summarize(
    name: String,
    scale: Scale,
    truth: f64,
    records: &[&ReplicationRecord],
    value: impl Fn(&ReplicationRecord) -> (f64, Option<f64>),
    policy: SePolicy,
    critical: f64,
    total: usize,
) -> ParameterSummary {
    let converged: Vec<&&ReplicationRecord> = records.iter().filter(|r| r.converged).collect();
    let estimates: Vec<f64> = converged.iter().map(|r| value(r).0).collect();
    let mean_estimate = mean(&estimates);
    let sd = sample_sd(&estimates);
    let ses = |p: SePolicy| -> Vec<f64> {
        records
            .iter()
            .filter(|r| p.admits(r))
            .filter_map(|r| value(r).1)
            .collect()
    };
    let se_used = ses(policy);
    let mean_se = (!se_used.is_empty()).then(|| mean(&se_used));
    let non_switched = ses(SePolicy::NonSwitched);
    let mean_se_non_switched = (!non_switched.is_empty()).then(|| mean(&non_switched));
    let mut rejection = RejectionRate {
        total,
        ..RejectionRate::default()
    };
    for r in records.iter().filter(|r| policy.admits(r)) {
        let (est, se) = value(r);
        if let Some(se) = se.filter(|s| *s > 0.0) {
            rejection.with_se += 1;
            if (est / se).abs() > critical {
                rejection.rejected += 1;
            }
        }
    }
    ParameterSummary {
        name,
        scale,
        truth,
        mean_estimate,
        bias: mean_estimate - truth,
        sd,
        mean_se,
        mean_se_non_switched,
        se_sd_ratio: mean_se.filter(|_| sd > 0.0).map(|s| s / sd),
        rejection,
    }
}

/// Bias, SD, mean SE, SE/SD and rejection rate at level `alpha` for every
/// CRP (probability scale) and free parameter (logit scale). Bias and SD
/// use converged records; SEs follow `policy`.
pub fn parameter_recovery(
    records: &[ReplicationRecord],
    truth: &Parameters,
    alpha: f64,
    policy: SePolicy,
) -> Result<RecoverySummary> {
    let refs: Vec<&ReplicationRecord> = records.iter().collect();
    let n_converged = refs.iter().filter(|r| r.converged).count();
    if n_converged < 2 {
        return Err(Error::InvalidData(format!(
            "recovery needs at least 2 converged records, found {n_converged}"
        )));
    }
    let spec: ModelSpec = truth.spec();
    let true_free = truth.to_free();
    let true_crp = truth.crp_matrix();
    for r in records {
        r.validate()?;
        if r.estimates.len() != true_free.len() || r.crp.len() != true_crp.len() {
            return Err(Error::Dimension {
                what: "record estimates",
                expected: true_free.len(),
                found: r.estimates.len(),
            });
        }
    }
    let critical = normal_upper_quantile(alpha / 2.0);
    let l = spec.level1_classes;
    let mut crp = Vec::new();
    for (row, truths) in true_crp.iter().enumerate() {
        for (c, &t) in truths.iter().enumerate() {
            crp.push(summarize(
                format!("crp[{row}][c{}]", c + 1),
                Scale::Probability,
                t,
                &refs,
                |r| (r.crp[row][c], r.crp_se[row][c]),
                policy,
                critical,
                records.len(),
            ));
        }
    }
    let labels = Parameters::free_labels(&spec);
    let free = labels
        .iter()
        .enumerate()
        .map(|(i, lab)| {
            summarize(
                lab.to_string(),
                Scale::Logit,
                true_free[i],
                &refs,
                |r| (r.estimates[i], r.se[i]),
                policy,
                critical,
                records.len(),
            )
        })
        .collect();
    Ok(RecoverySummary {
        n_records: records.len(),
        n_converged,
        n_switched: records.iter().filter(|r| r.switched).count(),
        crp,
        free,
        n_crp_classes: l,
    })
}

impl RecoverySummary {
    /// Averages over CRP rows, one entry per level-1 class.
    pub fn per_class_crp(&self) -> Vec<ClassCrpSummary> {
        let l = self.n_crp_classes;
        (0..l)
            .map(|c| {
                let cells: Vec<&ParameterSummary> = self.crp.iter().skip(c).step_by(l).collect();
                let avg = |f: &dyn Fn(&ParameterSummary) -> f64| {
                    cells.iter().map(|s| f(s)).sum::<f64>() / cells.len() as f64
                };
                let avg_opt = |f: &dyn Fn(&ParameterSummary) -> Option<f64>| {
                    let v: Option<Vec<f64>> = cells.iter().map(|s| f(s)).collect();
                    v.map(|v| mean(&v))
                };
                ClassCrpSummary {
                    class: c,
                    mean_abs_bias: avg(&|s| s.bias.abs()),
                    mean_bias: avg(&|s| s.bias),
                    mean_se: avg_opt(&|s| s.mean_se),
                    mean_sd: avg(&|s| s.sd),
                    mean_ratio: avg_opt(&|s| s.se_sd_ratio),
                }
            })
            .collect()
    }

    pub fn free_by_name(&self, name: &str) -> Option<&ParameterSummary> {
        self.free.iter().find(|s| s.name == name)
    }
}

/// Rejection counts of `H0: θ_i = 0` at level `alpha` for free parameter `i`.
pub fn rejection_rate(
    records: &[ReplicationRecord],
    param: usize,
    alpha: f64,
    policy: SePolicy,
) -> RejectionRate {
    let critical = normal_upper_quantile(alpha / 2.0);
    let mut out = RejectionRate {
        total: records.len(),
        ..RejectionRate::default()
    };
    for r in records.iter().filter(|r| policy.admits(r)) {
        if let Some(se) = r.se.get(param).copied().flatten().filter(|s| *s > 0.0) {
            out.with_se += 1;
            if (r.estimates[param] / se).abs() > critical {
                out.rejected += 1;
            }
        }
    }
    out
}

/// Fraction of positions where `predicted` and `truth` differ.
pub fn classification_error(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension {
            what: "class assignments",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let wrong = predicted.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Main-effect sum of squares of a categorical factor over the total sum of
/// squares. `levels[i]` is the factor level of observation `i`.
pub fn eta_squared(values: &[f64], levels: &[usize]) -> Result<f64> {
    if values.len() != levels.len() {
        return Err(Error::Dimension {
            what: "factor levels",
            expected: values.len(),
            found: levels.len(),
        });
    }
    if values.is_empty() {
        return Ok(0.0);
    }
    let grand = mean(values);
    let total: f64 = values.iter().map(|v| (v - grand).powi(2)).sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let n_levels = levels.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![0.0; n_levels];
    let mut counts = vec![0usize; n_levels];
    for (&v, &g) in values.iter().zip(levels) {
        sums[g] += v;
        counts[g] += 1;
    }
    let between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| n as f64 * (s / n as f64 - grand).powi(2))
        .sum();
    Ok((between / total).clamp(0.0, 1.0))
}

/// η² of each design factor over condition-level means.
pub fn eta_squared_by_factor(conditions: &[Condition], means: &[f64]) -> Result<Vec<(Factor, f64)>> {
    Factor::ALL
        .iter()
        .map(|&f| {
            let levels: Vec<usize> = conditions.iter().map(|c| f.level(c)).collect();
            if levels.contains(&usize::MAX) {
                return Err(Error::InvalidCondition {
                    factor: f.name(),
                    value: "off-grid".into(),
                });
            }
            Ok((f, eta_squared(means, &levels)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sample_sd_of_three_numbers() {
        // mean 4, squared deviations 4 + 0 + 4, over n − 1 = 2
        assert!((sample_sd(&[2.0, 4.0, 6.0]) - 2.0).abs() < 1e-15);
        assert_eq!(sample_sd(&[1.0]), 0.0);
    }

    #[test]
    fn classification_error_examples() {
        assert_eq!(classification_error(&[0, 1, 2], &[0, 1, 2]).unwrap(), 0.0);
        assert_eq!(classification_error(&[0, 1, 2, 1], &[0, 1, 2, 2]).unwrap(), 0.25);
        assert!(matches!(
            classification_error(&[0], &[0, 1]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn eta_constant_and_pure() {
        let levels_a = [0, 0, 1, 1];
        let levels_b = [0, 1, 0, 1];
        assert_eq!(eta_squared(&[0.3; 4], &levels_a).unwrap(), 0.0);
        let pure = [0.1, 0.1, 0.5, 0.5];
        assert!((eta_squared(&pure, &levels_a).unwrap() - 1.0).abs() < 1e-12);
        assert!(eta_squared(&pure, &levels_b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn eta_additive_two_by_two() {
        // y = a + b with effects a ∈ {0, 2}, b ∈ {0, 1}:
        // SS_a = 4·1² = 4, SS_b = 4·0.5² = 1, total = 5
        let levels_a = [0, 0, 1, 1];
        let levels_b = [0, 1, 0, 1];
        let y = [0.0, 1.0, 2.0, 3.0];
        assert!((eta_squared(&y, &levels_a).unwrap() - 0.8).abs() < 1e-12);
        assert!((eta_squared(&y, &levels_b).unwrap() - 0.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn classification_error_permutation_invariant(
            pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..40),
            perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
        ) {
            let (p, t): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let pp: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
            let tp: Vec<usize> = t.iter().map(|&c| perm[c]).collect();
            prop_assert_eq!(
                classification_error(&p, &t).unwrap(),
                classification_error(&pp, &tp).unwrap()
            );
        }

        #[test]
        fn main_effects_bounded_by_total(
            y in proptest::collection::vec(-1.0f64..1.0, 8),
        ) {
            // 2×2×2 grid; orthogonal main effects sum to at most 1
            let a: Vec<usize> = (0..8).map(|i| i >> 2 & 1).collect();
            let b: Vec<usize> = (0..8).map(|i| i >> 1 & 1).collect();
            let c: Vec<usize> = (0..8).map(|i| i & 1).collect();
            let s = eta_squared(&y, &a).unwrap() + eta_squared(&y, &b).unwrap()
                + eta_squared(&y, &c).unwrap();
            prop_assert!(s <= 1.0 + 1e-12);
        }
    }
}
