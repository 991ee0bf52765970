//! Reference log-domain evaluation of the marginal likelihood.
//!
//! The estimator uses a faster fused kernel; this module is the readable
//! definition it is tested against.

use super::data::{Dataset, Individual, Site};
use super::params::Parameters;
use crate::error::{Error, Result};
use crate::math::{log_softmax_in_place, log_sum_exp, softmax};

fn membership_logits(params: &Parameters, m: usize, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let spec = params.spec();
    if m >= spec.level2_classes {
        return Err(Error::Dimension {
            what: "level-2 class index",
            expected: spec.level2_classes,
            found: m,
        });
    }
    if x.len() != spec.level1_covariates {
        return Err(Error::Dimension {
            what: "level-1 covariates",
            expected: spec.level1_covariates,
            found: x.len(),
        });
    }
    if z.len() != spec.level2_covariates {
        return Err(Error::Dimension {
            what: "level-2 covariates",
            expected: spec.level2_covariates,
            found: z.len(),
        });
    }
    Ok((0..spec.level1_classes)
        .map(|c| {
            let slope_x: f64 = params.gamma1[c].iter().zip(x).map(|(g, v)| g * v).sum();
            let slope_z: f64 = params.gamma2[c].iter().zip(z).map(|(g, v)| g * v).sum();
            params.gamma0[c][m] + slope_x + slope_z
        })
        .collect())
}

/// `P(C = c | W = m, x, z)` for every level-1 class `c`.
pub fn class_membership_probs(
    params: &Parameters,
    m: usize,
    x: &[f64],
    z: &[f64],
) -> Result<Vec<f64>> {
    Ok(softmax(&membership_logits(params, m, x, z)?))
}

/// `ln P(C = c | W = m, x, z)` for every level-1 class `c`.
pub fn class_membership_logprobs(
    params: &Parameters,
    m: usize,
    x: &[f64],
    z: &[f64],
) -> Result<Vec<f64>> {
    let mut logits = membership_logits(params, m, x, z)?;
    log_softmax_in_place(&mut logits);
    Ok(logits)
}

/// `Σ_k ln P(Y_k = y_k | C = c)` under local independence.
pub fn response_loglik(y: &[u16], params: &Parameters, c: usize) -> Result<f64> {
    if y.len() != params.beta.len() {
        return Err(Error::Dimension {
            what: "indicators",
            expected: params.beta.len(),
            found: y.len(),
        });
    }
    if c >= params.level1_classes() {
        return Err(Error::Dimension {
            what: "level-1 class index",
            expected: params.level1_classes(),
            found: c,
        });
    }
    let mut total = 0.0;
    for (k, (&code, block)) in y.iter().zip(&params.beta).enumerate() {
        let s = code as usize;
        if s == 0 || s > block.len() {
            return Err(Error::Category {
                indicator: k + 1,
                code,
                max: block.len(),
            });
        }
        let logits: Vec<f64> = block.iter().map(|row| row[c]).collect();
        total += logits[s - 1] - log_sum_exp(&logits);
    }
    Ok(total)
}

fn individual_loglik_given_site_class(
    row: &Individual,
    site: &Site,
    params: &Parameters,
    m: usize,
) -> Result<f64> {
    let log_class = class_membership_logprobs(params, m, &row.x, &site.z)?;
    let terms = log_class
        .iter()
        .enumerate()
        .map(|(c, lp)| Ok(lp + response_loglik(&row.y, params, c)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(log_sum_exp(&terms))
}

/// Log-likelihood of one site: `ln Σ_m π_m Π_i Σ_c P(c | m, x, z) P(y | c)`.
pub fn group_loglik(site: &Site, params: &Parameters) -> Result<f64> {
    if site.rows.is_empty() {
        return Err(Error::InvalidData(format!("site {} has no individuals", site.id)));
    }
    let mut log_pi = params.alpha.clone();
    log_softmax_in_place(&mut log_pi);
    let per_class = log_pi
        .iter()
        .enumerate()
        .map(|(m, lp)| {
            let inner = site
                .rows
                .iter()
                .map(|row| individual_loglik_given_site_class(row, site, params, m))
                .sum::<Result<f64>>()?;
            Ok(lp + inner)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(log_sum_exp(&per_class))
}

/// Sum of [`group_loglik`] over sites.
pub fn total_loglik(data: &Dataset, params: &Parameters) -> Result<f64> {
    data.sites.iter().map(|s| group_loglik(s, params)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    #[test]
    fn uniform_membership_when_all_zero() {
        let spec = ModelSpec::binary(1, 3, 1, 2, 1).unwrap();
        let p = Parameters::zeros(&spec);
        let probs = class_membership_probs(&p, 0, &[1.0, -3.0], &[0.4]).unwrap();
        for v in probs {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn intercepts_from_simulation_design() {
        let spec = ModelSpec::binary(1, 3, 1, 0, 0).unwrap();
        let mut p = Parameters::zeros(&spec);
        p.gamma0[0][0] = 2.5f64.ln();
        p.gamma0[1][0] = 1.5f64.ln();
        let probs = class_membership_probs(&p, 0, &[], &[]).unwrap();
        let expected = [0.5, 0.3, 0.2];
        for (a, b) in probs.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binary_covariate_odds_ratios() {
        let spec = ModelSpec::binary(1, 3, 1, 1, 0).unwrap();
        let mut p = Parameters::zeros(&spec);
        p.gamma1[0][0] = 1.5f64.ln();
        p.gamma1[1][0] = 3f64.ln();
        let probs = class_membership_probs(&p, 0, &[1.0], &[]).unwrap();
        let expected = [1.5 / 5.5, 3.0 / 5.5, 1.0 / 5.5];
        for (a, b) in probs.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn membership_dimension_errors() {
        let spec = ModelSpec::binary(1, 3, 2, 1, 1).unwrap();
        let p = Parameters::zeros(&spec);
        match class_membership_probs(&p, 0, &[], &[0.0]) {
            Err(Error::Dimension { what, .. }) => assert_eq!(what, "level-1 covariates"),
            other => panic!("unexpected {other:?}"),
        }
        match class_membership_probs(&p, 0, &[1.0], &[]) {
            Err(Error::Dimension { what, .. }) => assert_eq!(what, "level-2 covariates"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(class_membership_probs(&p, 2, &[1.0], &[0.0]).is_err());
    }

    fn binary_params(crp: &[Vec<f64>]) -> Parameters {
        let spec = ModelSpec::binary(crp.len(), crp[0].len(), 1, 0, 0).unwrap();
        let mut p = Parameters::zeros(&spec);
        p.set_binary_crp(crp).unwrap();
        p
    }

    #[test]
    fn response_loglik_products() {
        // P(Y=1|c) = 0.8 means the endorsement probability P(Y=2|c) is 0.2
        let p = binary_params(&[vec![0.2, 0.5], vec![0.2, 0.5]]);
        let v = response_loglik(&[1, 1], &p, 0).unwrap();
        assert!((v - 0.64f64.ln()).abs() < 1e-12);

        let p = binary_params(&[vec![0.5, 0.5]]);
        for y in [1u16, 2] {
            assert!((response_loglik(&[y], &p, 1).unwrap() - 0.5f64.ln()).abs() < 1e-12);
        }

        // P(Y=1|c) = (0.9, 0.1, 0.7) and y = (1, 2, 1)
        let p = binary_params(&[vec![0.1, 0.5], vec![0.9, 0.5], vec![0.3, 0.5]]);
        let v = response_loglik(&[1, 2, 1], &p, 0).unwrap();
        assert!((v - (0.9f64 * 0.9 * 0.7).ln()).abs() < 1e-12);
    }

    #[test]
    fn response_loglik_rejects_bad_code() {
        let p = binary_params(&[vec![0.2, 0.5], vec![0.2, 0.5]]);
        match response_loglik(&[1, 3], &p, 0) {
            Err(Error::Category { indicator, .. }) => assert_eq!(indicator, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_mixture_reduces_to_sum() {
        let p = binary_params(&[vec![0.3], vec![0.6]]);
        let site = Site {
            id: "s".into(),
            z: vec![],
            rows: vec![
                Individual { y: vec![1, 2], x: vec![] },
                Individual { y: vec![2, 2], x: vec![] },
            ],
        };
        let expected = response_loglik(&[1, 2], &p, 0).unwrap()
            + response_loglik(&[2, 2], &p, 0).unwrap();
        assert!((group_loglik(&site, &p).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn identical_sites_double() {
        let spec = ModelSpec::binary(2, 2, 2, 0, 0).unwrap();
        let mut p = Parameters::zeros(&spec);
        p.set_binary_crp(&[vec![0.8, 0.3], vec![0.7, 0.1]]).unwrap();
        p.alpha[1] = 0.4;
        p.gamma0[0] = vec![1.0, -0.5];
        let site = Site {
            id: "a".into(),
            z: vec![],
            rows: vec![
                Individual { y: vec![1, 2], x: vec![] },
                Individual { y: vec![2, 2], x: vec![] },
            ],
        };
        let one = Dataset::new(vec![site.clone()]);
        let two = Dataset::new(vec![site.clone(), site]);
        let a = total_loglik(&one, &p).unwrap();
        let b = total_loglik(&two, &p).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn duplicating_members_does_not_square_the_mixture() {
        let spec = ModelSpec::binary(2, 2, 2, 0, 0).unwrap();
        let mut p = Parameters::zeros(&spec);
        p.set_binary_crp(&[vec![0.8, 0.3], vec![0.7, 0.1]]).unwrap();
        p.gamma0[0] = vec![1.5, -1.5];
        let rows = vec![
            Individual { y: vec![1, 2], x: vec![] },
            Individual { y: vec![2, 2], x: vec![] },
        ];
        let mut doubled = rows.clone();
        doubled.extend(rows.clone());
        let single = Site { id: "a".into(), z: vec![], rows };
        let twice = Site { id: "a".into(), z: vec![], rows: doubled };
        let a = group_loglik(&single, &p).unwrap();
        let b = group_loglik(&twice, &p).unwrap();
        // the site mixture couples members, so the doubled site is more than
        // the square of the original likelihood
        assert!(b > 2.0 * a + 1e-6);
    }
}
