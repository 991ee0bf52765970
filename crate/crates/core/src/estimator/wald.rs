use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{normal_upper_quantile, two_sided_p};

/// Two-sided Wald test of one logit-scale slope, reported as an odds ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldTest {
    pub estimate: f64,
    pub se: Option<f64>,
    pub z: Option<f64>,
    pub p_value: Option<f64>,
    pub odds_ratio: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub significant: Option<bool>,
}

impl WaldTest {
    pub fn available(&self) -> bool {
        self.se.is_some()
    }
}

/// `*` p < .05, `**` p < .01, `***` p < .001.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Wald tests at significance level `alpha`; confidence intervals have
/// coverage `1 − alpha` on the odds-ratio scale.
pub fn wald_tests(estimates: &[f64], se: &[Option<f64>], alpha: f64) -> Result<Vec<WaldTest>> {
    if estimates.len() != se.len() {
        return Err(Error::Dimension {
            what: "standard errors",
            expected: estimates.len(),
            found: se.len(),
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("significance level {alpha} not in (0, 1)")));
    }
    let crit = normal_upper_quantile(alpha / 2.0);
    Ok(estimates
        .iter()
        .zip(se)
        .map(|(&est, &s)| {
            let s = s.filter(|v| *v > 0.0 && v.is_finite());
            match s {
                Some(s) => {
                    let z = est / s;
                    let p = two_sided_p(z);
                    WaldTest {
                        estimate: est,
                        se: Some(s),
                        z: Some(z),
                        p_value: Some(p),
                        odds_ratio: est.exp(),
                        ci_low: Some((est - crit * s).exp()),
                        ci_high: Some((est + crit * s).exp()),
                        significant: Some(z.abs() > crit),
                    }
                }
                None => WaldTest {
                    estimate: est,
                    se: None,
                    z: None,
                    p_value: None,
                    odds_ratio: est.exp(),
                    ci_low: None,
                    ci_high: None,
                    significant: None,
                },
            }
        })
        .collect())
}
