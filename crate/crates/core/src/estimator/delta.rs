use crate::model::Parameters;

/// Probability-scale standard errors of [`Parameters::crp_matrix`] by the
/// delta method. Uses the full covariance when given, otherwise the
/// diagonal implied by `se`.
pub fn crp_standard_errors(
    params: &Parameters,
    se: &[Option<f64>],
    covariance: Option<&[Vec<f64>]>,
) -> Vec<Vec<Option<f64>>> {
    let l = params.level1_classes();
    let n_beta: usize = params.beta.iter().map(|b| (b.len() - 1) * l).sum();
    let beta_start = se.len() - n_beta;
    let mut rows = Vec::new();
    let mut offset = beta_start;
    for (k, block) in params.beta.iter().enumerate() {
        let n_cat = block.len();
        // free index of beta[k][s][c], s >= 1
        let idx = |s: usize, c: usize| offset + (s - 1) * l + c;
        let probs: Vec<Vec<f64>> = (0..l).map(|c| params.crp(k, c)).collect();
        for s in 1..n_cat {
            let row = (0..l)
                .map(|c| {
                    let p = &probs[c];
                    let grad: Vec<(usize, f64)> = (1..n_cat)
                        .map(|t| {
                            let d = if t == s { p[s] * (1.0 - p[t]) } else { -p[s] * p[t] };
                            (idx(t, c), d)
                        })
                        .collect();
                    let var = match covariance {
                        Some(cov) => grad
                            .iter()
                            .flat_map(|&(i, gi)| grad.iter().map(move |&(j, gj)| gi * gj * cov[i][j]))
                            .sum::<f64>(),
                        None => {
                            let mut v = 0.0;
                            for &(i, g) in &grad {
                                v += (g * se[i]?).powi(2);
                            }
                            v
                        }
                    };
                    (var.is_finite() && var >= 0.0).then(|| var.sqrt())
                })
                .collect();
            rows.push(row);
        }
        offset += (n_cat - 1) * l;
    }
    rows
}
