#![allow(dead_code)]

use npmlca::{Dataset, Individual, ModelSpec, Parameters, Site};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A tiny random model and dataset: at most 2 sites of at most 3 rows,
/// 3 indicators, 3 level-1 and 2 level-2 classes.
pub fn tiny_instance(seed: u64) -> (ModelSpec, Parameters, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=3);
    let categories = (0..k).map(|_| rng.random_range(2..=3)).collect();
    let spec = ModelSpec::new(
        categories,
        rng.random_range(1..=3),
        rng.random_range(1..=2),
        rng.random_range(0..=1),
        rng.random_range(0..=1),
    )
    .unwrap();
    let params = random_params(&spec, &mut rng, 1.5);
    let n_sites = rng.random_range(1..=2);
    let data = random_data(&spec, &mut rng, n_sites, 1, 3);
    (spec, params, data)
}

pub fn random_params(spec: &ModelSpec, rng: &mut impl Rng, scale: f64) -> Parameters {
    let n = Parameters::zeros(spec).to_free().len();
    let free: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Parameters::from_free(spec, &free).unwrap()
}

pub fn random_data(
    spec: &ModelSpec,
    rng: &mut impl Rng,
    n_sites: usize,
    min_rows: usize,
    max_rows: usize,
) -> Dataset {
    let sites = (0..n_sites)
        .map(|j| Site {
            id: format!("s{j}"),
            z: (0..spec.level2_covariates).map(|_| rng.random_range(-1.0..1.0)).collect(),
            rows: (0..rng.random_range(min_rows..=max_rows))
                .map(|_| Individual {
                    y: spec.categories.iter().map(|&s| rng.random_range(1..=s as u16)).collect(),
                    x: (0..spec.level1_covariates).map(|_| rng.random_range(0..=1) as f64).collect(),
                })
                .collect(),
        })
        .collect();
    Dataset::new(sites)
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = v.iter().map(|x| x.exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn class_probs(p: &Parameters, m: usize, x: &[f64], z: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = (0..p.gamma0.len())
        .map(|c| {
            p.gamma0[c][m]
                + p.gamma1[c].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                + p.gamma2[c].iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    softmax(&logits)
}

fn response_prob(p: &Parameters, y: &[u16], c: usize) -> f64 {
    y.iter()
        .enumerate()
        .map(|(k, &code)| {
            let logits: Vec<f64> = p.beta[k].iter().map(|row| row[c]).collect();
            softmax(&logits)[code as usize - 1]
        })
        .product()
}

/// Joint probability of one site's data and a full configuration of
/// `(W, C_1..C_n)`, written directly from the model definition.
fn joint(p: &Parameters, site: &Site, w: usize, cs: &[usize]) -> f64 {
    let pi = softmax(&p.alpha);
    let mut prob = pi[w];
    for (ind, &c) in site.rows.iter().zip(cs) {
        prob *= class_probs(p, w, &ind.x, &site.z)[c] * response_prob(p, &ind.y, c);
    }
    prob
}

fn configurations(n: usize, l: usize) -> Vec<Vec<usize>> {
    let mut all = vec![Vec::new()];
    for _ in 0..n {
        all = all
            .into_iter()
            .flat_map(|prefix| {
                (0..l).map(move |c| {
                    let mut v = prefix.clone();
                    v.push(c);
                    v
                })
            })
            .collect();
    }
    all
}

/// Log-likelihood by summing the joint over every latent configuration.
pub fn enumerated_loglik(p: &Parameters, data: &Dataset) -> f64 {
    let (l, m) = (p.gamma0.len(), p.alpha.len());
    data.sites
        .iter()
        .map(|site| {
            let configs = configurations(site.rows.len(), l);
            (0..m)
                .map(|w| configs.iter().map(|cs| joint(p, site, w, cs)).sum::<f64>())
                .sum::<f64>()
                .ln()
        })
        .sum()
}

/// Posteriors by enumeration: per site `P(W | data)`, per individual
/// `P(C | data)`, in dataset order.
pub fn enumerated_posteriors(p: &Parameters, data: &Dataset) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (l, m) = (p.gamma0.len(), p.alpha.len());
    let mut w_post = Vec::new();
    let mut c_marg = Vec::new();
    for site in &data.sites {
        let n = site.rows.len();
        let configs = configurations(n, l);
        let mut pw = vec![0.0; m];
        let mut pc = vec![vec![0.0; l]; n];
        for w in 0..m {
            for cs in &configs {
                let j = joint(p, site, w, cs);
                pw[w] += j;
                for (i, &c) in cs.iter().enumerate() {
                    pc[i][c] += j;
                }
            }
        }
        let total: f64 = pw.iter().sum();
        w_post.push(pw.iter().map(|v| v / total).collect());
        c_marg.extend(pc.into_iter().map(|row| row.into_iter().map(|v| v / total).collect()));
    }
    (w_post, c_marg)
}
