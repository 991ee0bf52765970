//! Specify a model by hand, evaluate class probabilities and the
//! log-likelihood, and inspect E-step posteriors.
//!
//! cargo run --release --example likelihood

use npmlca::estimator::e_step;
use npmlca::model::{class_membership_probs, group_loglik, total_loglik};
use npmlca::{Dataset, Individual, ModelSpec, Parameters, Site};

fn main() -> npmlca::Result<()> {
    // three binary indicators, two individual classes, two site classes,
    // one individual and one site covariate
    let spec = ModelSpec::binary(3, 2, 2, 1, 1)?;
    let mut params = Parameters::zeros(&spec);
    params.alpha = vec![0.0, 0.4];
    params.gamma0[0] = vec![1.0, -1.0];
    params.gamma1[0] = vec![0.5];
    params.gamma2[0] = vec![-0.3];
    params.set_binary_crp(&[vec![0.9, 0.2], vec![0.8, 0.3], vec![0.7, 0.1]])?;

    for w in 0..2 {
        let probs = class_membership_probs(&params, w, &[1.0], &[0.5])?;
        println!("site class {}: P(C | x=1, z=0.5) = {:.3?}", w + 1, probs);
    }

    let site = |id: &str, z: f64, rows: &[[u16; 3]]| Site {
        id: id.into(),
        z: vec![z],
        rows: rows
            .iter()
            .enumerate()
            .map(|(i, y)| Individual {
                y: y.to_vec(),
                x: vec![(i % 2) as f64],
            })
            .collect(),
    };
    let data = Dataset::new(vec![
        site("a", 0.5, &[[2, 2, 2], [2, 2, 1], [2, 1, 2]]),
        site("b", -1.0, &[[1, 1, 1], [1, 2, 1]]),
    ]);

    for s in &data.sites {
        println!("site {}: log-likelihood {:.4}", s.id, group_loglik(s, &params)?);
    }
    println!("total log-likelihood {:.4}", total_loglik(&data, &params)?);

    let post = e_step(&data, &params)?;
    for j in 0..data.n_sites() {
        println!("P(W | site {}) = {:.3?}", data.sites[j].id, post.site(j));
    }
    for i in 0..data.n_individuals() {
        println!("P(C | individual {}) = {:.3?}", i + 1, post.marginal(i));
    }
    Ok(())
}
