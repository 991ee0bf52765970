//! Compare numbers of classes by AIC, BIC and entropy.
//!
//! cargo run --release --example model_selection

use npmlca::estimator::{fit, FitOptions};
use npmlca::simulator::{build_true_parameters, condition_grid, generate_dataset};
use npmlca::ModelSpec;

fn main() -> npmlca::Result<()> {
    let cond = condition_grid()[93];
    let truth = build_true_parameters(&cond)?;
    let data = generate_dataset(&cond, &truth, 17)?;
    println!("data from {cond}: 3 individual classes, 2 site classes");
    println!("{:>3} {:>3} {:>5} {:>12} {:>12} {:>12} {:>8}", "L", "M", "free", "loglik", "AIC", "BIC", "entropy");
    for l in 2..=4 {
        for m in 1..=3 {
            let spec = ModelSpec::binary(cond.n_indicators, l, m, 1, 1)?;
            let options = FitOptions { seed: 17, compute_se: false, ..FitOptions::default() };
            let s = fit(&data, &spec, &options)?.fit_stats;
            println!(
                "{l:>3} {m:>3} {:>5} {:>12.2} {:>12.2} {:>12.2} {:>8.3}",
                s.n_free, s.loglik, s.aic, s.bic, s.entropy
            );
        }
    }
    Ok(())
}
