//! Covariate effects as odds ratios with Wald tests.
//!
//! cargo run --release --example odds_ratios

use npmlca::alignment::align;
use npmlca::estimator::{fit, significance_stars, wald_tests, FitOptions};
use npmlca::model::{ParamBlock, Parameters};
use npmlca::simulator::{build_true_parameters, condition_grid, generate_dataset};

fn main() -> npmlca::Result<()> {
    let cond = condition_grid()[79];
    let truth = build_true_parameters(&cond)?;
    let data = generate_dataset(&cond, &truth, 5)?;
    let spec = cond.model_spec();
    let result = fit(&data, &spec, &FitOptions { seed: 5, ..FitOptions::default() })?;
    let fitted = align(&result, &truth, &data)?.result;

    let labels = Parameters::free_labels(&spec);
    let free = fitted.params.to_free();
    let slopes: Vec<usize> = (0..labels.len())
        .filter(|&i| matches!(labels[i].block, ParamBlock::Gamma1 | ParamBlock::Gamma2))
        .collect();
    let est: Vec<f64> = slopes.iter().map(|&i| free[i]).collect();
    let se: Vec<Option<f64>> = slopes.iter().map(|&i| fitted.se[i]).collect();

    println!("{:<16} {:>8} {:>17} {:>9}  true OR", "effect", "OR", "95% CI", "p");
    for ((&i, t), truth_value) in slopes.iter().zip(wald_tests(&est, &se, 0.05)?).zip(slopes.iter().map(|&i| truth.to_free()[i])) {
        println!(
            "{:<16} {:>6.3}{:<3} ({:.3}-{:.3}) {:>9.2e}  {:.2}",
            labels[i].to_string(),
            t.odds_ratio,
            t.p_value.map_or("", significance_stars),
            t.ci_low.unwrap_or(f64::NAN),
            t.ci_high.unwrap_or(f64::NAN),
            t.p_value.unwrap_or(f64::NAN),
            truth_value.exp()
        );
    }
    Ok(())
}
