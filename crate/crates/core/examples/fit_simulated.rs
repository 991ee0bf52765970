//! Simulate one design cell, fit it, and compare estimates with the truth.
//!
//! cargo run --release --example fit_simulated -- [condition-id] [seed]

use std::time::Instant;

use npmlca::alignment::align;
use npmlca::estimator::{fit, FitOptions};
use npmlca::simulator::{build_true_parameters, condition_grid, generate_dataset};

fn main() -> npmlca::Result<()> {
    let mut args = std::env::args().skip(1);
    let id: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(76);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let cond = condition_grid()[id];
    println!("condition {id}: {cond}");

    let truth = build_true_parameters(&cond)?;
    let data = generate_dataset(&cond, &truth, seed)?;
    let spec = cond.model_spec();

    let started = Instant::now();
    let result = fit(&data, &spec, &FitOptions { seed, ..FitOptions::default() })?;
    println!(
        "loglik {:.3} after {} iterations ({}), {:.1}s",
        result.loglik,
        result.iterations,
        if result.converged { "converged" } else { "not converged" },
        started.elapsed().as_secs_f64()
    );

    let aligned = align(&result, &truth, &data)?;
    println!("level-1 permutation {:?}, level-2 permutation {:?}", aligned.relabeling.perm1, aligned.relabeling.perm2);
    let est = aligned.result.params.crp_matrix();
    let tru = truth.crp_matrix();
    println!("indicator  true CRP (c1 c2 c3)      estimate");
    for (k, (t, e)) in tru.iter().zip(&est).enumerate() {
        println!(
            "y{:<3}  {:.2} {:.2} {:.2}   {:.3} {:.3} {:.3}",
            k + 1, t[0], t[1], t[2], e[0], e[1], e[2]
        );
    }
    println!(
        "slopes x: {:.3} {:.3}  z: {:.3} {:.3}",
        aligned.result.params.gamma1[0][0],
        aligned.result.params.gamma1[1][0],
        aligned.result.params.gamma2[0][0],
        aligned.result.params.gamma2[1][0]
    );
    println!("entropy {:.3}", result.fit_stats.entropy);
    Ok(())
}
