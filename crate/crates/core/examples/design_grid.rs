//! The simulation design: 96 conditions, their generating parameters and
//! condition selectors.
//!
//! cargo run --release --example design_grid -- [selector]

use npmlca::harness::select_conditions;
use npmlca::simulator::{build_true_parameters, condition_grid};

fn main() -> npmlca::Result<()> {
    let selector = std::env::args().nth(1).unwrap_or_else(|| "crp_quality=0.8,n_sites=150,site_size=60".into());
    let grid = condition_grid();
    println!("{} conditions; selector '{selector}':", grid.len());
    for id in select_conditions(&selector)? {
        let cond = grid[id];
        let p = build_true_parameters(&cond)?;
        println!(
            "{id:>3}  {cond}  N={}  slopes x ({:.3}, {:.3}) z ({:.3}, {:.3})",
            cond.n_individuals(),
            p.gamma1[0][0],
            p.gamma1[1][0],
            p.gamma2[0][0],
            p.gamma2[1][0]
        );
    }
    let p = build_true_parameters(&grid[0])?;
    println!("CRPs of condition 0 (indicator × class):");
    for row in p.crp_matrix() {
        println!("  {row:.1?}");
    }
    Ok(())
}
