//! Fit a model to a dataset CSV and print the result tables.
//!
//! cargo run --release --example fit_csv -- [data.csv]
//!
//! Without an argument a dataset is simulated first. The CSV header is
//! `site_id,y1..yK,x1..xP1,z1..zP2` with indicators coded from 1.

use std::path::PathBuf;

use npmlca::harness::{cmd_fit, cmd_simulate, ModelConfig};
use npmlca::simulator::condition_grid;

fn main() -> npmlca::Result<()> {
    let work = std::env::temp_dir().join("npmlca-fit-csv");
    let data: PathBuf = match std::env::args().nth(1) {
        Some(path) => path.into(),
        None => {
            let files = cmd_simulate(&condition_grid()[79], 11, &work.join("sim"))?;
            files[0].clone()
        }
    };

    let mut config = ModelConfig::new(3, 2);
    config.seed = 1;
    let report = cmd_fit(&data, &config, &work.join("fit"), false)?;
    if !report.dropped_sites.is_empty() {
        println!("dropped small sites: {:?}", report.dropped_sites);
    }
    for file in &report.files {
        if file.extension().is_some_and(|e| e == "csv") {
            println!("== {}", file.file_name().unwrap().to_string_lossy());
            print!("{}", std::fs::read_to_string(file)?);
        }
    }
    println!("machine-readable result: {}", work.join("fit/fit.json").display());
    Ok(())
}
