//! A small resumable replication study followed by the report tables.
//!
//! cargo run --release --example replication_study -- [reps] [selector]
//!
//! Rerunning reuses the records already in the store.

use npmlca::harness::{cmd_replicate, cmd_report, StudyConfig, TableKind};
use npmlca::metrics::SePolicy;

fn main() -> npmlca::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let selector = args.next().unwrap_or_else(|| "n_indicators=12,crp_quality=0.9,n_sites=50,site_size=30".into());
    let root = std::env::temp_dir().join("npmlca-study");
    let config = StudyConfig::new(2024, reps, &selector, root.join("records"));

    let summary = cmd_replicate(&config)?;
    println!(
        "{} new records, {} reused, {} failed",
        summary.written,
        summary.skipped,
        summary.failed.len()
    );

    let tables = cmd_report(&config.out, TableKind::All, &root.join("report"), 0.05, SePolicy::AllConverged)?;
    for path in tables {
        println!("== {}", path.file_name().unwrap().to_string_lossy());
        print!("{}", std::fs::read_to_string(&path)?);
    }
    Ok(())
}
