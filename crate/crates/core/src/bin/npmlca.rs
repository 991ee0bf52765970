use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use npmlca::harness::{
    cmd_fit, cmd_replicate, cmd_report, cmd_simulate, read_condition_file, read_model_config,
    read_study_config, select_conditions, ModelConfig, StudyConfig, TableKind,
};
use npmlca::metrics::SePolicy;
use npmlca::simulator::condition_grid;
use npmlca::{Error, Result};

#[derive(Parser)]
#[command(name = "npmlca", version, about = "Multilevel latent class estimation and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a dataset CSV
    Fit {
        data: PathBuf,
        /// Model configuration (JSON)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Level-1 classes when no config is given
        #[arg(long, default_value_t = 3)]
        classes: usize,
        /// Level-2 classes when no config is given
        #[arg(long, default_value_t = 2)]
        site_classes: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value = "fit-out")]
        out: PathBuf,
        #[arg(long)]
        keep_small_sites: bool,
    },
    /// Generate one dataset and its truth file for a design cell
    Simulate {
        /// Condition file (JSON)
        #[arg(long, conflicts_with = "conditions")]
        condition: Option<PathBuf>,
        /// Condition selector resolving to a single grid cell
        #[arg(long)]
        conditions: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "sim-out")]
        out: PathBuf,
    },
    /// Run a resumable replication study
    Replicate {
        /// Study configuration (JSON); flags override its fields
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        conditions: Option<String>,
    },
    /// Summarize a record store into CSV tables
    Report {
        /// Record store directory
        store: PathBuf,
        /// recovery, power, classification, eta, diagnostics or all
        #[arg(long, default_value = "all")]
        kind: String,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Use SEs of non-switched replications only
        #[arg(long)]
        non_switched_se: bool,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit {
            data,
            config,
            classes,
            site_classes,
            seed,
            alpha,
            out,
            keep_small_sites,
        } => {
            let mut cfg = match config {
                Some(path) => read_model_config(&path)?,
                None => ModelConfig::new(classes, site_classes),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            let report = cmd_fit(&data, &cfg, &out, keep_small_sites)?;
            if !report.dropped_sites.is_empty() {
                eprintln!(
                    "warning: removed {} sites with fewer than {} rows (use --keep-small-sites to keep them)",
                    report.dropped_sites.len(),
                    cfg.min_site_size
                );
            }
            if !report.result.converged {
                eprintln!("warning: estimation did not converge within {} iterations", report.result.iterations);
            }
            let s = &report.result.fit_stats;
            println!(
                "loglik {:.3}  free {}  AIC {:.3}  BIC {:.3}  entropy {:.3}",
                s.loglik, s.n_free, s.aic, s.bic, s.entropy
            );
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Simulate {
            condition,
            conditions,
            seed,
            out,
        } => {
            let cond = match (condition, conditions) {
                (Some(path), _) => read_condition_file(&path)?,
                (None, Some(sel)) => {
                    let ids = select_conditions(&sel)?;
                    if ids.len() != 1 {
                        return Err(Error::Config(format!(
                            "selector '{sel}' matches {} conditions; simulate needs exactly one",
                            ids.len()
                        )));
                    }
                    condition_grid()[ids[0]]
                }
                (None, None) => return Err(Error::Config("pass --condition or --conditions".into())),
            };
            for f in cmd_simulate(&cond, seed, &out)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Replicate {
            config,
            seed,
            reps,
            jobs,
            out,
            conditions,
        } => {
            let mut cfg = match config {
                Some(path) => read_study_config(&path)?,
                None => {
                    let seed = seed.ok_or_else(|| Error::Config("--seed is required without --config".into()))?;
                    StudyConfig::new(seed, 500, "all", "records")
                }
            };
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = reps {
                cfg.reps = v;
            }
            if let Some(v) = jobs {
                cfg.jobs = v;
            }
            if let Some(v) = out {
                cfg.out = v;
            }
            if let Some(v) = conditions {
                cfg.conditions = v;
            }
            let summary = cmd_replicate(&cfg)?;
            println!(
                "{} records written, {} already present, {} failed",
                summary.written,
                summary.skipped,
                summary.failed.len()
            );
            for (c, r, msg) in &summary.failed {
                eprintln!("condition {c} rep {r}: {msg}");
            }
        }
        Command::Report {
            store,
            kind,
            out,
            alpha,
            non_switched_se,
        } => {
            let kind: TableKind = kind.parse()?;
            let policy = if non_switched_se {
                SePolicy::NonSwitched
            } else {
                SePolicy::AllConverged
            };
            for f in cmd_report(&store, kind, &out, alpha, policy)? {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
