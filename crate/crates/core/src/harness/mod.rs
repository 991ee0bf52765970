//! Files, the replication runner and report tables behind the `npmlca`
//! command-line tool.

mod config;
mod csvio;
mod fitcmd;
mod replicate;
mod report;
mod select;
mod store;

use std::path::{Path, PathBuf};

pub use config::{
    read_condition_file, read_json, read_model_config, read_study_config, write_json, ConditionFile,
    FitOverrides, ModelConfig, StudyConfig, SCHEMA_VERSION,
};
pub use csvio::{
    read_dataset, read_dataset_from, read_truth, write_dataset, write_dataset_to, write_truth,
    DatasetFile,
};
pub use fitcmd::{cmd_fit, drop_small_sites, FitReport};
pub use replicate::{cmd_replicate, run_replication, ReplicateSummary};
pub use report::{
    classification_rows, cmd_report, condition_reports, diagnostics_rows, eta_rows, power_rows,
    recovery_rows, ConditionReport, TableKind,
};
pub use select::select_conditions;
pub use store::RecordStore;

use crate::error::Result;
use crate::simulator::{build_true_parameters, generate_dataset, Condition};

/// Writes `data.csv`, `truth.csv` and the generating `parameters.json` for
/// one dataset of `cond` drawn with `seed`.
pub fn cmd_simulate(cond: &Condition, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    let params = build_true_parameters(cond)?;
    let data = generate_dataset(cond, &params, seed)?;
    std::fs::create_dir_all(out)?;
    let paths = vec![out.join("data.csv"), out.join("truth.csv"), out.join("parameters.json")];
    write_dataset(&paths[0], &DatasetFile::with_default_names(data.clone()))?;
    write_truth(&paths[1], &data)?;
    write_json(&paths[2], &params)?;
    Ok(paths)
}
