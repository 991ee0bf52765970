use rayon::prelude::*;

use super::config::{FitOverrides, StudyConfig};
use super::select::select_conditions;
use super::store::RecordStore;
use crate::alignment::align;
use crate::error::{Error, Result};
use crate::estimator::{crp_standard_errors, fit};
use crate::metrics::{classification_error, ReplicationRecord};
use crate::simulator::{build_true_parameters, condition_grid, generate_dataset, replication_seed};

/// Generates, fits, aligns and scores one replication.
pub fn run_replication(
    condition: usize,
    rep: usize,
    master_seed: u64,
    overrides: &FitOverrides,
) -> Result<ReplicationRecord> {
    let grid = condition_grid();
    let cond = grid.get(condition).ok_or_else(|| {
        Error::Config(format!("condition id {condition} outside 0..{}", grid.len()))
    })?;
    let truth = build_true_parameters(cond)?;
    let seed = replication_seed(master_seed, condition, rep);
    let data = generate_dataset(cond, &truth, seed)?;
    let result = fit(&data, &cond.model_spec(), &overrides.apply(seed))?;
    let aligned = align(&result, &truth, &data)?;
    let fitted = &aligned.result;
    let true_labels = data.truth.as_ref().expect("simulated data carries truth");
    Ok(ReplicationRecord {
        condition,
        rep,
        seed,
        estimates: fitted.params.to_free(),
        se: fitted.se.clone(),
        crp: fitted.params.crp_matrix(),
        crp_se: crp_standard_errors(&fitted.params, &fitted.se, fitted.covariance.as_deref()),
        converged: fitted.converged,
        switched: aligned.relabeling.switched,
        perm1: aligned.relabeling.perm1.clone(),
        perm2: aligned.relabeling.perm2.clone(),
        error1: classification_error(&fitted.modal1, &true_labels.level1)?,
        error2: classification_error(&fitted.modal2, &true_labels.level2)?,
        loglik: fitted.loglik,
        iterations: fitted.iterations,
        newton_fallbacks: fitted.diagnostics.newton_fallbacks,
        hessian_asymmetry: fitted.diagnostics.hessian_asymmetry,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplicateSummary {
    pub written: usize,
    pub skipped: usize,
    /// `(condition, rep, message)` of replications that raised an error.
    pub failed: Vec<(usize, usize, String)>,
}

/// Runs every selected `(condition, rep)` missing from the store. Records
/// are committed one by one, so an interrupted run resumes where it stopped.
pub fn cmd_replicate(config: &StudyConfig) -> Result<ReplicateSummary> {
    config.validate()?;
    let store = RecordStore::open(&config.out)?;
    let existing = store.keys()?;
    let mut summary = ReplicateSummary::default();
    let mut tasks = Vec::new();
    for cond in select_conditions(&config.conditions)? {
        for rep in 0..config.reps {
            if existing.contains(&(cond, rep)) {
                summary.skipped += 1;
            } else {
                tasks.push((cond, rep));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<(usize, usize, Result<bool>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(cond, rep)| {
                let outcome = run_replication(cond, rep, config.seed, &config.fit)
                    .and_then(|record| store.put(&record));
                (cond, rep, outcome)
            })
            .collect()
    });
    for (cond, rep, outcome) in outcomes {
        match outcome {
            Ok(true) => summary.written += 1,
            Ok(false) => summary.skipped += 1,
            Err(Error::Io(e)) => return Err(Error::Store(e.to_string())),
            Err(e) => summary.failed.push((cond, rep, e.to_string())),
        }
    }
    Ok(summary)
}
