//! Report tables computed from a record store.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use itertools::Itertools;

use super::store::RecordStore;
use crate::error::{Error, Result};
use crate::metrics::{
    eta_squared_by_factor, parameter_recovery, RecoverySummary, ReplicationRecord, SePolicy,
};
use crate::model::{ParamBlock, Parameters};
use crate::simulator::{build_true_parameters, condition_grid, Condition};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Recovery,
    Power,
    Classification,
    Eta,
    Diagnostics,
    All,
}

impl FromStr for TableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "recovery" => TableKind::Recovery,
            "power" => TableKind::Power,
            "classification" => TableKind::Classification,
            "eta" => TableKind::Eta,
            "diagnostics" => TableKind::Diagnostics,
            "all" => TableKind::All,
            other => return Err(Error::UnknownTable(other.to_string())),
        })
    }
}

/// Summaries of one design cell.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub id: usize,
    pub condition: Condition,
    pub n_records: usize,
    pub n_converged: usize,
    pub n_switched: usize,
    /// Mean classification errors over converged records (level 1, level 2).
    pub mean_error: (f64, f64),
    pub mean_iterations: f64,
    pub newton_fallbacks: usize,
    pub max_hessian_asymmetry: f64,
    /// `None` with fewer than two converged records.
    pub recovery: Option<RecoverySummary>,
}

/// Groups records by condition and summarizes each group.
pub fn condition_reports(
    records: &[ReplicationRecord],
    alpha: f64,
    policy: SePolicy,
) -> Result<Vec<ConditionReport>> {
    let grid = condition_grid();
    let mut sorted = records.to_vec();
    sorted.sort_by_key(|r| (r.condition, r.rep));
    let mut out = Vec::new();
    for (id, group) in &sorted.iter().chunk_by(|r| r.condition) {
        let group: Vec<ReplicationRecord> = group.cloned().collect();
        let condition = *grid
            .get(id)
            .ok_or_else(|| Error::Store(format!("record for unknown condition {id}")))?;
        let truth = build_true_parameters(&condition)?;
        let converged: Vec<&ReplicationRecord> = group.iter().filter(|r| r.converged).collect();
        let mean_of = |f: &dyn Fn(&ReplicationRecord) -> f64| {
            if converged.is_empty() {
                f64::NAN
            } else {
                converged.iter().map(|r| f(r)).sum::<f64>() / converged.len() as f64
            }
        };
        let recovery = if converged.len() >= 2 {
            Some(parameter_recovery(&group, &truth, alpha, policy)?)
        } else {
            None
        };
        out.push(ConditionReport {
            id,
            condition,
            n_records: group.len(),
            n_converged: converged.len(),
            n_switched: group.iter().filter(|r| r.switched).count(),
            mean_error: (mean_of(&|r| r.error1), mean_of(&|r| r.error2)),
            mean_iterations: mean_of(&|r| r.iterations as f64),
            newton_fallbacks: group.iter().map(|r| r.newton_fallbacks).sum(),
            max_hessian_asymmetry: group.iter().map(|r| r.hessian_asymmetry).fold(0.0, f64::max),
            recovery,
        });
    }
    Ok(out)
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "NA".into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), num)
}

fn effect(e: (f64, f64)) -> String {
    format!("{}/{}", e.0, e.1)
}

const CONDITION_COLUMNS: [&str; 7] = [
    "condition",
    "n_indicators",
    "crp_quality",
    "n_sites",
    "site_size",
    "l1_effects",
    "l2_effects",
];

fn condition_cells(r: &ConditionReport) -> Vec<String> {
    let c = &r.condition;
    vec![
        r.id.to_string(),
        c.n_indicators.to_string(),
        c.crp_quality.to_string(),
        c.n_sites.to_string(),
        c.site_size.to_string(),
        effect(c.l1_effects),
        effect(c.l2_effects),
    ]
}

fn write_table(path: &Path, extra: &[&str], rows: Vec<Vec<String>>, with_condition: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::Store(e.to_string()))?;
    let mut header: Vec<&str> = if with_condition { CONDITION_COLUMNS.to_vec() } else { Vec::new() };
    header.extend_from_slice(extra);
    let io = |e: csv::Error| Error::Store(e.to_string());
    w.write_record(&header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (condition, level-1 class): probability-scale bias, SE, SD
/// and SE/SD averaged over indicators, then the logit-scale SE, SD and
/// SE/SD of the response parameters.
pub fn recovery_rows(reports: &[ConditionReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in reports {
        let Some(rec) = &r.recovery else { continue };
        let spec = r.condition.model_spec();
        let labels = Parameters::free_labels(&spec);
        for class in rec.per_class_crp() {
            let logit: Vec<_> = labels
                .iter()
                .zip(&rec.free)
                .filter(|(l, _)| l.block == ParamBlock::Beta && l.class == class.class)
                .map(|(_, s)| s)
                .collect();
            let avg = |f: &dyn Fn(&crate::metrics::ParameterSummary) -> Option<f64>| {
                logit.iter().map(|s| f(s)).sum::<Option<f64>>().map(|v| v / logit.len() as f64)
            };
            let mut row = condition_cells(r);
            row.extend([
                (class.class + 1).to_string(),
                num(class.mean_bias),
                opt(class.mean_se),
                num(class.mean_sd),
                opt(class.mean_ratio),
                num(class.mean_abs_bias),
                opt(avg(&|s| s.mean_se)),
                opt(avg(&|s| Some(s.sd))),
                opt(avg(&|s| s.se_sd_ratio)),
                rec.n_converged.to_string(),
                rec.n_switched.to_string(),
            ]);
            rows.push(row);
        }
    }
    rows
}

pub const RECOVERY_COLUMNS: [&str; 11] = [
    "class",
    "bias",
    "se",
    "sd",
    "se_sd_ratio",
    "abs_bias",
    "se_logit",
    "sd_logit",
    "se_sd_ratio_logit",
    "n_converged",
    "n_switched",
];

pub const POWER_COLUMNS: [&str; 12] = [
    "parameter",
    "kind",
    "truth",
    "estimate",
    "bias",
    "se",
    "sd",
    "rejection_rate",
    "rejection_rate_all",
    "n_rejected",
    "n_with_se",
    "n_total",
];

/// One row per (condition, covariate slope).
pub fn power_rows(reports: &[ConditionReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in reports {
        let Some(rec) = &r.recovery else { continue };
        let labels = Parameters::free_labels(&r.condition.model_spec());
        for (label, s) in labels.iter().zip(&rec.free) {
            if !matches!(label.block, ParamBlock::Gamma1 | ParamBlock::Gamma2) {
                continue;
            }
            let mut row = condition_cells(r);
            row.extend([
                s.name.clone(),
                if s.truth == 0.0 { "type1".into() } else { "power".into() },
                num(s.truth),
                num(s.mean_estimate),
                num(s.bias),
                opt(s.mean_se),
                num(s.sd),
                opt(s.rejection.rate()),
                opt(s.rejection.rate_over_all()),
                s.rejection.rejected.to_string(),
                s.rejection.with_se.to_string(),
                s.rejection.total.to_string(),
            ]);
            rows.push(row);
        }
    }
    rows
}

pub const CLASSIFICATION_COLUMNS: [&str; 3] = ["level", "mean_error", "n_converged"];

/// Long format: one row per (condition, level).
pub fn classification_rows(reports: &[ConditionReport]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in reports {
        for (level, e) in [(1, r.mean_error.0), (2, r.mean_error.1)] {
            let mut row = condition_cells(r);
            row.extend([level.to_string(), num(e), r.n_converged.to_string()]);
            rows.push(row);
        }
    }
    rows
}

pub const ETA_COLUMNS: [&str; 4] = ["level", "factor", "eta_squared", "n_conditions"];

/// η² of each design factor for each level's condition-mean error.
pub fn eta_rows(reports: &[ConditionReport]) -> Result<Vec<Vec<String>>> {
    let usable: Vec<&ConditionReport> = reports.iter().filter(|r| r.n_converged > 0).collect();
    let conditions: Vec<Condition> = usable.iter().map(|r| r.condition).collect();
    let mut rows = Vec::new();
    for level in [1, 2] {
        let means: Vec<f64> = usable
            .iter()
            .map(|r| if level == 1 { r.mean_error.0 } else { r.mean_error.1 })
            .collect();
        for (factor, eta) in eta_squared_by_factor(&conditions, &means)? {
            rows.push(vec![
                level.to_string(),
                factor.name().to_string(),
                num(eta),
                usable.len().to_string(),
            ]);
        }
    }
    Ok(rows)
}

pub const DIAGNOSTICS_COLUMNS: [&str; 9] = [
    "n_records",
    "n_converged",
    "nonconvergence_rate",
    "n_switched",
    "switched_rate",
    "mean_level1_error",
    "mean_iterations",
    "newton_fallbacks",
    "max_hessian_asymmetry",
];

pub fn diagnostics_rows(reports: &[ConditionReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            let n = r.n_records as f64;
            let mut row = condition_cells(r);
            row.extend([
                r.n_records.to_string(),
                r.n_converged.to_string(),
                num(1.0 - r.n_converged as f64 / n),
                r.n_switched.to_string(),
                num(r.n_switched as f64 / n),
                num(r.mean_error.0),
                num(r.mean_iterations),
                r.newton_fallbacks.to_string(),
                format!("{:.3e}", r.max_hessian_asymmetry),
            ]);
            row
        })
        .collect()
}

/// Writes the requested tables from the store at `store_dir` into `out`.
pub fn cmd_report(
    store_dir: &Path,
    kind: TableKind,
    out: &Path,
    alpha: f64,
    policy: SePolicy,
) -> Result<Vec<PathBuf>> {
    let records = RecordStore::existing(store_dir)?.load_all()?;
    if records.is_empty() {
        return Err(Error::Store(format!("{} holds no records", store_dir.display())));
    }
    std::fs::create_dir_all(out)?;
    let reports = condition_reports(&records, alpha, policy)?;
    let wants = |k: TableKind| kind == k || kind == TableKind::All;
    let mut written = Vec::new();
    let mut emit = |name: &str, columns: &[&str], rows: Vec<Vec<String>>, with_condition: bool| -> Result<()> {
        let path = out.join(name);
        write_table(&path, columns, rows, with_condition)?;
        written.push(path);
        Ok(())
    };
    if wants(TableKind::Recovery) {
        emit("recovery.csv", &RECOVERY_COLUMNS, recovery_rows(&reports), true)?;
    }
    if wants(TableKind::Power) {
        emit("power.csv", &POWER_COLUMNS, power_rows(&reports), true)?;
    }
    if wants(TableKind::Classification) {
        emit("classification.csv", &CLASSIFICATION_COLUMNS, classification_rows(&reports), true)?;
    }
    if wants(TableKind::Eta) {
        emit("eta.csv", &ETA_COLUMNS, eta_rows(&reports)?, false)?;
    }
    if wants(TableKind::Diagnostics) {
        emit("diagnostics.csv", &DIAGNOSTICS_COLUMNS, diagnostics_rows(&reports), true)?;
    }
    Ok(written)
}
