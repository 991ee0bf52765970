//! The `fit` command: estimate a model on a dataset file and write result
//! tables.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{write_json, ModelConfig, SCHEMA_VERSION};
use super::csvio::{read_dataset, DatasetFile};
use crate::error::{Error, Result};
use crate::estimator::{fit, wald_tests, significance_stars, FitDiagnostics, FitResult};
use crate::model::{Dataset, FitStats, ModelSpec, ParamBlock, Parameters};

#[derive(Debug, Clone, Serialize)]
struct FreeParameter {
    name: String,
    estimate: f64,
    se: Option<f64>,
}

/// Machine-readable fit output (`fit.json`).
#[derive(Debug, Clone, Serialize)]
struct FitFile<'a> {
    schema_version: u32,
    spec: &'a ModelSpec,
    n_sites: usize,
    n_individuals: usize,
    dropped_sites: &'a [String],
    converged: bool,
    iterations: usize,
    fit_stats: &'a FitStats,
    diagnostics: &'a FitDiagnostics,
    params: &'a Parameters,
    free_parameters: Vec<FreeParameter>,
    level1_assignments: Vec<usize>,
    level2_assignments: Vec<usize>,
}

#[derive(Debug)]
pub struct FitReport {
    pub result: FitResult,
    pub spec: ModelSpec,
    pub data: DatasetFile,
    /// Site ids removed for having fewer rows than the minimum.
    pub dropped_sites: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Removes sites with fewer than `min_size` rows; returns the removed ids.
pub fn drop_small_sites(data: &mut Dataset, min_size: usize) -> Vec<String> {
    let dropped = data
        .sites
        .iter()
        .filter(|s| s.rows.len() < min_size)
        .map(|s| s.id.clone())
        .collect();
    data.sites.retain(|s| s.rows.len() >= min_size);
    data.truth = None;
    dropped
}

fn spec_for(file: &DatasetFile, config: &ModelConfig) -> Result<ModelSpec> {
    let categories = match &config.categories {
        Some(c) => c.clone(),
        None => file.dataset.observed_categories().into_iter().map(|s| s.max(2)).collect(),
    };
    ModelSpec::new(
        categories,
        config.level1_classes,
        config.level2_classes,
        file.level1_covariates.len(),
        file.level2_covariates.len(),
    )
}

/// Fits the model in `config` to the dataset at `data_path` and writes
/// `fit.json`, `crp_table.csv`, `fit_stats.csv`, `odds_ratios.csv` and
/// `composition.csv` into `out`.
pub fn cmd_fit(data_path: &Path, config: &ModelConfig, out: &Path, keep_small_sites: bool) -> Result<FitReport> {
    let mut file = read_dataset(data_path)?;
    let dropped_sites = if keep_small_sites {
        Vec::new()
    } else {
        drop_small_sites(&mut file.dataset, config.min_site_size)
    };
    if file.dataset.n_individuals() == 0 {
        return Err(Error::EmptyDataset);
    }
    let spec = spec_for(&file, config)?;
    let result = fit(&file.dataset, &spec, &config.fit.apply(config.seed))?;
    std::fs::create_dir_all(out)?;
    let mut files = Vec::new();

    let labels = Parameters::free_labels(&spec);
    let free_parameters = labels
        .iter()
        .zip(result.params.to_free())
        .zip(&result.se)
        .map(|((l, estimate), se)| FreeParameter {
            name: l.to_string(),
            estimate,
            se: *se,
        })
        .collect();
    let fit_json = out.join("fit.json");
    write_json(
        &fit_json,
        &FitFile {
            schema_version: SCHEMA_VERSION,
            spec: &spec,
            n_sites: file.dataset.n_sites(),
            n_individuals: file.dataset.n_individuals(),
            dropped_sites: &dropped_sites,
            converged: result.converged,
            iterations: result.iterations,
            fit_stats: &result.fit_stats,
            diagnostics: &result.diagnostics,
            params: &result.params,
            free_parameters,
            level1_assignments: result.modal1.iter().map(|c| c + 1).collect(),
            level2_assignments: result.modal2.iter().map(|w| w + 1).collect(),
        },
    )?;
    files.push(fit_json);

    let l = spec.level1_classes;
    let classes: Vec<String> = (1..=l).map(|c| format!("class{c}")).collect();

    // CRP table: one row per indicator category, plus class proportions
    let mut crp = format!("indicator,category,{}\n", classes.join(","));
    let n = file.dataset.n_individuals() as f64;
    let sizes: Vec<f64> = (0..l)
        .map(|c| result.posteriors.marginal_rows().iter().map(|r| r[c]).sum::<f64>() / n)
        .collect();
    crp.push_str(&format!("class_size,,{}\n", sizes.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(",")));
    for (k, name) in file.indicators.iter().enumerate() {
        for s in 0..spec.categories[k] {
            let row: Vec<String> = (0..l).map(|c| format!("{:.4}", result.params.crp(k, c)[s])).collect();
            crp.push_str(&format!("{name},{},{}\n", s + 1, row.join(",")));
        }
    }
    files.push(write_text(out, "crp_table.csv", crp)?);

    let stats = &result.fit_stats;
    files.push(write_text(
        out,
        "fit_stats.csv",
        format!(
            "n_free,loglik,aic,bic,entropy,converged\n{},{:.3},{:.3},{:.3},{:.4},{}\n",
            stats.n_free, stats.loglik, stats.aic, stats.bic, stats.entropy, result.converged
        ),
    )?);

    // odds ratios of every covariate slope against the reference class
    let mut or = String::from("predictor,level,comparison,estimate,se,odds_ratio,ci_low,ci_high,p_value,stars\n");
    let slopes: Vec<(usize, &crate::model::ParamLabel)> = labels
        .iter()
        .enumerate()
        .filter(|(_, lab)| matches!(lab.block, ParamBlock::Gamma1 | ParamBlock::Gamma2))
        .collect();
    let est: Vec<f64> = slopes.iter().map(|(i, _)| result.params.to_free()[*i]).collect();
    let se: Vec<Option<f64>> = slopes.iter().map(|(i, _)| result.se[*i]).collect();
    for ((_, lab), t) in slopes.iter().zip(wald_tests(&est, &se, config.alpha)?) {
        let (predictor, level) = match lab.block {
            ParamBlock::Gamma1 => (&file.level1_covariates[lab.index], 1),
            _ => (&file.level2_covariates[lab.index], 2),
        };
        or.push_str(&format!(
            "{predictor},{level},class{} vs class{l},{:.4},{},{:.3},{},{},{},{}\n",
            lab.class + 1,
            t.estimate,
            t.se.map_or("NA".into(), |v| format!("{v:.4}")),
            t.odds_ratio,
            t.ci_low.map_or("NA".into(), |v| format!("{v:.3}")),
            t.ci_high.map_or("NA".into(), |v| format!("{v:.3}")),
            t.p_value.map_or("NA".into(), |v| format!("{v:.4}")),
            t.p_value.map_or("", significance_stars),
        ));
    }
    files.push(write_text(out, "odds_ratios.csv", or)?);

    // level-1 composition of each site class over its modally assigned sites
    let m = spec.level2_classes;
    let offsets = file.dataset.site_offsets();
    let mut comp = format!("site_class,n_sites,{}\n", classes.join(","));
    for w in 0..m {
        let sites: Vec<usize> = (0..file.dataset.n_sites()).filter(|&j| result.modal2[j] == w).collect();
        let mut sums = vec![0.0; l];
        let mut count = 0usize;
        for &j in &sites {
            for i in offsets[j]..offsets[j + 1] {
                for (acc, p) in sums.iter_mut().zip(result.posteriors.marginal(i)) {
                    *acc += p;
                }
                count += 1;
            }
        }
        let cells: Vec<String> = sums
            .iter()
            .map(|s| if count == 0 { "NA".into() } else { format!("{:.4}", s / count as f64) })
            .collect();
        comp.push_str(&format!("{},{},{}\n", w + 1, sites.len(), cells.join(",")));
    }
    files.push(write_text(out, "composition.csv", comp)?);

    Ok(FitReport {
        result,
        spec,
        data: file,
        dropped_sites,
        files,
    })
}

fn write_text(dir: &Path, name: &str, text: String) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, text)?;
    Ok(path)
}
