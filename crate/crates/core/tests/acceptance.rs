//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use common::{enumerated_loglik, random_data, random_params, tiny_instance};
use npmlca::alignment::{align, find_level1_permutation, find_level2_permutation, relabel, Relabeling};
use npmlca::estimator::{
    e_step, fast_loglik, fit, hessian_asymmetry, numerical_hessian, random_start,
    regression_coefficients, weighted_logit_gradient, weighted_logit_objective,
    with_regression_coefficients, FitOptions,
};
use npmlca::harness::{cmd_replicate, condition_reports, ConditionReport, RecordStore, StudyConfig};
use npmlca::metrics::{eta_squared_by_factor, ReplicationRecord, SePolicy};
use npmlca::model::{count_free_parameters, information_criteria, total_loglik};
use npmlca::simulator::{
    build_true_parameters, condition_grid, generate_from_parameters, replication_seed, Condition,
    Factor,
};
use npmlca::ModelSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MASTER_SEED: u64 = 20_190_601;
const ALPHA: f64 = 0.05;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn condition_id(k: usize, q: f64, j: usize, n: usize, l1: (f64, f64), l2: (f64, f64)) -> usize {
    let target = Condition {
        n_indicators: k,
        crp_quality: q,
        n_sites: j,
        site_size: n,
        l1_effects: l1,
        l2_effects: l2,
    };
    target.id().expect("condition on the design grid")
}

const NUISANCE: (f64, f64) = (1.0, 1.0);
const EFFECT: (f64, f64) = (1.5, 3.0);

fn run_study(dir: &Path, conditions: &[usize], reps: usize, jobs: usize) -> Vec<ReplicationRecord> {
    let selector = conditions.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    let mut cfg = StudyConfig::new(MASTER_SEED, reps, &selector, dir);
    cfg.jobs = jobs;
    let summary = cmd_replicate(&cfg).expect("replication run");
    assert!(summary.failed.is_empty(), "failed replications: {:?}", summary.failed);
    RecordStore::existing(dir).unwrap().load_all().unwrap()
}

fn report_for(records: &[ReplicationRecord], id: usize) -> ConditionReport {
    let subset: Vec<ReplicationRecord> = records.iter().filter(|r| r.condition == id).cloned().collect();
    condition_reports(&subset, ALPHA, SePolicy::AllConverged)
        .unwrap()
        .into_iter()
        .next()
        .expect("records for condition")
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let n = 200;
    for seed in 0..n {
        let (_, params, data) = tiny_instance(seed);
        let oracle = enumerated_loglik(&params, &data);
        let a = total_loglik(&data, &params).unwrap();
        let b = fast_loglik(&data, &params).unwrap();
        worst = worst.max((a - oracle).abs()).max((b - oracle).abs());
    }
    Outcome {
        name: "1 likelihood matches joint enumeration",
        pass: worst < 1e-10,
        detail: format!("{n} instances, max |diff| = {worst:.2e} (tol 1e-10)"),
    }
}

fn criterion_2() -> Outcome {
    let mut worst_drop: f64 = 0.0;
    let mut steps = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ModelSpec::binary(6, 3, 2, 1, 1).unwrap();
        let data = random_data(&spec, &mut rng, 12, 5, 15);
        let options = FitOptions {
            start: Some(random_start(&spec, &mut rng)),
            keep_trace: true,
            compute_se: false,
            max_iterations: 300,
            tolerance: 1e-10,
            ..FitOptions::default()
        };
        let result = fit(&data, &spec, &options).unwrap();
        for w in result.trace.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
            steps += 1;
        }
    }
    Outcome {
        name: "2 EM ascent",
        pass: worst_drop <= 1e-8,
        detail: format!("50 datasets, {steps} iterations, largest decrease {worst_drop:.2e} (tol 1e-8)"),
    }
}

fn criterion_3() -> Outcome {
    let spec = ModelSpec::binary(10, 3, 2, 4, 1).unwrap();
    let p = count_free_parameters(&spec);
    let (aic, bic) = information_criteria(-25513.445, 45, 6580);
    let (a, b) = (format!("{aic:.3}"), format!("{bic:.3}"));
    Outcome {
        name: "3 free parameters and information criteria",
        pass: p == 45 && a == "51116.890" && b == "51422.521",
        detail: format!("count {p}, AIC {a}, BIC {b} (expected 45, 51116.890, 51422.521)"),
    }
}

fn criterion_4(records: &[ReplicationRecord], id: usize) -> Outcome {
    let report = report_for(records, id);
    let rec = report.recovery.as_ref().unwrap();
    let mut pass = rec.n_converged >= 90;
    let mut parts = vec![format!("{} of {} converged", rec.n_converged, rec.n_records)];
    for class in rec.per_class_crp() {
        let ratio = class.mean_ratio.unwrap_or(f64::NAN);
        pass &= class.mean_abs_bias < 0.01 && (0.85..=1.15).contains(&ratio);
        parts.push(format!(
            "c{}: |bias| {:.4} SE {:.4} SD {:.4} SE/SD {:.3}",
            class.class + 1,
            class.mean_abs_bias,
            class.mean_se.unwrap_or(f64::NAN),
            class.mean_sd,
            ratio
        ));
    }
    Outcome {
        name: "4 CRP recovery (12, 0.8, 150, 60, nuisance/nuisance)",
        pass,
        detail: parts.join("; "),
    }
}

fn slope_rates(report: &ConditionReport, names: &[&str]) -> Vec<(String, f64)> {
    let rec = report.recovery.as_ref().unwrap();
    names
        .iter()
        .map(|n| {
            let s = rec.free_by_name(n).unwrap();
            (n.to_string(), s.rejection.rate().unwrap_or(f64::NAN))
        })
        .collect()
}

fn criterion_5(records: &[ReplicationRecord], id: usize) -> Outcome {
    let report = report_for(records, id);
    let rates = slope_rates(
        &report,
        &["gamma1[c1,x1]", "gamma1[c2,x1]", "gamma2[c1,z1]", "gamma2[c2,z1]"],
    );
    Outcome {
        name: "5 power (12, 0.8, 150, 60, effect/effect)",
        pass: rates.iter().all(|(_, r)| *r >= 0.95),
        detail: rates.iter().map(|(n, r)| format!("{n} {r:.3}")).collect::<Vec<_>>().join(", ")
            + " (min 0.95)",
    }
}

fn criterion_6(records: &[ReplicationRecord], id: usize) -> Outcome {
    let report = report_for(records, id);
    let rates = slope_rates(&report, &["gamma1[c1,x1]", "gamma2[c1,z1]"]);
    Outcome {
        name: "6 Type-I error (12, 0.9, 150, 60, nuisance/nuisance)",
        pass: rates.iter().all(|(_, r)| (r - 0.05).abs() <= 0.06),
        detail: rates.iter().map(|(n, r)| format!("{n} {r:.3}")).collect::<Vec<_>>().join(", ")
            + " (0.05 ± 0.06)",
    }
}

fn criterion_7(records: &[ReplicationRecord], sized: &[usize], weak: usize, weak_counterpart: usize) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for &id in sized {
        let r = report_for(records, id);
        pass &= r.mean_error.0 < 0.20;
        parts.push(format!("{}x{}: {:.3}", r.condition.n_sites, r.condition.site_size, r.mean_error.0));
    }
    let a = report_for(records, weak).mean_error.0;
    let b = report_for(records, weak_counterpart).mean_error.0;
    pass &= a > b;
    parts.push(format!("6 indicators q0.7 50x30 {a:.3} > 12 indicators {b:.3}"));
    Outcome {
        name: "7 level-1 classification error",
        pass,
        detail: parts.join("; ") + " (q0.8 errors < 0.20)",
    }
}

fn criterion_8() -> Outcome {
    let cond = condition_grid()[condition_id(12, 0.8, 150, 60, NUISANCE, NUISANCE)];
    let truth = build_true_parameters(&cond).unwrap();
    let generating = Relabeling::new(vec![2, 0, 1], vec![1, 0]).unwrap();
    let expected = generating.inverse();
    let moved_truth = truth.relabel(&generating.perm1, &generating.perm2);
    let mut recovered = 0;
    let mut exact = true;
    let seeds = 50;
    for s in 0..seeds {
        let seed = replication_seed(MASTER_SEED, 1000, s);
        let data = generate_from_parameters(&moved_truth, 150, 60, seed).unwrap();
        let result = fit(&data, &cond.model_spec(), &FitOptions { seed, ..FitOptions::default() }).unwrap();
        let aligned = align(&result, &moved_truth, &data).unwrap().result;
        let q1 = find_level1_permutation(&aligned.params.crp_matrix(), &truth.crp_matrix()).unwrap();
        let step = relabel(&aligned, &Relabeling::new(q1.clone(), vec![0, 1]).unwrap());
        let q2 = find_level2_permutation(&step, &truth, &data).unwrap();
        if q1 == expected.perm1 && q2 == expected.perm2 {
            recovered += 1;
        }
        for f in [&result, &aligned] {
            exact &= relabel(&relabel(f, &generating), &generating.inverse()) == *f;
        }
    }
    let rate = recovered as f64 / seeds as f64;
    Outcome {
        name: "8 alignment recovers the inverse relabeling",
        pass: rate >= 0.95 && exact,
        detail: format!(
            "{recovered}/{seeds} seeds ({rate:.2}, min 0.95); relabel then inverse exact: {exact}"
        ),
    }
}

fn criterion_9() -> Outcome {
    let cond = condition_grid()[condition_id(12, 0.8, 50, 30, EFFECT, EFFECT)];
    let truth = build_true_parameters(&cond).unwrap();
    let spec = truth.spec();
    let mut worst_grad: f64 = 0.0;
    let mut worst_asym: f64 = 0.0;
    for seed in 0..5 {
        let data = generate_from_parameters(&truth, 50, 30, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let post = e_step(&data, &random_start(&spec, &mut rng)).unwrap();
        let at = random_params(&spec, &mut rng, 0.8);
        let analytic = weighted_logit_gradient(&data, &post, &at).unwrap();
        let coords = regression_coefficients(&at);
        let f = |c: &[f64]| {
            weighted_logit_objective(&data, &post, &with_regression_coefficients(&at, c).unwrap()).unwrap()
        };
        for i in 0..coords.len() {
            let h = 1e-5;
            let (mut up, mut down) = (coords.clone(), coords.clone());
            up[i] += h;
            down[i] -= h;
            let numeric = (f(&up) - f(&down)) / (2.0 * h);
            worst_grad = worst_grad.max((analytic[i] - numeric).abs() / numeric.abs().max(1.0));
        }
        let result = fit(&data, &spec, &FitOptions { seed, compute_se: false, ..FitOptions::default() }).unwrap();
        let h = numerical_hessian(&data, &result.params).unwrap();
        worst_asym = worst_asym.max(hessian_asymmetry(&h));
    }
    Outcome {
        name: "9 gradient and Hessian checks",
        pass: worst_grad < 1e-5 && worst_asym < 1e-4,
        detail: format!(
            "M-step gradient rel. error {worst_grad:.2e} (tol 1e-5); Hessian asymmetry {worst_asym:.2e} (tol 1e-4)"
        ),
    }
}

fn criterion_10(first: &Path, second: &Path) -> Outcome {
    let a = read_dir_bytes(first);
    let b = read_dir_bytes(second);
    let identical = a == b;
    Outcome {
        name: "10 determinism of the record store",
        pass: identical && !a.is_empty(),
        detail: format!("{} and {} files, byte-identical: {identical}", a.len(), b.len()),
    }
}

fn eta_check(records: &[ReplicationRecord], ids: &[usize]) -> Outcome {
    let reports: Vec<ConditionReport> = ids.iter().map(|&id| report_for(records, id)).collect();
    let conditions: Vec<Condition> = reports.iter().map(|r| r.condition).collect();
    let e1: Vec<f64> = reports.iter().map(|r| r.mean_error.0).collect();
    let e2: Vec<f64> = reports.iter().map(|r| r.mean_error.1).collect();
    let eta1 = eta_squared_by_factor(&conditions, &e1).unwrap();
    let eta2 = eta_squared_by_factor(&conditions, &e2).unwrap();
    let largest = |etas: &[(Factor, f64)]| {
        etas.iter().fold(etas[0], |best, &e| if e.1 > best.1 { e } else { best }).0
    };
    let fmt = |etas: &[(Factor, f64)]| {
        etas.iter()
            .filter(|(_, v)| *v > 0.0)
            .map(|(f, v)| format!("{} {v:.3}", f.name()))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let pass = largest(&eta1) == Factor::Quality && largest(&eta2) == Factor::CrossLevelEffect;
    Outcome {
        name: "eta-squared directions (16-condition grid)",
        pass,
        detail: format!("level 1: {}; level 2: {}", fmt(&eta1), fmt(&eta2)),
    }
}

fn main() {
    let mut outcomes = Vec::new();
    let mut timed = |f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        println!(
            "{} criterion {}: {} [{:.0}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        outcomes.push(o.pass);
    };

    timed(&mut criterion_1);
    timed(&mut criterion_2);
    timed(&mut criterion_3);

    let tmp = tempfile::tempdir().unwrap();
    let c4 = condition_id(12, 0.8, 150, 60, NUISANCE, NUISANCE);
    let c5 = condition_id(12, 0.8, 150, 60, EFFECT, EFFECT);
    let c6 = condition_id(12, 0.9, 150, 60, NUISANCE, NUISANCE);
    let store_a = tmp.path().join("c4-run-a");
    let store_b = tmp.path().join("c4-run-b");
    let mut c4_records = Vec::new();
    timed(&mut || {
        c4_records = run_study(&store_a, &[c4], 100, 1);
        criterion_4(&c4_records, c4)
    });
    timed(&mut || {
        let records = run_study(&tmp.path().join("c5"), &[c5], 100, 0);
        criterion_5(&records, c5)
    });
    timed(&mut || {
        let records = run_study(&tmp.path().join("c6"), &[c6], 100, 0);
        criterion_6(&records, c6)
    });
    timed(&mut || {
        let sized: Vec<usize> = [(50, 30), (50, 60), (150, 30)]
            .iter()
            .map(|&(j, n)| condition_id(12, 0.8, j, n, NUISANCE, NUISANCE))
            .collect();
        let weak = condition_id(6, 0.7, 50, 30, NUISANCE, NUISANCE);
        let counterpart = condition_id(12, 0.7, 50, 30, NUISANCE, NUISANCE);
        let mut ids = sized.clone();
        ids.extend([weak, counterpart]);
        let mut records = run_study(&tmp.path().join("c7"), &ids, 50, 0);
        records.extend(c4_records.iter().filter(|r| r.rep < 50).cloned());
        let mut all_sized = sized;
        all_sized.push(c4);
        criterion_7(&records, &all_sized, weak, counterpart)
    });
    timed(&mut criterion_8);
    timed(&mut criterion_9);
    timed(&mut || {
        run_study(&store_b, &[c4], 100, 2);
        criterion_10(&store_a, &store_b)
    });
    timed(&mut || {
        let mut ids = Vec::new();
        for k in [6, 12] {
            for q in [0.7, 0.9] {
                for n in [30, 60] {
                    for l2 in [NUISANCE, EFFECT] {
                        ids.push(condition_id(k, q, 50, n, NUISANCE, l2));
                    }
                }
            }
        }
        let records = run_study(&tmp.path().join("eta"), &ids, 100, 0);
        eta_check(&records, &ids)
    });

    let failed = outcomes.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
