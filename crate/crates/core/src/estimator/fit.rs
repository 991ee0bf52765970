use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classify::classify;
use super::estep::{e_step_indexed, Posteriors};
use super::hessian::ScoreEvaluator;
use super::index::DataIndex;
use super::mstep::m_step_indexed;
use crate::error::{Error, Result};
use crate::model::{
    count_free_parameters, information_criteria, relative_entropy, Dataset, FitStats, ModelSpec,
    Parameters,
};

/// Estimation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub n_starts: usize,
    pub n_refine: usize,
    pub burn_in: usize,
    /// Convergence threshold on the relative log-likelihood change.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub compute_se: bool,
    /// Keep the per-iteration log-likelihood of the selected start.
    pub keep_trace: bool,
    /// Run EM from this point only, skipping random starts.
    pub start: Option<Parameters>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_starts: 20,
            n_refine: 5,
            burn_in: 30,
            tolerance: 1e-7,
            max_iterations: 1000,
            seed: 0,
            compute_se: true,
            keep_trace: false,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// M-steps whose Newton system was singular.
    pub newton_fallbacks: usize,
    /// M-steps where no damped regression step improved the objective.
    pub rejected_gamma_steps: usize,
    /// Largest log-likelihood decrease seen between iterations.
    pub max_loglik_decrease: f64,
    /// `max |H − Hᵀ| / max |H|` of the numerical Hessian.
    pub hessian_asymmetry: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Parameters,
    pub loglik: f64,
    /// Per free parameter, in [`Parameters::to_free`] order.
    pub se: Vec<Option<f64>>,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub posteriors: Posteriors,
    pub converged: bool,
    pub iterations: usize,
    pub n_starts_used: usize,
    pub modal1: Vec<usize>,
    pub modal2: Vec<usize>,
    pub fit_stats: FitStats,
    pub diagnostics: FitDiagnostics,
    pub trace: Vec<f64>,
    /// Unrelabeled fit and the permutations applied to it, kept so that
    /// successive relabelings compose exactly.
    #[serde(skip)]
    pub origin: Option<Box<FitOrigin>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOrigin {
    pub fit: FitResult,
    pub perm1: Vec<usize>,
    pub perm2: Vec<usize>,
}

struct Run {
    params: Parameters,
    loglik: f64,
    posteriors: Posteriors,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
    diagnostics: FitDiagnostics,
}

impl Run {
    fn start(index: &DataIndex, params: Parameters) -> Self {
        let (loglik, posteriors) = e_step_indexed(index, &params);
        Self {
            params,
            loglik,
            posteriors,
            iterations: 0,
            converged: false,
            trace: vec![loglik],
            diagnostics: FitDiagnostics::default(),
        }
    }

    /// Advances EM until convergence or until `limit` total iterations.
    fn advance(&mut self, index: &DataIndex, limit: usize, tolerance: f64) {
        while !self.converged && self.iterations < limit {
            let (next, info) = m_step_indexed(index, &self.posteriors, &self.params);
            let (loglik, posteriors) = e_step_indexed(index, &next);
            self.iterations += 1;
            if info.newton_fallback {
                self.diagnostics.newton_fallbacks += 1;
            }
            if info.gamma_step_rejected {
                self.diagnostics.rejected_gamma_steps += 1;
            }
            let change = loglik - self.loglik;
            if -change > self.diagnostics.max_loglik_decrease {
                self.diagnostics.max_loglik_decrease = -change;
            }
            let relative = change.abs() / self.loglik.abs().max(f64::MIN_POSITIVE);
            self.params = next;
            self.loglik = loglik;
            self.posteriors = posteriors;
            self.trace.push(loglik);
            if relative < tolerance {
                self.converged = true;
            }
        }
    }
}

/// Random start: response logits `U(−2, 2)`, class logits `U(−1, 1)`,
/// slopes zero.
pub fn random_start(spec: &ModelSpec, rng: &mut impl Rng) -> Parameters {
    let mut p = Parameters::zeros(spec);
    let l = spec.level1_classes;
    for m in 1..spec.level2_classes {
        p.alpha[m] = rng.random_range(-1.0..1.0);
    }
    for c in 0..l - 1 {
        for m in 0..spec.level2_classes {
            p.gamma0[c][m] = rng.random_range(-1.0..1.0);
        }
    }
    for block in p.beta.iter_mut() {
        for row in block.iter_mut().skip(1) {
            for v in row.iter_mut() {
                *v = rng.random_range(-2.0..2.0);
            }
        }
    }
    p
}

/// RNG for random start `start` of a fit seeded with `seed`.
pub fn start_rng(seed: u64, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64 + 1);
    rng
}

/// Maximum-likelihood fit by multi-start generalized EM.
///
/// `n_starts` random starts each run `burn_in` iterations; the `n_refine`
/// best continue until the relative log-likelihood change drops below
/// `tolerance` or `max_iterations` is reached. The highest log-likelihood
/// wins. Results depend only on the data, the spec and the options.
pub fn fit(data: &Dataset, spec: &ModelSpec, options: &FitOptions) -> Result<FitResult> {
    spec.validate()?;
    data.validate(spec)?;
    if options.n_starts == 0 && options.start.is_none() {
        return Err(Error::Config("at least one start is required".into()));
    }
    let index = DataIndex::new(data);

    let mut runs: Vec<Run> = match &options.start {
        Some(start) => {
            start.validate(spec)?;
            vec![Run::start(&index, start.clone())]
        }
        None => (0..options.n_starts)
            .map(|s| {
                let mut rng = start_rng(options.seed, s);
                Run::start(&index, random_start(spec, &mut rng))
            })
            .collect(),
    };
    let n_starts_used = runs.len();

    let burn_in = options.burn_in.min(options.max_iterations);
    for run in runs.iter_mut() {
        run.advance(&index, burn_in, options.tolerance);
    }
    // stable sort keeps the lower start index on ties
    runs.sort_by(|a, b| b.loglik.total_cmp(&a.loglik));
    runs.truncate(options.n_refine.max(1));
    for run in runs.iter_mut() {
        run.advance(&index, options.max_iterations, options.tolerance);
    }
    let best_idx = runs
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| if r.loglik > runs[best].loglik { i } else { best });
    let best = runs.swap_remove(best_idx);

    let n_free = count_free_parameters(spec);
    let (aic, bic) = information_criteria(best.loglik, n_free, data.n_individuals());
    let entropy = relative_entropy(&best.posteriors.marginal_rows(), spec.level1_classes);
    let (modal1, modal2) = classify(&best.posteriors);

    let mut diagnostics = best.diagnostics;
    let (se, covariance) = if options.compute_se {
        let errors = ScoreEvaluator::from_index(index).standard_errors(&best.params);
        diagnostics.hessian_asymmetry = errors.asymmetry;
        (errors.se, errors.covariance)
    } else {
        (vec![None; n_free], None)
    };

    Ok(FitResult {
        loglik: best.loglik,
        params: best.params,
        se,
        covariance,
        posteriors: best.posteriors,
        converged: best.converged,
        iterations: best.iterations,
        n_starts_used,
        modal1,
        modal2,
        fit_stats: FitStats {
            n_free,
            loglik: best.loglik,
            aic,
            bic,
            entropy,
        },
        diagnostics,
        trace: if options.keep_trace { best.trace } else { Vec::new() },
        origin: None,
    })
}
