//! Seeded experiment drivers behind the command-line tool: recovery-rate
//! phase sweeps, single-run convergence traces, spectral scaling studies and
//! MAX-3LIN trials.
//!
//! Every randomized quantity is drawn from a seed derived from the master
//! seed and the job's grid position, so results do not depend on thread
//! count or completion order.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::altmin::{ConvergenceTrace, SampleMode, UpdateOrder};
use crate::error::{Error, Result};
use crate::max3lin::{generate_planted, solve_as_completion, Lin3SolveConfig};
use crate::pipeline::{complete, complete_with_init, plan_for, CompletionConfig};
use crate::sampling::sample_bernoulli;
use crate::seed::derive_seed;
use crate::spectral::{scaling_study, ScalingRow};
use crate::tensor::{generate_correlated_model, rmse, FactorModel};

/// `# {json}` line recording the effective configuration of a run.
pub fn config_header<T: Serialize>(config: &T) -> Result<String> {
    Ok(format!("# {}", serde_json::to_string(config)?))
}

/// `alpha sqrt(r) ln n / ((1 - rho) n^{3/2})`, before clamping.
pub fn phase_probability(n: usize, r: usize, rho: f64, alpha: f64) -> f64 {
    let nf = n as f64;
    alpha * (r as f64).sqrt() * nf.ln() / ((1.0 - rho) * nf.powf(1.5))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSweepConfig {
    pub n_list: Vec<usize>,
    pub r_list: Vec<usize>,
    pub rho_list: Vec<f64>,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_steps: usize,
    pub trials: usize,
    /// A trial counts as recovered when its final rmse is below this.
    pub threshold: f64,
    pub seed: u64,
    pub sample_mode: SampleMode,
    pub update_order: UpdateOrder,
    pub outer_iters: usize,
    /// Singular values of every truth; `None` means all ones.
    pub sigmas: Option<Vec<f64>>,
}

impl Default for PhaseSweepConfig {
    fn default() -> Self {
        PhaseSweepConfig {
            n_list: vec![30, 50, 70],
            r_list: vec![3],
            rho_list: vec![0.0],
            alpha_min: 1.0,
            alpha_max: 10.0,
            alpha_steps: 10,
            trials: 40,
            threshold: 1e-7,
            seed: 0,
            sample_mode: SampleMode::Reuse,
            update_order: UpdateOrder::GaussSeidel,
            outer_iters: 300,
            sigmas: None,
        }
    }
}

impl PhaseSweepConfig {
    /// `alpha_steps` evenly spaced values from `alpha_min` to `alpha_max`.
    pub fn alpha_grid(&self) -> Vec<f64> {
        match self.alpha_steps {
            0 => Vec::new(),
            1 => vec![self.alpha_min],
            s => (0..s)
                .map(|i| self.alpha_min + (self.alpha_max - self.alpha_min) * i as f64 / (s - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.r_list.is_empty() || self.rho_list.is_empty() || self.alpha_steps == 0 {
            return Err(Error::Config("phase sweep grids must be nonempty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("phase sweep needs trials >= 1".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::Config(format!("recovery threshold {}", self.threshold)));
        }
        if let Some(&rho) = self.rho_list.iter().find(|&&rho| !(0.0..1.0).contains(&rho)) {
            return Err(Error::Config(format!("rho {rho} outside [0, 1)")));
        }
        if let Some(s) = &self.sigmas {
            if let Some(&r) = self.r_list.iter().find(|&&r| r != s.len()) {
                return Err(Error::Config(format!("{} sigmas given for rank {r}", s.len())));
            }
        }
        Ok(())
    }
}

/// Settings shared by every completion trial of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSettings {
    pub outer_iters: usize,
    pub sample_mode: SampleMode,
    pub update_order: UpdateOrder,
    pub fit_tolerance: f64,
    /// Clip the initial estimate at the truth's incoherence.
    pub clip: bool,
}

impl Default for TrialSettings {
    fn default() -> Self {
        TrialSettings {
            outer_iters: 50,
            sample_mode: SampleMode::Reuse,
            update_order: UpdateOrder::Batch,
            fit_tolerance: 1e-9,
            clip: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub p: f64,
    pub final_rmse: Option<f64>,
    pub error: Option<String>,
    pub trace: Option<ConvergenceTrace>,
}

impl TrialOutcome {
    pub fn recovered(&self, threshold: f64) -> bool {
        self.final_rmse.is_some_and(|e| e < threshold)
    }
}

/// One completion trial: draw a truth, sample it, complete it, and measure.
/// Seeds `derive_seed(seed, 0..3)` drive the truth, the sample and the
/// solver. Solver errors become a failed outcome rather than an error.
pub fn run_trial(
    n: usize,
    r: usize,
    rho: f64,
    p: f64,
    sigmas: &[f64],
    settings: &TrialSettings,
    seed: u64,
) -> Result<TrialOutcome> {
    let truth = generate_correlated_model(n, r, rho, sigmas, derive_seed(seed, 0))?;
    let omega = sample_bernoulli(&truth, p, derive_seed(seed, 1))?;
    let cfg = trial_config(&truth, p, settings, derive_seed(seed, 2));
    Ok(match complete(&omega, &cfg, Some(&truth)) {
        Ok(res) => TrialOutcome {
            p,
            final_rmse: res.trace.final_rmse(),
            error: None,
            trace: Some(res.trace),
        },
        Err(e) => TrialOutcome { p, final_rmse: None, error: Some(e.to_string()), trace: None },
    })
}

fn trial_config(truth: &FactorModel, p: f64, settings: &TrialSettings, seed: u64) -> CompletionConfig {
    let mut cfg = CompletionConfig::new(truth.rank(), p, seed);
    cfg.outer_iters = settings.outer_iters;
    cfg.sample_mode = settings.sample_mode;
    cfg.update_order = settings.update_order;
    cfg.fit_tolerance = settings.fit_tolerance;
    cfg.mu = settings.clip.then(|| truth.incoherence());
    cfg
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub n: usize,
    pub r: usize,
    pub rho: f64,
    pub alpha: f64,
    pub p: f64,
    /// The formula gave `p > 1` and it was clamped.
    pub clamped: bool,
    pub recovery_rate: f64,
    pub trials: usize,
    /// Trials that ended in a solver error (counted as not recovered).
    pub errors: usize,
}

pub fn phase_sweep(config: &PhaseSweepConfig) -> Result<Vec<PhaseRow>> {
    config.validate()?;
    let alphas = config.alpha_grid();
    let settings = TrialSettings {
        outer_iters: config.outer_iters,
        sample_mode: config.sample_mode,
        update_order: config.update_order,
        ..TrialSettings::default()
    };
    let mut points = Vec::new();
    for (ni, &n) in config.n_list.iter().enumerate() {
        for (ri, &r) in config.r_list.iter().enumerate() {
            for (hi, &rho) in config.rho_list.iter().enumerate() {
                for (ai, &alpha) in alphas.iter().enumerate() {
                    let key = [ni, ri, hi, ai]
                        .iter()
                        .fold(config.seed, |s, &i| derive_seed(s, i as u64));
                    points.push((n, r, rho, alpha, key));
                }
            }
        }
    }
    let jobs: Vec<(usize, usize)> =
        (0..points.len()).flat_map(|g| (0..config.trials).map(move |t| (g, t))).collect();
    let outcomes: Vec<(usize, bool, bool)> = jobs
        .par_iter()
        .map(|&(g, t)| {
            let (n, r, rho, alpha, key) = points[g];
            let p = phase_probability(n, r, rho, alpha).clamp(0.0, 1.0);
            let sigmas = config.sigmas.clone().unwrap_or_else(|| vec![1.0; r]);
            let out = run_trial(n, r, rho, p, &sigmas, &settings, derive_seed(key, t as u64))?;
            Ok((g, out.recovered(config.threshold), out.error.is_some()))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<PhaseRow> = points
        .iter()
        .map(|&(n, r, rho, alpha, _)| {
            let raw = phase_probability(n, r, rho, alpha);
            PhaseRow {
                n,
                r,
                rho,
                alpha,
                p: raw.clamp(0.0, 1.0),
                clamped: raw > 1.0,
                recovery_rate: 0.0,
                trials: config.trials,
                errors: 0,
            }
        })
        .collect();
    for (g, ok, err) in outcomes {
        rows[g].recovery_rate += ok as u8 as f64;
        rows[g].errors += err as usize;
    }
    for row in &mut rows {
        row.recovery_rate /= row.trials as f64;
    }
    rows.sort_by(|a, b| {
        (a.n, a.r)
            .cmp(&(b.n, b.r))
            .then(a.rho.total_cmp(&b.rho))
            .then(a.alpha.total_cmp(&b.alpha))
    });
    Ok(rows)
}

/// Writes CSV records, with `header` (if any) as a leading comment line.
pub fn write_csv<W: Write, T: Serialize>(mut w: W, header: Option<&str>, rows: &[T]) -> Result<()> {
    if let Some(h) = header {
        writeln!(w, "{h}")?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub n: usize,
    pub r: usize,
    pub alpha: f64,
    pub rho: f64,
    pub seed: u64,
    pub threshold: f64,
    pub settings: TrialSettings,
    /// Start the refinement from the truth instead of the power method.
    pub init_from_truth: bool,
}

impl ConvergenceConfig {
    pub fn new(n: usize, r: usize, alpha: f64, seed: u64) -> Self {
        ConvergenceConfig {
            n,
            r,
            alpha,
            rho: 0.0,
            seed,
            threshold: 1e-7,
            settings: TrialSettings {
                outer_iters: 100,
                fit_tolerance: 1e-13,
                ..TrialSettings::default()
            },
            init_from_truth: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub p: f64,
    pub recovered: bool,
    pub trace: ConvergenceTrace,
}

/// A single traced run with the truth retained.
pub fn convergence_run(config: &ConvergenceConfig) -> Result<ConvergenceRun> {
    let ConvergenceConfig { n, r, alpha, rho, seed, .. } = *config;
    let p = phase_probability(n, r, rho, alpha).clamp(0.0, 1.0);
    let truth = generate_correlated_model(n, r, rho, &vec![1.0; r], derive_seed(seed, 0))?;
    let omega = sample_bernoulli(&truth, p, derive_seed(seed, 1))?;
    let cfg = trial_config(&truth, p, &config.settings, derive_seed(seed, 2));
    let res = if config.init_from_truth {
        let plan = plan_for(&omega, &cfg)?;
        complete_with_init(&plan, Some(truth.clone()), &cfg, Some(&truth))?
    } else {
        complete(&omega, &cfg, Some(&truth))?
    };
    let final_rmse = rmse(&res.model, &truth)?;
    Ok(ConvergenceRun {
        p,
        recovered: final_rmse < config.threshold,
        trace: res.trace,
    })
}

/// Successive ratios `rmse_{t+1} / rmse_t` over steps that start with
/// `lo < rmse_t < hi`.
pub fn rmse_ratios(trace: &ConvergenceTrace, hi: f64, lo: f64) -> Vec<f64> {
    trace
        .rows
        .windows(2)
        .filter_map(|w| match (w[0].rmse, w[1].rmse) {
            (Some(a), Some(b)) if a < hi && a > lo => Some(b / a),
            _ => None,
        })
        .collect()
}

/// Average per-iteration drop of `log10(rmse)` over steps that start with
/// `lo < rmse_t < hi`.
pub fn mean_log10_decrease(trace: &ConvergenceTrace, hi: f64, lo: f64) -> Option<f64> {
    let drops: Vec<f64> = rmse_ratios(trace, hi, lo).iter().map(|q| -q.log10()).collect();
    (!drops.is_empty()).then(|| drops.iter().sum::<f64>() / drops.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSweepConfig {
    pub n: usize,
    pub r: usize,
    pub alphas: Vec<f64>,
    pub seeds: usize,
    pub restarts: usize,
    pub iters: usize,
    pub seed: u64,
}

impl SpectralSweepConfig {
    pub fn new(n: usize, alphas: Vec<f64>, seed: u64) -> Self {
        SpectralSweepConfig { n, r: 1, alphas, seeds: 10, restarts: 20, iters: 30, seed }
    }
}

pub fn spectral_sweep(config: &SpectralSweepConfig) -> Result<Vec<ScalingRow>> {
    if config.alphas.is_empty() || config.seeds == 0 {
        return Err(Error::Config("spectral sweep needs alphas and seeds".into()));
    }
    scaling_study(
        config.n,
        config.r,
        &config.alphas,
        config.seeds,
        config.restarts,
        config.iters,
        config.seed,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lin3TrialRow {
    pub seed: u64,
    pub n: usize,
    pub p: f64,
    pub equations: usize,
    pub satisfied: usize,
    pub success: bool,
    pub failure: Option<String>,
}

/// `trials` planted instances at `(n, p)`, each solved as a completion
/// problem.
pub fn max3lin_trials(
    n: usize,
    p: f64,
    trials: usize,
    master_seed: u64,
    outer_iters: usize,
) -> Result<Vec<Lin3TrialRow>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(master_seed, t);
            let inst = generate_planted(n, p, derive_seed(seed, 0))?;
            let total = inst.len();
            if total == 0 {
                return Ok(Lin3TrialRow {
                    seed,
                    n,
                    p,
                    equations: 0,
                    satisfied: 0,
                    success: true,
                    failure: None,
                });
            }
            let mut cfg = Lin3SolveConfig::new(derive_seed(seed, 1));
            cfg.outer_iters = outer_iters;
            let sol = solve_as_completion(&inst, &cfg)?;
            Ok(Lin3TrialRow {
                seed,
                n,
                p,
                equations: total,
                satisfied: sol.satisfied,
                success: sol.success,
                failure: sol.failure,
            })
        })
        .collect()
}
