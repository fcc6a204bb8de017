//! End-to-end completion: power-method initialization, clipping, refinement.

use serde::{Deserialize, Serialize};

use crate::altmin::{outer_loop, AltMinConfig, ConvergenceTrace, SampleMode, UpdateOrder};
use crate::error::{Error, Result};
use crate::rtpm::{clip_to_incoherent, rtpm_extract, RtpmConfig};
use crate::sampling::{split_with_p, SamplePlan};
use crate::seed::derive_seed;
use crate::tensor::{FactorModel, SparseSymmetricTensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionConfig {
    pub rank: usize,
    pub outer_iters: usize,
    /// Sampling probability used for the `1/p` rescaling.
    pub p: f64,
    /// Incoherence cap for clipping the initial estimate; `None` skips it.
    pub mu: Option<f64>,
    pub seed: u64,
    /// Fit-error stopping threshold.
    pub fit_tolerance: f64,
    pub sample_mode: SampleMode,
    pub update_order: UpdateOrder,
    pub reclip: bool,
    pub rtpm_trials: Option<usize>,
    pub rtpm_iters: Option<usize>,
    pub restart_budget_multiplier: usize,
}

impl CompletionConfig {
    pub fn new(rank: usize, p: f64, seed: u64) -> Self {
        CompletionConfig {
            rank,
            outer_iters: 50,
            p,
            mu: None,
            seed,
            fit_tolerance: 1e-9,
            sample_mode: SampleMode::Reuse,
            update_order: UpdateOrder::Batch,
            reclip: false,
            rtpm_trials: None,
            rtpm_iters: None,
            restart_budget_multiplier: 4,
        }
    }

    pub fn rtpm_config(&self, n: usize) -> RtpmConfig {
        let mut cfg = RtpmConfig::with_defaults(self.rank, n, self.p, derive_seed(self.seed, 1));
        if let Some(l) = self.rtpm_trials {
            cfg.trials_per_component = l;
        }
        if let Some(it) = self.rtpm_iters {
            cfg.iters_per_trial = it;
        }
        cfg.restart_budget_multiplier = self.restart_budget_multiplier;
        cfg
    }

    pub fn altmin_config(&self) -> AltMinConfig {
        AltMinConfig {
            outer_iters: self.outer_iters,
            rank: self.rank,
            epsilon: self.fit_tolerance,
            sample_mode: self.sample_mode,
            min_denominator: 1e-14,
            seed: derive_seed(self.seed, 2),
            update_order: self.update_order,
            reclip_mu: if self.reclip { self.mu } else { None },
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompletionResult {
    /// Initial estimate after clipping.
    pub init: FactorModel,
    pub model: FactorModel,
    pub trace: ConvergenceTrace,
}

/// Builds the sample plan: `r * tau` balanced parts in split mode, a single
/// part otherwise.
pub fn plan_for(omega: &SparseSymmetricTensor, config: &CompletionConfig) -> Result<SamplePlan> {
    match config.sample_mode {
        SampleMode::Reuse => Ok(SamplePlan::unsplit(omega.clone(), config.p)),
        SampleMode::Split => split_with_p(
            omega,
            config.rank * config.outer_iters,
            derive_seed(config.seed, 3),
            config.p,
        ),
    }
}

/// Runs initialization, clipping and refinement on an observed tensor.
pub fn complete(
    omega: &SparseSymmetricTensor,
    config: &CompletionConfig,
    truth: Option<&FactorModel>,
) -> Result<CompletionResult> {
    if config.rank > omega.n() {
        return Err(Error::Rank { rank: config.rank, n: omega.n() });
    }
    let plan = plan_for(omega, config)?;
    complete_with_init(&plan, None, config, truth)
}

/// Like [`complete`] but with an explicit plan and, optionally, a fixed
/// initial model that bypasses the power method.
pub fn complete_with_init(
    plan: &SamplePlan,
    init: Option<FactorModel>,
    config: &CompletionConfig,
    truth: Option<&FactorModel>,
) -> Result<CompletionResult> {
    let omega = &plan.full_omega;
    let init = match init {
        Some(m) => m,
        None => {
            let raw = rtpm_extract(omega, &config.rtpm_config(omega.n()))?;
            match config.mu {
                Some(mu) => clip_to_incoherent(&raw, mu)?,
                None => raw,
            }
        }
    };
    let (model, trace) = outer_loop(plan, &init, &config.altmin_config(), truth)?;
    Ok(CompletionResult { init, model, trace })
}
