//! Initialization: robust tensor power method on the rescaled observed
//! tensor with functional deflation, followed by incoherence clipping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::tensor::{
    norm2, random_unit, CombinedTensor, FactorModel, SparseSymmetricTensor, SymmetricOperator,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtpmConfig {
    pub rank: usize,
    /// Non-degenerate random starts per component (L).
    pub trials_per_component: usize,
    /// Power steps per start, and again for polishing the winner (N).
    pub iters_per_trial: usize,
    /// At most `multiplier * L` starts are attempted when starts degenerate.
    pub restart_budget_multiplier: usize,
    pub seed: u64,
    /// Sampling probability `p`; the observed tensor is scaled by `1 / p`.
    pub rescale: f64,
}

/// Smallest default step count; the log-log schedule is tiny for r = 1.
const MIN_DEFAULT_ITERS: usize = 10;

impl RtpmConfig {
    /// Budgets `L = ceil((r ln n)^2)` and
    /// `N = ceil(10 (ln r + ln ln(p n^{3/2})))`, floored at 10 steps.
    pub fn with_defaults(rank: usize, n: usize, p: f64, seed: u64) -> Self {
        let nf = n.max(2) as f64;
        let trials = ((rank as f64) * nf.ln()).powi(2).ceil().max(1.0) as usize;
        let alpha = p * nf.powf(1.5);
        let loglog = alpha.ln().max(1.0).ln();
        let iters = (10.0 * ((rank.max(1) as f64).ln() + loglog)).ceil();
        let iters = (iters.max(0.0) as usize).max(MIN_DEFAULT_ITERS);
        RtpmConfig {
            rank,
            trials_per_component: trials,
            iters_per_trial: iters,
            restart_budget_multiplier: 4,
            seed,
            rescale: p,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.rank == 0
            || self.trials_per_component == 0
            || self.iters_per_trial == 0
            || self.restart_budget_multiplier == 0
        {
            return Err(Error::Config("RTPM counts must all be >= 1".into()));
        }
        if !(self.rescale > 0.0 && self.rescale <= 1.0) {
            return Err(Error::Config(format!(
                "RTPM rescale probability {} not in (0, 1]",
                self.rescale
            )));
        }
        Ok(())
    }
}

fn normalized_step<T: SymmetricOperator>(op: &T, u: &[f64], out: &mut Vec<f64>) -> Result<()> {
    out.resize(u.len(), 0.0);
    op.contract_pair_into(u, out);
    let nrm = norm2(out);
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::DegenerateDirection);
    }
    out.iter_mut().for_each(|x| *x /= nrm);
    Ok(())
}

/// One power step `normalize((1/p) T_Omega[., u, u])`.
pub fn power_step(tensor: &SparseSymmetricTensor, u: &[f64], rescale: f64) -> Result<Vec<f64>> {
    if u.len() != tensor.n() {
        return Err(Error::Shape(format!(
            "vector of length {} for dimension {}",
            u.len(),
            tensor.n()
        )));
    }
    if !(rescale > 0.0) {
        return Err(Error::Domain(format!("rescale probability {rescale}")));
    }
    let empty = FactorModel::from_parts_unchecked(tensor.n(), Vec::new(), Vec::new(), true);
    let op = CombinedTensor {
        sparse: tensor,
        sparse_scale: 1.0 / rescale,
        factors: &empty,
        factor_scale: 0.0,
    };
    let mut out = Vec::new();
    normalized_step(&op, u, &mut out)?;
    Ok(out)
}

/// Runs `iters` power steps from `start`, returning the end point and its
/// Rayleigh value `T[u, u, u]`.
fn run_power<T: SymmetricOperator>(op: &T, start: Vec<f64>, iters: usize) -> Result<(Vec<f64>, f64)> {
    let mut u = start;
    let mut next = Vec::with_capacity(u.len());
    for _ in 0..iters {
        normalized_step(op, &u, &mut next)?;
        std::mem::swap(&mut u, &mut next);
    }
    let lambda = op.cubic_form(&u);
    Ok((u, lambda))
}

/// Extracts `rank` components one at a time. For each, `L` random starts run
/// `N` power steps on `(1/p) T_Omega - sum(found)`; the start with the
/// largest Rayleigh value wins (first index on ties), is polished for `N`
/// more steps and deflated. Components come back sorted by `|sigma|`.
pub fn rtpm_extract(tensor: &SparseSymmetricTensor, config: &RtpmConfig) -> Result<FactorModel> {
    config.validate()?;
    let n = tensor.n();
    let mut found = FactorModel::from_parts_unchecked(n, Vec::new(), Vec::new(), false);
    let budget = config.trials_per_component * config.restart_budget_multiplier;

    for l in 0..config.rank {
        let op = CombinedTensor {
            sparse: tensor,
            sparse_scale: 1.0 / config.rescale,
            factors: &found,
            factor_scale: 1.0,
        };
        let component_seed = derive_seed(config.seed, l as u64);
        let mut winners: Vec<(usize, Vec<f64>, f64)> = Vec::new();
        let mut attempted = 0;
        while winners.len() < config.trials_per_component && attempted < budget {
            let batch = (config.trials_per_component - winners.len()).min(budget - attempted);
            let results: Vec<(usize, Result<(Vec<f64>, f64)>)> = (attempted..attempted + batch)
                .into_par_iter()
                .map(|a| {
                    let mut rng = rng_from_seed(derive_seed(component_seed, a as u64));
                    let start = random_unit(n, &mut rng);
                    (a, run_power(&op, start, config.iters_per_trial))
                })
                .collect();
            attempted += batch;
            for (a, res) in results {
                if let Ok((u, lambda)) = res {
                    if lambda.is_finite() {
                        winners.push((a, u, lambda));
                    }
                }
            }
        }
        let best = winners
            .into_iter()
            .reduce(|best, cand| if cand.2 > best.2 { cand } else { best })
            .ok_or_else(|| {
                Error::InitializationFailed(format!(
                    "all {attempted} power-method starts degenerated for component {l}"
                ))
            })?;
        let (u, lambda) = match run_power(&op, best.1.clone(), config.iters_per_trial) {
            Ok(polished) => polished,
            Err(_) => (best.1, best.2),
        };
        let mut sigmas = found.sigmas().to_vec();
        let mut vectors = found.vectors().to_vec();
        sigmas.push(lambda);
        vectors.push(u);
        found = FactorModel::from_parts_unchecked(n, sigmas, vectors, false);
    }

    let mut order: Vec<usize> = (0..config.rank).collect();
    order.sort_by(|&a, &b| found.sigmas()[b].abs().total_cmp(&found.sigmas()[a].abs()));
    let sorted = found.permuted(&order);
    FactorModel::new(n, sorted.sigmas().to_vec(), sorted.vectors().to_vec())
}

/// Caps every `|u_l(i)|` at `mu / sqrt(n)` (keeping signs) and renormalizes.
pub fn clip_to_incoherent(model: &FactorModel, mu: f64) -> Result<FactorModel> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("incoherence cap mu = {mu}")));
    }
    let n = model.n();
    let cap = mu / (n as f64).sqrt();
    let vectors = model
        .vectors()
        .iter()
        .enumerate()
        .map(|(l, u)| {
            let clipped: Vec<f64> = u.iter().map(|&x| x.clamp(-cap, cap)).collect();
            let nrm = norm2(&clipped);
            if nrm == 0.0 {
                return Err(Error::InvalidModel(format!("component {l} clipped to zero")));
            }
            Ok(clipped.into_iter().map(|x| x / nrm).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    FactorModel::new(n, model.sigmas().to_vec(), vectors)
}
