//! Alternating-minimization refinement: closed-form per-component least
//! squares over the observed entries, normalization, and stopping.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rtpm::clip_to_incoherent;
use crate::sampling::{restrict, SamplePlan};
use crate::tensor::{align_factors, norm2, rmse, FactorModel, SparseSymmetricTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    /// Each inner update consumes the next disjoint part of the plan.
    Split,
    /// Every inner update uses all of the observed entries.
    Reuse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateOrder {
    /// All components solve against the iteration-start snapshot and are
    /// committed together.
    Batch,
    /// Each component is committed as soon as it is solved.
    GaussSeidel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AltMinConfig {
    pub outer_iters: usize,
    pub rank: usize,
    /// Stop once the observed-entry fit error drops to this value.
    pub epsilon: f64,
    pub sample_mode: SampleMode,
    pub min_denominator: f64,
    pub seed: u64,
    pub update_order: UpdateOrder,
    /// Re-clip every iterate to this incoherence cap.
    pub reclip_mu: Option<f64>,
}

impl AltMinConfig {
    pub fn new(rank: usize, outer_iters: usize) -> Self {
        AltMinConfig {
            outer_iters,
            rank,
            epsilon: 1e-9,
            sample_mode: SampleMode::Reuse,
            min_denominator: 1e-14,
            seed: 0,
            update_order: UpdateOrder::Batch,
            reclip_mu: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 {
            return Err(Error::Config("outer_iters must be >= 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon = {}", self.epsilon)));
        }
        if !(self.min_denominator >= 0.0) {
            return Err(Error::Config(format!("min_denominator = {}", self.min_denominator)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub fit_error: f64,
    pub rmse: Option<f64>,
    pub d_infinity: Option<f64>,
    pub seconds: f64,
}

/// One row per outer iteration; row 0 describes the initial model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn final_rmse(&self) -> Option<f64> {
        self.last().and_then(|r| r.rmse)
    }

    pub fn final_fit_error(&self) -> Option<f64> {
        self.last().map(|r| r.fit_error)
    }
}

/// `||P_Omega(T - T_hat)||_F / ||P_Omega(T)||_F` over the symmetry closure.
pub fn fit_error(omega: &SparseSymmetricTensor, model: &FactorModel) -> Result<f64> {
    if omega.n() != model.n() {
        return Err(Error::Shape(format!("tensor n = {} vs model n = {}", omega.n(), model.n())));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for e in omega.entries() {
        let [a, b, c] = e.idx;
        let w = 6.0 * e.mult;
        let res = e.value - model.eval_unchecked(a, b, c);
        num += w * res * res;
        den += w * e.value * e.value;
    }
    if den == 0.0 {
        return Err(Error::UndefinedScale("observed entries have zero norm"));
    }
    Ok((num / den).sqrt())
}

/// Unnormalized minimizer of
/// `sum_{(i,j,k) observed} (R_ijk - v_i u_q(j) u_q(k))^2` over `v`, where
/// `R = T - sum_{l != q} sigma_l u_l^3`:
///
/// `v_i = sum_jk u_q(j) u_q(k) R_ijk / sum_jk u_q(j)^2 u_q(k)^2`.
///
/// Coordinates whose denominator is below `min_denominator` are set to 0.
/// Returns `(v, |v|)`.
pub fn inner_update(
    omega_part: &SparseSymmetricTensor,
    model: &FactorModel,
    q: usize,
    min_denominator: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = model.n();
    if q >= model.rank() {
        return Err(Error::Shape(format!("component {q} of rank {}", model.rank())));
    }
    if omega_part.n() != n {
        return Err(Error::Shape(format!("tensor n = {} vs model n = {n}", omega_part.n())));
    }
    let u = model.vector(q);
    let others: Vec<(f64, &[f64])> = model
        .sigmas()
        .iter()
        .zip(model.vectors())
        .enumerate()
        .filter(|(l, _)| *l != q)
        .map(|(_, (s, v))| (*s, v.as_slice()))
        .collect();

    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for e in omega_part.entries() {
        let [a, b, c] = e.idx;
        let residual = e.value
            - others
                .iter()
                .map(|(s, v)| s * v[a] * v[b] * v[c])
                .sum::<f64>();
        let w = 2.0 * e.mult;
        let (ua, ub, uc) = (u[a], u[b], u[c]);
        let (bc, ac, ab) = (ub * uc, ua * uc, ua * ub);
        num[a] += w * residual * bc;
        den[a] += w * bc * bc;
        num[b] += w * residual * ac;
        den[b] += w * ac * ac;
        num[c] += w * residual * ab;
        den[c] += w * ab * ab;
    }
    let v: Vec<f64> = num
        .iter()
        .zip(&den)
        .map(|(&nu, &de)| if de > 0.0 && de >= min_denominator { nu / de } else { 0.0 })
        .collect();
    let nrm = norm2(&v);
    if nrm == 0.0 || !nrm.is_finite() {
        return Err(Error::DegenerateUpdate(q));
    }
    Ok((v, nrm))
}

struct Measure<'a> {
    omega: &'a SparseSymmetricTensor,
    truth: Option<&'a FactorModel>,
    start: Instant,
}

impl Measure<'_> {
    fn row(&self, iter: usize, model: &FactorModel) -> Result<TraceRow> {
        let fit = fit_error(self.omega, model)?;
        let (rmse, d_inf) = match self.truth {
            Some(t) => (
                Some(rmse(model, t)?),
                align_factors(model, t).ok().map(|rep| rep.d_infinity),
            ),
            None => (None, None),
        };
        Ok(TraceRow {
            iter,
            fit_error: fit,
            rmse,
            d_infinity: d_inf,
            seconds: self.start.elapsed().as_secs_f64(),
        })
    }
}

/// The refinement loop. For `t = 1..=tau` and `q = 0..r`, component `q` is
/// re-solved with [`inner_update`] on the next plan part (split mode, parts
/// consumed in `(t, q)` order) or on all of Omega (reuse mode), then set to
/// `sigma_q = |v|`, `u_q = v / |v|`. Stops early once the fit error reaches
/// `config.epsilon`.
pub fn outer_loop(
    plan: &SamplePlan,
    init: &FactorModel,
    config: &AltMinConfig,
    truth: Option<&FactorModel>,
) -> Result<(FactorModel, ConvergenceTrace)> {
    config.validate()?;
    let omega = &plan.full_omega;
    if init.rank() != config.rank {
        return Err(Error::Shape(format!(
            "init has rank {} but config asks for {}",
            init.rank(),
            config.rank
        )));
    }
    if init.n() != omega.n() {
        return Err(Error::Shape(format!("init n = {} vs tensor n = {}", init.n(), omega.n())));
    }
    let r = config.rank;
    let measure = Measure {
        omega,
        truth,
        start: Instant::now(),
    };
    let mut model = init.clone();
    let mut trace = ConvergenceTrace::default();
    trace.rows.push(measure.row(0, &model)?);
    if trace.rows[0].fit_error <= config.epsilon {
        return Ok((model, trace));
    }

    let mut next_part = 0usize;
    for t in 1..=config.outer_iters {
        let parts: Vec<SparseSymmetricTensor> = match config.sample_mode {
            SampleMode::Reuse => Vec::new(),
            SampleMode::Split => (0..r)
                .map(|q| {
                    let idx = next_part + q;
                    let part = plan.partitions.get(idx).ok_or_else(|| {
                        Error::Config(format!(
                            "split mode needs part {} but the plan has {} (r * tau = {})",
                            idx + 1,
                            plan.partitions.len(),
                            r * config.outer_iters
                        ))
                    })?;
                    restrict(omega, part)
                })
                .collect::<Result<_>>()?,
        };
        next_part += r;
        let data = |q: usize| -> &SparseSymmetricTensor {
            match config.sample_mode {
                SampleMode::Reuse => omega,
                SampleMode::Split => &parts[q],
            }
        };

        let mut sigmas = model.sigmas().to_vec();
        let mut vectors = model.vectors().to_vec();
        match config.update_order {
            UpdateOrder::Batch => {
                let snapshot = &model;
                let updates: Vec<(Vec<f64>, f64)> = (0..r)
                    .into_par_iter()
                    .map(|q| inner_update(data(q), snapshot, q, config.min_denominator))
                    .collect::<Result<_>>()?;
                for (q, (v, nrm)) in updates.into_iter().enumerate() {
                    sigmas[q] = nrm;
                    vectors[q] = v.into_iter().map(|x| x / nrm).collect();
                }
            }
            UpdateOrder::GaussSeidel => {
                for q in 0..r {
                    let current = FactorModel::new(model.n(), sigmas.clone(), vectors.clone())?;
                    let (v, nrm) = inner_update(data(q), &current, q, config.min_denominator)?;
                    sigmas[q] = nrm;
                    vectors[q] = v.into_iter().map(|x| x / nrm).collect();
                }
            }
        }
        model = FactorModel::new(model.n(), sigmas, vectors)?;
        if let Some(mu) = config.reclip_mu {
            model = clip_to_incoherent(&model, mu)?;
        }
        let row = measure.row(t, &model)?;
        let done = row.fit_error <= config.epsilon;
        trace.rows.push(row);
        if done {
            break;
        }
    }
    Ok((model, trace))
}
