//! Frobenius distances between factor models without dense materialization.

use super::align::greedy_pairs;
use super::factor::{dot, FactorModel};
use crate::error::{Error, Result};

/// Rank-one (not necessarily symmetric) term `c * x (x) y (x) z`.
struct Term<'a> {
    c: f64,
    x: &'a [f64],
    y: &'a [f64],
    z: &'a [f64],
}

/// `||T_hat - T||_F` for two factor models.
///
/// Paired components are expanded with the telescoping identity
/// `v^3 - u^3 = (v-u) v v + u (v-u) v + u u (v-u)`, so every rank-one term is
/// as small as the component error and the Gram sum keeps full relative
/// precision down to round-off (the plain `|T|^2 + |T_hat|^2 - 2<T, T_hat>`
/// route bottoms out near 1e-8 relative error).
pub fn frobenius_distance(estimate: &FactorModel, truth: &FactorModel) -> Result<f64> {
    if estimate.n() != truth.n() {
        return Err(Error::Shape(format!(
            "dimension {} vs {}",
            estimate.n(),
            truth.n()
        )));
    }
    let pairs = greedy_pairs(estimate, truth);
    let mut paired_est = vec![false; estimate.rank()];
    let mut paired_true = vec![false; truth.rank()];

    // Owned storage for the oriented estimate vectors and differences.
    let mut oriented: Vec<(f64, Vec<f64>, Vec<f64>, usize)> = Vec::with_capacity(pairs.len());
    for &(e, t) in &pairs {
        paired_est[e] = true;
        paired_true[t] = true;
        let ue = estimate.vector(e);
        let ut = truth.vector(t);
        let s = if dot(ue, ut) < 0.0 { -1.0 } else { 1.0 };
        let v: Vec<f64> = ue.iter().map(|x| s * x).collect();
        let d: Vec<f64> = v.iter().zip(ut).map(|(a, b)| a - b).collect();
        oriented.push((s * estimate.sigmas()[e], v, d, t));
    }

    let mut terms: Vec<Term<'_>> = Vec::with_capacity(4 * pairs.len() + 2);
    for (c, v, d, t) in &oriented {
        let st = truth.sigmas()[*t];
        let ut = truth.vector(*t);
        terms.push(Term { c: c - st, x: v, y: v, z: v });
        terms.push(Term { c: st, x: d, y: v, z: v });
        terms.push(Term { c: st, x: ut, y: d, z: v });
        terms.push(Term { c: st, x: ut, y: ut, z: d });
    }
    for (e, _) in paired_est.iter().enumerate().filter(|(_, p)| !**p) {
        let u = estimate.vector(e);
        terms.push(Term { c: estimate.sigmas()[e], x: u, y: u, z: u });
    }
    for (t, _) in paired_true.iter().enumerate().filter(|(_, p)| !**p) {
        let u = truth.vector(t);
        terms.push(Term { c: -truth.sigmas()[t], x: u, y: u, z: u });
    }

    let mut acc = 0.0;
    for (a, ta) in terms.iter().enumerate() {
        if ta.c == 0.0 {
            continue;
        }
        acc += ta.c * ta.c * dot(ta.x, ta.x) * dot(ta.y, ta.y) * dot(ta.z, ta.z);
        for tb in &terms[a + 1..] {
            if tb.c == 0.0 {
                continue;
            }
            acc += 2.0 * ta.c * tb.c * dot(ta.x, tb.x) * dot(ta.y, tb.y) * dot(ta.z, tb.z);
        }
    }
    Ok(acc.max(0.0).sqrt())
}

/// Normalized error `||T - T_hat||_F / ||T||_F`.
pub fn rmse(estimate: &FactorModel, truth: &FactorModel) -> Result<f64> {
    let scale = truth.frobenius_norm();
    if scale == 0.0 {
        return Err(Error::UndefinedScale("ground truth has zero Frobenius norm"));
    }
    Ok(frobenius_distance(estimate, truth)? / scale)
}

/// Checks `||T - T_hat||_F <= 4 sqrt(r) ||T||_F eps` for an estimate whose
/// components (index-aligned with `truth`) satisfy `|u_q - u*_q| <= eps` and
/// `|sigma_q - sigma*_q| <= |sigma*_q| eps`. Violated preconditions are
/// reported as an error, distinct from a `false` bound outcome.
pub fn frobenius_error_bound_check(
    truth: &FactorModel,
    estimate: &FactorModel,
    eps_tilde: f64,
) -> Result<bool> {
    const SLACK: f64 = 1e-12;
    if truth.n() != estimate.n() || truth.rank() != estimate.rank() {
        return Err(Error::Shape("bound check needs equal n and r".into()));
    }
    if !(eps_tilde >= 0.0) {
        return Err(Error::Precondition(format!("eps_tilde = {eps_tilde}")));
    }
    if !truth.is_orthogonal() && truth.max_abs_inner_product() > 1e-10 {
        return Err(Error::Precondition("ground truth is not orthogonal".into()));
    }
    for q in 0..truth.rank() {
        let du: f64 = estimate
            .vector(q)
            .iter()
            .zip(truth.vector(q))
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if du > eps_tilde + SLACK {
            return Err(Error::Precondition(format!(
                "component {q}: |u - u*| = {du:e} > {eps_tilde:e}"
            )));
        }
        let (s, st) = (estimate.sigmas()[q], truth.sigmas()[q]);
        if (s - st).abs() > st.abs() * eps_tilde + SLACK {
            return Err(Error::Precondition(format!(
                "component {q}: |sigma - sigma*| = {:e} > {:e}",
                (s - st).abs(),
                st.abs() * eps_tilde
            )));
        }
    }
    let dist = frobenius_distance(estimate, truth)?;
    let bound = 4.0 * (truth.rank() as f64).sqrt() * truth.frobenius_norm() * eps_tilde;
    Ok(dist <= bound)
}
