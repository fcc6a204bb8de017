use serde::Serialize;

use super::factor::{dot, FactorModel};
use crate::error::{Error, Result};

/// Component matching between an estimate and the ground truth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlignmentReport {
    /// `permutation[est] = true` component index.
    pub permutation: Vec<usize>,
    /// Sign applied to `(sigma, u)` of each estimated component.
    pub signs: Vec<i8>,
    pub per_component_vector_error: Vec<f64>,
    pub per_component_sigma_error: Vec<f64>,
    pub d_infinity: f64,
}

/// Greedy matching on `|<u_est, u_true>|`: repeatedly takes the largest
/// remaining pair. Returns `(est, true)` pairs.
pub(crate) fn greedy_pairs(a: &FactorModel, b: &FactorModel) -> Vec<(usize, usize)> {
    let mut scores: Vec<(f64, usize, usize)> = Vec::with_capacity(a.rank() * b.rank());
    for (i, ua) in a.vectors().iter().enumerate() {
        for (j, ub) in b.vectors().iter().enumerate() {
            scores.push((dot(ua, ub).abs(), i, j));
        }
    }
    // Stable on ties: lower indices first.
    scores.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    let mut pairs = Vec::with_capacity(a.rank().min(b.rank()));
    for (_, i, j) in scores {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Matches estimated components to true ones and reports
/// `d_inf = max_l (|u_l - u*_l| + |sigma_l - sigma*_l| / |sigma*_l|)`.
///
/// A sign flip negates both `u` and `sigma`, which leaves the represented
/// tensor unchanged; estimates that point the wrong way with the wrong
/// sigma sign are therefore penalized through the sigma error.
pub fn align_factors(estimate: &FactorModel, truth: &FactorModel) -> Result<AlignmentReport> {
    if estimate.n() != truth.n() || estimate.rank() != truth.rank() {
        return Err(Error::Shape(format!(
            "cannot align (n = {}, r = {}) with (n = {}, r = {})",
            estimate.n(),
            estimate.rank(),
            truth.n(),
            truth.rank()
        )));
    }
    let r = truth.rank();
    let mut permutation = vec![0; r];
    let mut signs = vec![1i8; r];
    let mut vec_err = vec![0.0; r];
    let mut sig_err = vec![0.0; r];
    for (e, t) in greedy_pairs(estimate, truth) {
        let ue = estimate.vector(e);
        let ut = truth.vector(t);
        let s = if dot(ue, ut) < 0.0 { -1.0 } else { 1.0 };
        permutation[e] = t;
        signs[e] = s as i8;
        vec_err[e] = ue
            .iter()
            .zip(ut)
            .map(|(a, b)| (s * a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let st = truth.sigmas()[t];
        sig_err[e] = (s * estimate.sigmas()[e] - st).abs() / st.abs();
    }
    let d_infinity = vec_err
        .iter()
        .zip(&sig_err)
        .map(|(a, b)| a + b)
        .fold(0.0f64, f64::max);
    Ok(AlignmentReport {
        permutation,
        signs,
        per_component_vector_error: vec_err,
        per_component_sigma_error: sig_err,
        d_infinity,
    })
}
