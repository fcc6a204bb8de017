use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::factor::{dot, FactorModel};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

fn check_sigmas(r: usize, sigmas: &[f64]) -> Result<()> {
    if sigmas.len() != r {
        return Err(Error::Shape(format!("{} sigmas for rank {r}", sigmas.len())));
    }
    Ok(())
}

/// Orthonormal `n x cols` frame from the QR factorization of a Gaussian matrix.
fn gaussian_frame(n: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let g = DMatrix::<f64>::from_fn(n, cols, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    (0..cols)
        .map(|c| {
            let col: Vec<f64> = q.column(c).iter().copied().collect();
            // Re-normalize to pin unit length at the last ulp.
            let nrm = dot(&col, &col).sqrt();
            col.into_iter().map(|x| x / nrm).collect()
        })
        .collect()
}

/// Random orthogonal CP model: `U` is the orthonormalized `n x r` Gaussian
/// matrix, hence uniform on the Stiefel manifold.
pub fn generate_orthogonal_model(
    n: usize,
    r: usize,
    sigmas: &[f64],
    seed: u64,
) -> Result<FactorModel> {
    if r > n {
        return Err(Error::Rank { rank: r, n });
    }
    check_sigmas(r, sigmas)?;
    let vectors = gaussian_frame(n, r, seed);
    FactorModel::new_orthogonal(n, sigmas.to_vec(), vectors)
}

/// Model whose components have `max_{i != j} <u_i, u_j>` within 0.01 of
/// `rho_target`.
///
/// Each component is `(1 - t) q_l + t w` renormalized, where `q_l` is an
/// orthonormal frame and `w` a shared unit direction (orthogonal to the frame
/// when `r < n`, otherwise the frame's mean direction). The blend weight `t`
/// is found by bisection.
pub fn generate_correlated_model(
    n: usize,
    r: usize,
    rho_target: f64,
    sigmas: &[f64],
    seed: u64,
) -> Result<FactorModel> {
    if r > n {
        return Err(Error::Rank { rank: r, n });
    }
    check_sigmas(r, sigmas)?;
    if !(0.0..1.0).contains(&rho_target) {
        return Err(Error::Domain(format!("rho_target = {rho_target} not in [0, 1)")));
    }
    if rho_target == 0.0 || r < 2 {
        return generate_orthogonal_model(n, r, sigmas, seed);
    }
    let (frame, shared) = if r < n {
        let mut f = gaussian_frame(n, r + 1, seed);
        let w = f.pop().expect("frame has r + 1 columns");
        (f, w)
    } else {
        let f = gaussian_frame(n, r, seed);
        let mut w = vec![0.0; n];
        for q in &f {
            w.iter_mut().zip(q).for_each(|(a, b)| *a += b);
        }
        let nrm = dot(&w, &w).sqrt();
        w.iter_mut().for_each(|x| *x /= nrm);
        (f, w)
    };
    let build = |t: f64| -> Result<FactorModel> {
        let vectors = frame
            .iter()
            .map(|q| q.iter().zip(&shared).map(|(a, b)| (1.0 - t) * a + t * b).collect())
            .collect();
        FactorModel::from_directions(n, sigmas.to_vec(), vectors)
    };

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best: Option<(f64, FactorModel)> = None;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        let model = build(mid)?;
        let rho = model.max_inner_product();
        let gap = (rho - rho_target).abs();
        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
            best = Some((gap, model));
        }
        if gap <= 1e-6 {
            break;
        }
        if rho < rho_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    match best {
        Some((gap, model)) if gap <= 0.01 => Ok(model),
        _ => Err(Error::Convergence(format!(
            "could not reach rho = {rho_target} by blending"
        ))),
    }
}
