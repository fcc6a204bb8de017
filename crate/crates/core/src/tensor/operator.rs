//! Implicit symmetric 3-tensors: fiber contraction `T[., x, x]`, cubic form
//! `T[x, x, x]` and the power-iteration operator-norm estimate built on them.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::factor::{norm2, FactorModel};
use super::sparse::SparseSymmetricTensor;
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, Rng};

/// A symmetric 3-mode tensor that can be contracted without materializing it.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;

    /// `out = T[., x, x]`.
    fn contract_pair_into(&self, x: &[f64], out: &mut [f64]);

    /// `T[x, x, x]`.
    fn cubic_form(&self, x: &[f64]) -> f64;
}

impl SymmetricOperator for SparseSymmetricTensor {
    fn dim(&self) -> usize {
        self.n()
    }

    fn contract_pair_into(&self, x: &[f64], out: &mut [f64]) {
        SparseSymmetricTensor::contract_pair_into(self, x, out)
    }

    fn cubic_form(&self, x: &[f64]) -> f64 {
        SparseSymmetricTensor::cubic_form(self, x)
    }
}

impl SymmetricOperator for FactorModel {
    fn dim(&self) -> usize {
        self.n()
    }

    fn contract_pair_into(&self, x: &[f64], out: &mut [f64]) {
        FactorModel::contract_pair_into(self, x, out)
    }

    fn cubic_form(&self, x: &[f64]) -> f64 {
        FactorModel::cubic_form(self, x)
    }
}

/// `sparse_scale * S - factor_scale * F` for a sparse tensor `S` and a factor
/// model `F`, evaluated term by term.
#[derive(Clone, Copy, Debug)]
pub struct CombinedTensor<'a> {
    pub sparse: &'a SparseSymmetricTensor,
    pub sparse_scale: f64,
    pub factors: &'a FactorModel,
    pub factor_scale: f64,
}

impl SymmetricOperator for CombinedTensor<'_> {
    fn dim(&self) -> usize {
        self.sparse.n()
    }

    fn contract_pair_into(&self, x: &[f64], out: &mut [f64]) {
        self.sparse.contract_pair_into(x, out);
        if self.sparse_scale != 1.0 {
            out.iter_mut().for_each(|o| *o *= self.sparse_scale);
        }
        if self.factor_scale != 0.0 {
            self.factors.add_contract_pair(-self.factor_scale, x, out);
        }
    }

    fn cubic_form(&self, x: &[f64]) -> f64 {
        let mut v = self.sparse_scale * self.sparse.cubic_form(x);
        if self.factor_scale != 0.0 {
            v -= self.factor_scale * self.factors.cubic_form(x);
        }
        v
    }
}

/// General trilinear form `T[x, y, z] = sum_abc T_abc x_a y_b z_c`.
pub trait Trilinear {
    fn apply_trilinear(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64>;
}

fn check_lengths(n: usize, x: &[f64], y: &[f64], z: &[f64]) -> Result<()> {
    if x.len() != n || y.len() != n || z.len() != n {
        return Err(Error::Shape(format!(
            "trilinear form on dimension {n} got vectors of length {}, {}, {}",
            x.len(),
            y.len(),
            z.len()
        )));
    }
    Ok(())
}

impl Trilinear for FactorModel {
    fn apply_trilinear(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        check_lengths(self.n(), x, y, z)?;
        Ok(self.trilinear_unchecked(x, y, z))
    }
}

impl Trilinear for SparseSymmetricTensor {
    fn apply_trilinear(&self, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
        check_lengths(self.n(), x, y, z)?;
        Ok(self.trilinear_unchecked(x, y, z))
    }
}

pub(crate) fn random_unit(n: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let nrm = norm2(&v);
        if nrm > 0.0 {
            return v.into_iter().map(|x| x / nrm).collect();
        }
    }
}

/// Best-of-restarts lower bound on `max_{|x|=1} |T[x, x, x]|`.
///
/// Each restart draws a Gaussian unit start from a single seeded stream and
/// runs `x <- T[., x, x] / |T[., x, x]|` for `iters` steps, scoring every
/// iterate. Raising `restarts` with the same seed only appends starts, so the
/// estimate never decreases. An all-zero tensor yields 0.
pub fn operator_norm_estimate<T: SymmetricOperator + ?Sized>(
    tensor: &T,
    restarts: usize,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    if restarts == 0 || iters == 0 {
        return Err(Error::Config(
            "operator norm estimate needs restarts >= 1 and iters >= 1".into(),
        ));
    }
    let n = tensor.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = rng_from_seed(seed);
    let mut fiber = vec![0.0; n];
    let mut best = 0.0f64;
    for _ in 0..restarts {
        let mut x = random_unit(n, &mut rng);
        best = best.max(tensor.cubic_form(&x).abs());
        for _ in 0..iters {
            tensor.contract_pair_into(&x, &mut fiber);
            let nrm = norm2(&fiber);
            if nrm == 0.0 || !nrm.is_finite() {
                break;
            }
            let mut delta = 0.0f64;
            for (xi, fi) in x.iter_mut().zip(&fiber) {
                let next = fi / nrm;
                delta = delta.max((next - *xi).abs());
                *xi = next;
            }
            best = best.max(tensor.cubic_form(&x).abs());
            if delta < 1e-14 {
                break;
            }
        }
    }
    Ok(best)
}
