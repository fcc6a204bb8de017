use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const UNIT_TOL: f64 = 1e-12;
pub(crate) const ORTHO_TOL: f64 = 1e-10;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Rank-`r` symmetric tensor `sum_l sigma_l (u_l x u_l x u_l)` with unit `u_l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FactorModelRepr", into = "FactorModelRepr")]
pub struct FactorModel {
    n: usize,
    sigmas: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    orthogonal: bool,
}

#[derive(Serialize, Deserialize)]
struct FactorModelRepr {
    n: usize,
    r: usize,
    sigmas: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

impl TryFrom<FactorModelRepr> for FactorModel {
    type Error = Error;

    fn try_from(m: FactorModelRepr) -> Result<Self> {
        if m.r != m.sigmas.len() || m.r != m.vectors.len() {
            return Err(Error::InvalidModel(format!(
                "r = {} but {} sigmas and {} vectors",
                m.r,
                m.sigmas.len(),
                m.vectors.len()
            )));
        }
        let mut model = FactorModel::new(m.n, m.sigmas, m.vectors)?;
        model.orthogonal = model.max_abs_inner_product() <= ORTHO_TOL;
        Ok(model)
    }
}

impl From<FactorModel> for FactorModelRepr {
    fn from(m: FactorModel) -> Self {
        FactorModelRepr {
            n: m.n,
            r: m.sigmas.len(),
            sigmas: m.sigmas,
            vectors: m.vectors,
        }
    }
}

impl FactorModel {
    /// Validates lengths, finiteness and unit norms (within 1e-12).
    pub fn new(n: usize, sigmas: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if sigmas.len() != vectors.len() {
            return Err(Error::InvalidModel(format!(
                "{} sigmas for {} vectors",
                sigmas.len(),
                vectors.len()
            )));
        }
        if let Some(s) = sigmas.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidModel(format!("non-finite sigma {s}")));
        }
        for (l, u) in vectors.iter().enumerate() {
            if u.len() != n {
                return Err(Error::InvalidModel(format!(
                    "vector {l} has length {} (expected {n})",
                    u.len()
                )));
            }
            if u.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!("vector {l} is not finite")));
            }
            let nrm = norm2(u);
            if (nrm - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidModel(format!(
                    "vector {l} has norm {nrm}, expected 1"
                )));
            }
        }
        Ok(FactorModel {
            n,
            sigmas,
            vectors,
            orthogonal: false,
        })
    }

    /// Like [`FactorModel::new`] but also requires pairwise orthogonality
    /// (within 1e-10) and flags the model as orthogonal.
    pub fn new_orthogonal(n: usize, sigmas: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = FactorModel::new(n, sigmas, vectors)?;
        let worst = m.max_abs_inner_product();
        if worst > ORTHO_TOL {
            return Err(Error::InvalidModel(format!(
                "components are not orthogonal (max |<u_i, u_j>| = {worst:e})"
            )));
        }
        m.orthogonal = true;
        Ok(m)
    }

    /// Normalizes each vector before validation; sigmas are taken as given.
    pub fn from_directions(n: usize, sigmas: Vec<f64>, mut vectors: Vec<Vec<f64>>) -> Result<Self> {
        for (l, u) in vectors.iter_mut().enumerate() {
            let nrm = norm2(u);
            if nrm == 0.0 || !nrm.is_finite() {
                return Err(Error::InvalidModel(format!("vector {l} cannot be normalized")));
            }
            u.iter_mut().for_each(|x| *x /= nrm);
        }
        FactorModel::new(n, sigmas, vectors)
    }

    pub(crate) fn from_parts_unchecked(
        n: usize,
        sigmas: Vec<f64>,
        vectors: Vec<Vec<f64>>,
        orthogonal: bool,
    ) -> Self {
        FactorModel {
            n,
            sigmas,
            vectors,
            orthogonal,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn vector(&self, l: usize) -> &[f64] {
        &self.vectors[l]
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    pub fn with_sigmas(&self, sigmas: Vec<f64>) -> Result<Self> {
        let mut m = FactorModel::new(self.n, sigmas, self.vectors.clone())?;
        m.orthogonal = self.orthogonal;
        Ok(m)
    }

    /// Reorders components; `order[new] = old`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        FactorModel {
            n: self.n,
            sigmas: order.iter().map(|&l| self.sigmas[l]).collect(),
            vectors: order.iter().map(|&l| self.vectors[l].clone()).collect(),
            orthogonal: self.orthogonal,
        }
    }

    /// Negates `u_l` and `sigma_l` together; the represented tensor is unchanged.
    pub fn flip_component(&self, l: usize) -> Self {
        let mut m = self.clone();
        m.sigmas[l] = -m.sigmas[l];
        m.vectors[l].iter_mut().for_each(|x| *x = -*x);
        m
    }

    pub fn max_abs_inner_product(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.rank() {
            for b in a + 1..self.rank() {
                worst = worst.max(dot(&self.vectors[a], &self.vectors[b]).abs());
            }
        }
        worst
    }

    /// Largest signed off-diagonal inner product `max_{i != j} <u_i, u_j>`.
    pub fn max_inner_product(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for a in 0..self.rank() {
            for b in a + 1..self.rank() {
                worst = worst.max(dot(&self.vectors[a], &self.vectors[b]));
            }
        }
        if worst == f64::NEG_INFINITY {
            0.0
        } else {
            worst
        }
    }

    pub fn eval_entry(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        if i >= self.n || j >= self.n || k >= self.n {
            return Err(Error::IndexOutOfRange { i, j, k, n: self.n });
        }
        Ok(self.eval_unchecked(i, j, k))
    }

    /// Sums `sigma * u(i) u(j) u(k)` with the three coordinates multiplied in
    /// sorted index order, so every permutation gives a bit-identical result.
    pub(crate) fn eval_unchecked(&self, i: usize, j: usize, k: usize) -> f64 {
        let mut t = [i, j, k];
        t.sort_unstable();
        let [a, b, c] = t;
        self.sigmas
            .iter()
            .zip(&self.vectors)
            .map(|(s, u)| s * u[a] * u[b] * u[c])
            .sum()
    }

    /// `mu(T) = sqrt(n) * max_{i,l} |u_l(i)|`.
    pub fn incoherence(&self) -> f64 {
        let max = self
            .vectors
            .iter()
            .flat_map(|u| u.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        (self.n as f64).sqrt() * max
    }

    /// `<T, T'>` from the Gram identity `sum sigma_a sigma'_b <u_a, u'_b>^3`.
    pub fn inner(&self, other: &FactorModel) -> f64 {
        let mut acc = 0.0;
        for (sa, ua) in self.sigmas.iter().zip(&self.vectors) {
            for (sb, ub) in other.sigmas.iter().zip(&other.vectors) {
                acc += sa * sb * dot(ua, ub).powi(3);
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        if self.orthogonal {
            self.sigmas.iter().map(|s| s * s).sum::<f64>().sqrt()
        } else {
            self.inner(self).max(0.0).sqrt()
        }
    }

    /// `out = T[., x, x] = sum_l sigma_l <u_l, x>^2 u_l`.
    pub fn contract_pair_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.add_contract_pair(1.0, x, out);
    }

    pub(crate) fn add_contract_pair(&self, scale: f64, x: &[f64], out: &mut [f64]) {
        for (s, u) in self.sigmas.iter().zip(&self.vectors) {
            let c = scale * s * dot(u, x).powi(2);
            out.iter_mut().zip(u).for_each(|(o, ui)| *o += c * ui);
        }
    }

    pub fn cubic_form(&self, x: &[f64]) -> f64 {
        self.sigmas
            .iter()
            .zip(&self.vectors)
            .map(|(s, u)| s * dot(u, x).powi(3))
            .sum()
    }

    pub(crate) fn trilinear_unchecked(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        self.sigmas
            .iter()
            .zip(&self.vectors)
            .map(|(s, u)| s * dot(u, x) * dot(u, y) * dot(u, z))
            .sum()
    }
}
