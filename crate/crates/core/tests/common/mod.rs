//! Dense reference implementations and instance builders shared by the
//! integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use symtc::seed::{rng_from_seed, Rng as SeededRng};
use symtc::{FactorModel, SparseSymmetricTensor};

pub type Dense = Vec<f64>;

pub fn at(n: usize, i: usize, j: usize, k: usize) -> usize {
    (i * n + j) * n + k
}

/// Full `n^3` array of a factor model, summed term by term.
pub fn dense_model(m: &FactorModel) -> Dense {
    let n = m.n();
    let mut t = vec![0.0; n * n * n];
    for (s, u) in m.sigmas().iter().zip(m.vectors()) {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    t[at(n, i, j, k)] += s * u[i] * u[j] * u[k];
                }
            }
        }
    }
    t
}

/// Full `n^3` array of a sparse tensor with every permutation filled in.
pub fn dense_sparse(s: &SparseSymmetricTensor) -> Dense {
    let n = s.n();
    let mut t = vec![0.0; n * n * n];
    for (triple, v) in s.iter() {
        for [i, j, k] in triple.permutations() {
            t[at(n, i, j, k)] = v;
        }
    }
    t
}

/// Observation mask of a sparse tensor's symmetry closure.
pub fn dense_mask(s: &SparseSymmetricTensor) -> Vec<bool> {
    let n = s.n();
    let mut m = vec![false; n * n * n];
    for (triple, _) in s.iter() {
        for [i, j, k] in triple.permutations() {
            m[at(n, i, j, k)] = true;
        }
    }
    m
}

pub fn dense_trilinear(t: &Dense, n: usize, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    let mut acc = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                acc += t[at(n, a, b, c)] * x[a] * y[b] * z[c];
            }
        }
    }
    acc
}

pub fn dense_fiber(t: &Dense, n: usize, x: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|a| {
            let mut acc = 0.0;
            for b in 0..n {
                for c in 0..n {
                    acc += t[at(n, a, b, c)] * x[b] * x[c];
                }
            }
            acc
        })
        .collect()
}

pub fn frob(t: &Dense) -> f64 {
    t.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn sub(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

pub fn gaussian(n: usize, rng: &mut SeededRng) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn unit(n: usize, rng: &mut SeededRng) -> Vec<f64> {
    let v = gaussian(n, rng);
    let s = norm(&v);
    v.into_iter().map(|x| x / s).collect()
}

pub fn rng(seed: u64) -> SeededRng {
    rng_from_seed(seed)
}

/// Unit vector at Euclidean distance exactly `d` (< 2) from unit `u`, rotated
/// towards `w` (any vector not parallel to `u`).
pub fn rotate_towards(u: &[f64], w: &[f64], d: f64) -> Vec<f64> {
    let c = dot(u, w);
    let mut perp: Vec<f64> = w.iter().zip(u).map(|(wi, ui)| wi - c * ui).collect();
    let s = norm(&perp);
    perp.iter_mut().for_each(|x| *x /= s);
    let theta = 2.0 * (d / 2.0).asin();
    u.iter().zip(&perp).map(|(a, b)| theta.cos() * a + theta.sin() * b).collect()
}

/// Random symmetric sparse tensor: each canonical triple kept with
/// probability `p`, values standard normal.
pub fn random_sparse(n: usize, p: f64, seed: u64) -> SparseSymmetricTensor {
    let mut r = rng(seed);
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                if r.random_bool(p) {
                    entries.push(([i, j, k], r.sample::<f64, _>(StandardNormal)));
                }
            }
        }
    }
    SparseSymmetricTensor::new(n, entries).unwrap()
}

/// Random (generally non-orthogonal) model with Gaussian directions.
pub fn random_model(n: usize, r: usize, seed: u64) -> FactorModel {
    let mut g = rng(seed);
    let sigmas: Vec<f64> = (0..r).map(|_| g.random_range(0.5..2.0)).collect();
    let vectors: Vec<Vec<f64>> = (0..r).map(|_| gaussian(n, &mut g)).collect();
    FactorModel::from_directions(n, sigmas, vectors).unwrap()
}

/// Minimizes the inner objective over `v` with a generic dense
/// least-squares solve: one row per closure triple `(i, j, k)` reading
/// `R_ijk ~ v_i u_q(j) u_q(k)`.
pub fn normal_equations_update(omega: &SparseSymmetricTensor, model: &FactorModel, q: usize) -> Vec<f64> {
    let n = model.n();
    let u = model.vector(q);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for (t, v) in omega.iter() {
        for [i, j, k] in t.permutations() {
            let mut others = 0.0;
            for l in (0..model.rank()).filter(|&l| l != q) {
                let w = model.vector(l);
                others += model.sigmas()[l] * w[i] * w[j] * w[k];
            }
            let mut row = vec![0.0; n];
            row[i] = u[j] * u[k];
            rows.push(row);
            rhs.push(v - others);
        }
    }
    let a = DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c]);
    let b = DVector::from_vec(rhs);
    let pinv = a.pseudo_inverse(1e-13).unwrap();
    (pinv * b).iter().copied().collect()
}
