//! Spectral concentration of the sampled tensor and the degree and
//! discrepancy properties of random tripartite hypergraphs.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};
use crate::tensor::{
    generate_orthogonal_model, norm2, operator_norm_estimate, CombinedTensor, FactorModel,
    SparseSymmetricTensor,
};

/// Largest dimension for which `T_max` is found by scanning every entry.
pub const EXACT_TMAX_LIMIT: usize = 400;

/// Coordinates per component kept by the large-`n` `T_max` estimate.
const TMAX_TOP_COORDS: usize = 48;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxEntry {
    pub value: f64,
    /// False when the value comes from the top-coordinate heuristic.
    pub exact: bool,
}

/// `max_{ijk} |T_ijk|` of a factor model.
///
/// Up to [`EXACT_TMAX_LIMIT`] every canonical triple is evaluated. Beyond
/// that only triples drawn from the union of each component's largest
/// coordinates are scanned, and the result is flagged as an estimate.
pub fn t_max(model: &FactorModel) -> MaxEntry {
    let n = model.n();
    if n <= EXACT_TMAX_LIMIT {
        let value = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut best = 0.0f64;
                for j in i..n {
                    for k in j..n {
                        best = best.max(model.eval_unchecked(i, j, k).abs());
                    }
                }
                best
            })
            .reduce(|| 0.0, f64::max);
        return MaxEntry { value, exact: true };
    }
    let mut coords: Vec<usize> = Vec::new();
    for u in model.vectors() {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| u[b].abs().total_cmp(&u[a].abs()));
        coords.extend(idx.into_iter().take(TMAX_TOP_COORDS));
    }
    coords.sort_unstable();
    coords.dedup();
    let mut value = 0.0f64;
    for (a, &i) in coords.iter().enumerate() {
        for (b, &j) in coords.iter().enumerate().skip(a) {
            for &k in &coords[b..] {
                value = value.max(model.eval_unchecked(i, j, k).abs());
            }
        }
    }
    MaxEntry { value, exact: false }
}

/// `|P_Omega(T) - p T|_2 / (T_max n^{3/2} p)` with the operator norm taken
/// from [`operator_norm_estimate`].
///
/// The centered tensor is applied implicitly as the observed entries minus
/// `p` times the factor model. When `omega` is complete the residual is
/// formed entrywise instead, so exact data gives exactly zero.
pub fn centered_norm_ratio(
    truth: &FactorModel,
    omega: &SparseSymmetricTensor,
    p: f64,
    restarts: usize,
    iters: usize,
    seed: u64,
) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Domain(format!("sampling probability {p} must lie in (0, 1]")));
    }
    if truth.n() != omega.n() {
        return Err(Error::Shape(format!(
            "model dimension {} does not match tensor dimension {}",
            truth.n(),
            omega.n()
        )));
    }
    let n = truth.n();
    let scale = t_max(truth).value * (n as f64).powf(1.5) * p;
    if scale == 0.0 {
        return Err(Error::UndefinedScale("T_max"));
    }
    let norm = if omega.is_complete() {
        let residual = omega.map_values(|t, v| {
            let [i, j, k] = t.indices();
            v - p * truth.eval_unchecked(i, j, k)
        })?;
        operator_norm_estimate(&residual, restarts, iters, seed)?
    } else {
        let centered = CombinedTensor {
            sparse: omega,
            sparse_scale: 1.0,
            factors: truth,
            factor_scale: p,
        };
        operator_norm_estimate(&centered, restarts, iters, seed)?
    };
    Ok(norm / scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    pub ratio: f64,
    pub seed: u64,
}

/// Centered-norm ratios for random orthogonal rank-`r` tensors with unit
/// sigmas at `p = alpha / n^{3/2}`, one row per `(alpha, seed index)`.
pub fn scaling_study(
    n: usize,
    r: usize,
    alphas: &[f64],
    seeds: usize,
    restarts: usize,
    iters: usize,
    master_seed: u64,
) -> Result<Vec<ScalingRow>> {
    let mut jobs = Vec::new();
    for (a, &alpha) in alphas.iter().enumerate() {
        for s in 0..seeds {
            jobs.push((a, alpha, s));
        }
    }
    jobs.par_iter()
        .map(|&(a, alpha, s)| {
            let seed = derive_seed(derive_seed(master_seed, a as u64), s as u64);
            let p = (alpha / (n as f64).powf(1.5)).min(1.0);
            let truth = generate_orthogonal_model(n, r, &vec![1.0; r], derive_seed(seed, 0))?;
            let omega = crate::sampling::sample_bernoulli(&truth, p, derive_seed(seed, 1))?;
            let ratio =
                centered_norm_ratio(&truth, &omega, p, restarts, iters, derive_seed(seed, 2))?;
            Ok(ScalingRow { n, p, alpha, ratio, seed })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Shape("slope fit needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("slope fit needs distinct x values".into()));
    }
    Ok(sxy / sxx)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Edges of a tripartite 3-uniform hypergraph with parts of sizes `dims`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripartiteHypergraph {
    pub dims: [usize; 3],
    pub edges: Vec<[usize; 3]>,
}

impl TripartiteHypergraph {
    pub fn new(dims: [usize; 3], edges: Vec<[usize; 3]>) -> Result<Self> {
        for e in &edges {
            if (0..3).any(|a| e[a] >= dims[a]) {
                return Err(Error::Shape(format!("edge {e:?} outside parts {dims:?}")));
            }
        }
        Ok(TripartiteHypergraph { dims, edges })
    }

    /// Includes each of the `n1 n2 n3` possible edges independently with
    /// probability `p`.
    pub fn random(dims: [usize; 3], p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("edge probability {p} outside [0, 1]")));
        }
        let mut rng = rng_from_seed(seed);
        let mut edges = Vec::new();
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    if rng.random_bool(p) {
                        edges.push([i, j, k]);
                    }
                }
            }
        }
        Ok(TripartiteHypergraph { dims, edges })
    }

    /// Treats the three tensor axes as the three parts and emits every
    /// canonical triple once.
    pub fn from_symmetric(omega: &SparseSymmetricTensor) -> Self {
        let n = omega.n();
        TripartiteHypergraph {
            dims: [n; 3],
            edges: omega.iter().map(|(t, _)| t.indices()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypergraphStats {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub edge_count: usize,
    pub max_deg1: usize,
    pub max_deg2: usize,
    pub max_deg3: usize,
    pub max_deg12: usize,
    pub max_deg13: usize,
    pub max_deg23: usize,
    pub p_hat: f64,
}

pub fn hypergraph_stats(graph: &TripartiteHypergraph) -> HypergraphStats {
    let [n1, n2, n3] = graph.dims;
    let mut d1 = vec![0usize; n1];
    let mut d2 = vec![0usize; n2];
    let mut d3 = vec![0usize; n3];
    let mut d12 = vec![0usize; n1 * n2];
    let mut d13 = vec![0usize; n1 * n3];
    let mut d23 = vec![0usize; n2 * n3];
    for &[i, j, k] in &graph.edges {
        d1[i] += 1;
        d2[j] += 1;
        d3[k] += 1;
        d12[i * n2 + j] += 1;
        d13[i * n3 + k] += 1;
        d23[j * n3 + k] += 1;
    }
    let max = |v: &[usize]| v.iter().copied().max().unwrap_or(0);
    let cells = (n1 * n2 * n3) as f64;
    HypergraphStats {
        n1,
        n2,
        n3,
        edge_count: graph.edges.len(),
        max_deg1: max(&d1),
        max_deg2: max(&d2),
        max_deg3: max(&d3),
        max_deg12: max(&d12),
        max_deg13: max(&d13),
        max_deg23: max(&d23),
        p_hat: if cells > 0.0 { graph.edges.len() as f64 / cells } else { 0.0 },
    }
}

/// Pass/fail of each bounded-degree inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeAudit {
    pub deg1: bool,
    pub deg2: bool,
    pub deg3: bool,
    pub deg12: bool,
    pub deg13: bool,
    pub deg23: bool,
}

impl DegreeAudit {
    pub fn all_pass(&self) -> bool {
        self.deg1 && self.deg2 && self.deg3 && self.deg12 && self.deg13 && self.deg23
    }
}

/// The six high-probability degree bounds of a random tripartite hypergraph,
/// e.g. `deg1(i) <= 2 p n2 n3 + (8/3) ln(3 n1 / delta)` and
/// `deg12(i, j) <= 2 p n3 + (8/3) ln(3 n1 n2 / delta)`.
pub fn degree_bounds(n: [usize; 3], p: f64, delta: f64) -> [f64; 6] {
    let [a, b, c] = n.map(|x| x as f64);
    let tail = |m: f64| 8.0 / 3.0 * (3.0 * m / delta).ln();
    [
        2.0 * p * b * c + tail(a),
        2.0 * p * a * c + tail(b),
        2.0 * p * a * b + tail(c),
        2.0 * p * c + tail(a * b),
        2.0 * p * b + tail(a * c),
        2.0 * p * a + tail(b * c),
    ]
}

pub fn degree_bound_audit(stats: &HypergraphStats, p: f64, delta: f64) -> Result<DegreeAudit> {
    if !(delta > 0.0 && delta <= (-1.0f64).exp()) {
        return Err(Error::Domain(format!("delta {delta} outside (0, 1/e]")));
    }
    let b = degree_bounds([stats.n1, stats.n2, stats.n3], p, delta);
    Ok(DegreeAudit {
        deg1: stats.max_deg1 as f64 <= b[0],
        deg2: stats.max_deg2 as f64 <= b[1],
        deg3: stats.max_deg3 as f64 <= b[2],
        deg12: stats.max_deg12 as f64 <= b[3],
        deg13: stats.max_deg13 as f64 <= b[4],
        deg23: stats.max_deg23 as f64 <= b[5],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetSampler {
    /// Uniform subsets with log-uniform sizes.
    Random,
    /// Dyadic magnitude bands of random Gaussian unit vectors.
    LevelSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancySample {
    pub sizes: [usize; 3],
    pub e_observed: usize,
    pub e_expected: f64,
    pub check1_pass: bool,
    pub check2_pass: bool,
}

impl DiscrepancySample {
    pub fn either_pass(&self) -> bool {
        self.check1_pass || self.check2_pass
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyConfig {
    pub p: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub sampler: SubsetSampler,
    pub samples: usize,
    pub seed: u64,
}

/// Evaluates both discrepancy inequalities for one subset triple given as
/// membership masks. Returns `None` when a subset is empty.
pub fn discrepancy_check(
    graph: &TripartiteHypergraph,
    masks: [&[bool]; 3],
    p: f64,
    xi1: f64,
    xi2: f64,
) -> Option<DiscrepancySample> {
    let sizes = masks.map(|m| m.iter().filter(|&&b| b).count());
    if sizes.contains(&0) {
        return None;
    }
    let e = graph
        .edges
        .iter()
        .filter(|&&[i, j, k]| masks[0][i] && masks[1][j] && masks[2][k])
        .count();
    let expected = p * sizes.iter().map(|&s| s as f64).product::<f64>();
    let ef = e as f64;
    let check1 = ef <= xi1 * expected;
    let check2 = if ef <= expected {
        true
    } else {
        let entropy = (0..3)
            .map(|a| {
                let s = sizes[a] as f64;
                s * (std::f64::consts::E * graph.dims[a] as f64 / s).ln()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        ef * (ef / expected).ln() <= xi2 * entropy
    };
    Some(DiscrepancySample {
        sizes,
        e_observed: e,
        e_expected: expected,
        check1_pass: check1,
        check2_pass: check2,
    })
}

fn random_mask(n: usize, rng: &mut crate::seed::Rng) -> Vec<bool> {
    let size = ((n as f64).ln() * rng.random::<f64>()).exp().floor() as usize;
    let size = size.clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut mask = vec![false; n];
    for &i in &idx[..size] {
        mask[i] = true;
    }
    mask
}

/// Band index of `|x_i|` on the grid `(Delta / sqrt n) 2^{b-1} <= |x_i| <
/// (Delta / sqrt n) 2^b`, with `None` below the finest band.
fn dyadic_band(x: f64, n: usize, delta: f64) -> Option<i32> {
    let scaled = x.abs() * (n as f64).sqrt() / delta;
    if scaled < 1.0 {
        None
    } else {
        Some(scaled.log2().floor() as i32 + 1)
    }
}

const LEVEL_SET_DELTA: f64 = 0.25;

fn level_set_mask(n: usize, rng: &mut crate::seed::Rng) -> Vec<bool> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let nrm = norm2(&v);
        if nrm == 0.0 {
            continue;
        }
        let bands: Vec<Option<i32>> =
            v.iter().map(|x| dyadic_band(x / nrm, n, LEVEL_SET_DELTA)).collect();
        let mut present: Vec<i32> = bands.iter().flatten().copied().collect();
        present.sort_unstable();
        present.dedup();
        if let Some(&b) = present.choose(rng) {
            return bands.iter().map(|x| *x == Some(b)).collect();
        }
    }
}

/// Sampled audit of the discrepancy property: `samples` subset triples drawn
/// by `config.sampler`, each checked with [`discrepancy_check`].
pub fn discrepancy_audit(
    graph: &TripartiteHypergraph,
    config: &DiscrepancyConfig,
) -> Result<Vec<DiscrepancySample>> {
    if config.samples == 0 {
        return Err(Error::Config("discrepancy audit needs samples >= 1".into()));
    }
    if !(config.xi1 > 0.0 && config.xi2 > 0.0) {
        return Err(Error::Config("xi1 and xi2 must be positive".into()));
    }
    if graph.dims.contains(&0) {
        return Ok(Vec::new());
    }
    let out = (0..config.samples)
        .into_par_iter()
        .filter_map(|s| {
            let mut rng = rng_from_seed(derive_seed(config.seed, s as u64));
            let masks: Vec<Vec<bool>> = graph
                .dims
                .iter()
                .map(|&n| match config.sampler {
                    SubsetSampler::Random => random_mask(n, &mut rng),
                    SubsetSampler::LevelSet => level_set_mask(n, &mut rng),
                })
                .collect();
            discrepancy_check(
                graph,
                [&masks[0], &masks[1], &masks[2]],
                config.p,
                config.xi1,
                config.xi2,
            )
        })
        .collect();
    Ok(out)
}
