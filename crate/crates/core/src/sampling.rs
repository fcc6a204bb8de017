//! Bernoulli sampling of symmetric index sets and the random split of the
//! observed set across alternating-minimization updates.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::tensor::{canonical_count, FactorModel, SparseSymmetricTensor, Triple};

/// Observed tensor together with its split into disjoint, balanced parts.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePlan {
    pub full_omega: SparseSymmetricTensor,
    pub partitions: Vec<Vec<Triple>>,
    pub p: f64,
    pub seed: u64,
}

/// Serialized plan: parts reference the tensor file rather than embedding it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlanFile {
    pub p: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<String>,
    pub parts: Vec<Vec<Triple>>,
}

impl SamplePlan {
    /// Single part holding the whole support.
    pub fn unsplit(omega: SparseSymmetricTensor, p: f64) -> Self {
        let part = omega.support();
        SamplePlan {
            full_omega: omega,
            partitions: vec![part],
            p,
            seed: 0,
        }
    }

    pub fn to_file(&self, tensor: Option<String>) -> SamplePlanFile {
        SamplePlanFile {
            p: self.p,
            seed: self.seed,
            tensor,
            parts: self.partitions.clone(),
        }
    }

    /// Rebuilds a plan from its file form and the referenced tensor, checking
    /// that the parts partition the support.
    pub fn from_file(file: SamplePlanFile, omega: SparseSymmetricTensor) -> Result<Self> {
        let total: usize = file.parts.iter().map(Vec::len).sum();
        if total != omega.nnz() {
            return Err(Error::Config(format!(
                "plan covers {total} triples but the tensor has {}",
                omega.nnz()
            )));
        }
        let mut seen = std::collections::HashSet::with_capacity(total);
        for t in file.parts.iter().flatten() {
            let t = Triple::from(t.indices());
            if !omega.contains(t) {
                return Err(Error::NotInSupport(t.indices()));
            }
            if !seen.insert(t) {
                return Err(Error::DuplicateEntry(t.indices()));
            }
        }
        Ok(SamplePlan {
            full_omega: omega,
            partitions: file.parts,
            p: file.p,
            seed: file.seed,
        })
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} not in [0, 1]")));
    }
    Ok(())
}

/// Includes each canonical triple `i <= j <= k` independently with
/// probability `p`, carrying the model's entry value. Triples are visited in
/// lexicographic order, one Bernoulli draw each.
pub fn sample_bernoulli(truth: &FactorModel, p: f64, seed: u64) -> Result<SparseSymmetricTensor> {
    check_probability(p)?;
    let n = truth.n();
    let mut rng = rng_from_seed(seed);
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                if rng.random_bool(p) {
                    entries.push(([i, j, k], truth.eval_unchecked(i, j, k)));
                }
            }
        }
    }
    SparseSymmetricTensor::new(n, entries)
}

/// Uniformly random balanced partition of the support into `parts` sets
/// (sizes differ by at most one; the larger parts come first). The plan's
/// `p` is the empirical fill `nnz / canonical_count(n)`.
pub fn split_samples(omega: &SparseSymmetricTensor, parts: usize, seed: u64) -> Result<SamplePlan> {
    split_with_p(omega, parts, seed, empirical_p(omega))
}

pub fn empirical_p(omega: &SparseSymmetricTensor) -> f64 {
    match canonical_count(omega.n()) {
        0 => 0.0,
        total => omega.nnz() as f64 / total as f64,
    }
}

pub(crate) fn split_with_p(
    omega: &SparseSymmetricTensor,
    parts: usize,
    seed: u64,
    p: f64,
) -> Result<SamplePlan> {
    let support_len = omega.nnz();
    if parts == 0 || parts > support_len {
        return Err(Error::DegenerateSplit {
            support: support_len,
            parts,
        });
    }
    let mut support = omega.support();
    let mut rng = rng_from_seed(seed);
    support.shuffle(&mut rng);
    let base = support_len / parts;
    let extra = support_len % parts;
    let mut partitions = Vec::with_capacity(parts);
    let mut rest = support.as_slice();
    for q in 0..parts {
        let len = base + usize::from(q < extra);
        let (head, tail) = rest.split_at(len);
        let mut part = head.to_vec();
        part.sort_unstable();
        partitions.push(part);
        rest = tail;
    }
    Ok(SamplePlan {
        full_omega: omega.clone(),
        partitions,
        p,
        seed,
    })
}

/// Sub-tensor on the given canonical triples.
pub fn restrict(omega: &SparseSymmetricTensor, part: &[Triple]) -> Result<SparseSymmetricTensor> {
    let mut entries = Vec::with_capacity(part.len());
    for t in part {
        let [i, j, k] = t.indices();
        match omega.get(i, j, k) {
            Some(v) => entries.push((t.indices(), v)),
            None => return Err(Error::NotInSupport(t.indices())),
        }
    }
    SparseSymmetricTensor::new(omega.n(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::generate_orthogonal_model;

    fn truth(n: usize) -> FactorModel {
        generate_orthogonal_model(n, 2, &[1.0, 0.5], 3).unwrap()
    }

    #[test]
    fn extremes() {
        let t = truth(7);
        assert_eq!(sample_bernoulli(&t, 0.0, 1).unwrap().nnz(), 0);
        let full = sample_bernoulli(&t, 1.0, 1).unwrap();
        assert_eq!(full.nnz(), canonical_count(7));
        assert!(full.is_complete());
        for (tr, v) in full.iter() {
            let [i, j, k] = tr.indices();
            assert_eq!(v, t.eval_entry(k, i, j).unwrap());
        }
        assert!(matches!(sample_bernoulli(&t, 1.5, 1), Err(Error::Domain(_))));
        assert!(matches!(sample_bernoulli(&t, -0.1, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn deterministic() {
        let t = truth(10);
        assert_eq!(
            sample_bernoulli(&t, 0.3, 9).unwrap(),
            sample_bernoulli(&t, 0.3, 9).unwrap()
        );
        let omega = sample_bernoulli(&t, 0.3, 9).unwrap();
        assert_eq!(split_samples(&omega, 4, 2).unwrap(), split_samples(&omega, 4, 2).unwrap());
    }

    #[test]
    fn split_sizes_and_errors() {
        let t = truth(10);
        let omega = sample_bernoulli(&t, 1.0, 0).unwrap();
        let small = restrict(&omega, &omega.support()[..100]).unwrap();
        let plan = split_samples(&small, 6, 5).unwrap();
        let mut sizes: Vec<usize> = plan.partitions.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![16, 16, 17, 17, 17, 17]);
        let one = split_samples(&small, 1, 5).unwrap();
        assert_eq!(one.partitions[0], small.support());
        assert!(matches!(
            split_samples(&small, 101, 0),
            Err(Error::DegenerateSplit { support: 100, parts: 101 })
        ));
        assert!(split_samples(&small, 0, 0).is_err());
    }

    #[test]
    fn restrict_cases() {
        let t = truth(6);
        let omega = sample_bernoulli(&t, 0.5, 4).unwrap();
        assert_eq!(restrict(&omega, &omega.support()).unwrap(), omega);
        assert_eq!(restrict(&omega, &[]).unwrap().nnz(), 0);
        let missing = (0..6)
            .flat_map(|i| (i..6).map(move |j| Triple::canonical(i, j, j)))
            .find(|tr| !omega.contains(*tr))
            .unwrap();
        assert!(matches!(restrict(&omega, &[missing]), Err(Error::NotInSupport(_))));
    }

    #[test]
    fn plan_file_round_trip_checks_support() {
        let t = truth(6);
        let omega = sample_bernoulli(&t, 0.6, 4).unwrap();
        let plan = split_samples(&omega, 3, 8).unwrap();
        let json = serde_json::to_string(&plan.to_file(Some("omega.txt".into()))).unwrap();
        let file: SamplePlanFile = serde_json::from_str(&json).unwrap();
        assert_eq!(file.tensor.as_deref(), Some("omega.txt"));
        let back = SamplePlan::from_file(file.clone(), omega.clone()).unwrap();
        assert_eq!(back.partitions, plan.partitions);
        let mut broken = file;
        broken.parts[0].pop();
        assert!(SamplePlan::from_file(broken, omega).is_err());
    }
}
