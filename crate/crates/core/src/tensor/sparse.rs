use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sorted index triple `i <= j <= k` standing for all of its permutations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Triple([usize; 3]);

impl Triple {
    pub fn canonical(i: usize, j: usize, k: usize) -> Self {
        let mut t = [i, j, k];
        t.sort_unstable();
        Triple(t)
    }

    pub fn indices(&self) -> [usize; 3] {
        self.0
    }

    /// Number of distinct permutations: 1, 3 or 6.
    pub fn orbit_size(&self) -> usize {
        let [a, b, c] = self.0;
        match (a == b, b == c) {
            (true, true) => 1,
            (false, false) => 6,
            _ => 3,
        }
    }

    /// Distinct ordered triples in the symmetry orbit.
    pub fn permutations(&self) -> Vec<[usize; 3]> {
        let [a, b, c] = self.0;
        let mut out = vec![
            [a, b, c],
            [a, c, b],
            [b, a, c],
            [b, c, a],
            [c, a, b],
            [c, b, a],
        ];
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.0[0] < self.0[1] && self.0[1] < self.0[2]
    }
}

impl From<[usize; 3]> for Triple {
    fn from(t: [usize; 3]) -> Self {
        Triple::canonical(t[0], t[1], t[2])
    }
}

/// One stored canonical entry.
///
/// `mult` is `orbit_size / 6`: summing a per-permutation quantity over all six
/// index permutations and scaling by `mult` visits each distinct ordered
/// triple of the orbit exactly once.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Entry {
    pub idx: [usize; 3],
    pub value: f64,
    pub mult: f64,
}

impl Entry {
    fn new(t: Triple, value: f64) -> Self {
        Entry {
            idx: t.0,
            value,
            mult: t.orbit_size() as f64 / 6.0,
        }
    }
}

/// Observed entries of a symmetric `n x n x n` tensor, keyed by canonical
/// triple. Lookups of any permutation of a stored triple return its value.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymmetricTensor {
    n: usize,
    entries: Vec<Entry>,
}

/// Number of canonical triples `i <= j <= k` over `[0, n)`.
pub fn canonical_count(n: usize) -> usize {
    n * (n + 1) * (n + 2) / 6
}

impl SparseSymmetricTensor {
    pub fn empty(n: usize) -> Self {
        SparseSymmetricTensor {
            n,
            entries: Vec::new(),
        }
    }

    /// Builds a tensor from index triples in any order. Each triple is
    /// canonicalized; two inputs mapping to the same canonical key are an error.
    pub fn new<I, T>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, f64)>,
        T: Into<[usize; 3]>,
    {
        let mut out: Vec<Entry> = Vec::new();
        for (idx, value) in entries {
            let [i, j, k] = idx.into();
            if i >= n || j >= n || k >= n {
                return Err(Error::IndexOutOfRange { i, j, k, n });
            }
            if !value.is_finite() {
                return Err(Error::Domain(format!("entry ({i}, {j}, {k}) is {value}")));
            }
            out.push(Entry::new(Triple::canonical(i, j, k), value));
        }
        out.sort_unstable_by(|a, b| a.idx.cmp(&b.idx));
        if let Some(w) = out.windows(2).find(|w| w[0].idx == w[1].idx) {
            return Err(Error::DuplicateEntry(w[0].idx));
        }
        Ok(SparseSymmetricTensor { n, entries: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored canonical entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every canonical triple is stored.
    pub fn is_complete(&self) -> bool {
        self.entries.len() == canonical_count(self.n)
    }

    /// Number of ordered triples in the symmetry closure.
    pub fn closure_len(&self) -> usize {
        self.entries
            .iter()
            .map(|e| Triple(e.idx).orbit_size())
            .sum()
    }

    pub(crate) fn entries(&self) -> &[Entry] {
        &self.entries
    }

    fn position(&self, t: Triple) -> Option<usize> {
        self.entries.binary_search_by(|e| e.idx.cmp(&t.0)).ok()
    }

    /// Value at `(i, j, k)` or any permutation of it; `None` if unobserved.
    pub fn get(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        self.position(Triple::canonical(i, j, k))
            .map(|p| self.entries[p].value)
    }

    pub fn contains(&self, t: Triple) -> bool {
        self.position(t).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Triple, f64)> + '_ {
        self.entries.iter().map(|e| (Triple(e.idx), e.value))
    }

    pub fn support(&self) -> Vec<Triple> {
        self.entries.iter().map(|e| Triple(e.idx)).collect()
    }

    /// Frobenius norm of the symmetry-closed observed tensor `P_Omega(T)`.
    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| 6.0 * e.mult * e.value * e.value)
            .sum::<f64>()
            .sqrt()
    }

    /// Applies `f` to every stored value.
    pub fn map_values(&self, mut f: impl FnMut(Triple, f64) -> f64) -> Result<Self> {
        SparseSymmetricTensor::new(self.n, self.iter().map(|(t, v)| (t.0, f(t, v))))
    }

    /// `out = T[., x, x]` over the symmetry closure.
    pub fn contract_pair_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for e in &self.entries {
            let [a, b, c] = e.idx;
            let w = 2.0 * e.mult * e.value;
            out[a] += w * x[b] * x[c];
            out[b] += w * x[a] * x[c];
            out[c] += w * x[a] * x[b];
        }
    }

    /// `T[x, x, x]` over the symmetry closure.
    pub fn cubic_form(&self, x: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let [a, b, c] = e.idx;
                6.0 * e.mult * e.value * x[a] * x[b] * x[c]
            })
            .sum()
    }

    pub(crate) fn trilinear_unchecked(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let [a, b, c] = e.idx;
                let s = x[a] * (y[b] * z[c] + y[c] * z[b])
                    + x[b] * (y[a] * z[c] + y[c] * z[a])
                    + x[c] * (y[a] * z[b] + y[b] * z[a]);
                e.mult * e.value * s
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseSymmetricTensor {
        SparseSymmetricTensor::new(
            4,
            vec![([2, 0, 1], 1.5), ([3, 3, 3], -2.0), ([1, 3, 1], 0.25)],
        )
        .unwrap()
    }

    #[test]
    fn lookup_is_permutation_invariant() {
        let t = sample();
        for p in Triple::canonical(0, 1, 2).permutations() {
            assert_eq!(t.get(p[0], p[1], p[2]), Some(1.5));
        }
        for p in Triple::canonical(1, 1, 3).permutations() {
            assert_eq!(t.get(p[0], p[1], p[2]), Some(0.25));
        }
        assert_eq!(t.get(0, 0, 0), None);
    }

    #[test]
    fn orbit_sizes() {
        assert_eq!(Triple::canonical(1, 1, 1).orbit_size(), 1);
        assert_eq!(Triple::canonical(1, 2, 1).orbit_size(), 3);
        assert_eq!(Triple::canonical(3, 2, 1).orbit_size(), 6);
        assert_eq!(Triple::canonical(3, 2, 1).permutations().len(), 6);
        assert_eq!(Triple::canonical(3, 3, 1).permutations().len(), 3);
        assert_eq!(sample().closure_len(), 6 + 1 + 3);
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        let dup = SparseSymmetricTensor::new(3, vec![([0, 1, 2], 1.0), ([2, 1, 0], 2.0)]);
        assert!(matches!(dup, Err(Error::DuplicateEntry([0, 1, 2]))));
        let oob = SparseSymmetricTensor::new(3, vec![([0, 1, 3], 1.0)]);
        assert!(matches!(oob, Err(Error::IndexOutOfRange { .. })));
    }

    fn dense(t: &SparseSymmetricTensor) -> Vec<f64> {
        let n = t.n();
        let mut d = vec![0.0; n * n * n];
        for (tr, v) in t.iter() {
            for [i, j, k] in tr.permutations() {
                d[(i * n + j) * n + k] = v;
            }
        }
        d
    }

    #[test]
    fn contractions_match_dense_closure() {
        let t = sample();
        let n = t.n();
        let d = dense(&t);
        let x = [0.3, -0.7, 1.1, 0.4];
        let y = [1.0, 0.2, -0.5, 0.9];
        let z = [-0.6, 0.8, 0.1, 0.3];
        let mut fiber = vec![0.0; n];
        t.contract_pair_into(&x, &mut fiber);
        let mut cubic = 0.0;
        let mut tri = 0.0;
        for i in 0..n {
            let mut f = 0.0;
            for j in 0..n {
                for k in 0..n {
                    let v = d[(i * n + j) * n + k];
                    f += v * x[j] * x[k];
                    cubic += v * x[i] * x[j] * x[k];
                    tri += v * x[i] * y[j] * z[k];
                }
            }
            assert!((f - fiber[i]).abs() < 1e-14);
        }
        assert!((cubic - t.cubic_form(&x)).abs() < 1e-14);
        assert!((tri - t.trilinear_unchecked(&x, &y, &z)).abs() < 1e-14);
        let fro: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((fro - t.frobenius_norm()).abs() < 1e-14);
    }

    #[test]
    fn canonical_count_matches_enumeration() {
        for n in 0..8 {
            let mut c = 0;
            for i in 0..n {
                for j in i..n {
                    c += n - j;
                }
            }
            assert_eq!(canonical_count(n), c);
        }
    }
}
