//! Polynomial chaos machinery: total-degree multi-index sets, orthonormal
//! probabilists' Hermite polynomials, Galerkin triple products and the
//! mode grouping behind the grouped field split.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Exponent vector `(p_1, ..., p_N)` of a multivariate Hermite polynomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(components: Vec<usize>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument(
                "multi-index needs at least one component".into(),
            ));
        }
        Ok(Self(components))
    }

    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim.max(1)])
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// All components equal, e.g. `(0,0)`, `(2,2)`, or any index when N = 1.
    pub fn has_identical_digits(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The total-degree set `{p : Σ p_n ≤ degree}` in graded lexicographic order.
///
/// Position in [`IndexSet::indices`] is the mode number used for block
/// ordering throughout the crate.
#[derive(Debug, Clone)]
pub struct IndexSet {
    dim: usize,
    degree: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

/// `(n + k)! / (n! k!)` with overflow detection.
pub fn total_degree_size(dim: usize, degree: usize) -> Option<usize> {
    // C(dim + degree, degree) built incrementally; every partial product is
    // itself a binomial coefficient so the division is exact.
    let mut acc: usize = 1;
    for k in 1..=degree {
        acc = acc.checked_mul(dim + k)? / k;
    }
    Some(acc)
}

pub fn build_index_set(dim: usize, degree: usize) -> Result<IndexSet> {
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "stochastic dimension must be at least 1".into(),
        ));
    }
    let size = total_degree_size(dim, degree).ok_or_else(|| {
        Error::Overflow(format!(
            "index set size for N={dim}, p={degree} exceeds usize"
        ))
    })?;

    let mut indices = Vec::new();
    indices.try_reserve(size).map_err(|_| {
        Error::Overflow(format!("cannot allocate {size} multi-indices"))
    })?;
    let mut current = vec![0usize; dim];
    enumerate(&mut current, 0, degree, &mut indices);
    indices.sort_by(|a, b| a.degree().cmp(&b.degree()).then_with(|| a.0.cmp(&b.0)));
    debug_assert_eq!(indices.len(), size);

    let lookup = indices
        .iter()
        .enumerate()
        .map(|(k, idx)| (idx.clone(), k))
        .collect();
    Ok(IndexSet {
        dim,
        degree,
        indices,
        lookup,
    })
}

fn enumerate(current: &mut Vec<usize>, pos: usize, budget: usize, out: &mut Vec<MultiIndex>) {
    if pos == current.len() {
        out.push(MultiIndex(current.clone()));
        return;
    }
    for c in 0..=budget {
        current[pos] = c;
        enumerate(current, pos + 1, budget - c, out);
    }
    current[pos] = 0;
}

impl IndexSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn get(&self, k: usize) -> &MultiIndex {
        &self.indices[k]
    }

    pub fn position(&self, idx: &MultiIndex) -> Option<usize> {
        self.lookup.get(idx).copied()
    }
}

/// Orthonormal probabilists' Hermite polynomial `ψ_k(y)` for the standard
/// normal density.
pub fn hermite(k: usize, y: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..k {
        let next = (y * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `ψ_0(y), ..., ψ_kmax(y)` in one recurrence sweep.
pub fn hermite_all(kmax: usize, y: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if kmax == 0 {
        return;
    }
    out.push(y);
    for j in 1..kmax {
        let next = (y * out[j] - (j as f64).sqrt() * out[j - 1]) / ((j + 1) as f64).sqrt();
        out.push(next);
    }
}

/// Tensor-product Hermite polynomial `Π_n ψ_{p_n}(y_n)`.
pub fn multivariate_psi(idx: &MultiIndex, y: &[f64]) -> Result<f64> {
    if y.len() != idx.dim() {
        return Err(Error::DimensionMismatch {
            expected: idx.dim(),
            got: y.len(),
        });
    }
    Ok(idx
        .components()
        .iter()
        .zip(y)
        .map(|(&k, &yn)| hermite(k, yn))
        .product())
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `E[ψ_i ψ_j ψ_k]` for univariate orthonormal Hermite polynomials.
pub fn hermite_triple(i: usize, j: usize, k: usize) -> f64 {
    let total = i + j + k;
    if total % 2 != 0 {
        return 0.0;
    }
    let s = total / 2;
    if s < i || s < j || s < k {
        return 0.0;
    }
    // sort so the expression is evaluated identically for every permutation
    let mut a = [i, j, k];
    a.sort_unstable();
    (factorial(a[0]) * factorial(a[1]) * factorial(a[2])).sqrt()
        / (factorial(s - a[0]) * factorial(s - a[1]) * factorial(s - a[2]))
}

/// The Galerkin coupling matrices `[G_q]_{p',p} = E[ψ_q ψ_p' ψ_p]`, one per
/// data index `q`.
#[derive(Debug, Clone)]
pub struct TripleTensor {
    modes: usize,
    dense: Vec<Vec<f64>>,
    entries: Vec<Vec<(usize, usize, f64)>>,
}

pub fn triple_tensor(basis: &IndexSet, data: &IndexSet) -> Result<TripleTensor> {
    if basis.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: data.dim(),
        });
    }
    let m = basis.len();
    let mut dense = Vec::with_capacity(data.len());
    let mut entries = Vec::with_capacity(data.len());
    for q in data.indices() {
        let mut g = vec![0.0; m * m];
        for a in 0..m {
            let pa = basis.get(a).components();
            for b in a..m {
                let pb = basis.get(b).components();
                let v: f64 = q
                    .components()
                    .iter()
                    .zip(pa.iter().zip(pb))
                    .map(|(&qn, (&an, &bn))| hermite_triple(qn, an, bn))
                    .product();
                g[a * m + b] = v;
                g[b * m + a] = v;
            }
        }
        let nz = (0..m)
            .flat_map(|a| (0..m).map(move |b| (a, b)))
            .filter_map(|(a, b)| {
                let v = g[a * m + b];
                (v != 0.0).then_some((a, b, v))
            })
            .collect();
        dense.push(g);
        entries.push(nz);
    }
    Ok(TripleTensor {
        modes: m,
        dense,
        entries,
    })
}

impl TripleTensor {
    /// Number of solution modes `M_p` (each `G_q` is `M_p × M_p`).
    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Number of data modes `M_q`.
    pub fn len(&self) -> usize {
        self.dense.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dense.is_empty()
    }

    pub fn get(&self, q: usize, row: usize, col: usize) -> f64 {
        self.dense[q][row * self.modes + col]
    }

    /// Row-major dense `G_q`.
    pub fn dense(&self, q: usize) -> &[f64] {
        &self.dense[q]
    }

    /// Nonzero entries of `G_q` as `(row, col, value)`, row-major.
    pub fn nonzeros(&self, q: usize) -> &[(usize, usize, f64)] {
        &self.entries[q]
    }

    /// `true` where some `G_q` couples modes `(row, col)`.
    pub fn block_mask(&self) -> Vec<bool> {
        let m = self.modes;
        let mut mask = vec![false; m * m];
        for nz in &self.entries {
            for &(a, b, _) in nz {
                mask[a * m + b] = true;
            }
        }
        mask
    }

    /// Debug dump, one `q row col value` line per nonzero.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        for (q, nz) in self.entries.iter().enumerate() {
            for &(a, b, v) in nz {
                writeln!(w, "{q} {a} {b} {v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Ordered partition of the modes into field-split blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitLayout {
    splits: Vec<Vec<usize>>,
}

impl SplitLayout {
    /// Validates that `splits` is a nonempty, disjoint cover of `0..modes`.
    pub fn new(splits: Vec<Vec<usize>>, modes: usize) -> Result<Self> {
        let mut seen = vec![false; modes];
        for s in &splits {
            if s.is_empty() {
                return Err(Error::InvalidArgument("empty split".into()));
            }
            for &k in s {
                if k >= modes || seen[k] {
                    return Err(Error::InvalidArgument(format!(
                        "mode {k} out of range or repeated"
                    )));
                }
                seen[k] = true;
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!("mode {k} not covered")));
        }
        Ok(Self { splits })
    }

    /// One split per mode, in mode order.
    pub fn singletons(modes: usize) -> Self {
        Self {
            splits: (0..modes).map(|k| vec![k]).collect(),
        }
    }

    /// A single split containing every mode.
    pub fn monolithic(modes: usize) -> Self {
        Self {
            splits: vec![(0..modes).collect()],
        }
    }

    pub fn splits(&self) -> &[Vec<usize>] {
        &self.splits
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.splits.iter().map(Vec::len).sum()
    }
}

/// Groups modes by their first multi-index component. A group opens a new
/// split when it holds an index with all components equal; otherwise it is
/// appended to the previous split.
pub fn group_fields(set: &IndexSet) -> SplitLayout {
    let max_first = set
        .indices()
        .iter()
        .map(|idx| idx.components()[0])
        .max()
        .unwrap_or(0);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); max_first + 1];
    for (k, idx) in set.indices().iter().enumerate() {
        groups[idx.components()[0]].push(k);
    }

    let mut splits: Vec<Vec<usize>> = Vec::new();
    for group in groups.into_iter().filter(|g| !g.is_empty()) {
        let opens = group.iter().any(|&k| set.get(k).has_identical_digits());
        match splits.last_mut() {
            Some(last) if !opens => last.extend(group),
            _ => splits.push(group),
        }
    }
    SplitLayout { splits }
}

/// Gauss–Hermite rule for the standard normal density (weights sum to one),
/// computed from the Jacobi matrix of the orthonormal recurrence. Used to
/// cross-check the closed-form moments.
pub fn gauss_hermite(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points > 0);
    let mut jac = DMatrix::<f64>::zeros(points, points);
    for k in 1..points {
        let off = (k as f64).sqrt();
        jac[(k - 1, k)] = off;
        jac[(k, k - 1)] = off;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..points)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
