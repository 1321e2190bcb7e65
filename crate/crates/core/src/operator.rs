//! Stochastic Galerkin system `K = Σ_q G_q ⊗ A_q` in mode-major layout.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use crate::chaos::{triple_tensor, IndexSet, SplitLayout, TripleTensor};
use crate::error::{Error, Result};
use crate::meshfem::{assemble_load, constrain, FemPattern, MeshLevel};
use crate::randomfield::CoefficientPce;
use crate::sparse::CsrMatrix;

/// Block vector with the stochastic mode as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    modes: usize,
    spatial: usize,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(modes: usize, spatial: usize) -> Self {
        Self {
            modes,
            spatial,
            data: vec![0.0; modes * spatial],
        }
    }

    pub fn from_vec(modes: usize, spatial: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != modes * spatial {
            return Err(Error::DimensionMismatch {
                expected: modes * spatial,
                got: data.len(),
            });
        }
        Ok(Self {
            modes,
            spatial,
            data,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn spatial(&self) -> usize {
        self.spatial
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        &self.data[k * self.spatial..(k + 1) * self.spatial]
    }

    pub fn mode_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.spatial..(k + 1) * self.spatial]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

#[derive(Debug)]
pub struct BlockOperator {
    spatial: usize,
    tensor: Arc<TripleTensor>,
    blocks: Vec<CsrMatrix>,
    boundary: Vec<bool>,
    // columns[q][c] = nonzero (row, value) of column c of G_q
    columns: Vec<Vec<Vec<(usize, f64)>>>,
    explicit: OnceLock<CsrMatrix>,
}

impl BlockOperator {
    /// `blocks[q]` must all share one sparsity pattern, with boundary rows
    /// reduced to the diagonal.
    pub fn new(tensor: Arc<TripleTensor>, blocks: Vec<CsrMatrix>, boundary: Vec<bool>) -> Result<Self> {
        if blocks.len() != tensor.len() {
            return Err(Error::DimensionMismatch {
                expected: tensor.len(),
                got: blocks.len(),
            });
        }
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidArgument("no spatial blocks".into()))?;
        let spatial = first.nrows();
        if boundary.len() != spatial || blocks.iter().any(|b| !b.same_pattern(first)) {
            return Err(Error::InvalidArgument(
                "spatial blocks must share one square pattern".into(),
            ));
        }
        let m = tensor.modes();
        let columns = (0..tensor.len())
            .map(|q| {
                let mut cols = vec![Vec::new(); m];
                for &(r, c, v) in tensor.nonzeros(q) {
                    cols[c].push((r, v));
                }
                cols
            })
            .collect();
        Ok(Self {
            spatial,
            tensor,
            blocks,
            boundary,
            columns,
            explicit: OnceLock::new(),
        })
    }

    pub fn modes(&self) -> usize {
        self.tensor.modes()
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial
    }

    pub fn dim(&self) -> usize {
        self.modes() * self.spatial
    }

    pub fn tensor(&self) -> &TripleTensor {
        &self.tensor
    }

    pub fn block(&self, q: usize) -> &CsrMatrix {
        &self.blocks[q]
    }

    pub fn blocks(&self) -> &[CsrMatrix] {
        &self.blocks
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn block_mask(&self) -> Vec<bool> {
        self.tensor.block_mask()
    }

    /// Matrix-free `y = K x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let all: Vec<usize> = (0..self.modes()).collect();
        self.add_coupling(&all, &all, 1.0, x, y);
    }

    /// `y[rows] += alpha · K[rows, cols] x[cols]` on full-length block
    /// vectors; entries outside `rows` are left untouched.
    pub fn add_coupling(&self, rows: &[usize], cols: &[usize], alpha: f64, x: &[f64], y: &mut [f64]) {
        let n = self.spatial;
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        let mut in_rows = vec![false; self.modes()];
        for &r in rows {
            in_rows[r] = true;
        }
        let mut tmp = vec![0.0; n];
        for (q, block) in self.blocks.iter().enumerate() {
            for &c in cols {
                let entries = &self.columns[q][c];
                if !entries.iter().any(|&(r, _)| in_rows[r]) {
                    continue;
                }
                block.mul_vec(&x[c * n..(c + 1) * n], &mut tmp);
                for &(r, g) in entries {
                    if in_rows[r] {
                        crate::sparse::axpy(alpha * g, &tmp, &mut y[r * n..(r + 1) * n]);
                    }
                }
            }
        }
    }

    /// Materialized `K` restricted to the listed modes (local order = list
    /// order). A block is present iff some `G_q` couples the two modes.
    pub fn explicit_submatrix(&self, modes: &[usize]) -> CsrMatrix {
        let n = self.spatial;
        let k = modes.len();
        let pattern = &self.blocks[0];
        let nnz_a = pattern.nnz();
        let mut row_ptr = Vec::with_capacity(k * n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut combined: Vec<(usize, Vec<f64>)> = Vec::new();
        for &r in modes {
            combined.clear();
            for (b, &c) in modes.iter().enumerate() {
                let mut vals: Option<Vec<f64>> = None;
                for (q, block) in self.blocks.iter().enumerate() {
                    let g = self.tensor.get(q, r, c);
                    if g != 0.0 {
                        let acc = vals.get_or_insert_with(|| vec![0.0; nnz_a]);
                        for (a, v) in acc.iter_mut().zip(block.values()) {
                            *a += g * v;
                        }
                    }
                }
                if let Some(v) = vals {
                    combined.push((b, v));
                }
            }
            for i in 0..n {
                let (lo, hi) = (pattern.row_ptr()[i], pattern.row_ptr()[i + 1]);
                for (b, vals) in &combined {
                    for pos in lo..hi {
                        col_idx.push(b * n + pattern.col_idx()[pos]);
                        values.push(vals[pos]);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        CsrMatrix::from_raw(k * n, k * n, row_ptr, col_idx, values)
            .expect("block rows are emitted in column order")
    }

    /// Full explicit `K`, built on first use.
    pub fn explicit(&self) -> &CsrMatrix {
        self.explicit.get_or_init(|| {
            let all: Vec<usize> = (0..self.modes()).collect();
            self.explicit_submatrix(&all)
        })
    }

    pub fn apply_explicit(&self, x: &[f64], y: &mut [f64]) {
        self.explicit().mul_vec(x, y);
    }

    pub fn write_matrix_market<W: Write>(&self, w: W) -> Result<()> {
        self.explicit().write_matrix_market(w)
    }
}

/// Explicit diagonal block of `K` for every split of `layout`.
pub fn extract_diagonal_blocks(op: &BlockOperator, layout: &SplitLayout) -> Result<Vec<CsrMatrix>> {
    if layout.modes() != op.modes() {
        return Err(Error::DimensionMismatch {
            expected: op.modes(),
            got: layout.modes(),
        });
    }
    Ok(layout
        .splits()
        .iter()
        .map(|s| op.explicit_submatrix(s))
        .collect())
}

/// Spatial matrices `A_q` on `mesh` for every coefficient mode, with the
/// Dirichlet rows of `A_0` set to the identity and those of the other `A_q`
/// to a structural zero diagonal, so that `K` carries identity rows on the
/// boundary of every mode.
pub fn assemble_spatial_blocks(pce: &CoefficientPce, mesh: &MeshLevel) -> Vec<CsrMatrix> {
    let pattern = FemPattern::new(mesh);
    pce.values_at_quadrature(mesh)
        .iter()
        .enumerate()
        .map(|(q, coeff)| {
            let a = pattern.stiffness_from_qp(coeff);
            constrain(&a, mesh.boundary(), if q == 0 { 1.0 } else { 0.0 })
        })
        .collect()
}

pub fn assemble_operator(
    pce: &CoefficientPce,
    mesh: &MeshLevel,
    tensor: Arc<TripleTensor>,
) -> Result<BlockOperator> {
    if tensor.len() != pce.data_set().len() {
        return Err(Error::DimensionMismatch {
            expected: pce.data_set().len(),
            got: tensor.len(),
        });
    }
    BlockOperator::new(
        tensor,
        assemble_spatial_blocks(pce, mesh),
        mesh.boundary().to_vec(),
    )
}

/// Block load for a deterministic source: the load lives in mode 0.
pub fn assemble_rhs(mesh: &MeshLevel, modes: usize, f: &dyn Fn(f64, f64) -> f64) -> BlockVector {
    let mut rhs = BlockVector::zeros(modes, mesh.node_count());
    let load = assemble_load(mesh, f);
    for ((dst, &v), &b) in rhs.mode_mut(0).iter_mut().zip(&load).zip(mesh.boundary()) {
        *dst = if b { 0.0 } else { v };
    }
    rhs
}

/// System for `-∇·(a ∇u) = 1` with homogeneous Dirichlet data.
pub fn assemble_system(
    pce: &CoefficientPce,
    mesh: &MeshLevel,
    basis: &IndexSet,
) -> Result<(BlockOperator, BlockVector)> {
    let tensor = Arc::new(triple_tensor(basis, pce.data_set())?);
    let op = assemble_operator(pce, mesh, tensor)?;
    let rhs = assemble_rhs(mesh, basis.len(), &|_, _| 1.0);
    Ok((op, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::{build_index_set, group_fields};
    use crate::randomfield::{project_coefficient, solve_kl, CovarianceSpec, KlField};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn system(level: usize, sigma: f64, n: usize, p: usize, q: usize) -> (BlockOperator, BlockVector, MeshLevel) {
        let mesh = MeshLevel::new(level).unwrap();
        let spec = CovarianceSpec::new(sigma, 0.1).unwrap();
        let kl = KlField::new(0.0, 0.01, solve_kl(&spec, &mesh, n).unwrap()).unwrap();
        let pce = project_coefficient(&kl, &build_index_set(n, q).unwrap()).unwrap();
        let (op, rhs) = assemble_system(&pce, &mesh, &build_index_set(n, p).unwrap()).unwrap();
        (op, rhs, mesh)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn explicit_matches_dense_kronecker() {
        let (op, _, _) = system(2, 0.8, 2, 2, 2);
        let m = op.modes();
        let n = op.spatial_dim();
        let mut dense = DMatrix::<f64>::zeros(m * n, m * n);
        for q in 0..op.tensor().len() {
            let g = DMatrix::from_fn(m, m, |r, c| op.tensor().get(q, r, c));
            dense += g.kronecker(&op.block(q).to_dense());
        }
        let explicit = op.explicit().to_dense();
        let scale = dense.amax();
        assert!((explicit - &dense).amax() <= 1e-12 * scale);
    }

    #[test]
    fn matrix_free_matches_explicit() {
        let (op, _, _) = system(2, 0.8, 2, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut y1 = vec![0.0; op.dim()];
        let mut y2 = vec![0.0; op.dim()];
        for _ in 0..10 {
            let x = random_vec(&mut rng, op.dim());
            op.apply(&x, &mut y1);
            op.apply_explicit(&x, &mut y2);
            let diff: f64 = y1.iter().zip(&y2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-13 * crate::sparse::max_abs(&y2));
        }
        let mut y = vec![1.0; op.dim()];
        op.apply(&vec![0.0; op.dim()], &mut y);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn symmetric_and_positive() {
        let (op, _, _) = system(2, 1.4, 2, 3, 3);
        assert!(op.explicit().is_symmetric());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (v, w) = (random_vec(&mut rng, op.dim()), random_vec(&mut rng, op.dim()));
        let (mut kv, mut kw) = (vec![0.0; op.dim()], vec![0.0; op.dim()]);
        op.apply(&v, &mut kv);
        op.apply(&w, &mut kw);
        let (a, b) = (crate::sparse::dot(&kv, &w), crate::sparse::dot(&v, &kw));
        assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
        assert!(crate::sparse::dot(&v, &kv) > 0.0);
    }

    #[test]
    fn deterministic_limit_is_block_diagonal() {
        let (op, rhs, _) = system(2, 1e-9, 2, 2, 2);
        let mesh = MeshLevel::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_vec(&mut rng, op.dim());
        let mut y = vec![0.0; op.dim()];
        op.apply(&x, &mut y);
        let n = mesh.node_count();
        let mut ym = vec![0.0; n];
        for k in 0..op.modes() {
            op.block(0).mul_vec(&x[k * n..(k + 1) * n], &mut ym);
            for (a, b) in y[k * n..(k + 1) * n].iter().zip(&ym) {
                assert!((a - b).abs() < 1e-6 * b.abs().max(1.0));
            }
        }
        for k in 1..rhs.modes() {
            assert!(rhs.mode(k).iter().all(|&v| v == 0.0));
        }
        assert!(rhs.mode(0).iter().any(|&v| v > 0.0));
    }

    #[test]
    fn boundary_rows_are_identity_in_every_mode() {
        let (op, _, mesh) = system(2, 0.8, 2, 2, 2);
        let k = op.explicit();
        let n = mesh.node_count();
        for mode in 0..op.modes() {
            for node in (0..n).filter(|&i| mesh.is_boundary(i)) {
                let row = mode * n + node;
                let (cols, vals) = k.row(row);
                for (&c, &v) in cols.iter().zip(vals) {
                    assert_eq!(v, if c == row { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn diagonal_blocks() {
        let (op, _, _) = system(2, 0.8, 2, 4, 4);
        let singles = extract_diagonal_blocks(&op, &SplitLayout::singletons(op.modes())).unwrap();
        for (i, block) in singles.iter().enumerate() {
            let mut expect = op.block(0).values().to_vec();
            expect.iter_mut().for_each(|v| *v *= op.tensor().get(0, i, i));
            for q in 1..op.tensor().len() {
                let g = op.tensor().get(q, i, i);
                for (e, v) in expect.iter_mut().zip(op.block(q).values()) {
                    *e += g * v;
                }
            }
            assert_eq!(block.values(), expect.as_slice());
            assert!(block.is_symmetric());
        }
        let layout = group_fields(&build_index_set(2, 4).unwrap());
        let grouped = extract_diagonal_blocks(&op, &layout).unwrap();
        let sizes: Vec<usize> = grouped.iter().map(|b| b.nrows() / op.spatial_dim()).collect();
        assert_eq!(sizes, vec![5, 4, 6]);
        assert!(grouped.iter().all(|b| b.is_symmetric()));
    }

    #[test]
    fn masked_blocks_contribute_nothing() {
        let (op, _, _) = system(2, 0.8, 2, 3, 1);
        let mask = op.block_mask();
        let m = op.modes();
        let n = op.spatial_dim();
        assert!(mask.iter().any(|b| !b));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for c in 0..m {
            let mut x = vec![0.0; op.dim()];
            x[c * n..(c + 1) * n].copy_from_slice(&random_vec(&mut rng, n));
            let mut y = vec![0.0; op.dim()];
            op.apply(&x, &mut y);
            for r in 0..m {
                if !mask[r * m + c] {
                    assert!(y[r * n..(r + 1) * n].iter().all(|&v| v == 0.0));
                }
            }
        }
    }

    #[test]
    fn inconsistent_inputs_rejected() {
        let mesh = MeshLevel::new(1).unwrap();
        let spec = CovarianceSpec::new(0.5, 0.1).unwrap();
        let kl = KlField::new(0.0, 0.01, solve_kl(&spec, &mesh, 2).unwrap()).unwrap();
        let pce = project_coefficient(&kl, &build_index_set(2, 2).unwrap()).unwrap();
        assert!(assemble_system(&pce, &mesh, &build_index_set(3, 2).unwrap()).is_err());
        assert!(BlockVector::from_vec(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn matrix_market_export() {
        let (op, _, _) = system(1, 0.5, 1, 1, 1);
        let mut buf = Vec::new();
        op.write_matrix_market(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header: Vec<usize> = text.lines().nth(1).unwrap().split(' ').map(|s| s.parse().unwrap()).collect();
        assert_eq!(header[0], op.dim());
        assert_eq!(header[2], op.explicit().nnz());
    }
}
