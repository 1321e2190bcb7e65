//! Uniform biquadratic (Q2) finite elements on the unit square.
//!
//! Level `L` has `2^L × 2^L` square cells and `(2^{L+1}+1)^2` nodes numbered
//! lexicographically, `x` fastest. Level 1 is the 2 × 2 coarse mesh; every
//! finer level is its midpoint refinement, so node sets are nested.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// 3-point Gauss–Legendre rule on `[0, 1]`.
pub const GAUSS3_POINTS: [f64; 3] = [
    0.5 - 0.387_298_334_620_741_7,
    0.5,
    0.5 + 0.387_298_334_620_741_7,
];
pub const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// 1D quadratic Lagrange basis on `[0,1]` with nodes `0, 1/2, 1`.
pub fn p2_basis(t: f64) -> [f64; 3] {
    [
        2.0 * (t - 0.5) * (t - 1.0),
        -4.0 * t * (t - 1.0),
        2.0 * t * (t - 0.5),
    ]
}

pub fn p2_basis_deriv(t: f64) -> [f64; 3] {
    [4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0]
}

/// One level of the nested mesh family.
#[derive(Debug, Clone)]
pub struct MeshLevel {
    level: usize,
    cells_per_side: usize,
    nodes_per_side: usize,
    boundary: Vec<bool>,
}

impl MeshLevel {
    pub fn new(level: usize) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidArgument("mesh levels start at 1".into()));
        }
        let overflow = || Error::Overflow(format!("node indexing overflows at level {level}"));
        let cells = u32::try_from(level)
            .ok()
            .and_then(|l| 1usize.checked_shl(l))
            .filter(|&c| c.leading_zeros() > 1)
            .ok_or_else(overflow)?;
        let m = cells.checked_mul(2).and_then(|v| v.checked_add(1)).ok_or_else(overflow)?;
        let total = m.checked_mul(m).ok_or_else(overflow)?;
        // refuse levels whose node arrays could never be allocated
        if total > (isize::MAX as usize) / std::mem::size_of::<f64>() {
            return Err(overflow());
        }
        let boundary = (0..total)
            .map(|k| {
                let (ix, iy) = (k % m, k / m);
                ix == 0 || iy == 0 || ix == m - 1 || iy == m - 1
            })
            .collect();
        Ok(Self {
            level,
            cells_per_side: cells,
            nodes_per_side: m,
            boundary,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    pub fn nodes_per_side(&self) -> usize {
        self.nodes_per_side
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_side * self.nodes_per_side
    }

    pub fn cell_size(&self) -> f64 {
        1.0 / self.cells_per_side as f64
    }

    pub fn node_coord(&self, k: usize) -> (f64, f64) {
        let m = self.nodes_per_side;
        let step = 0.5 * self.cell_size();
        ((k % m) as f64 * step, (k / m) as f64 * step)
    }

    /// Index of the node at `(0.5, 0.5)`.
    pub fn center_node(&self) -> usize {
        let mid = self.nodes_per_side / 2;
        mid * self.nodes_per_side + mid
    }

    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        self.boundary[k]
    }

    /// Global node numbers of cell `(cx, cy)`, local order `3*b + a` with
    /// `a` the x-offset.
    pub fn cell_nodes(&self, cx: usize, cy: usize) -> [usize; 9] {
        let m = self.nodes_per_side;
        let mut out = [0usize; 9];
        for b in 0..3 {
            for a in 0..3 {
                out[3 * b + a] = (2 * cy + b) * m + 2 * cx + a;
            }
        }
        out
    }

    /// Quadrature points in assembly order: cells row by row, then the 3 × 3
    /// Gauss points of each cell (x fastest).
    pub fn quadrature_points(&self) -> Vec<(f64, f64)> {
        let h = self.cell_size();
        let n = self.cells_per_side;
        let mut pts = Vec::with_capacity(9 * n * n);
        for cy in 0..n {
            for cx in 0..n {
                for &ty in &GAUSS3_POINTS {
                    for &tx in &GAUSS3_POINTS {
                        pts.push(((cx as f64 + tx) * h, (cy as f64 + ty) * h));
                    }
                }
            }
        }
        pts
    }

    /// Nodal interpolant of `g`.
    pub fn interpolate(&self, g: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.node_count())
            .map(|k| {
                let (x, y) = self.node_coord(k);
                g(x, y)
            })
            .collect()
    }

    /// Evaluates the Q2 function with nodal values `u` at `(x, y)`.
    pub fn evaluate(&self, u: &[f64], x: f64, y: f64) -> f64 {
        let n = self.cells_per_side;
        let locate = |t: f64| {
            let s = t * n as f64;
            let c = (s.floor().max(0.0) as usize).min(n - 1);
            (c, s - c as f64)
        };
        let (cx, sx) = locate(x);
        let (cy, sy) = locate(y);
        let (bx, by) = (p2_basis(sx), p2_basis(sy));
        let nodes = self.cell_nodes(cx, cy);
        let mut v = 0.0;
        for b in 0..3 {
            for a in 0..3 {
                v += u[nodes[3 * b + a]] * bx[a] * by[b];
            }
        }
        v
    }
}

/// Reference-cell tables shared by every assembly routine.
struct ReferenceQ2 {
    /// `w_g ∇φ_i·∇φ_j` on the unit reference square, per Gauss point.
    grad: [[f64; 81]; 9],
    /// `w_g φ_i φ_j`, per Gauss point.
    mass: [[f64; 81]; 9],
    /// `w_g φ_i`, per Gauss point.
    load: [[f64; 9]; 9],
}

impl ReferenceQ2 {
    fn new() -> Self {
        let mut grad = [[0.0; 81]; 9];
        let mut mass = [[0.0; 81]; 9];
        let mut load = [[0.0; 9]; 9];
        for gy in 0..3 {
            for gx in 0..3 {
                let g = 3 * gy + gx;
                let w = GAUSS3_WEIGHTS[gx] * GAUSS3_WEIGHTS[gy];
                let (bx, by) = (p2_basis(GAUSS3_POINTS[gx]), p2_basis(GAUSS3_POINTS[gy]));
                let (dx, dy) = (
                    p2_basis_deriv(GAUSS3_POINTS[gx]),
                    p2_basis_deriv(GAUSS3_POINTS[gy]),
                );
                let mut phi = [0.0; 9];
                let mut phix = [0.0; 9];
                let mut phiy = [0.0; 9];
                for b in 0..3 {
                    for a in 0..3 {
                        phi[3 * b + a] = bx[a] * by[b];
                        phix[3 * b + a] = dx[a] * by[b];
                        phiy[3 * b + a] = bx[a] * dy[b];
                    }
                }
                for i in 0..9 {
                    load[g][i] = w * phi[i];
                    for j in 0..9 {
                        grad[g][9 * i + j] = w * (phix[i] * phix[j] + phiy[i] * phiy[j]);
                        mass[g][9 * i + j] = w * (phi[i] * phi[j]);
                    }
                }
            }
        }
        Self { grad, mass, load }
    }
}

/// Sparsity pattern of all Q2 couplings on a level plus the scatter map
/// from local 9 × 9 cell matrices into the CSR value array.
#[derive(Debug, Clone)]
pub struct FemPattern {
    template: CsrMatrix,
    scatter: Vec<[usize; 81]>,
}

impl FemPattern {
    pub fn new(mesh: &MeshLevel) -> Self {
        let n = mesh.cells_per_side();
        let mut triplets = Vec::with_capacity(81 * n * n);
        for cy in 0..n {
            for cx in 0..n {
                let nodes = mesh.cell_nodes(cx, cy);
                for &r in &nodes {
                    for &c in &nodes {
                        triplets.push((r, c, 0.0));
                    }
                }
            }
        }
        let nn = mesh.node_count();
        let template = CsrMatrix::from_triplets(nn, nn, &triplets)
            .expect("cell node numbers lie inside the mesh");
        let mut scatter = Vec::with_capacity(n * n);
        for cy in 0..n {
            for cx in 0..n {
                let nodes = mesh.cell_nodes(cx, cy);
                let mut map = [0usize; 81];
                for i in 0..9 {
                    for j in 0..9 {
                        map[9 * i + j] = template
                            .position(nodes[i], nodes[j])
                            .expect("pattern contains every cell coupling");
                    }
                }
                scatter.push(map);
            }
        }
        Self { template, scatter }
    }

    pub fn template(&self) -> &CsrMatrix {
        &self.template
    }

    /// Stiffness `∫ a ∇φ_i·∇φ_j` from coefficient values at the quadrature
    /// points (in [`MeshLevel::quadrature_points`] order).
    pub fn stiffness_from_qp(&self, coeff: &[f64]) -> CsrMatrix {
        assert_eq!(coeff.len(), 9 * self.scatter.len());
        let reference = reference();
        let mut values = vec![0.0; self.template.nnz()];
        for (cell, map) in self.scatter.iter().enumerate() {
            let a = &coeff[9 * cell..9 * cell + 9];
            let mut local = [0.0; 81];
            for (g, ag) in a.iter().enumerate() {
                for (l, d) in local.iter_mut().zip(&reference.grad[g]) {
                    *l += ag * d;
                }
            }
            for (pos, v) in map.iter().zip(&local) {
                values[*pos] += v;
            }
        }
        self.template.with_values(values)
    }

    /// Mass matrix `∫ φ_i φ_j`.
    pub fn mass(&self, mesh: &MeshLevel) -> CsrMatrix {
        let reference = reference();
        let h2 = mesh.cell_size().powi(2);
        let mut local = [0.0; 81];
        for g in 0..9 {
            for (l, m) in local.iter_mut().zip(&reference.mass[g]) {
                *l += h2 * m;
            }
        }
        let mut values = vec![0.0; self.template.nnz()];
        for map in &self.scatter {
            for (pos, v) in map.iter().zip(&local) {
                values[*pos] += v;
            }
        }
        self.template.with_values(values)
    }
}

fn reference() -> &'static ReferenceQ2 {
    static TABLES: std::sync::OnceLock<ReferenceQ2> = std::sync::OnceLock::new();
    TABLES.get_or_init(ReferenceQ2::new)
}

/// Unconstrained stiffness matrix for a pointwise coefficient.
pub fn assemble_stiffness(mesh: &MeshLevel, coeff: &dyn Fn(f64, f64) -> f64) -> CsrMatrix {
    let values: Vec<f64> = mesh
        .quadrature_points()
        .into_iter()
        .map(|(x, y)| coeff(x, y))
        .collect();
    FemPattern::new(mesh).stiffness_from_qp(&values)
}

pub fn assemble_mass(mesh: &MeshLevel) -> CsrMatrix {
    FemPattern::new(mesh).mass(mesh)
}

/// Load vector `∫ f φ_j`, unconstrained.
pub fn assemble_load(mesh: &MeshLevel, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    let reference = reference();
    let h2 = mesh.cell_size().powi(2);
    let n = mesh.cells_per_side();
    let pts = mesh.quadrature_points();
    let mut rhs = vec![0.0; mesh.node_count()];
    for cy in 0..n {
        for cx in 0..n {
            let cell = cy * n + cx;
            let nodes = mesh.cell_nodes(cx, cy);
            for g in 0..9 {
                let (x, y) = pts[9 * cell + g];
                let fg = f(x, y) * h2;
                for (i, &node) in nodes.iter().enumerate() {
                    rhs[node] += fg * reference.load[g][i];
                }
            }
        }
    }
    rhs
}

/// Removes every coupling to a constrained dof and puts `diag` on the
/// constrained diagonal. The returned pattern depends only on the input
/// pattern and the mask.
pub fn constrain(matrix: &CsrMatrix, fixed: &[bool], diag: f64) -> CsrMatrix {
    let n = matrix.nrows();
    assert_eq!(fixed.len(), n);
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(matrix.nnz());
    let mut values = Vec::with_capacity(matrix.nnz());
    row_ptr.push(0);
    for i in 0..n {
        if fixed[i] {
            col_idx.push(i);
            values.push(diag);
        } else {
            let (cols, vals) = matrix.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if !fixed[c] {
                    col_idx.push(c);
                    values.push(v);
                }
            }
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix::from_raw(n, n, row_ptr, col_idx, values).expect("filtered rows stay sorted")
}

/// Zero Dirichlet data by symmetric elimination: boundary rows and columns
/// are cleared, the boundary diagonal set to one and the boundary load to zero.
pub fn apply_dirichlet(
    mesh: &MeshLevel,
    matrix: &CsrMatrix,
    rhs: &[f64],
) -> Result<(CsrMatrix, Vec<f64>)> {
    if matrix.nrows() != mesh.node_count() || rhs.len() != mesh.node_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.node_count(),
            got: matrix.nrows().min(rhs.len()),
        });
    }
    let constrained = constrain(matrix, mesh.boundary(), 1.0);
    let rhs = rhs
        .iter()
        .zip(mesh.boundary())
        .map(|(&v, &b)| if b { 0.0 } else { v })
        .collect();
    Ok((constrained, rhs))
}

/// Q2 interpolation from one level to the next finer one.
#[derive(Debug, Clone)]
pub struct Transfer {
    prolongation: CsrMatrix,
    restriction: CsrMatrix,
}

impl Transfer {
    pub fn between(coarse: &MeshLevel, fine: &MeshLevel) -> Result<Self> {
        if fine.cells_per_side() != 2 * coarse.cells_per_side() {
            return Err(Error::InvalidArgument(format!(
                "levels {} and {} are not adjacent",
                coarse.level(),
                fine.level()
            )));
        }
        let n = coarse.cells_per_side();
        let (mc, mf) = (coarse.nodes_per_side(), fine.nodes_per_side());
        // 1D weights: fine node i sits in coarse cell c at local offset s
        let weights_1d: Vec<Vec<(usize, f64)>> = (0..mf)
            .map(|i| {
                let c = (i / 4).min(n - 1);
                let s = (i - 4 * c) as f64 / 4.0;
                p2_basis(s)
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| **w != 0.0)
                    .map(|(k, &w)| (2 * c + k, w))
                    .collect()
            })
            .collect();
        let mut triplets = Vec::new();
        for jf in 0..mf {
            for if_ in 0..mf {
                let row = jf * mf + if_;
                for &(jc, wy) in &weights_1d[jf] {
                    for &(ic, wx) in &weights_1d[if_] {
                        triplets.push((row, jc * mc + ic, wy * wx));
                    }
                }
            }
        }
        let prolongation = CsrMatrix::from_triplets(mf * mf, mc * mc, &triplets)?;
        let restriction = prolongation.transpose();
        Ok(Self {
            prolongation,
            restriction,
        })
    }

    pub fn prolongation(&self) -> &CsrMatrix {
        &self.prolongation
    }

    /// Exactly the transpose of the prolongation.
    pub fn restriction(&self) -> &CsrMatrix {
        &self.restriction
    }
}

/// Levels `1..=L_max` and the transfers between consecutive levels
/// (`transfers[k]` maps level `k+1` to level `k+2`).
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<MeshLevel>,
    pub transfers: Vec<Transfer>,
}

pub fn build_hierarchy(l_max: usize) -> Result<Hierarchy> {
    if l_max == 0 {
        return Err(Error::InvalidArgument("hierarchy needs L_max >= 1".into()));
    }
    let levels = (1..=l_max).map(MeshLevel::new).collect::<Result<Vec<_>>>()?;
    let transfers = levels
        .windows(2)
        .map(|w| Transfer::between(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(Hierarchy { levels, transfers })
}

impl Hierarchy {
    pub fn finest(&self) -> &MeshLevel {
        self.levels.last().expect("hierarchy is never empty")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::direct::BandedCholesky;
    use std::f64::consts::PI;

    #[test]
    fn level_sizes() {
        let h = build_hierarchy(3).unwrap();
        assert_eq!(h.levels.len(), 3);
        assert_eq!(h.levels[0].cell_count(), 4);
        assert_eq!(h.levels[0].node_count(), 25);
        assert_eq!(h.finest().cells_per_side(), 8);
        assert_eq!(h.finest().cell_count(), 64);
        assert_eq!(h.finest().node_count(), 289);
        assert_eq!(h.transfers.len(), 2);
        assert!(build_hierarchy(0).is_err());
        assert!(matches!(MeshLevel::new(70), Err(Error::Overflow(_))));
        assert!(matches!(MeshLevel::new(40), Err(Error::Overflow(_))));
    }

    #[test]
    fn nested_coordinates() {
        let h = build_hierarchy(3).unwrap();
        for w in h.levels.windows(2) {
            let fine: std::collections::HashSet<(u64, u64)> = (0..w[1].node_count())
                .map(|k| {
                    let (x, y) = w[1].node_coord(k);
                    (x.to_bits(), y.to_bits())
                })
                .collect();
            for k in 0..w[0].node_count() {
                let (x, y) = w[0].node_coord(k);
                assert!(fine.contains(&(x.to_bits(), y.to_bits())));
            }
        }
    }

    #[test]
    fn prolongation_reproduces_biquadratics() {
        let h = build_hierarchy(4).unwrap();
        let g = |x: f64, y: f64| x * x * y * y - 0.3 * x * y + y;
        for (k, t) in h.transfers.iter().enumerate() {
            let coarse = h.levels[k].interpolate(&g);
            let fine = h.levels[k + 1].interpolate(&g);
            let mut got = vec![0.0; fine.len()];
            t.prolongation().mul_vec(&coarse, &mut got);
            for (a, b) in got.iter().zip(&fine) {
                assert!((a - b).abs() < 1e-13);
            }
            assert_eq!(*t.restriction(), t.prolongation().transpose());
        }
    }

    #[test]
    fn stiffness_kills_constants_and_scales() {
        let mesh = MeshLevel::new(2).unwrap();
        let a = assemble_stiffness(&mesh, &|_, _| 1.0);
        assert!(a.is_symmetric());
        let ones = vec![1.0; mesh.node_count()];
        let mut y = vec![0.0; mesh.node_count()];
        a.mul_vec(&ones, &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-13));
        let c = 2.5;
        let ac = assemble_stiffness(&mesh, &|_, _| c);
        for (u, v) in ac.values().iter().zip(a.values()) {
            assert!((u - c * v).abs() <= 1e-15 * v.abs().max(1.0));
        }
        let var = assemble_stiffness(&mesh, &|x, y| 1.0 + x * y + (3.0 * x).sin());
        assert!(var.is_symmetric());
    }

    #[test]
    fn poisson_center_matches_fourier_series() {
        let mesh = MeshLevel::new(5).unwrap();
        let a = assemble_stiffness(&mesh, &|_, _| 1.0);
        let f = assemble_load(&mesh, &|_, _| 1.0);
        let (a, f) = apply_dirichlet(&mesh, &a, &f).unwrap();
        let u = BandedCholesky::factor(&a).unwrap().solve(&f);
        let mut series = 0.0;
        for m in (1..2000).step_by(2) {
            for n in (1..2000).step_by(2) {
                let (mf, nf) = (m as f64, n as f64);
                let s = ((mf * PI / 2.0).sin()) * ((nf * PI / 2.0).sin());
                series += 16.0 * s / (PI.powi(4) * mf * nf * (mf * mf + nf * nf));
            }
        }
        let center = u[mesh.center_node()];
        assert!((center - series).abs() < 1e-4, "{center} vs {series}");
        assert!((mesh.evaluate(&u, 0.5, 0.5) - center).abs() < 1e-15);
    }

    #[test]
    fn load_vectors() {
        let mesh = MeshLevel::new(2).unwrap();
        assert!(assemble_load(&mesh, &|_, _| 0.0).iter().all(|&v| v == 0.0));
        let total: f64 = assemble_load(&mesh, &|_, _| 1.0).iter().sum();
        assert!((total - 1.0).abs() < 1e-14);

        // exact integrals of the 1D P2 functions on a cell of width h are
        // h/6, 2h/3, h/6; a node collects the products from adjacent cells
        let mesh = MeshLevel::new(1).unwrap();
        let h = mesh.cell_size();
        let w1d = [h / 6.0, 2.0 * h / 3.0, h / 6.0];
        let mut oracle = vec![0.0; mesh.node_count()];
        for cy in 0..2 {
            for cx in 0..2 {
                let nodes = mesh.cell_nodes(cx, cy);
                for b in 0..3 {
                    for a in 0..3 {
                        oracle[nodes[3 * b + a]] += w1d[a] * w1d[b];
                    }
                }
            }
        }
        let got = assemble_load(&mesh, &|_, _| 1.0);
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - o).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_integrates_one() {
        let mesh = MeshLevel::new(2).unwrap();
        let m = assemble_mass(&mesh);
        let ones = vec![1.0; mesh.node_count()];
        let mut y = vec![0.0; ones.len()];
        m.mul_vec(&ones, &mut y);
        assert!((crate::sparse::dot(&ones, &y) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_elimination() {
        let mesh = MeshLevel::new(2).unwrap();
        let a = assemble_stiffness(&mesh, &|x, y| 0.5 + x * x + y);
        let f = assemble_load(&mesh, &|x, _| 1.0 + x);
        let (ac, fc) = apply_dirichlet(&mesh, &a, &f).unwrap();
        assert!(ac.is_symmetric());
        let u = BandedCholesky::factor(&ac).unwrap().solve(&fc);
        for k in 0..mesh.node_count() {
            if mesh.is_boundary(k) {
                assert_eq!(u[k], 0.0);
            }
        }

        // reduced system oracle: delete boundary rows and columns
        let interior: Vec<usize> = (0..mesh.node_count()).filter(|&k| !mesh.is_boundary(k)).collect();
        let dense = a.to_dense();
        let n = interior.len();
        let red = nalgebra::DMatrix::from_fn(n, n, |i, j| dense[(interior[i], interior[j])]);
        let rhs = nalgebra::DVector::from_fn(n, |i, _| f[interior[i]]);
        let sol = red.lu().solve(&rhs).unwrap();
        for (i, &k) in interior.iter().enumerate() {
            assert!((sol[i] - u[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn constrained_stiffness_is_positive_definite() {
        for level in 1..=3 {
            let mesh = MeshLevel::new(level).unwrap();
            let a = assemble_stiffness(&mesh, &|x, y| 0.01 + (x - y).powi(2));
            let zero = vec![0.0; mesh.node_count()];
            let (ac, _) = apply_dirichlet(&mesh, &a, &zero).unwrap();
            assert!(ac.to_dense().cholesky().is_some());
        }
    }

    #[test]
    fn evaluate_interpolates_biquadratic() {
        let mesh = MeshLevel::new(2).unwrap();
        let g = |x: f64, y: f64| x * x * y - y * y + 0.25;
        let u = mesh.interpolate(&g);
        for &(x, y) in &[(0.13, 0.77), (0.5, 0.5), (0.99, 0.01), (1.0, 1.0)] {
            assert!((mesh.evaluate(&u, x, y) - g(x, y)).abs() < 1e-14);
        }
    }
}
