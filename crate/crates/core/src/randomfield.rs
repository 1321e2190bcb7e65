//! Lognormal random coefficient: exponential covariance, its Karhunen–Loève
//! eigenpairs, and the polynomial-chaos coefficients of
//! `a(x, y) = a_min + exp(μ + Σ_n √λ_n b_n(x) y_n)`.
//!
//! The covariance `σ² exp(-(|x1-x̂1| + |x2-x̂2|)/L_c)` factors over the two
//! coordinates, and the Q2 space on a uniform mesh is the tensor product of two
//! 1D P2 spaces. The Galerkin matrices (covariance and mass, both integrated
//! with 3 × 3 Gauss points per cell pair) therefore factor exactly as
//! `C = σ² C₁ ⊗ C₁` and `M = M₁ ⊗ M₁`, and the 2D generalized eigenpairs are
//! products of 1D ones. [`solve_kl`] uses that factorization;
//! [`galerkin_kl_dense`] solves the unfactored 2D problem for cross-checks.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::chaos::{hermite_all, IndexSet};
use crate::error::{Error, Result};
use crate::meshfem::{p2_basis, MeshLevel, GAUSS3_POINTS, GAUSS3_WEIGHTS};

pub const DEFAULT_MU: f64 = 0.0;
pub const DEFAULT_A_MIN: f64 = 0.01;
pub const DEFAULT_CORRELATION_LENGTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    sigma: f64,
    corr_len: f64,
}

impl CovarianceSpec {
    pub fn new(sigma: f64, corr_len: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "standard deviation must be positive, got {sigma}"
            )));
        }
        // diameter of the unit square
        if !(corr_len > 0.0 && corr_len <= std::f64::consts::SQRT_2) {
            return Err(Error::InvalidArgument(format!(
                "correlation length must lie in (0, sqrt 2], got {corr_len}"
            )));
        }
        Ok(Self { sigma, corr_len })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn corr_len(&self) -> f64 {
        self.corr_len
    }
}

pub fn covariance(x: (f64, f64), xh: (f64, f64), spec: &CovarianceSpec) -> f64 {
    let dist = (x.0 - xh.0).abs() + (x.1 - xh.1).abs();
    spec.sigma * spec.sigma * (-dist / spec.corr_len).exp()
}

/// Continuous piecewise quadratic function on the uniform 1D mesh of `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct P2Function1D {
    cells: usize,
    values: Vec<f64>,
}

impl P2Function1D {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 || values.len() % 2 == 0 {
            return Err(Error::InvalidArgument(
                "a P2 function needs 2n+1 nodal values".into(),
            ));
        }
        Ok(Self {
            cells: (values.len() - 1) / 2,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        let s = t * self.cells as f64;
        let c = (s.floor().max(0.0) as usize).min(self.cells - 1);
        let b = p2_basis(s - c as f64);
        b[0] * self.values[2 * c] + b[1] * self.values[2 * c + 1] + b[2] * self.values[2 * c + 2]
    }
}

/// One KL term: eigenvalue and the separable eigenfunction
/// `b(x, y) = sign · fx(x) · fy(y)`.
#[derive(Debug, Clone)]
pub struct KlMode {
    pub eigenvalue: f64,
    pub sign: f64,
    pub fx: P2Function1D,
    pub fy: P2Function1D,
}

impl KlMode {
    pub fn eigenfunction(&self, x: f64, y: f64) -> f64 {
        self.sign * self.fx.eval(x) * self.fy.eval(y)
    }

    /// `c_n(x) = √λ_n b_n(x)`.
    pub fn scaled(&self, x: f64, y: f64) -> f64 {
        self.eigenvalue.sqrt() * self.eigenfunction(x, y)
    }
}

/// Truncated KL expansion of `γ = log(a - a_min)`.
#[derive(Debug, Clone)]
pub struct KlField {
    pub mu: f64,
    pub a_min: f64,
    pub modes: Vec<KlMode>,
}

impl KlField {
    pub fn new(mu: f64, a_min: f64, modes: Vec<KlMode>) -> Result<Self> {
        if !(a_min >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "coefficient floor must be non-negative, got {a_min}"
            )));
        }
        Ok(Self { mu, a_min, modes })
    }

    pub fn terms(&self) -> usize {
        self.modes.len()
    }

    pub fn gamma(&self, x: f64, y: f64, ys: &[f64]) -> f64 {
        self.mu
            + self
                .modes
                .iter()
                .zip(ys)
                .map(|(m, &yn)| m.scaled(x, y) * yn)
                .sum::<f64>()
    }

    /// Sampled coefficient `a_KL(x, y)`.
    pub fn coefficient(&self, x: f64, y: f64, ys: &[f64]) -> f64 {
        self.a_min + self.gamma(x, y, ys).exp()
    }

    pub fn write_eigenvalues_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,lambda")?;
        for (k, m) in self.modes.iter().enumerate() {
            writeln!(w, "{},{:.17e}", k + 1, m.eigenvalue)?;
        }
        Ok(())
    }

    /// Nodal values of every `b_n` on `mesh`, one row per node.
    pub fn write_modes_csv<W: Write>(&self, mesh: &MeshLevel, mut w: W) -> Result<()> {
        write!(w, "node,x,y")?;
        for k in 0..self.modes.len() {
            write!(w, ",b{}", k + 1)?;
        }
        writeln!(w)?;
        for node in 0..mesh.node_count() {
            let (x, y) = mesh.node_coord(node);
            write!(w, "{node},{x},{y}")?;
            for m in &self.modes {
                write!(w, ",{:.17e}", m.eigenfunction(x, y))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// 1D Galerkin mass and (unit-variance) covariance matrices on the P2 space
/// with `cells` uniform cells.
pub fn galerkin_1d(cells: usize, corr_len: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = 2 * cells + 1;
    let h = 1.0 / cells as f64;
    // (global node, weight * shape value, position) per Gauss point
    let mut gauss: Vec<(f64, [(usize, f64); 3])> = Vec::with_capacity(3 * cells);
    for c in 0..cells {
        for (&t, &w) in GAUSS3_POINTS.iter().zip(&GAUSS3_WEIGHTS) {
            let b = p2_basis(t);
            let x = (c as f64 + t) * h;
            gauss.push((
                x,
                [
                    (2 * c, w * h * b[0]),
                    (2 * c + 1, w * h * b[1]),
                    (2 * c + 2, w * h * b[2]),
                ],
            ));
        }
    }
    let mut mass = DMatrix::zeros(m, m);
    for c in 0..cells {
        for (&t, &w) in GAUSS3_POINTS.iter().zip(&GAUSS3_WEIGHTS) {
            let b = p2_basis(t);
            for i in 0..3 {
                for j in 0..3 {
                    mass[(2 * c + i, 2 * c + j)] += w * h * b[i] * b[j];
                }
            }
        }
    }
    let mut cov = DMatrix::zeros(m, m);
    for (xa, wa) in &gauss {
        for (xb, wb) in &gauss {
            let k = (-(xa - xb).abs() / corr_len).exp();
            for &(i, vi) in wa {
                for &(j, vj) in wb {
                    cov[(i, j)] += k * vi * vj;
                }
            }
        }
    }
    (mass, cov)
}

/// Generalized symmetric eigenpairs of `C v = μ M v`, sorted descending,
/// eigenvectors `M`-orthonormal (columns).
pub fn generalized_eigen(cov: &DMatrix<f64>, mass: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Eigen("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let n = cov.nrows();
    let linv_c = l
        .solve_lower_triangular(cov)
        .ok_or_else(|| Error::Eigen("triangular solve failed".into()))?;
    let s = l
        .solve_lower_triangular(&linv_c.transpose())
        .ok_or_else(|| Error::Eigen("triangular solve failed".into()))?;
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(s, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let w = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    let v = l
        .transpose()
        .solve_upper_triangular(&w)
        .ok_or_else(|| Error::Eigen("triangular solve failed".into()))?;
    Ok((values, v))
}

const SIGN_TOL: f64 = 1e-10;

/// Sign convention: positive mean, otherwise positive at the first node that
/// is not numerically zero.
fn orient(integral: f64, values: impl Iterator<Item = f64> + Clone) -> f64 {
    if integral.abs() > SIGN_TOL {
        return integral.signum();
    }
    let scale = values.clone().fold(0.0f64, |m, v| m.max(v.abs()));
    values
        .into_iter()
        .find(|v| v.abs() > 1e-8 * scale)
        .map_or(1.0, f64::signum)
}

/// Leading `n` eigenpairs of the Galerkin-discretized covariance operator on
/// the Q2 space of `mesh`.
pub fn solve_kl(spec: &CovarianceSpec, mesh: &MeshLevel, n: usize) -> Result<Vec<KlMode>> {
    if n == 0 {
        return Err(Error::InvalidArgument("KL truncation order must be >= 1".into()));
    }
    let cells = mesh.cells_per_side();
    let m = 2 * cells + 1;
    if n > m * m {
        return Err(Error::InvalidArgument(format!(
            "{n} KL terms requested but the mesh resolves only {}",
            m * m
        )));
    }
    let (mass, cov) = galerkin_1d(cells, spec.corr_len());
    let (mu, vecs) = generalized_eigen(&cov, &mass)?;

    let k = n.min(m);
    let ones = DMatrix::from_element(1, m, 1.0);
    let mut factors = Vec::with_capacity(k);
    for a in 0..k {
        let mut v: Vec<f64> = vecs.column(a).iter().copied().collect();
        let integral = (&ones * &mass * vecs.column(a))[(0, 0)];
        let s = orient(integral, v.iter().copied());
        for x in &mut v {
            *x *= s;
        }
        factors.push((s * integral, P2Function1D::new(v)?));
    }

    let var = spec.sigma() * spec.sigma();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            candidates.push((var * (mu[a] * mu[b]), a, b));
        }
    }
    // stable: equal eigenvalues keep (x-factor, y-factor) lexicographic order
    candidates.sort_by(|p, q| q.0.total_cmp(&p.0));
    candidates.truncate(n);
    if let Some(&(lambda, _, _)) = candidates.iter().find(|c| !(c.0 > 0.0)) {
        return Err(Error::Eigen(format!(
            "requested KL term has non-positive eigenvalue {lambda:e}: N exceeds the discrete rank"
        )));
    }

    Ok(candidates
        .into_iter()
        .map(|(lambda, a, b)| {
            let (ia, fa) = &factors[a];
            let (ib, fb) = &factors[b];
            let nodal = fb
                .values()
                .iter()
                .flat_map(|vy| fa.values().iter().map(move |vx| vx * vy));
            let sign = orient(ia * ib, nodal);
            KlMode {
                eigenvalue: lambda,
                sign,
                fx: fa.clone(),
                fy: fb.clone(),
            }
        })
        .collect())
}

/// Leading eigenvalues of the unfactored 2D Galerkin problem assembled by
/// direct 3 × 3 quadrature of the double integral; cost grows like the fourth
/// power of the node count per side, so only for small levels.
pub fn galerkin_kl_dense(spec: &CovarianceSpec, mesh: &MeshLevel, n: usize) -> Result<Vec<f64>> {
    let nn = mesh.node_count();
    let cells = mesh.cells_per_side();
    let h = mesh.cell_size();
    let mut gauss: Vec<((f64, f64), [(usize, f64); 9])> = Vec::new();
    for cy in 0..cells {
        for cx in 0..cells {
            let nodes = mesh.cell_nodes(cx, cy);
            for (gy, &ty) in GAUSS3_POINTS.iter().enumerate() {
                for (gx, &tx) in GAUSS3_POINTS.iter().enumerate() {
                    let w = GAUSS3_WEIGHTS[gx] * GAUSS3_WEIGHTS[gy] * h * h;
                    let (bx, by) = (p2_basis(tx), p2_basis(ty));
                    let mut loc = [(0usize, 0.0); 9];
                    for b in 0..3 {
                        for a in 0..3 {
                            loc[3 * b + a] = (nodes[3 * b + a], w * bx[a] * by[b]);
                        }
                    }
                    gauss.push((((cx as f64 + tx) * h, (cy as f64 + ty) * h), loc));
                }
            }
        }
    }
    let mut cov = DMatrix::zeros(nn, nn);
    let mut mass = DMatrix::zeros(nn, nn);
    for (pa, la) in &gauss {
        for (pb, lb) in &gauss {
            let c = covariance(*pa, *pb, spec);
            for &(i, vi) in la {
                for &(j, vj) in lb {
                    cov[(i, j)] += c * vi * vj;
                }
            }
        }
    }
    let mass_csr = crate::meshfem::assemble_mass(mesh);
    for i in 0..nn {
        let (cols, vals) = mass_csr.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            mass[(i, c)] = v;
        }
    }
    let (values, _) = generalized_eigen(&cov, &mass)?;
    Ok(values.into_iter().take(n).collect())
}

/// Exact eigenvalues of the kernel `exp(-|s - t|/L_c)` on `[0, 1]`, largest
/// first. With `c = 1/L_c` and half-width `h = 1/2` they are
/// `2c/(ω² + c²)` where `ω` solves `c = ω tan(ωh)` (even eigenfunctions) or
/// `ω = -c tan(ωh)` (odd ones).
pub fn exponential_kernel_eigenvalues(corr_len: f64, count: usize) -> Vec<f64> {
    let c = 1.0 / corr_len;
    let h = 0.5;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let bisect = |f: &dyn Fn(f64) -> f64, lo: f64, hi: f64| {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let eps = 1e-12;
    let mut values = Vec::with_capacity(2 * count);
    for k in 0..count {
        let base = k as f64 * std::f64::consts::PI;
        // decreasing in ω on each branch interval
        let even = |w: f64| c - w * (w * h).tan();
        let w = bisect(&even, (base + eps) / h, (base + half_pi - eps) / h);
        values.push(2.0 * c / (w * w + c * c));
        let odd = |w: f64| -(w + c * (w * h).tan());
        let w = bisect(&odd, (base + half_pi + eps) / h, (base + 2.0 * half_pi - eps) / h);
        values.push(2.0 * c / (w * w + c * c));
    }
    values.sort_by(|a, b| b.total_cmp(a));
    values.truncate(count);
    values
}

/// Leading eigenvalues of the separable 2D covariance: products of the 1D
/// values scaled by `σ²`.
pub fn separable_eigenvalues(spec: &CovarianceSpec, count: usize) -> Vec<f64> {
    let one_d = exponential_kernel_eigenvalues(spec.corr_len(), count);
    let mut products: Vec<f64> = one_d
        .iter()
        .flat_map(|a| one_d.iter().map(move |b| a * b))
        .map(|v| spec.sigma() * spec.sigma() * v)
        .collect();
    products.sort_by(|a, b| b.total_cmp(a));
    products.truncate(count);
    products
}

/// Polynomial-chaos coefficients `a_q(x)` of the lognormal coefficient.
#[derive(Debug, Clone)]
pub struct CoefficientPce {
    kl: KlField,
    data: IndexSet,
    inv_sqrt_factorial: Vec<f64>,
}

pub fn project_coefficient(kl: &KlField, data: &IndexSet) -> Result<CoefficientPce> {
    if kl.terms() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            got: kl.terms(),
        });
    }
    let inv_sqrt_factorial = (0..=data.degree())
        .scan(1.0f64, |fact, k| {
            if k > 0 {
                *fact *= k as f64;
            }
            Some(1.0 / fact.sqrt())
        })
        .collect();
    Ok(CoefficientPce {
        kl: kl.clone(),
        data: data.clone(),
        inv_sqrt_factorial,
    })
}

impl CoefficientPce {
    pub fn data_set(&self) -> &IndexSet {
        &self.data
    }

    pub fn kl(&self) -> &KlField {
        &self.kl
    }

    /// All `a_q(x, y)` in data-set order:
    /// `δ_{q0} a_min + exp(μ + ½ Σ c_n²) Π_n c_n^{q_n} / √(q_n!)`.
    pub fn eval_all(&self, x: f64, y: f64, out: &mut [f64]) {
        let n = self.kl.terms();
        let deg = self.data.degree();
        let mut powers = vec![0.0; n * (deg + 1)];
        let mut sq = 0.0;
        for (k, mode) in self.kl.modes.iter().enumerate() {
            let c = mode.scaled(x, y);
            sq += c * c;
            let mut p = 1.0;
            for d in 0..=deg {
                powers[k * (deg + 1) + d] = p * self.inv_sqrt_factorial[d];
                p *= c;
            }
        }
        let scale = (self.kl.mu + 0.5 * sq).exp();
        for (slot, q) in out.iter_mut().zip(self.data.indices()) {
            let mut v = scale;
            for (k, &qk) in q.components().iter().enumerate() {
                v *= powers[k * (deg + 1) + qk];
            }
            *slot = v;
        }
        out[0] += self.kl.a_min;
    }

    pub fn eval(&self, q: usize, x: f64, y: f64) -> f64 {
        let mut out = vec![0.0; self.data.len()];
        self.eval_all(x, y, &mut out);
        out[q]
    }

    /// Coefficient values at the quadrature points of `mesh`, indexed
    /// `[q][point]`.
    pub fn values_at_quadrature(&self, mesh: &MeshLevel) -> Vec<Vec<f64>> {
        let pts = mesh.quadrature_points();
        let mut out = vec![vec![0.0; pts.len()]; self.data.len()];
        let mut buf = vec![0.0; self.data.len()];
        for (g, &(x, y)) in pts.iter().enumerate() {
            self.eval_all(x, y, &mut buf);
            for (q, v) in buf.iter().enumerate() {
                out[q][g] = *v;
            }
        }
        out
    }

    /// Truncated expansion `Σ_q a_q(x) ψ_q(ys)`.
    pub fn reconstruct(&self, x: f64, y: f64, ys: &[f64]) -> f64 {
        let mut a = vec![0.0; self.data.len()];
        self.eval_all(x, y, &mut a);
        let mut psi = Vec::new();
        let mut tables = Vec::with_capacity(ys.len());
        for &yn in ys {
            hermite_all(self.data.degree(), yn, &mut psi);
            tables.push(psi.clone());
        }
        self.data
            .indices()
            .iter()
            .zip(&a)
            .map(|(q, aq)| {
                aq * q
                    .components()
                    .iter()
                    .enumerate()
                    .map(|(k, &d)| tables[k][d])
                    .product::<f64>()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos::{build_index_set, gauss_hermite, multivariate_psi};

    fn constant_mode(value: f64, eigenvalue: f64) -> KlMode {
        KlMode {
            eigenvalue,
            sign: 1.0,
            fx: P2Function1D::new(vec![value; 3]).unwrap(),
            fy: P2Function1D::new(vec![1.0; 3]).unwrap(),
        }
    }

    #[test]
    fn covariance_values() {
        let spec = CovarianceSpec::new(1.0, 0.1).unwrap();
        assert_eq!(covariance((0.3, 0.4), (0.3, 0.4), &spec), 1.0);
        let v = covariance((0.0, 0.0), (1.0, 0.0), &spec);
        assert!((v - (-10f64).exp()).abs() < 1e-18);
        let s2 = CovarianceSpec::new(0.5, 0.3).unwrap();
        let (a, b) = ((0.1, 0.9), (0.7, 0.2));
        assert_eq!(covariance(a, b, &s2), covariance(b, a, &s2));
        assert!(CovarianceSpec::new(0.0, 0.1).is_err());
        assert!(CovarianceSpec::new(1.0, 2.0).is_err());
    }

    #[test]
    fn kl_eigenvalues_positive_and_sorted() {
        let spec = CovarianceSpec::new(1.0, 0.1).unwrap();
        let mesh = MeshLevel::new(5).unwrap();
        let modes = solve_kl(&spec, &mesh, 4).unwrap();
        assert_eq!(modes.len(), 4);
        assert!(modes.windows(2).all(|w| w[0].eigenvalue >= w[1].eigenvalue));
        assert!(modes.iter().all(|m| m.eigenvalue > 0.0));
    }

    #[test]
    fn kl_modes_are_mass_orthonormal() {
        let spec = CovarianceSpec::new(1.3, 0.1).unwrap();
        let mesh = MeshLevel::new(3).unwrap();
        let modes = solve_kl(&spec, &mesh, 6).unwrap();
        let mass = crate::meshfem::assemble_mass(&mesh);
        let nodal: Vec<Vec<f64>> = modes
            .iter()
            .map(|m| mesh.interpolate(&|x, y| m.eigenfunction(x, y)))
            .collect();
        let mut mb = vec![0.0; mesh.node_count()];
        for (i, bi) in nodal.iter().enumerate() {
            mass.mul_vec(bi, &mut mb);
            for (j, bj) in nodal.iter().enumerate() {
                let ip = crate::sparse::dot(bj, &mb);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-10, "({i},{j}) = {ip}");
            }
        }
    }

    #[test]
    fn kl_sign_convention() {
        let spec = CovarianceSpec::new(1.0, 0.1).unwrap();
        let mesh = MeshLevel::new(3).unwrap();
        let modes = solve_kl(&spec, &mesh, 6).unwrap();
        let mass = crate::meshfem::assemble_mass(&mesh);
        let ones = vec![1.0; mesh.node_count()];
        let mut m1 = vec![0.0; ones.len()];
        mass.mul_vec(&ones, &mut m1);
        for m in &modes {
            let nodal = mesh.interpolate(&|x, y| m.eigenfunction(x, y));
            let integral = crate::sparse::dot(&nodal, &m1);
            if integral.abs() > 1e-8 {
                assert!(integral > 0.0);
            } else {
                let scale = crate::sparse::max_abs(&nodal);
                let first = nodal.iter().find(|v| v.abs() > 1e-6 * scale).unwrap();
                assert!(*first > 0.0);
            }
        }
        // the leading mode is the strictly positive one
        assert!(mesh.interpolate(&|x, y| modes[0].eigenfunction(x, y)).iter().all(|&v| v > 0.0));
    }

    #[test]
    fn factored_kl_matches_dense_galerkin() {
        let spec = CovarianceSpec::new(0.8, 0.1).unwrap();
        let mesh = MeshLevel::new(2).unwrap();
        let dense = galerkin_kl_dense(&spec, &mesh, 8).unwrap();
        let factored = solve_kl(&spec, &mesh, 8).unwrap();
        for (d, f) in dense.iter().zip(&factored) {
            assert!((d - f.eigenvalue).abs() < 1e-12 * d.abs().max(1e-3), "{d} vs {}", f.eigenvalue);
        }
    }

    #[test]
    fn kl_rank_errors() {
        let spec = CovarianceSpec::new(1.0, 0.1).unwrap();
        let mesh = MeshLevel::new(1).unwrap();
        assert!(solve_kl(&spec, &mesh, 0).is_err());
        assert!(solve_kl(&spec, &mesh, 26).is_err());
    }

    #[test]
    fn deterministic_coefficient() {
        let data = build_index_set(2, 3).unwrap();
        let kl = KlField::new(0.2, 0.01, vec![constant_mode(1.0, 0.0), constant_mode(1.0, 0.0)]).unwrap();
        let pce = project_coefficient(&kl, &data).unwrap();
        let mut out = vec![0.0; data.len()];
        pce.eval_all(0.3, 0.6, &mut out);
        assert!((out[0] - (0.01 + 0.2f64.exp())).abs() < 1e-15);
        assert!(out[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_term_first_coefficient() {
        let data = build_index_set(1, 4).unwrap();
        let kl = KlField::new(0.0, 0.0, vec![constant_mode(0.3, 1.0)]).unwrap();
        let pce = project_coefficient(&kl, &data).unwrap();
        let expect = 0.045f64.exp() * 0.3;
        assert!((pce.eval(1, 0.5, 0.5) - expect).abs() < 1e-15);
        // 20-point Gauss–Hermite projection of exp(0.3 y)
        let (x, w) = gauss_hermite(20);
        let quad: f64 = x.iter().zip(&w).map(|(&y, &wt)| wt * (0.3 * y).exp() * y).sum();
        assert!((quad - expect).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let spec = CovarianceSpec::new(0.9, 0.1).unwrap();
        let mesh = MeshLevel::new(3).unwrap();
        let pts = [(0.11, 0.73), (0.5, 0.5), (0.92, 0.08), (0.37, 0.41), (0.66, 0.95)];
        for n in 1..=3 {
            let modes = solve_kl(&spec, &mesh, n).unwrap();
            let kl = KlField::new(0.1, 0.01, modes).unwrap();
            let data = build_index_set(n, 5).unwrap();
            let pce = project_coefficient(&kl, &data).unwrap();
            let (gx, gw) = gauss_hermite(20);
            for &(x, y) in &pts {
                let mut closed = vec![0.0; data.len()];
                pce.eval_all(x, y, &mut closed);
                let mut quad = vec![0.0; data.len()];
                let total = gx.len().pow(n as u32);
                let mut ys = vec![0.0; n];
                for code in 0..total {
                    let mut c = code;
                    let mut w = 1.0;
                    for yk in ys.iter_mut() {
                        *yk = gx[c % gx.len()];
                        w *= gw[c % gx.len()];
                        c /= gx.len();
                    }
                    let a = kl.coefficient(x, y, &ys);
                    for (slot, q) in quad.iter_mut().zip(data.indices()) {
                        *slot += w * a * multivariate_psi(q, &ys).unwrap();
                    }
                }
                for (c, q) in closed.iter().zip(&quad) {
                    assert!((c - q).abs() < 1e-10, "N={n} ({x},{y}): {c} vs {q}");
                }
            }
        }
    }

    #[test]
    fn truncation_error_decreases_with_degree() {
        let spec = CovarianceSpec::new(1.0, 0.1).unwrap();
        let mesh = MeshLevel::new(3).unwrap();
        let kl = KlField::new(0.0, 0.01, solve_kl(&spec, &mesh, 2).unwrap()).unwrap();
        let (x, y) = (0.4, 0.55);
        let ys = [0.5, 0.5];
        let exact = kl.coefficient(x, y, &ys);
        let mut prev = f64::INFINITY;
        for q in 0..=8 {
            let pce = project_coefficient(&kl, &build_index_set(2, q).unwrap()).unwrap();
            let err = (pce.reconstruct(x, y, &ys) - exact).abs();
            assert!(err < prev, "q={q}: {err} !< {prev}");
            prev = err;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn mean_coefficient_above_floor() {
        let spec = CovarianceSpec::new(1.6, 0.1).unwrap();
        let mesh = MeshLevel::new(3).unwrap();
        let kl = KlField::new(-1.0, 0.01, solve_kl(&spec, &mesh, 2).unwrap()).unwrap();
        let pce = project_coefficient(&kl, &build_index_set(2, 3).unwrap()).unwrap();
        let vals = pce.values_at_quadrature(&mesh);
        assert!(vals[0].iter().all(|&v| v > 0.01));
        assert!(project_coefficient(&kl, &build_index_set(3, 3).unwrap()).is_err());
    }

    #[test]
    fn csv_dumps() {
        let spec = CovarianceSpec::new(1.0, 0.1).unwrap();
        let mesh = MeshLevel::new(1).unwrap();
        let kl = KlField::new(0.0, 0.01, solve_kl(&spec, &mesh, 2).unwrap()).unwrap();
        let mut buf = Vec::new();
        kl.write_eigenvalues_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
        let mut buf = Vec::new();
        kl.write_modes_csv(&mesh, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "node,x,y,b1,b2");
        assert_eq!(text.lines().count(), 26);
    }

    #[test]
    fn analytic_kernel_eigenvalues() {
        let v = exponential_kernel_eigenvalues(0.1, 6);
        assert!(v.windows(2).all(|w| w[0] > w[1]));
        // trace of the kernel equals the interval length
        let all = exponential_kernel_eigenvalues(0.1, 4000);
        let trace: f64 = all.iter().sum();
        assert!((trace - 1.0).abs() < 1e-3, "trace {trace}");
    }

    #[test]
    fn galerkin_eigenvalues_converge_monotonically() {
        // 3x3 Gauss on the kernel overweights its diagonal, so the discrete
        // values approach the exact ones from above
        let spec = CovarianceSpec::new(1.0, 0.1).unwrap();
        let exact = separable_eigenvalues(&spec, 4);
        let mut prev = vec![f64::INFINITY; 4];
        for level in 1..=5 {
            let modes = solve_kl(&spec, &MeshLevel::new(level).unwrap(), 4).unwrap();
            for (k, m) in modes.iter().enumerate() {
                let err = m.eigenvalue - exact[k];
                assert!(err > 0.0 && err < prev[k], "L={level} k={k}: {err}");
                prev[k] = err;
            }
        }
        for (err, e) in prev.iter().zip(&exact) {
            assert!(err / e < 0.02);
        }
    }
}
