//! Direct solvers: banded Cholesky for SPD spatial problems and dense LU
//! with partial pivoting for small coarse systems.

use nalgebra::{DMatrix, DVector};

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Cholesky factorization in symmetric band storage.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    // row i holds L[i, i-bw..=i] at offsets 0..=bw
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let mut bw = 0;
        for i in 0..n {
            if let Some(&c) = a.row(i).0.first() {
                bw = bw.max(i.saturating_sub(c));
            }
        }
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c <= i {
                    band[i * w + bw - (i - c)] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = band[i * w + bw - (i - j)];
                for k in jlo..j {
                    s -= band[i * w + bw - (i - k)] * band[j * w + bw - (j - k)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::ZeroPivot { row: i, pivot: s });
                    }
                    band[i * w + bw] = s.sqrt();
                } else {
                    band[i * w + bw - (i - j)] = s / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.band[i * w + bw - (i - k)] * x[k];
            }
            x[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= self.band[k * w + bw - (k - i)] * x[k];
            }
            x[i] = s / self.band[i * w + bw];
        }
        x
    }
}

/// Dense LU with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl DenseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        Self::factor_dense(a.to_dense())
    }

    pub fn factor_dense(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let lu = a.lu();
        let u = lu.u();
        let scale = u.amax();
        if let Some(column) = (0..u.nrows()).find(|&i| !(u[(i, i)].abs() > f64::EPSILON * scale)) {
            return Err(Error::Singular { column });
        }
        Ok(Self { lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = DVector::from_column_slice(b);
        self.lu.solve_mut(&mut x);
        x.as_slice().to_vec()
    }
}

impl LinearOperator for DenseLu {
    fn dim(&self) -> usize {
        self.lu.l().nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.solve(x));
    }
}
