//! Zero fill-in incomplete LU in natural ordering.

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::sparse::{max_abs, CsrMatrix};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IluOptions {
    /// On a zero pivot, refactor once with `1e-12·‖diag‖∞` added to the
    /// diagonal instead of failing.
    pub shift_on_zero_pivot: bool,
}

/// `L` (unit diagonal, implicit) and `U` stored together on the pattern of
/// the input matrix.
#[derive(Debug, Clone)]
pub struct IluFactors {
    lu: CsrMatrix,
    diag: Vec<usize>,
    shift: f64,
}

pub fn ilu0(a: &CsrMatrix, opts: IluOptions) -> Result<IluFactors> {
    match factor(a, 0.0) {
        Err(Error::ZeroPivot { .. }) if opts.shift_on_zero_pivot => {
            let shift = 1e-12 * max_abs(&a.diagonal());
            factor(a, shift)
        }
        other => other,
    }
}

fn factor(a: &CsrMatrix, shift: f64) -> Result<IluFactors> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        diag.push(a.position(i, i).ok_or(Error::ZeroPivot { row: i, pivot: 0.0 })?);
    }
    let tiny = f64::EPSILON * max_abs(&a.diagonal()).max(f64::MIN_POSITIVE);
    let row_ptr = a.row_ptr();
    let cols = a.col_idx();
    let mut vals = a.values().to_vec();
    for &d in &diag {
        vals[d] += shift;
    }
    // where[j] = position of column j in the current row, or usize::MAX
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
        for pos in lo..hi {
            slot[cols[pos]] = pos;
        }
        for pos in lo..diag[i] {
            let k = cols[pos];
            let lik = vals[pos] / vals[diag[k]];
            vals[pos] = lik;
            for kpos in diag[k] + 1..row_ptr[k + 1] {
                let j = cols[kpos];
                let target = slot[j];
                if target != usize::MAX {
                    vals[target] -= lik * vals[kpos];
                }
            }
        }
        for pos in lo..hi {
            slot[cols[pos]] = usize::MAX;
        }
        let pivot = vals[diag[i]];
        if !(pivot.abs() > tiny) {
            return Err(Error::ZeroPivot { row: i, pivot });
        }
    }
    Ok(IluFactors {
        lu: a.with_values(vals),
        diag,
        shift,
    })
}

impl IluFactors {
    /// Diagonal shift that was applied (zero unless a retry happened).
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn factors(&self) -> &CsrMatrix {
        &self.lu
    }

    /// `x = U⁻¹ L⁻¹ b`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let row_ptr = self.lu.row_ptr();
        let cols = self.lu.col_idx();
        let vals = self.lu.values();
        let n = b.len();
        for i in 0..n {
            let mut s = b[i];
            for pos in row_ptr[i]..self.diag[i] {
                s -= vals[pos] * x[cols[pos]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for pos in self.diag[i] + 1..row_ptr[i + 1] {
                s -= vals[pos] * x[cols[pos]];
            }
            x[i] = s / vals[self.diag[i]];
        }
    }
}

impl LinearOperator for IluFactors {
    fn dim(&self) -> usize {
        self.lu.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.solve_into(x, y);
    }
}
