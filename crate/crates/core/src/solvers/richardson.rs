//! Preconditioned Richardson iteration `u ← u + P⁻¹(F − K u)`.

use super::LinearOperator;

/// Runs exactly `i_max` sweeps starting from the current `u`.
pub fn richardson(
    op: &dyn LinearOperator,
    pre: &dyn LinearOperator,
    rhs: &[f64],
    i_max: usize,
    u: &mut [f64],
) {
    let n = rhs.len();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    for _ in 0..i_max {
        op.apply(u, &mut r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        pre.apply(&r, &mut z);
        crate::sparse::axpy(1.0, &z, u);
    }
}

/// `i_max` Richardson sweeps from a zero initial guess, as a linear operator
/// on the right-hand side.
pub struct Richardson<A, P> {
    op: A,
    pre: P,
    i_max: usize,
}

impl<A: LinearOperator, P: LinearOperator> Richardson<A, P> {
    pub fn new(op: A, pre: P, i_max: usize) -> Self {
        Self { op, pre, i_max }
    }
}

impl<A: LinearOperator, P: LinearOperator> LinearOperator for Richardson<A, P> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        if self.i_max == 0 {
            return;
        }
        // the first sweep from zero is a single preconditioner application
        self.pre.apply(x, y);
        richardson(&self.op, &self.pre, x, self.i_max - 1, y);
    }
}
