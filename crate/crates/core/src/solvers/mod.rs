//! Krylov solver, preconditioner building blocks and the five solver stacks.

pub mod direct;
pub mod fieldsplit;
pub mod gmres;
pub mod ilu;
pub mod multigrid;
pub mod richardson;
pub mod stack;

use crate::operator::BlockOperator;
use crate::sparse::CsrMatrix;

/// A fixed linear map. Preconditioners implement it with `apply` acting as
/// the approximate inverse.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec(x, y);
    }
}

impl LinearOperator for BlockOperator {
    fn dim(&self) -> usize {
        BlockOperator::dim(self)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        BlockOperator::apply(self, x, y);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for std::sync::Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y);
    }
}

/// The identity, i.e. no preconditioning.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::LinearOperator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Largest relative violation of `P(αa + βb) = αPa + βPb` over `probes`
    /// random pairs.
    pub fn linearity_defect(p: &dyn LinearOperator, probes: usize, seed: u64) -> f64 {
        let n = p.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..probes {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (alpha, beta) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let (mut pa, mut pb, mut pm) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            p.apply(&a, &mut pa);
            p.apply(&b, &mut pb);
            p.apply(&mix, &mut pm);
            let mut num: f64 = 0.0;
            let mut den: f64 = 0.0;
            for i in 0..n {
                let lin = alpha * pa[i] + beta * pb[i];
                num = num.max((pm[i] - lin).abs());
                den = den.max(lin.abs()).max(pm[i].abs());
            }
            worst = worst.max(num / den);
        }
        worst
    }
}
