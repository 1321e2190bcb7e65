//! Geometric multigrid V-cycle on block systems.

use std::sync::Arc;

use super::richardson::richardson;
use super::LinearOperator;
use crate::error::{Error, Result};
use crate::meshfem::Transfer;
use crate::operator::BlockOperator;

/// Mode-wise application of a spatial transfer. Restricted residuals and
/// prolongated corrections are zeroed on the Dirichlet nodes.
#[derive(Debug, Clone)]
pub struct BlockTransfer {
    transfer: Transfer,
    modes: usize,
    coarse_boundary: Vec<bool>,
    fine_boundary: Vec<bool>,
}

impl BlockTransfer {
    pub fn new(transfer: Transfer, modes: usize, coarse_boundary: Vec<bool>, fine_boundary: Vec<bool>) -> Result<Self> {
        if transfer.prolongation().ncols() != coarse_boundary.len()
            || transfer.prolongation().nrows() != fine_boundary.len()
        {
            return Err(Error::InvalidArgument(
                "transfer does not match the level boundaries".into(),
            ));
        }
        Ok(Self {
            transfer,
            modes,
            coarse_boundary,
            fine_boundary,
        })
    }

    pub fn restrict(&self, fine: &[f64], coarse: &mut [f64]) {
        let (nf, nc) = (self.fine_boundary.len(), self.coarse_boundary.len());
        for m in 0..self.modes {
            let out = &mut coarse[m * nc..(m + 1) * nc];
            self.transfer.restriction().mul_vec(&fine[m * nf..(m + 1) * nf], out);
            for (v, &b) in out.iter_mut().zip(&self.coarse_boundary) {
                if b {
                    *v = 0.0;
                }
            }
        }
    }

    /// `fine += P coarse`.
    pub fn prolongate_add(&self, coarse: &[f64], fine: &mut [f64]) {
        let (nf, nc) = (self.fine_boundary.len(), self.coarse_boundary.len());
        let mut tmp = vec![0.0; nf];
        for m in 0..self.modes {
            self.transfer.prolongation().mul_vec(&coarse[m * nc..(m + 1) * nc], &mut tmp);
            for ((dst, v), &b) in fine[m * nf..(m + 1) * nf].iter_mut().zip(&tmp).zip(&self.fine_boundary) {
                if !b {
                    *dst += v;
                }
            }
        }
    }
}

pub struct MgLevel {
    pub op: Arc<BlockOperator>,
    pub smoother: Box<dyn LinearOperator>,
}

/// One V-cycle from a zero initial guess with one pre- and one
/// post-smoothing Richardson sweep per level and a direct solve on the
/// coarsest level. With a single level it reduces to one smoother
/// application.
pub struct VCycle {
    // coarsest first
    levels: Vec<MgLevel>,
    transfers: Vec<BlockTransfer>,
    coarse: Option<Box<dyn LinearOperator>>,
}

impl VCycle {
    pub fn new(levels: Vec<MgLevel>, transfers: Vec<BlockTransfer>, coarse: Option<Box<dyn LinearOperator>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("multigrid needs at least one level".into()));
        }
        if transfers.len() + 1 != levels.len() {
            return Err(Error::DimensionMismatch {
                expected: levels.len() - 1,
                got: transfers.len(),
            });
        }
        if levels.len() > 1 && coarse.is_none() {
            return Err(Error::InvalidArgument("multilevel cycle needs a coarse solver".into()));
        }
        Ok(Self {
            levels,
            transfers,
            coarse,
        })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn cycle(&self, l: usize, rhs: &[f64], u: &mut [f64]) {
        if self.levels.len() == 1 {
            richardson(&self.levels[0].op, &self.levels[0].smoother, rhs, 1, u);
            return;
        }
        if l == 0 {
            self.coarse.as_ref().expect("checked at construction").apply(rhs, u);
            return;
        }
        let level = &self.levels[l];
        richardson(&level.op, &level.smoother, rhs, 1, u);
        let mut r = vec![0.0; rhs.len()];
        level.op.apply(u, &mut r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        let nc = self.levels[l - 1].op.dim();
        let mut rc = vec![0.0; nc];
        self.transfers[l - 1].restrict(&r, &mut rc);
        let mut ec = vec![0.0; nc];
        self.cycle(l - 1, &rc, &mut ec);
        self.transfers[l - 1].prolongate_add(&ec, u);
        richardson(&level.op, &level.smoother, rhs, 1, u);
    }
}

impl LinearOperator for VCycle {
    fn dim(&self) -> usize {
        self.levels.last().expect("non-empty").op.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.cycle(self.levels.len() - 1, x, y);
    }
}
