//! Multiplicative field-split preconditioner: block forward substitution
//! over the splits of a layout with approximate diagonal-block solves.

use std::sync::Arc;

use super::ilu::{ilu0, IluOptions};
use super::LinearOperator;
use crate::chaos::SplitLayout;
use crate::error::{Error, Result};
use crate::operator::{extract_diagonal_blocks, BlockOperator};

pub struct FieldSplit {
    op: Arc<BlockOperator>,
    layout: SplitLayout,
    solvers: Vec<Box<dyn LinearOperator>>,
    // modes of all splits after split g
    later: Vec<Vec<usize>>,
}

impl FieldSplit {
    /// ILU(0) of every diagonal block.
    pub fn with_ilu(op: Arc<BlockOperator>, layout: SplitLayout, opts: IluOptions) -> Result<Self> {
        let blocks = extract_diagonal_blocks(&op, &layout)?;
        let solvers = blocks
            .iter()
            .map(|b| ilu0(b, opts).map(|f| Box::new(f) as Box<dyn LinearOperator>))
            .collect::<Result<Vec<_>>>()?;
        Self::with_solvers(op, layout, solvers)
    }

    pub fn with_solvers(
        op: Arc<BlockOperator>,
        layout: SplitLayout,
        solvers: Vec<Box<dyn LinearOperator>>,
    ) -> Result<Self> {
        if layout.modes() != op.modes() {
            return Err(Error::DimensionMismatch {
                expected: op.modes(),
                got: layout.modes(),
            });
        }
        if solvers.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                got: solvers.len(),
            });
        }
        let n = op.spatial_dim();
        for (s, solver) in layout.splits().iter().zip(&solvers) {
            if solver.dim() != s.len() * n {
                return Err(Error::DimensionMismatch {
                    expected: s.len() * n,
                    got: solver.dim(),
                });
            }
        }
        let later = (0..layout.len())
            .map(|g| layout.splits()[g + 1..].iter().flatten().copied().collect())
            .collect();
        Ok(Self {
            op,
            layout,
            solvers,
            later,
        })
    }

    pub fn layout(&self) -> &SplitLayout {
        &self.layout
    }
}

impl LinearOperator for FieldSplit {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.op.spatial_dim();
        let mut work = r.to_vec();
        z.iter_mut().for_each(|v| *v = 0.0);
        let mut local_in = Vec::new();
        let mut local_out = Vec::new();
        for (g, modes) in self.layout.splits().iter().enumerate() {
            local_in.clear();
            for &m in modes {
                local_in.extend_from_slice(&work[m * n..(m + 1) * n]);
            }
            local_out.resize(local_in.len(), 0.0);
            self.solvers[g].apply(&local_in, &mut local_out);
            for (k, &m) in modes.iter().enumerate() {
                z[m * n..(m + 1) * n].copy_from_slice(&local_out[k * n..(k + 1) * n]);
            }
            if !self.later[g].is_empty() {
                self.op.add_coupling(&self.later[g], modes, -1.0, z, &mut work);
            }
        }
    }
}
