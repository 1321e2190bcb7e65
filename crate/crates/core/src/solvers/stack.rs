//! The five preconditioned solver stacks.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use super::direct::DenseLu;
use super::fieldsplit::FieldSplit;
use super::gmres::{gmres, GmresOptions, SolveStats};
use super::ilu::{ilu0, IluOptions};
use super::multigrid::{BlockTransfer, MgLevel, VCycle};
use super::richardson::Richardson;
use super::LinearOperator;
use crate::chaos::{group_fields, triple_tensor, IndexSet, SplitLayout};
use crate::error::{Error, Result};
use crate::meshfem::Hierarchy;
use crate::operator::{assemble_operator, BlockOperator};
use crate::randomfield::CoefficientPce;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// ILU of the whole finest-level matrix.
    GI,
    /// Richardson on a singleton field split.
    GFI,
    /// V-cycle with global ILU smoothing.
    GMI,
    /// V-cycle with singleton field-split smoothing.
    GMFI,
    /// V-cycle with grouped field-split smoothing.
    GMFgI,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::GI, Variant::GFI, Variant::GMI, Variant::GMFI, Variant::GMFgI];

    pub fn name(self) -> &'static str {
        match self {
            Variant::GI => "G-I",
            Variant::GFI => "G-F-I",
            Variant::GMI => "G-M-I",
            Variant::GMFI => "G-M-F-I",
            Variant::GMFgI => "G-M-Fg-I",
        }
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            Variant::GI => "g-i",
            Variant::GFI => "g-f-i",
            Variant::GMI => "g-m-i",
            Variant::GMFI => "g-m-f-i",
            Variant::GMFgI => "g-m-fg-i",
        }
    }

    pub fn is_multigrid(self) -> bool {
        matches!(self, Variant::GMI | Variant::GMFI | Variant::GMFgI)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.cli_name() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown solver variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackOptions {
    /// Inner Richardson sweeps of G-F-I.
    pub richardson_iters: usize,
    pub ilu: IluOptions,
}

impl Default for StackOptions {
    fn default() -> Self {
        Self {
            richardson_iters: 50,
            ilu: IluOptions::default(),
        }
    }
}

/// Block operators on every level of `hierarchy`, coarsest first, all
/// assembled from the same coefficient expansion.
pub fn assemble_levels(
    pce: &CoefficientPce,
    hierarchy: &Hierarchy,
    basis: &IndexSet,
) -> Result<Vec<Arc<BlockOperator>>> {
    let tensor = Arc::new(triple_tensor(basis, pce.data_set())?);
    hierarchy
        .levels
        .iter()
        .map(|mesh| assemble_operator(pce, mesh, tensor.clone()).map(Arc::new))
        .collect()
}

pub struct SolverStack {
    variant: Variant,
    precond: Box<dyn LinearOperator>,
    setup_s: f64,
}

impl SolverStack {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn setup_seconds(&self) -> f64 {
        self.setup_s
    }

    pub fn solve(&self, op: &BlockOperator, rhs: &[f64], opts: &GmresOptions) -> (Vec<f64>, SolveStats) {
        let (x, mut stats) = gmres(op, self, rhs, opts);
        stats.setup_s = self.setup_s;
        (x, stats)
    }
}

impl LinearOperator for SolverStack {
    fn dim(&self) -> usize {
        self.precond.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.precond.apply(x, y);
    }
}

/// Builds the preconditioner of `variant`. `levels` holds the operators
/// coarsest first; the last one is the system being solved. Multigrid
/// variants need one operator per hierarchy level.
pub fn build_stack(
    variant: Variant,
    levels: &[Arc<BlockOperator>],
    hierarchy: &Hierarchy,
    basis: &IndexSet,
    opts: &StackOptions,
) -> Result<SolverStack> {
    let start = Instant::now();
    let finest = levels.last().ok_or(Error::VariantMismatch {
        variant: variant.name(),
        requirement: "at least one assembled level",
    })?;
    if basis.len() != finest.modes() {
        return Err(Error::DimensionMismatch {
            expected: finest.modes(),
            got: basis.len(),
        });
    }
    if variant.is_multigrid() && levels.len() != hierarchy.levels.len() {
        return Err(Error::VariantMismatch {
            variant: variant.name(),
            requirement: "one assembled operator per hierarchy level",
        });
    }
    let singletons = || SplitLayout::singletons(basis.len());
    let precond: Box<dyn LinearOperator> = match variant {
        Variant::GI => Box::new(ilu0(finest.explicit(), opts.ilu)?),
        Variant::GFI => {
            let fs = FieldSplit::with_ilu(finest.clone(), singletons(), opts.ilu)?;
            Box::new(Richardson::new(finest.clone(), fs, opts.richardson_iters))
        }
        Variant::GMI | Variant::GMFI | Variant::GMFgI => {
            let smoother = |op: &Arc<BlockOperator>| -> Result<Box<dyn LinearOperator>> {
                Ok(match variant {
                    Variant::GMI => Box::new(ilu0(op.explicit(), opts.ilu)?),
                    Variant::GMFI => Box::new(FieldSplit::with_ilu(op.clone(), singletons(), opts.ilu)?),
                    _ => Box::new(FieldSplit::with_ilu(op.clone(), group_fields(basis), opts.ilu)?),
                })
            };
            let mg_levels = levels
                .iter()
                .map(|op| {
                    Ok(MgLevel {
                        op: op.clone(),
                        smoother: smoother(op)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let transfers = hierarchy
                .transfers
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    BlockTransfer::new(
                        t.clone(),
                        basis.len(),
                        hierarchy.levels[k].boundary().to_vec(),
                        hierarchy.levels[k + 1].boundary().to_vec(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let coarse = if levels.len() > 1 {
                Some(Box::new(DenseLu::factor(levels[0].explicit())?) as Box<dyn LinearOperator>)
            } else {
                None
            };
            Box::new(VCycle::new(mg_levels, transfers, coarse)?)
        }
    };
    Ok(SolverStack {
        variant,
        precond,
        setup_s: start.elapsed().as_secs_f64(),
    })
}
