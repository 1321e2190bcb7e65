//! Assembling one configuration and running the requested solver stacks.

use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sgfs::chaos::{build_index_set, IndexSet};
use sgfs::meshfem::{build_hierarchy, Hierarchy, MeshLevel};
use sgfs::operator::{assemble_rhs, BlockOperator};
use sgfs::randomfield::{project_coefficient, solve_kl, CoefficientPce, CovarianceSpec, KlField};
use sgfs::solvers::gmres::{GmresOptions, SolveStats};
use sgfs::solvers::ilu::IluOptions;
use sgfs::solvers::stack::{assemble_levels, build_stack, StackOptions, Variant};

use crate::{ExperimentConfig, Result};

/// One assembled stochastic Galerkin problem.
pub struct Problem {
    pub config: ExperimentConfig,
    pub hierarchy: Hierarchy,
    pub basis: IndexSet,
    pub pce: CoefficientPce,
    /// Coarsest first; only the finest level unless multigrid was requested.
    pub levels: Vec<Arc<BlockOperator>>,
    pub rhs: Vec<f64>,
    pub assembly_s: f64,
}

impl Problem {
    pub fn assemble(config: &ExperimentConfig, all_levels: bool) -> Result<Self> {
        config.validate()?;
        let start = Instant::now();
        let hierarchy = build_hierarchy(config.level)?;
        let spec = CovarianceSpec::new(config.sigma, config.corr_len)?;
        let kl_mesh = MeshLevel::new(config.kl_mesh_level())?;
        let kl = KlField::new(config.mu, config.a_min, solve_kl(&spec, &kl_mesh, config.n)?)?;
        let pce = project_coefficient(&kl, &build_index_set(config.n, config.q)?)?;
        let basis = build_index_set(config.n, config.p)?;
        let levels = if all_levels {
            assemble_levels(&pce, &hierarchy, &basis)?
        } else {
            let finest = Hierarchy {
                levels: vec![hierarchy.finest().clone()],
                transfers: Vec::new(),
            };
            assemble_levels(&pce, &finest, &basis)?
        };
        let rhs = assemble_rhs(hierarchy.finest(), basis.len(), &|_, _| 1.0).into_vec();
        Ok(Self {
            config: config.clone(),
            hierarchy,
            basis,
            pce,
            levels,
            rhs,
            assembly_s: start.elapsed().as_secs_f64(),
        })
    }

    pub fn finest(&self) -> &Arc<BlockOperator> {
        self.levels.last().expect("at least one level")
    }

    pub fn gmres_options(&self) -> GmresOptions {
        GmresOptions {
            atol: self.config.atol,
            rtol: self.config.rtol,
            restart: self.config.restart,
            max_iter: self.config.max_iter,
        }
    }

    pub fn solve(&self, variant: Variant) -> Result<(Vec<f64>, SolveStats)> {
        let opts = StackOptions {
            richardson_iters: self.config.richardson_iters,
            ilu: IluOptions {
                shift_on_zero_pivot: self.config.ilu_shift,
            },
        };
        let stack = build_stack(variant, &self.levels, &self.hierarchy, &self.basis, &opts)?;
        let (x, mut stats) = stack.solve(self.finest(), &self.rhs, &self.gmres_options());
        stats.assembly_s = self.assembly_s;
        Ok((x, stats))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub table_id: String,
    pub level: usize,
    pub sigma: f64,
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub variant: String,
    pub iterations: usize,
    pub converged: bool,
    pub true_rel_residual: f64,
    pub precond_residual: f64,
    pub assembly_s: f64,
    pub setup_s: f64,
    pub solve_s: f64,
    pub modes: usize,
    pub unknowns: usize,
    pub mu: f64,
    pub a_min: f64,
    pub corr_len: f64,
    pub kl_level: usize,
    pub atol: f64,
    pub rtol: f64,
    pub restart: usize,
    pub max_iter: usize,
    pub richardson_iters: usize,
    pub ilu_shift: bool,
    /// Setup failure message; empty when the stack was built.
    pub error: String,
    pub timestamp: u64,
    pub version: String,
}

impl ResultRow {
    fn new(table_id: &str, c: &ExperimentConfig, variant: Variant, modes: usize, unknowns: usize) -> Self {
        let timestamp = if c.no_timings {
            0
        } else {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        };
        Self {
            table_id: table_id.to_string(),
            level: c.level,
            sigma: c.sigma,
            p: c.p,
            q: c.q,
            n: c.n,
            variant: variant.name().to_string(),
            iterations: 0,
            converged: false,
            true_rel_residual: f64::NAN,
            precond_residual: f64::NAN,
            assembly_s: 0.0,
            setup_s: 0.0,
            solve_s: 0.0,
            modes,
            unknowns,
            mu: c.mu,
            a_min: c.a_min,
            corr_len: c.corr_len,
            kl_level: c.kl_mesh_level(),
            atol: c.atol,
            rtol: c.rtol,
            restart: c.restart,
            max_iter: c.max_iter,
            richardson_iters: c.richardson_iters,
            ilu_shift: c.ilu_shift,
            error: String::new(),
            timestamp,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Assembles `config` once and runs each requested variant. Solver
/// failures (non-convergence, setup errors) are recorded in the rows.
pub fn run_config(config: &ExperimentConfig, table_id: &str) -> Result<Vec<ResultRow>> {
    if config.variants.is_empty() {
        config.validate()?;
        return Ok(Vec::new());
    }
    let needs_levels = config.variants.iter().any(|v| v.is_multigrid());
    let problem = Problem::assemble(config, needs_levels)?;
    let modes = problem.basis.len();
    let unknowns = problem.finest().dim();
    let mut rows = Vec::with_capacity(config.variants.len());
    for &variant in &config.variants {
        let mut row = ResultRow::new(table_id, config, variant, modes, unknowns);
        match problem.solve(variant) {
            Ok((_, stats)) => {
                row.iterations = stats.iterations;
                row.converged = stats.converged;
                row.true_rel_residual = stats.true_rel_residual;
                row.precond_residual = stats.precond_residual;
                if !config.no_timings {
                    row.assembly_s = stats.assembly_s;
                    row.setup_s = stats.setup_s;
                    row.solve_s = stats.solve_s;
                }
            }
            Err(crate::BenchError::Solver(e)) => row.error = e.to_string(),
            Err(e) => return Err(e),
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn run_single(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_config(config, "single")
}
