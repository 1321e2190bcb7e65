//! Monte Carlo validation of the stochastic Galerkin mean.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use sgfs::meshfem::{apply_dirichlet, assemble_load, FemPattern};
use sgfs::solvers::direct::BandedCholesky;
use sgfs::solvers::stack::Variant;

use crate::{BenchError, ExperimentConfig, Problem, Result};

pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub samples: usize,
    pub seed: u64,
    pub mc_mean: f64,
    pub mc_variance: f64,
    pub mc_std_error: f64,
    pub sgm_mean: f64,
    pub sgm_iterations: usize,
    pub sgm_converged: bool,
    /// `(sgm_mean - mc_mean) / mc_std_error`; zero when both agree exactly.
    pub z_score: f64,
}

/// Compares the mode-0 value of the G-M-Fg-I solution at the center node
/// with the sample mean of `samples` deterministic solves driven by the
/// sampled coefficient.
pub fn mc_crosscheck(config: &ExperimentConfig, samples: usize) -> Result<McReport> {
    if samples < MIN_SAMPLES {
        return Err(BenchError::Config(format!(
            "Monte Carlo needs at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let problem = Problem::assemble(config, true)?;
    let (x, stats) = problem.solve(Variant::GMFgI)?;
    let mesh = problem.hierarchy.finest();
    let center = mesh.center_node();
    let sgm_mean = x[center];

    let kl = problem.pce.kl();
    let points = mesh.quadrature_points();
    // c_n at every quadrature point, mode-major
    let scaled: Vec<Vec<f64>> = kl
        .modes
        .iter()
        .map(|m| points.iter().map(|&(px, py)| m.scaled(px, py)).collect())
        .collect();
    let pattern = FemPattern::new(mesh);
    let load = assemble_load(mesh, &|_, _| 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut y = vec![0.0; kl.terms()];
    let mut coeff = vec![0.0; points.len()];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        for yn in y.iter_mut() {
            *yn = StandardNormal.sample(&mut rng);
        }
        for (g, a) in coeff.iter_mut().enumerate() {
            let gamma: f64 = kl.mu + scaled.iter().zip(&y).map(|(c, yn)| c[g] * yn).sum::<f64>();
            *a = kl.a_min + gamma.exp();
        }
        let stiffness = pattern.stiffness_from_qp(&coeff);
        let (a, b) = apply_dirichlet(mesh, &stiffness, &load)?;
        let u = BandedCholesky::factor(&a)?.solve(&b);
        sum += u[center];
        sum_sq += u[center] * u[center];
    }
    let n = samples as f64;
    let mc_mean = sum / n;
    let mc_variance = ((sum_sq - n * mc_mean * mc_mean) / (n - 1.0)).max(0.0);
    let mc_std_error = (mc_variance / n).sqrt();
    let diff = sgm_mean - mc_mean;
    let z_score = if diff == 0.0 { 0.0 } else { diff / mc_std_error };
    Ok(McReport {
        samples,
        seed: config.seed,
        mc_mean,
        mc_variance,
        mc_std_error,
        sgm_mean,
        sgm_iterations: stats.iterations,
        sgm_converged: stats.converged,
        z_score,
    })
}
