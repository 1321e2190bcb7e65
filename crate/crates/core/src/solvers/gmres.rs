//! Restarted GMRES with left preconditioning and modified Gram–Schmidt.

use super::LinearOperator;
use crate::sparse::{axpy, dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub atol: f64,
    pub rtol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-10,
            restart: 30,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Cumulative over restarts.
    pub iterations: usize,
    pub converged: bool,
    pub initial_precond_residual: f64,
    pub precond_residual: f64,
    pub true_rel_residual: f64,
    pub assembly_s: f64,
    pub setup_s: f64,
    pub solve_s: f64,
}

/// Solves `K x = b` from `x = 0`. Converged once
/// `‖P⁻¹(b − K x)‖ ≤ max(atol, rtol·‖P⁻¹ b‖)`, checked on the recomputed
/// residual at the end of every cycle.
pub fn gmres(
    op: &dyn LinearOperator,
    pre: &dyn LinearOperator,
    rhs: &[f64],
    opts: &GmresOptions,
) -> (Vec<f64>, SolveStats) {
    let n = rhs.len();
    let start = std::time::Instant::now();
    let mut x = vec![0.0; n];
    let mut stats = SolveStats::default();
    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    pre.apply(rhs, &mut r);
    let beta0 = norm2(&r);
    stats.initial_precond_residual = beta0;
    let target = opts.atol.max(opts.rtol * beta0);
    let mut beta = beta0;
    let restart = opts.restart.max(1);

    while beta > target && stats.iterations < opts.max_iter {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns after rotation, rotations and rhs of the LSQ
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(restart);
        let mut cs: Vec<(f64, f64)> = Vec::with_capacity(restart);
        let mut g = vec![beta];
        let mut k = 0;
        while k < restart && stats.iterations < opts.max_iter {
            op.apply(&basis[k], &mut tmp);
            let mut w = vec![0.0; n];
            pre.apply(&tmp, &mut w);
            let mut col = Vec::with_capacity(k + 2);
            for v in &basis {
                let hij = dot(&w, v);
                axpy(-hij, v, &mut w);
                col.push(hij);
            }
            let hnext = norm2(&w);
            col.push(hnext);
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (a, b) = (col[i], col[i + 1]);
                col[i] = c * a + s * b;
                col[i + 1] = -s * a + c * b;
            }
            let (a, b) = (col[k], col[k + 1]);
            let rho = a.hypot(b);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, b / rho) };
            col[k] = rho;
            col[k + 1] = 0.0;
            cs.push((c, s));
            let gk = g[k];
            g[k] = c * gk;
            g.push(-s * gk);
            col.truncate(k + 1);
            h.push(col);
            k += 1;
            stats.iterations += 1;
            if g[k].abs() <= target || hnext == 0.0 {
                break;
            }
            w.iter_mut().for_each(|v| *v /= hnext);
            basis.push(w);
        }
        // back substitution on the rotated upper-triangular system
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &basis[j], &mut x);
        }
        op.apply(&x, &mut tmp);
        for (t, b) in tmp.iter_mut().zip(rhs) {
            *t = b - *t;
        }
        pre.apply(&tmp, &mut r);
        beta = norm2(&r);
    }

    stats.converged = beta <= target;
    stats.precond_residual = beta;
    op.apply(&x, &mut tmp);
    let res: f64 = tmp.iter().zip(rhs).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
    let bn = norm2(rhs);
    stats.true_rel_residual = if bn > 0.0 { res / bn } else { res };
    stats.solve_s = start.elapsed().as_secs_f64();
    (x, stats)
}
