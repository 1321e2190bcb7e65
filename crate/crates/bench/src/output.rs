//! CSV, Markdown and JSON result files.

use std::io::Write;

use crate::{OutputFormat, Result, ResultRow};

pub const CSV_HEADER: &str = "table_id,L,sigma,p,q,N,variant,iterations,converged,true_rel_residual,setup_s,solve_s,\
precond_residual,assembly_s,modes,unknowns,mu,a_min,corr_len,kl_level,atol,rtol,restart,max_iter,\
richardson_iters,ilu_shift,error,timestamp,version";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{:e},{:.6},{:.6},{:e},{:.6},{},{},{},{},{},{},{:e},{:e},{},{},{},{},{},{},{}",
            csv_field(&r.table_id),
            r.level,
            r.sigma,
            r.p,
            r.q,
            r.n,
            r.variant,
            r.iterations,
            r.converged,
            r.true_rel_residual,
            r.setup_s,
            r.solve_s,
            r.precond_residual,
            r.assembly_s,
            r.modes,
            r.unknowns,
            r.mu,
            r.a_min,
            r.corr_len,
            r.kl_level,
            r.atol,
            r.rtol,
            r.restart,
            r.max_iter,
            r.richardson_iters,
            r.ilu_shift,
            csv_field(&r.error),
            r.timestamp,
            r.version
        )?;
    }
    Ok(())
}

/// One line per configuration, one column per variant, entries
/// `solve time [s] (GMRES iterations)`.
pub fn write_markdown<W: Write>(rows: &[ResultRow], mut w: W) -> Result<()> {
    let mut variants: Vec<&str> = Vec::new();
    let mut configs: Vec<(String, usize, f64, usize, usize, usize)> = Vec::new();
    for r in rows {
        if !variants.contains(&r.variant.as_str()) {
            variants.push(&r.variant);
        }
        let key = (r.table_id.clone(), r.level, r.sigma, r.p, r.q, r.n);
        if !configs.contains(&key) {
            configs.push(key);
        }
    }
    write!(w, "| table | L | sigma | p | q | N |")?;
    for v in &variants {
        write!(w, " {v} |")?;
    }
    writeln!(w)?;
    write!(w, "|---|---|---|---|---|---|")?;
    for _ in &variants {
        write!(w, "---|")?;
    }
    writeln!(w)?;
    for key in &configs {
        write!(w, "| {} | {} | {} | {} | {} | {} |", key.0, key.1, key.2, key.3, key.4, key.5)?;
        for v in &variants {
            let cell = rows
                .iter()
                .find(|r| r.variant == *v && (r.table_id.clone(), r.level, r.sigma, r.p, r.q, r.n) == *key)
                .map(|r| {
                    if !r.error.is_empty() {
                        "failed".to_string()
                    } else if r.converged {
                        format!("{:.2} ({})", r.solve_s, r.iterations)
                    } else {
                        format!("{:.2} ({}, not converged)", r.solve_s, r.iterations)
                    }
                })
                .unwrap_or_default();
            write!(w, " {cell} |")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_json<W: Write>(rows: &[ResultRow], mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, rows)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_rows<W: Write>(rows: &[ResultRow], format: OutputFormat, w: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(rows, w),
        OutputFormat::Md => write_markdown(rows, w),
        OutputFormat::Json => write_json(rows, w),
    }
}
