use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sgfs_bench::output::write_rows;
use sgfs_bench::tables::DEFAULT_LEVEL_CAP;
use sgfs_bench::{mc_crosscheck, run_single, run_table, ExperimentConfig, OutputFormat, Problem, TableId};

#[derive(Parser)]
#[command(name = "sgfs", version, about = "Stochastic Galerkin lognormal diffusion benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration with the selected preconditioners.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Also run the Monte Carlo cross-check with this many samples.
        #[arg(long)]
        mc_samples: Option<usize>,
        /// Write the finest-level block matrix in MatrixMarket format.
        #[arg(long, value_name = "PATH")]
        export_matrix: Option<PathBuf>,
    },
    /// Run one of the benchmark sweeps (T1..T11).
    Table {
        /// Table id, e.g. T1.
        id: String,
        #[command(flatten)]
        common: CommonArgs,
        /// Drop mesh levels above this one.
        #[arg(long, default_value_t = DEFAULT_LEVEL_CAP)]
        level_cap: usize,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    level: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    p_order: Option<usize>,
    #[arg(long)]
    q_order: Option<usize>,
    #[arg(long)]
    stoch_dim: Option<usize>,
    /// Solver stack (repeatable): g-i, g-f-i, g-m-i, g-m-f-i, g-m-fg-i.
    #[arg(long = "precond", value_name = "VARIANT")]
    precond: Vec<String>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    restart: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    a_min: Option<f64>,
    #[arg(long)]
    corr_len: Option<f64>,
    /// Mesh level for the KL eigenproblem (default: the solve level).
    #[arg(long)]
    kl_level: Option<usize>,
    /// Retry ILU with a small diagonal shift on a zero pivot.
    #[arg(long)]
    ilu_shift: bool,
    /// Report zero for all timings and timestamps.
    #[arg(long)]
    no_timings: bool,
    #[arg(long, value_name = "csv|md|json")]
    format: Option<String>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
        }
        macro_rules! take {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { c.$target = v; })*
            };
        }
        take!(level => level, sigma => sigma, p_order => p, q_order => q, stoch_dim => n,
              atol => atol, rtol => rtol, restart => restart, max_iter => max_iter,
              mu => mu, a_min => a_min, corr_len => corr_len, seed => seed);
        if self.kl_level.is_some() {
            c.kl_level = self.kl_level;
        }
        if !self.precond.is_empty() {
            c.variants = self
                .precond
                .iter()
                .map(|s| sgfs_bench::config::parse_variants(s))
                .collect::<std::result::Result<Vec<_>, _>>()?
                .into_iter()
                .flatten()
                .collect();
        }
        if let Some(f) = &self.format {
            c.format = f.parse::<OutputFormat>()?;
        }
        c.ilu_shift |= self.ilu_shift;
        c.no_timings |= self.no_timings;
        c.validate()?;
        Ok(c)
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve {
            common,
            mc_samples,
            export_matrix,
        } => {
            let config = common.resolve()?;
            if let Some(path) = &export_matrix {
                let problem = Problem::assemble(&config, false)?;
                let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                problem.finest().write_matrix_market(BufWriter::new(file))?;
            }
            let rows = run_single(&config)?;
            let mut out = common.writer()?;
            write_rows(&rows, config.format, &mut out)?;
            if let Some(samples) = mc_samples {
                let report = mc_crosscheck(&config, samples)?;
                eprintln!("{}", serde_json::to_string_pretty(&report)?);
            }
            out.flush()?;
        }
        Command::Table { id, common, level_cap } => {
            let config = common.resolve()?;
            let id: TableId = id.parse()?;
            let rows = run_table(id, &config, level_cap)?;
            let mut out = common.writer()?;
            write_rows(&rows, config.format, &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
