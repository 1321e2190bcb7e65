//! The benchmark sweeps, one per result table.

use std::fmt;
use std::str::FromStr;

use crate::{run_config, BenchError, ExperimentConfig, Result, ResultRow};

/// Default finest level of the table sweeps.
pub const DEFAULT_LEVEL_CAP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableId(u8);

impl TableId {
    pub const COUNT: u8 = 11;

    pub fn new(k: u8) -> Result<Self> {
        if (1..=Self::COUNT).contains(&k) {
            Ok(Self(k))
        } else {
            Err(BenchError::Config(format!("table id must be T1..T{}, got {k}", Self::COUNT)))
        }
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = TableId> {
        (1..=Self::COUNT).map(TableId)
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            1 => "mesh level sweep, sigma=0.08, p=4, q=5, N=2",
            2 => "sigma sweep, p=q=5, N=2",
            3 => "p sweep, sigma=0.08, q=5, N=2",
            4 => "p sweep, sigma=0.8, q=5, N=2",
            5 => "p sweep, sigma=1.4, q=5, N=2",
            6 => "q sweep, sigma=0.08, p=5, N=2",
            7 => "q sweep, sigma=0.8, p=5, N=2",
            8 => "q sweep, sigma=1.4, p=5, N=2",
            9 => "N sweep, sigma=0.08, p=q=3",
            10 => "N sweep, sigma=0.8, p=q=3",
            _ => "N sweep, sigma=1.4, p=q=3",
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

impl FromStr for TableId {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t.strip_prefix(['T', 't']).unwrap_or(t);
        let k = digits
            .parse::<u8>()
            .map_err(|_| BenchError::Config(format!("unknown table id '{s}'")))?;
        Self::new(k)
    }
}

/// Configurations of table `id`. Sweep parameters override `base`; all other
/// settings (tolerances, variants, coefficient parameters) come from `base`.
/// Mesh levels above `level_cap` are dropped.
pub fn table_configs(id: TableId, base: &ExperimentConfig, level_cap: usize) -> Vec<ExperimentConfig> {
    let with = |level: usize, sigma: f64, p: usize, q: usize, n: usize| ExperimentConfig {
        level,
        sigma,
        p,
        q,
        n,
        ..base.clone()
    };
    let level = DEFAULT_LEVEL_CAP.min(level_cap);
    // consecutive tables of a sweep use sigma 0.08, 0.8, 1.4
    let sigma_of = |k: u8| [0.08, 0.8, 1.4][usize::from(k % 3)];
    match id.0 {
        1 => (3..=6).filter(|&l| l <= level_cap).map(|l| with(l, 0.08, 4, 5, 2)).collect(),
        2 => [0.08, 0.1, 0.2, 0.4, 0.8, 1.0, 1.4, 1.6]
            .into_iter()
            .map(|s| with(level, s, 5, 5, 2))
            .collect(),
        3..=5 => (4..=7).map(|p| with(level, sigma_of(id.0), p, 5, 2)).collect(),
        6..=8 => (4..=7).map(|q| with(level, sigma_of(id.0), 5, q, 2)).collect(),
        _ => (2..=4).map(|n| with(level, sigma_of(id.0), 3, 3, n)).collect(),
    }
}

pub fn run_table(id: TableId, base: &ExperimentConfig, level_cap: usize) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for config in table_configs(id, base, level_cap) {
        rows.extend(run_config(&config, &id.to_string())?);
    }
    Ok(rows)
}
